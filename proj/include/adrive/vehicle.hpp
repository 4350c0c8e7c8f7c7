#pragma once

#include <optional>

#include "adrive/fsm.hpp"
#include "adrive/road.hpp"

namespace adrive {

enum class VehicleKind {
  ConnectedAutomated,
  NonConnectedAutomated,
  HumanDriven,
};

const char* to_string(VehicleKind k);

inline bool is_connected(VehicleKind k) { return k == VehicleKind::ConnectedAutomated; }

// Injectable failures; all-zero means a healthy vehicle.
struct FailureProfile {
  double localization_offset_m = 0.0;  // added to the believed position
  double overshoot_m = 0.0;            // rest distance past a commanded stop line
  std::optional<double> packet_loss_override;  // per-vehicle link loss in [0,1]
};

struct TripRecord {
  int vehicle_id = -1;
  double spawn_t = 0.0;        // scheduled arrival (metrics key)
  double start_point_t = 0.0;  // actually entered the road
  double end_point_t = -1.0;   // -1 while incomplete
  double free_flow_s = 0.0;    // analytic constant-speed reference
  bool completed() const { return end_point_t >= 0.0; }
};

struct Vehicle {
  int id = -1;
  VehicleKind kind = VehicleKind::ConnectedAutomated;
  int path = -1;
  double s = 0.0;       // arc-length position of the vehicle center
  double v = 0.0;       // signed path speed; negative while receding
  double length = 4.5;
  VehicleState state = VehicleState::NotAroundIntersection;
  bool rho = false;     // believed localization state
  double chi = 0.0;     // yielding cost, frozen per deadlock episode
  double tie_break = 0.0;  // R, redrawn per deadlock episode
  bool hv_flag = false;
  FailureProfile failure;
  TripRecord trip;

  double front() const { return s + length / 2.0; }
  double rear() const { return s - length / 2.0; }
};

// What the vehicle believes about being inside the section; under injected
// localization failure this can disagree with ground truth.
bool believed_localization_state(const Vehicle& v, const RoadScene& scene, int section);
double believed_position(const Vehicle& v, const RoadScene& scene);

struct MotionCommand {
  enum class Kind { Hold, Proceed, Recede };
  Kind kind = Kind::Hold;
  double target_speed = 0.0;  // Proceed: cruise target; Recede: backing speed
  // Forward do-not-pass point for the vehicle center (Proceed), or the rear
  // limit (Recede). Stops settle overshoot_m past `barrier_s` when
  // `barrier_is_stop_line` is set (control failure); collision barriers are
  // never overshot.
  double barrier_s = 1e18;
  bool barrier_is_stop_line = false;
};

struct KinematicsParams {
  double accel_limit = 3.0;  // m/s^2, symmetric clamp
  double stop_gap = 1.0;     // rest clearance kept before a collision barrier
};

// Advances one tick. Throws std::domain_error if the vehicle starts outside
// its path extent; motion is clamped at the extents otherwise.
void step_kinematics(Vehicle& v, const RoadScene& scene, const MotionCommand& cmd,
                     double dt, const KinematicsParams& kp = {});

}  // namespace adrive
