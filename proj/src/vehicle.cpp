#include "adrive/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adrive {

const char* to_string(VehicleKind k) {
  switch (k) {
    case VehicleKind::ConnectedAutomated: return "cav";
    case VehicleKind::NonConnectedAutomated: return "ncav";
    case VehicleKind::HumanDriven: return "human";
  }
  return "?";
}

double believed_position(const Vehicle& v, const RoadScene& scene) {
  const double len = scene.paths()[v.path].length;
  return std::clamp(v.s + v.failure.localization_offset_m, 0.0, len);
}

bool believed_localization_state(const Vehicle& v, const RoadScene& scene, int section) {
  const PoseSample pose = scene.locate(v.path, believed_position(v, scene));
  return scene.in_section(section, pose.point);
}

void step_kinematics(Vehicle& v, const RoadScene& scene, const MotionCommand& cmd,
                     double dt, const KinematicsParams& kp) {
  if (dt <= 0.0) throw std::domain_error("dt must be positive");
  const double path_len = scene.paths()[v.path].length;
  if (v.s < 0.0 || v.s > path_len)
    throw std::domain_error("vehicle off its path extent");
  const double dv = kp.accel_limit * dt;

  switch (cmd.kind) {
    case MotionCommand::Kind::Hold:
      v.v = 0.0;
      return;
    case MotionCommand::Kind::Proceed: {
      double stop_at = cmd.barrier_s;
      if (cmd.barrier_is_stop_line) stop_at += v.failure.overshoot_m;
      stop_at = std::min(stop_at, path_len);
      const double room = stop_at - v.s;
      if (room <= 0.0) {
        v.v = 0.0;  // barrier already at or behind us: stand still
        return;
      }
      // speed admissible by the braking envelope toward the stop point
      const double brake_v = std::sqrt(2.0 * kp.accel_limit * room);
      const double want = std::min(cmd.target_speed, brake_v);
      v.v = std::clamp(want, v.v - dv, v.v + dv);
      v.s += v.v * dt;
      if (v.s >= stop_at) {
        v.s = stop_at;
        v.v = 0.0;
      }
      return;
    }
    case MotionCommand::Kind::Recede: {
      const double floor_s = std::max(cmd.barrier_s, v.length / 2.0);
      if (v.s <= floor_s) {
        v.s = std::max(v.s, 0.0);
        v.v = 0.0;
        return;
      }
      // Envelope toward the floor so a rising floor (follower creeping up)
      // never meets us at full backing speed.
      const double brake_v = std::sqrt(2.0 * kp.accel_limit * (v.s - floor_s));
      const double want = -std::min(std::fabs(cmd.target_speed), brake_v);
      v.v = std::clamp(want, v.v - dv, v.v + dv);
      v.s += v.v * dt;
      if (v.s <= floor_s) {
        v.s = floor_s;
        v.v = 0.0;
      }
      return;
    }
  }
}

}  // namespace adrive
