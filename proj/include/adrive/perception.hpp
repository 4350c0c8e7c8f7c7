#pragma once

#include <span>
#include <vector>

#include "adrive/channel.hpp"
#include "adrive/vehicle.hpp"

namespace adrive {

enum class MotionClass { Stopped, Advancing, Receding };

inline MotionClass classify_motion(double path_speed) {
  if (std::fabs(path_speed) < 0.1) return MotionClass::Stopped;
  return path_speed > 0.0 ? MotionClass::Advancing : MotionClass::Receding;
}

struct PerceivedVehicle {
  int target_id = -1;  // ground truth, simulator bookkeeping only
  Vec2 position{};
  Vec2 relative_position{};
  double speed = 0.0;  // signed path speed as observed
  MotionClass motion_class = MotionClass::Stopped;
  bool connected_believed = false;
};

// Ideal noiseless sensor: every other vehicle within range is returned with
// ground-truth kinematics; occlusion is not modeled.
std::vector<PerceivedVehicle> sense(const Vehicle& self, const RoadScene& scene,
                                    std::span<const Vehicle* const> all,
                                    double sensor_range_m);

// Wide enough that ordinary localization drift in a broadcast position does
// not make a connected vehicle look like an unannounced one.
inline constexpr double kAssociationGateM = 5.0;

// Marks each perceived vehicle as connected iff a non-expired beacon in the
// table position-matches it within the association gate.
void classify_connected(std::vector<PerceivedVehicle>& perceived,
                        const std::vector<Beacon>& beacon_table,
                        double gate_m = kAssociationGateM);

// G: is any vehicle behind the subject on the same path within sensor range?
bool follower_presence(const Vehicle& self, std::span<const Vehicle* const> all,
                       double sensor_range_m);

// Fresh beacons (within the channel expiry window) visible to `receiver`.
std::vector<Beacon> collect_beacons(const Channel& channel, std::uint32_t receiver,
                                    Vec2 receiver_pos,
                                    std::optional<double> receiver_loss_override,
                                    std::span<const std::uint32_t> senders,
                                    int now_tick);

}  // namespace adrive
