#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "adrive/fsm.hpp"
#include "adrive/geometry.hpp"

namespace adrive {

// One safety beacon: BSM basics (sender, time, position, heading, velocity)
// plus the advanced payload (state, rho, chi, R, HV flag).
struct Beacon {
  std::uint32_t sender_id = 0;
  double timestamp = 0.0;
  Vec2 position{};
  double heading = 0.0;
  double velocity = 0.0;
  VehicleState state = VehicleState::NotAroundIntersection;
  bool rho = false;
  double chi = 0.0;
  double r = 0.0;
  bool hv_flag = false;

  friend bool operator==(const Beacon&, const Beacon&) = default;
};

// Fixed-width little-endian frame. Layout (byte offsets):
//   0  u32  sender_id
//   4  f64  timestamp
//   12 f64  position.x
//   20 f64  position.y
//   28 f64  heading
//   36 f64  velocity
//   44 u8   state
//   45 u8   rho
//   46 f64  chi
//   54 f64  r
//   62 u8   hv_flag
inline constexpr std::size_t kBeaconFrameSize = 63;

using BeaconFrame = std::array<std::uint8_t, kBeaconFrameSize>;

// Throws std::range_error when a field is outside its encodable range
// (|x|,|y| < 1e6 m, |velocity| < 100 m/s, finite payload values).
BeaconFrame encode(const Beacon& b);

// Throws std::range_error on a malformed frame.
Beacon decode(std::span<const std::uint8_t> frame);

std::string to_hex(const BeaconFrame& frame);

}  // namespace adrive
