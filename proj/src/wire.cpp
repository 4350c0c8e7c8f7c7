#include "adrive/wire.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace adrive {

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

void put_f64(std::uint8_t* p, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(bits >> (8 * i));
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

void check_finite(double v, const char* field) {
  if (!std::isfinite(v)) throw std::range_error(std::string(field) + " not finite");
}

}  // namespace

BeaconFrame encode(const Beacon& b) {
  check_finite(b.timestamp, "timestamp");
  check_finite(b.heading, "heading");
  check_finite(b.chi, "chi");
  check_finite(b.r, "r");
  check_finite(b.position.x, "position.x");
  check_finite(b.position.y, "position.y");
  if (std::fabs(b.position.x) >= 1e6 || std::fabs(b.position.y) >= 1e6)
    throw std::range_error("position outside encodable range");
  if (!std::isfinite(b.velocity) || std::fabs(b.velocity) >= 100.0)
    throw std::range_error("velocity outside encodable range");

  BeaconFrame f{};
  put_u32(&f[0], b.sender_id);
  put_f64(&f[4], b.timestamp);
  put_f64(&f[12], b.position.x);
  put_f64(&f[20], b.position.y);
  put_f64(&f[28], b.heading);
  put_f64(&f[36], b.velocity);
  f[44] = static_cast<std::uint8_t>(b.state);
  f[45] = b.rho ? 1 : 0;
  put_f64(&f[46], b.chi);
  put_f64(&f[54], b.r);
  f[62] = b.hv_flag ? 1 : 0;
  return f;
}

Beacon decode(std::span<const std::uint8_t> frame) {
  if (frame.size() != kBeaconFrameSize) throw std::range_error("bad frame length");
  Beacon b;
  b.sender_id = get_u32(&frame[0]);
  b.timestamp = get_f64(&frame[4]);
  b.position.x = get_f64(&frame[12]);
  b.position.y = get_f64(&frame[20]);
  b.heading = get_f64(&frame[28]);
  b.velocity = get_f64(&frame[36]);
  if (frame[44] > 5) throw std::range_error("bad vehicle state byte");
  if (frame[45] > 1 || frame[62] > 1) throw std::range_error("bad flag byte");
  b.state = static_cast<VehicleState>(frame[44]);
  b.rho = frame[45] != 0;
  b.chi = get_f64(&frame[46]);
  b.r = get_f64(&frame[54]);
  b.hv_flag = frame[62] != 0;
  return b;
}

std::string to_hex(const BeaconFrame& frame) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(frame.size() * 2);
  for (std::uint8_t byte : frame) {
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

}  // namespace adrive
