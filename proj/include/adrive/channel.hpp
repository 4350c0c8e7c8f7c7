#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "adrive/rng.hpp"
#include "adrive/wire.hpp"

namespace adrive {

enum class LossModel {
  Bernoulli,      // distance-independent per-link probability
  DistanceRamp,   // 0 up to ramp_start_m, linear to loss_p at range_m
};

struct ChannelParams {
  double range_m = 400.0;
  double rate_hz = 10.0;
  LossModel model = LossModel::Bernoulli;
  double loss_p = 0.0;
  double ramp_start_m = 250.0;
  std::uint64_t seed = 0;
};

// Simulated broadcast medium. Loss draws are stateless hashes of
// (seed, sender, receiver, beacon tick), so delivery is reproducible and
// independent of query order; beacons sent at a tick are readable the same
// tick (no propagation delay).
class Channel {
 public:
  Channel() = default;
  explicit Channel(ChannelParams params) : params_(params) {}

  const ChannelParams& params() const { return params_; }

  static constexpr int kExpiryIntervals = 3;

  // Record one sender's beacon for beacon tick `tick`.
  void post(const Beacon& beacon, std::optional<double> sender_loss_override, int tick);

  // Per-link loss probability at the given distance, honoring per-vehicle
  // overrides (the larger override wins).
  double link_loss(double distance_m, std::optional<double> sender_override,
                   std::optional<double> receiver_override) const;

  bool link_delivered(std::uint32_t sender, std::uint32_t receiver, int tick,
                      double distance_m, std::optional<double> sender_override,
                      std::optional<double> receiver_override) const;

  // Latest beacon of `sender` delivered to `receiver`, no older than the
  // expiry window relative to `now_tick`; nullopt when the sender is silent.
  std::optional<Beacon> latest(std::uint32_t receiver, Vec2 receiver_pos,
                               std::optional<double> receiver_override,
                               std::uint32_t sender, int now_tick) const;

  struct RadioNode {
    std::uint32_t id = 0;
    Vec2 pos{};
    bool connected = true;
    std::optional<double> loss_override;
  };

  // One synchronous broadcast round: every connected node emits, every other
  // connected node in range receives unless the link draw drops it.
  std::map<std::uint32_t, std::set<std::uint32_t>> broadcast_step(
      const std::vector<RadioNode>& nodes, int tick) const;

  void forget(std::uint32_t sender) { rings_.erase(sender); }
  void clear() { rings_.clear(); }

 private:
  struct Posted {
    Beacon beacon;
    std::optional<double> loss_override;
    int tick = -1;
  };
  struct Ring {
    std::array<Posted, kExpiryIntervals + 1> slots{};
    int count = 0;
  };

  ChannelParams params_;
  std::unordered_map<std::uint32_t, Ring> rings_;
};

}  // namespace adrive
