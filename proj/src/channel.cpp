#include "adrive/channel.hpp"

#include <algorithm>

namespace adrive {

void Channel::post(const Beacon& beacon, std::optional<double> sender_loss_override, int tick) {
  Ring& ring = rings_[beacon.sender_id];
  Posted& slot = ring.slots[static_cast<std::size_t>(tick) % ring.slots.size()];
  slot.beacon = beacon;
  slot.loss_override = sender_loss_override;
  slot.tick = tick;
  ring.count = std::min<int>(ring.count + 1, static_cast<int>(ring.slots.size()));
}

double Channel::link_loss(double distance_m, std::optional<double> sender_override,
                          std::optional<double> receiver_override) const {
  double p;
  switch (params_.model) {
    case LossModel::Bernoulli:
      p = params_.loss_p;
      break;
    case LossModel::DistanceRamp:
      if (distance_m <= params_.ramp_start_m) {
        p = 0.0;
      } else {
        const double span = params_.range_m - params_.ramp_start_m;
        p = params_.loss_p * std::clamp((distance_m - params_.ramp_start_m) / span, 0.0, 1.0);
      }
      break;
    default:
      p = 0.0;
  }
  if (sender_override) p = std::max(p, *sender_override);
  if (receiver_override) p = std::max(p, *receiver_override);
  return std::clamp(p, 0.0, 1.0);
}

bool Channel::link_delivered(std::uint32_t sender, std::uint32_t receiver, int tick,
                             double distance_m, std::optional<double> sender_override,
                             std::optional<double> receiver_override) const {
  if (distance_m > params_.range_m) return false;
  const double p = link_loss(distance_m, sender_override, receiver_override);
  if (p <= 0.0) return true;
  if (p >= 1.0) return false;
  return hashed_uniform(params_.seed, sender, receiver, static_cast<std::uint64_t>(tick)) >= p;
}

std::optional<Beacon> Channel::latest(std::uint32_t receiver, Vec2 receiver_pos,
                                      std::optional<double> receiver_override,
                                      std::uint32_t sender, int now_tick) const {
  auto it = rings_.find(sender);
  if (it == rings_.end()) return std::nullopt;
  const Ring& ring = it->second;
  for (int age = 0; age <= kExpiryIntervals; ++age) {
    const int tick = now_tick - age;
    if (tick < 0) break;
    const Posted& slot = ring.slots[static_cast<std::size_t>(tick) % ring.slots.size()];
    if (slot.tick != tick) continue;
    const double d = dist(slot.beacon.position, receiver_pos);
    if (link_delivered(sender, receiver, tick, d, slot.loss_override, receiver_override))
      return slot.beacon;
  }
  return std::nullopt;
}

std::map<std::uint32_t, std::set<std::uint32_t>> Channel::broadcast_step(
    const std::vector<RadioNode>& nodes, int tick) const {
  std::map<std::uint32_t, std::set<std::uint32_t>> delivered;
  for (const auto& tx : nodes) {
    if (!tx.connected) continue;
    auto& receivers = delivered[tx.id];
    for (const auto& rx : nodes) {
      if (!rx.connected || rx.id == tx.id) continue;
      const double d = dist(tx.pos, rx.pos);
      if (link_delivered(tx.id, rx.id, tick, d, tx.loss_override, rx.loss_override))
        receivers.insert(rx.id);
    }
  }
  return delivered;
}

}  // namespace adrive
