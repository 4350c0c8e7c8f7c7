#include "adrive/perception.hpp"

namespace adrive {

std::vector<PerceivedVehicle> sense(const Vehicle& self, const RoadScene& scene,
                                    std::span<const Vehicle* const> all,
                                    double sensor_range_m) {
  std::vector<PerceivedVehicle> out;
  const Vec2 own = scene.locate(self.path, self.s).point;
  for (const Vehicle* other : all) {
    if (other->id == self.id) continue;
    const Vec2 pos = scene.locate(other->path, other->s).point;
    if (dist(pos, own) > sensor_range_m) continue;
    PerceivedVehicle p;
    p.target_id = other->id;
    p.position = pos;
    p.relative_position = pos - own;
    p.speed = other->v;
    p.motion_class = classify_motion(other->v);
    out.push_back(p);
  }
  return out;
}

void classify_connected(std::vector<PerceivedVehicle>& perceived,
                        const std::vector<Beacon>& beacon_table, double gate_m) {
  for (auto& p : perceived) {
    p.connected_believed = false;
    for (const Beacon& b : beacon_table) {
      if (dist(b.position, p.position) <= gate_m) {
        p.connected_believed = true;
        break;
      }
    }
  }
}

bool follower_presence(const Vehicle& self, std::span<const Vehicle* const> all,
                       double sensor_range_m) {
  for (const Vehicle* other : all) {
    if (other->id == self.id || other->path != self.path) continue;
    const double behind = self.s - other->s;
    if (behind > 0.0 && behind <= sensor_range_m) return true;
  }
  return false;
}

std::vector<Beacon> collect_beacons(const Channel& channel, std::uint32_t receiver,
                                    Vec2 receiver_pos,
                                    std::optional<double> receiver_loss_override,
                                    std::span<const std::uint32_t> senders,
                                    int now_tick) {
  std::vector<Beacon> table;
  for (std::uint32_t sender : senders) {
    if (sender == receiver) continue;
    if (auto b = channel.latest(receiver, receiver_pos, receiver_loss_override, sender, now_tick))
      table.push_back(*b);
  }
  return table;
}

}  // namespace adrive
