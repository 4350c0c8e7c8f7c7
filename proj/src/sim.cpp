#include "adrive/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace adrive {

namespace {

constexpr double kMotionGate = 0.1;   // |v| below this counts as stopped
constexpr double kFinishMargin = 20.0;
constexpr double kBlockNearM = 5.0;   // wait-for edge: blocker within this range
constexpr double kFreeClearM = 6.0;   // forward room that counts as "free to move"
constexpr double kSettleS = 0.3;      // HV-flag settle window before V2V ranking
constexpr double kCorridorM = 3.0;    // lateral overlap for cross-path obstacles
constexpr double kChainGapM = 3.0;    // room a chain yielder opens for its leader

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Closest point of `p` on path `path`, returned as (arc length, distance).
std::pair<double, double> project_onto(const Path& path, Vec2 p) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    const Vec2 a = path.waypoints[i - 1];
    const Vec2 b = path.waypoints[i];
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + t * ab;
    const double d = dist(p, q);
    if (d < best_d) {
      best_d = d;
      best_s = path.cum[i - 1] + t * (path.cum[i] - path.cum[i - 1]);
    }
  }
  return {best_s, best_d};
}

}  // namespace

const DeadlockCase::Frozen* DeadlockCase::frozen_of(int vehicle) const {
  for (const auto& f : frozen)
    if (f.id == vehicle) return &f;
  return nullptr;
}

double trip_delay(const TripRecord& record) {
  if (!record.completed()) throw std::invalid_argument("trip not completed");
  return std::max(0.0, (record.end_point_t - record.start_point_t) - record.free_flow_s);
}

std::string RunResult::csv_header() {
  return "protocol,volume,size,seed,avg_delay_s,worst_delay_s,deadlocks,"
         "mean_resolution_s,collisions";
}

std::string RunResult::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%g,%g,%llu,%.3f,%.3f,%d,%.3f,%d",
                protocol.c_str(), volume_vph, size_m,
                static_cast<unsigned long long>(seed), avg_delay_s, worst_delay_s,
                deadlocks, mean_resolution_s, collisions);
  return buf;
}

// ---------------------------------------------------------------------------

Simulation::Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  scene_ = cfg_.build_scene();
  ChannelParams cp = cfg_.channel;
  if (cp.seed == 0) cp.seed = hash_combine(cfg_.seed, 0x5eedULL);
  channel_ = Channel(cp);
  master_ = Rng(cfg_.seed);
  ticks_per_beacon_ =
      static_cast<int>(std::lround(1.0 / (cfg_.channel.rate_hz * cfg_.dt)));

  const int npaths = static_cast<int>(scene_.paths().size());
  pending_.resize(npaths);
  by_path_.resize(npaths);
  section_occupants_.resize(scene_.sections().size());
  arrival_rng_.reserve(npaths);
  next_arrival_.resize(npaths, std::numeric_limits<double>::infinity());
  const double mean_gap = cfg_.arrival_vph > 0.0 ? 3600.0 / cfg_.arrival_vph : 0.0;
  for (int p = 0; p < npaths; ++p) {
    arrival_rng_.push_back(master_.child(0x100 + p));
    if (cfg_.arrival_vph > 0.0) next_arrival_[p] = arrival_rng_[p].exponential(mean_gap);
  }

  // Scripted vehicles take the first ids, in listing order.
  for (const auto& s : cfg_.scripted) {
    const int path = scene_.path_index(s.path);
    if (path < 0) throw std::invalid_argument("scripted spawn on unknown path '" + s.path + "'");
    const int id = static_cast<int>(agents_.size());
    Agent a;
    a.veh.id = id;
    a.veh.kind = s.kind;
    a.veh.path = path;
    a.veh.length = cfg_.driver.vehicle_length;
    a.veh.failure = s.failure;
    a.veh.trip.vehicle_id = id;
    a.veh.trip.spawn_t = s.t;
    a.rng = master_.child(0x10000 + static_cast<std::uint64_t>(id));
    agents_.push_back(std::move(a));
    PendingSpawn ps;
    ps.id = id;
    ps.spawn_t = s.t;
    ps.path = path;
    ps.start_s = s.start_s;
    ps.start_v = s.start_v;
    scripted_pending_.push_back(ps);
  }
  std::stable_sort(scripted_pending_.begin(), scripted_pending_.end(),
                   [](const PendingSpawn& a, const PendingSpawn& b) {
                     return a.spawn_t < b.spawn_t;
                   });
}

const Agent* Simulation::agent(int id) const {
  if (id < 0 || id >= static_cast<int>(agents_.size())) return nullptr;
  return &agents_[id];
}

Agent* Simulation::agent_mut(int id) {
  if (id < 0 || id >= static_cast<int>(agents_.size())) return nullptr;
  return &agents_[id];
}

std::vector<const Vehicle*> Simulation::active_vehicles() const {
  std::vector<const Vehicle*> out;
  out.reserve(active_.size());
  for (int id : active_) out.push_back(&agents_[id].veh);
  return out;
}

bool Simulation::idle() const {
  if (!active_.empty() || !scripted_pending_.empty()) return false;
  for (const auto& q : pending_)
    if (!q.empty()) return false;
  return true;
}

double Simulation::finish_line(int path) const {
  const double len = scene_.paths()[path].length;
  const double f = len - kFinishMargin;
  return f > 0.0 ? f : len - 0.1;
}

// ---------------------------------------------------------------------------
// Spawning

void Simulation::draw_arrivals() {
  if (cfg_.arrival_vph <= 0.0) return;
  const double t = now();
  const double mean_gap = 3600.0 / cfg_.arrival_vph;
  for (std::size_t p = 0; p < next_arrival_.size(); ++p) {
    while (next_arrival_[p] <= t && next_arrival_[p] <= cfg_.duration_s) {
      const int id = static_cast<int>(agents_.size());
      Rng r = master_.child(0x10000 + static_cast<std::uint64_t>(id));
      const double u = r.uniform();
      VehicleKind kind = VehicleKind::ConnectedAutomated;
      if (u < cfg_.mix.ncav_fraction) {
        kind = VehicleKind::NonConnectedAutomated;
      } else if (u < cfg_.mix.ncav_fraction + cfg_.mix.human_fraction) {
        kind = VehicleKind::HumanDriven;
      }
      FailureProfile fail;
      if (r.bernoulli(cfg_.failure.overshoot_fraction))
        fail.overshoot_m = cfg_.failure.overshoot_m;
      if (r.bernoulli(cfg_.failure.localization_fraction))
        fail.localization_offset_m = cfg_.failure.localization_offset_m;
      if (r.bernoulli(cfg_.failure.loss_override_fraction))
        fail.packet_loss_override = cfg_.failure.packet_loss_override;

      Agent a;
      a.veh.id = id;
      a.veh.kind = kind;
      a.veh.path = static_cast<int>(p);
      a.veh.length = cfg_.driver.vehicle_length;
      a.veh.failure = fail;
      a.veh.trip.vehicle_id = id;
      a.veh.trip.spawn_t = next_arrival_[p];
      a.rng = r;
      agents_.push_back(std::move(a));

      PendingSpawn ps;
      ps.id = id;
      ps.spawn_t = next_arrival_[p];
      ps.path = static_cast<int>(p);
      pending_[p].push_back(ps);

      next_arrival_[p] += arrival_rng_[p].exponential(mean_gap);
    }
  }
}

void Simulation::activate_spawns() {
  const double t = now();
  bool added = false;
  // Scripted vehicles enter exactly when due, at their configured position.
  while (!scripted_pending_.empty() && scripted_pending_.front().spawn_t <= t) {
    const PendingSpawn ps = scripted_pending_.front();
    scripted_pending_.pop_front();
    Agent& a = agents_[ps.id];
    a.active = true;
    a.veh.s = ps.start_s >= 0.0 ? ps.start_s : a.veh.length / 2.0;
    a.veh.v = ps.start_v >= 0.0 ? ps.start_v : cfg_.driver.cruise_speed;
    a.veh.trip.start_point_t = t;
    a.veh.trip.free_flow_s =
        (finish_line(a.veh.path) - a.veh.s) / cfg_.driver.cruise_speed;
    active_.push_back(ps.id);
    added = true;
    events_.record(t, "spawn", {{"vehicle", ps.id},
                                {"path", scene_.paths()[a.veh.path].id},
                                {"kind", to_string(a.veh.kind)}});
  }
  // Stochastic arrivals defer while the entry stretch is occupied.
  for (std::size_t p = 0; p < pending_.size(); ++p) {
    if (pending_[p].empty() || pending_[p].front().spawn_t > t) continue;
    double tail_rear = 1e18;  // rear of the rearmost vehicle on this path
    if (!by_path_[p].empty())
      tail_rear = agents_[by_path_[p].front()].veh.rear();
    if (tail_rear < cfg_.driver.spawn_clearance_m) continue;
    const PendingSpawn ps = pending_[p].front();
    pending_[p].pop_front();
    Agent& a = agents_[ps.id];
    a.active = true;
    a.veh.s = a.veh.length / 2.0;
    // Enter no faster than the braking envelope toward the queue tail allows.
    const double room = tail_rear - cfg_.driver.stop_gap - a.veh.length;
    a.veh.v = std::min(cfg_.driver.cruise_speed,
                       std::sqrt(std::max(0.0, 2.0 * cfg_.driver.accel_limit * room)));
    a.veh.trip.start_point_t = t;
    a.veh.trip.free_flow_s =
        (finish_line(a.veh.path) - a.veh.s) / cfg_.driver.cruise_speed;
    active_.push_back(ps.id);
    added = true;
  }
  if (added) std::sort(active_.begin(), active_.end());
}

void Simulation::refresh_path_order() {
  for (auto& lst : by_path_) lst.clear();
  near_.clear();
  for (int id : active_) {
    Agent& a = agents_[id];
    by_path_[a.veh.path].push_back(id);
    if (a.veh.state != VehicleState::NotAroundIntersection) near_.push_back(id);
  }
  for (auto& lst : by_path_) {
    std::sort(lst.begin(), lst.end(), [this](int a, int b) {
      const double sa = agents_[a].veh.s, sb = agents_[b].veh.s;
      return sa != sb ? sa < sb : a < b;
    });
    int prev = -1;
    for (int id : lst) {
      agents_[id].follower_id = prev;
      if (prev >= 0) agents_[prev].leader_id = id;
      prev = id;
    }
    if (prev >= 0) agents_[prev].leader_id = -1;
  }
}

bool Simulation::occupying(const Vehicle& v, int section) const {
  const SectionCrossing* c = scene_.crossing(section, v.path);
  return c && v.front() > c->entrance && v.rear() < c->exit;
}

void Simulation::refresh_occupancy() {
  for (auto& lst : section_occupants_) lst.clear();
  for (int id : near_) {
    const Agent& a = agents_[id];
    if (a.pulled_aside) continue;
    for (std::size_t s = 0; s < section_occupants_.size(); ++s)
      if (occupying(a.veh, static_cast<int>(s)))
        section_occupants_[s].push_back(id);
  }
}

void Simulation::compute_push_targets() {
  // Back-pressure: a yielder that must clear the section needs every vehicle
  // queued behind it to make room, however long the chain. Walk each path
  // front-to-back carrying the lowest admissible front position downstream.
  for (const auto& path_ids : by_path_) {
    double front_ceiling = 1e18;
    for (auto it = path_ids.rbegin(); it != path_ids.rend(); ++it) {
      Agent& a = agents_[*it];
      if (a.pulled_aside) {
        a.push_target = 1e18;
        continue;
      }
      const Vehicle& v = a.veh;
      double want = std::min(v.s, front_ceiling - v.length / 2.0);
      if (v.state == VehicleState::Yielding && a.yield_to_clear)
        want = std::min(want, a.yield_floor);
      want = std::max(want, v.length / 2.0);
      a.push_target = want;
      // When this vehicle actually has to move, ask followers for slack
      // beyond the rest gap so the chain opens strictly, not exactly.
      // (At-rest queues sit at exactly stop_gap and must not be disturbed.)
      const double slack = want < v.s - 1e-9 ? 0.2 : 0.0;
      front_ceiling = want - v.length / 2.0 - cfg_.driver.stop_gap - slack;
    }
  }
}

// ---------------------------------------------------------------------------
// Communications

void Simulation::beacon_phase() {
  const int btick = tick_ / ticks_per_beacon_;
  cav_senders_.clear();
  for (int id : active_) {
    Agent& a = agents_[id];
    if (!is_connected(a.veh.kind)) continue;
    cav_senders_.push_back(static_cast<std::uint32_t>(id));
    Vehicle& v = a.veh;
    if (a.case_id < 0) {
      // Outside an episode the payload tracks live belief.
      if (v.state != VehicleState::NotAroundIntersection) {
        const int sec = scene_.first_section(v.path);
        v.rho = sec >= 0 && believed_localization_state(v, scene_, sec);
        CostInputs in;
        in.d_space = scene_.distance_to_evacuation(v.path, believed_position(v, scene_));
        int nf = 0;
        for (int f = a.follower_id; f >= 0; f = agents_[f].follower_id) {
          if (v.s - agents_[f].veh.s > cfg_.driver.sensor_range_m) break;
          ++nf;
        }
        in.n_followers = nf;
        v.chi = yielding_cost_comm(cfg_.cost, in);
      } else {
        v.rho = false;
        v.chi = 0.0;
      }
    }
    const PoseSample pose = scene_.locate(v.path, believed_position(v, scene_));
    Beacon b;
    b.sender_id = static_cast<std::uint32_t>(id);
    b.timestamp = now();
    b.position = pose.point;
    b.heading = pose.heading;
    b.velocity = v.v;
    b.state = v.state;
    b.rho = v.rho;
    b.chi = v.chi;
    b.r = v.tie_break;
    b.hv_flag = v.hv_flag;
    channel_.post(b, v.failure.packet_loss_override, btick);
  }
}

std::vector<Beacon> Simulation::beacon_table_for(const Agent& a) const {
  const int btick = tick_ / ticks_per_beacon_;
  const Vec2 pos = scene_.locate(a.veh.path, a.veh.s).point;
  return collect_beacons(channel_, static_cast<std::uint32_t>(a.veh.id), pos,
                         a.veh.failure.packet_loss_override, cav_senders_, btick);
}

void Simulation::update_hv_flags() {
  for (auto& c : cases_) {
    if (c.resolved()) continue;
    for (int id : c.members) {
      Agent& a = agents_[id];
      if (!a.active || !is_connected(a.veh.kind) || a.veh.hv_flag) continue;
      const std::vector<Beacon> table = beacon_table_for(a);
      const Vec2 own = scene_.locate(a.veh.path, a.veh.s).point;
      bool flag = false;
      for (const Beacon& b : table)
        if (b.hv_flag) flag = true;
      for (int other : c.members) {
        if (flag) break;
        if (other == id) continue;
        const Agent& o = agents_[other];
        if (!o.active) continue;
        const Vec2 opos = scene_.locate(o.veh.path, o.veh.s).point;
        if (dist(own, opos) > cfg_.driver.sensor_range_m) continue;
        bool connected = false;
        for (const Beacon& b : table)
          if (dist(b.position, opos) <= kAssociationGateM) {
            connected = true;
            break;
          }
        if (!connected) flag = true;
      }
      if (flag) {
        a.veh.hv_flag = true;
        events_.record(now(), "hv_flag", {{"vehicle", id}, {"case", c.id}});
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Driving primitives

Simulation::Blocker Simulation::forward_blocker(const Agent& a) const {
  const Vehicle& v = a.veh;
  Blocker best;
  int lid = a.leader_id;
  while (lid >= 0 && agents_[lid].pulled_aside) lid = agents_[lid].leader_id;
  if (lid >= 0) {
    const Vehicle& lv = agents_[lid].veh;
    best.id = lid;
    best.barrier_s = lv.rear() - v.length / 2.0 - cfg_.driver.stop_gap;
    best.closing = lv.v < -kMotionGate;
    best.closing_speed = best.closing ? -lv.v : 0.0;
  }
  // Cross-path occupants of a shared section.
  for (std::size_t sec = 0; sec < section_occupants_.size(); ++sec) {
    if (section_occupants_[sec].empty() ||
        !scene_.crossing(static_cast<int>(sec), v.path))
      continue;
    for (int id : section_occupants_[sec]) {
      const Agent& o = agents_[id];
      if (id == v.id || !scene_.paths_conflict(v.path, o.veh.path)) continue;
      const Vec2 opos = scene_.locate(o.veh.path, o.veh.s).point;
      const auto [s_obs, d] = project_onto(scene_.paths()[v.path], opos);
      if (d > kCorridorM || s_obs <= v.s) continue;
      const double barrier =
          s_obs - (v.length + o.veh.length) / 2.0 - cfg_.driver.stop_gap;
      if (barrier < best.barrier_s) {
        best.id = id;
        best.barrier_s = barrier;
        const PoseSample opose = scene_.locate(o.veh.path, o.veh.s);
        const Vec2 ovel =
            o.veh.v * Vec2{std::cos(opose.heading), std::sin(opose.heading)};
        const PoseSample here = scene_.locate(
            v.path, std::min(s_obs, scene_.paths()[v.path].length));
        const Vec2 dir{std::cos(here.heading), std::sin(here.heading)};
        const double approach = -dot(ovel, dir);
        best.closing = approach > kMotionGate;
        best.closing_speed = best.closing ? approach : 0.0;
      }
    }
  }
  return best;
}

double Simulation::stop_line_barrier(const Agent& a) const {
  const SectionCrossing* c = scene_.first_crossing(a.veh.path);
  if (!c) return 1e18;
  // Center target producing a believed stop exactly at the line.
  return c->stop_line - a.veh.length / 2.0 - a.veh.failure.localization_offset_m;
}

double Simulation::yield_floor_for(const Agent& a) const {
  const Vehicle& v = a.veh;
  const double evac = scene_.evacuation_point(v.path, v.s);
  for (const auto& pp : scene_.passing_places())
    if (pp.path == v.path && pp.in_section_turnout && std::fabs(pp.position - evac) < 1e-6)
      return pp.position;  // park centered in the turnout
  return evac - v.length / 2.0 - cfg_.driver.stop_gap;
}

double Simulation::recede_floor(const Agent& a) const {
  double floor_s = std::max(a.yield_floor, a.veh.length / 2.0);
  int fid = a.follower_id;
  while (fid >= 0 && agents_[fid].pulled_aside) fid = agents_[fid].follower_id;
  if (fid >= 0)
    floor_s = std::max(floor_s, agents_[fid].veh.front() + a.veh.length / 2.0 +
                                    cfg_.driver.stop_gap);
  return floor_s;
}

bool Simulation::entry_allowed(const Agent& a, std::vector<int>* blockers) const {
  const Vehicle& v = a.veh;
  const int sec = scene_.first_section(v.path);
  if (sec < 0) return true;
  const Vec2 own = scene_.locate(v.path, v.s).point;
  const double sensor = cfg_.driver.sensor_range_m;
  bool ok = true;

  // A conflicting occupant inside the section blocks entry while visible.
  for (int id : section_occupants_[sec]) {
    const Agent& o = agents_[id];
    if (id == v.id || !scene_.paths_conflict(v.path, o.veh.path)) continue;
    if (dist(own, scene_.locate(o.veh.path, o.veh.s).point) > sensor) continue;
    ok = false;
    if (blockers) blockers->push_back(id);
  }

  for (int id : near_) {
    const Agent& o = agents_[id];
    if (id == v.id || !scene_.paths_conflict(v.path, o.veh.path)) continue;
    const SectionCrossing* oc = scene_.crossing(sec, o.veh.path);
    if (!oc) continue;

    // An opponent accelerating into the section from close range: let it pass.
    if (o.veh.v > 0.5 && o.veh.front() < oc->entrance &&
        oc->entrance - o.veh.front() <= cfg_.driver.entry_guard_m &&
        dist(own, scene_.locate(o.veh.path, o.veh.s).point) <= sensor) {
      ok = false;
    }

    // Stop-line courtesy: whoever settled at their line first goes first. A
    // vehicle closely tailing a leader already in the section follows it
    // through, until the waiting opposer has sat out the platoon window —
    // that cap alternates the right of way between directions under load.
    // The fcfs_tie failure mode makes everyone defer to everyone.
    if (o.veh.state != VehicleState::Wait) continue;
    if (o.veh.front() < oc->stop_line - 3.0) continue;
    if (dist(own, scene_.locate(o.veh.path, o.veh.s).point) > sensor) continue;
    // Seniority is the first line arrival since last crossing: a vehicle
    // ordered back out of the section keeps its place in the pecking order,
    // so a recovery episode cannot push the same loser to the back forever.
    const double o_sen = o.queue_since >= 0.0 ? o.queue_since : o.stop_arrival_t;
    const double a_sen = a.queue_since >= 0.0 ? a.queue_since : a.stop_arrival_t;
    bool defer;
    if (cfg_.driver.fcfs_tie) {
      defer = true;
    } else if (platoon_follow(a) &&
               (o_sen < 0.0 || now() - o_sen < platoon_window(v.path))) {
      defer = false;
    } else if (v.state != VehicleState::Wait) {
      defer = true;
    } else if (o_sen != a_sen) {
      defer = o_sen < a_sen;
    } else {
      defer = id < v.id;
    }
    if (defer) {
      ok = false;
      if (blockers) blockers->push_back(id);
    }
  }

  // V2V augments line of sight at the entry decision: a connected vehicle
  // running the cooperative protocol also treats a beacon whose sender
  // reports itself inside the section — or charging its entrance — as a
  // blocker, even when the sender is beyond sensor range. The baseline has
  // no radio and keeps entering on sight alone.
  if (cfg_.protocol == Protocol::ADrive && is_connected(v.kind)) {
    for (const Beacon& b : beacon_table_for(a)) {
      const int oid = static_cast<int>(b.sender_id);
      if (oid == v.id) continue;
      // Within sensor range the sensed picture is authoritative; a broadcast
      // position carries the sender's localization error, so acting on it
      // there only adds phantom blockers. Beacons extend the check to the
      // part of the section the sensors cannot reach.
      if (dist(b.position, scene_.locate(v.path, v.s).point) <=
          cfg_.driver.sensor_range_m)
        continue;
      for (std::size_t q = 0; q < scene_.paths().size(); ++q) {
        const int qp = static_cast<int>(q);
        if (qp == v.path || !scene_.paths_conflict(v.path, qp)) continue;
        const SectionCrossing* qc = scene_.crossing(sec, qp);
        if (!qc) continue;
        const auto [sq, dq] = project_onto(scene_.paths()[qp], b.position);
        if (dq > kCorridorM) continue;
        // The projection alone cannot tell the directions apart inside the
        // section; the broadcast heading does.
        const PoseSample ps = scene_.locate(qp, sq);
        if (std::cos(ps.heading - b.heading) < 0.5) continue;
        const double front = sq + cfg_.driver.vehicle_length / 2.0;
        const double rear = sq - cfg_.driver.vehicle_length / 2.0;
        const bool inside = front > qc->entrance && rear < qc->exit;
        if (inside) {
          ok = false;
          if (blockers) blockers->push_back(oid);
        }
      }
    }
  }

  if (v.state == VehicleState::Wait && now() < a.holdoff_until) {
    // The pause models stopping, checking the section, and committing. A
    // connected vehicle running the cooperative protocol can verify an empty,
    // unclaimed track from its beacon table and commit after a shortened
    // check; any sign of contention — an occupant, a granted winner, a
    // charger — restores the full drawn pause.
    const double full = a.holdoff_until - a.stop_arrival_t;
    const double quick_until =
        a.stop_arrival_t + cfg_.driver.holdoff_min_s +
        0.3 * (full - cfg_.driver.holdoff_min_s);
    const bool quick = cfg_.protocol == Protocol::ADrive &&
                       is_connected(v.kind) && ok && now() >= quick_until &&
                       quick_entry_ok(a);
    if (!quick) ok = false;
  }
  return ok;
}

bool Simulation::quick_entry_ok(const Agent& a) const {
  if (!entry_clear_of(a)) return false;
  const SectionCrossing* c = scene_.first_crossing(a.veh.path);
  if (!c) return true;
  const int sec = scene_.first_section(a.veh.path);
  // Gap acceptance: the shortened commit is only safe when the vehicle can
  // clear the section before any approaching rival reaches its entrance.
  // Stopped rivals are excluded — the stop-line etiquette arbitrates those.
  const double d = c->exit + a.veh.length - a.veh.s;
  // Time to clear from (near) rest: accelerate to cruise, then hold it.
  const double v0 = std::max(a.veh.v, 0.0);
  const double vc = cfg_.driver.cruise_speed;
  const double acc = cfg_.driver.accel_limit;
  const double d_acc = (vc * vc - v0 * v0) / (2.0 * acc);
  const double transit =
      1.0 + (d < d_acc ? (std::sqrt(v0 * v0 + 2.0 * acc * d) - v0) / acc
                       : (vc - v0) / acc + (d - d_acc) / vc);
  for (int id : near_) {
    const Agent& o = agents_[id];
    if (id == a.veh.id || !scene_.paths_conflict(a.veh.path, o.veh.path)) continue;
    const SectionCrossing* oc = scene_.crossing(sec, o.veh.path);
    if (!oc || o.veh.front() >= oc->entrance) continue;
    if (o.veh.v <= kMotionGate) continue;
    const double eta = (oc->entrance - o.veh.front()) / std::max(o.veh.v, 1.0);
    if (eta < transit) return false;
  }
  return true;
}

double Simulation::platoon_window(int path) const {
  const SectionCrossing* c = scene_.first_crossing(path);
  if (!c) return cfg_.driver.platoon_window_s;
  // Handing the track to the other direction wastes a full transit before
  // anyone can enter again, so the run a platoon is allowed scales with the
  // transit; short sections keep the configured floor.
  const double transit = (c->exit - c->entrance) / cfg_.driver.cruise_speed;
  return cfg_.driver.platoon_window_s + 4.0 * transit;
}

double Simulation::holdoff_draw(Agent& a) const {
  return a.rng.uniform(cfg_.driver.holdoff_min_s, cfg_.driver.holdoff_max_s);
}

bool Simulation::platoon_follow(const Agent& a) const {
  int lid = a.leader_id;
  while (lid >= 0 && agents_[lid].pulled_aside) lid = agents_[lid].leader_id;
  if (lid < 0) return false;
  const Vehicle& lv = agents_[lid].veh;
  return lv.state == VehicleState::Crossing && lv.v > -kMotionGate &&
         lv.rear() - a.veh.front() <= cfg_.driver.platoon_gap_m;
}

// ---------------------------------------------------------------------------
// State upkeep

void Simulation::update_position_states(Agent& a) {
  Vehicle& v = a.veh;
  const SectionCrossing* c = scene_.first_crossing(v.path);
  if (!c) return;
  const double bs = believed_position(v, scene_);
  const double bfront = bs + v.length / 2.0;
  const double brear = bs - v.length / 2.0;
  auto fire = [&](FsmEvent e) {
    v.state = transition(v.state, e);
    events_.record(now(), "state",
                   {{"vehicle", v.id}, {"to", to_string(v.state)}, {"on", to_string(e)}});
  };
  switch (v.state) {
    case VehicleState::NotAroundIntersection:
      if (bfront >= c->stop_line - scene_.approach_zone_m && brear <= c->exit)
        fire(FsmEvent::EnterApproachZone);
      break;
    case VehicleState::Approach:
      if (bfront > c->entrance + 0.01) {
        fire(FsmEvent::EnterSection);
        a.hold_short = false;
      } else if (std::fabs(v.v) < kMotionGate && bfront >= c->stop_line - 1.5) {
        fire(FsmEvent::ArriveStopLine);
        a.stop_arrival_t = now();
        if (a.queue_since < 0.0) a.queue_since = now();
        a.holdoff_until = now() + holdoff_draw(a);
      }
      break;
    case VehicleState::Wait:
      if (bfront > c->entrance + 0.01) {
        fire(FsmEvent::EnterSection);
        a.hold_short = false;
      }
      break;
    case VehicleState::Crossing:
      if (brear > c->exit) {
        fire(FsmEvent::ExitSection);
        a.may_proceed = false;
        a.queue_since = -1.0;
      }
      break;
    default:
      break;  // InDeadlock / Yielding advance through the protocol engine
  }
}

// ---------------------------------------------------------------------------
// Deadlock detection

void Simulation::build_wait_graph(WaitForGraph& g) const {
  for (int id : near_) {
    const Agent& a = agents_[id];
    const Vehicle& v = a.veh;
    if (a.stationary_s < cfg_.driver.t_wait_detect_s) continue;
    if (v.state == VehicleState::Yielding || v.state == VehicleState::InDeadlock)
      continue;
    // Physical blockage just ahead.
    const Blocker fb = forward_blocker(a);
    if (fb.id >= 0 && fb.barrier_s - v.s <= kBlockNearM) g.add_edge(id, fb.id);
    // Contention: a Wait vehicle denied entry waits for whoever denies it.
    if (v.state == VehicleState::Wait) {
      std::vector<int> blockers;
      entry_allowed(a, &blockers);
      for (int b : blockers) g.add_edge(id, b);
    }
  }
}

bool Simulation::in_open_case(int id) const { return agents_[id].case_id >= 0; }

void Simulation::detect_cases() {
  bool any = false;
  for (int id : near_)
    if (agents_[id].stationary_s >= cfg_.driver.t_wait_detect_s && !in_open_case(id)) {
      any = true;
      break;
    }
  if (!any) return;

  WaitForGraph g;
  build_wait_graph(g);
  std::unordered_map<int, double> waits;
  for (int id : g.nodes) waits[id] = agents_[id].stationary_s;
  for (auto& group : detect_deadlock_groups(g, waits, cfg_.driver.t_wait_detect_s)) {
    bool overlaps = false;
    for (int id : group)
      if (in_open_case(id)) overlaps = true;
    if (overlaps) continue;
    std::vector<int> members = expand_with_chain(g, group);
    members.erase(std::remove_if(members.begin(), members.end(),
                                 [this](int id) { return in_open_case(id); }),
                  members.end());
    if (members.size() < 2) continue;

    DeadlockCase c;
    c.id = static_cast<int>(cases_.size());
    c.members = members;
    c.detected_at = now();
    freeze_case(c);
    for (int id : c.members) {
      Agent& a = agents_[id];
      a.case_id = c.id;
      a.role = CaseRole::Holder;
      if (a.veh.state == VehicleState::Wait || a.veh.state == VehicleState::Crossing) {
        a.veh.state = transition(a.veh.state, FsmEvent::DeadlockDetected);
        events_.record(now(), "state",
                       {{"vehicle", id},
                        {"to", to_string(a.veh.state)},
                        {"on", to_string(FsmEvent::DeadlockDetected)}});
      }
    }
    events_.record(now(), "deadlock_detected",
                   {{"case", c.id}, {"members", c.members}, {"bound_s", c.bound_s}});
    cases_.push_back(std::move(c));
    ++open_cases_;
  }
}

void Simulation::freeze_case(DeadlockCase& c) {
  double max_delta = 0.0, max_dspace = 0.0;
  int chain = 0;
  for (int id : c.members) {
    Agent& a = agents_[id];
    Vehicle& v = a.veh;
    const int sec = scene_.first_section(v.path);
    DeadlockCase::Frozen f;
    f.id = id;
    f.rho = sec >= 0 && believed_localization_state(v, scene_, sec);
    f.stationary_s = a.stationary_s;
    CostInputs in;
    in.d_space = scene_.distance_to_evacuation(v.path, believed_position(v, scene_));
    int nf = 0;
    for (int fw = a.follower_id; fw >= 0; fw = agents_[fw].follower_id) {
      if (v.s - agents_[fw].veh.s > cfg_.driver.sensor_range_m) break;
      ++nf;
    }
    in.n_followers = nf;
    in.follower_present = nf > 0;
    f.chi_comm = yielding_cost_comm(cfg_.cost, in);
    f.chi_perception = yielding_cost_perception(cfg_.cost, in);
    f.r = a.rng.uniform();
    if (v.kind == VehicleKind::HumanDriven) {
      f.delta = cfg_.driver.human_patience_s + 2.0 * f.r;
    } else {
      f.delta = threshold_wait(cfg_.cost, f.chi_perception, f.r);
    }
    v.rho = f.rho;
    v.chi = f.chi_comm;
    v.tie_break = f.r;
    v.hv_flag = !is_connected(v.kind);
    a.case_delta = f.delta;
    max_delta = std::max(max_delta, f.delta);
    max_dspace = std::max(max_dspace, in.d_space);
    chain += nf;
    c.frozen.push_back(f);
  }
  double section_len = 0.0;
  for (const auto& sec : scene_.sections())
    section_len = std::max(section_len, sec.length_m);
  const int n = static_cast<int>(c.members.size()) + chain;
  c.bound_s = kSettleS + max_delta +
              (max_dspace + n * (cfg_.driver.vehicle_length + cfg_.driver.stop_gap) +
               5.0) /
                  cfg_.driver.backing_speed +
              (section_len + 20.0) / cfg_.driver.cruise_speed;
}

// ---------------------------------------------------------------------------
// Negotiation and recovery

void Simulation::start_yield_member(DeadlockCase& c, Agent& a, bool to_clear) {
  a.role = CaseRole::Yielder;
  a.yield_to_clear = to_clear;
  a.yield_floor = to_clear ? yield_floor_for(a) : a.veh.length / 2.0;
  if (a.veh.state == VehicleState::InDeadlock) {
    a.veh.state = transition(a.veh.state, FsmEvent::YieldDecided);
  } else {
    a.veh.state = VehicleState::Yielding;  // chained member re-synced directly
  }
  c.yielders.push_back(a.veh.id);
  events_.record(now(), "yield_start",
                 {{"vehicle", a.veh.id}, {"case", c.id}, {"floor", a.yield_floor}});
}

// The winner must be its path's front-most member: on a single-track lane a
// vehicle ahead of the winner can only clear to a spot still in front of it,
// which deadlocks the recovery itself. Returns -1 when no member leads its
// path (the leader is already mid-yield).
int Simulation::case_head(const DeadlockCase& c, int path) const {
  int head = -1;
  for (int id : c.members) {
    const Agent& a = agents_[id];
    if (!a.active || a.veh.path != path) continue;
    if (head < 0 || a.veh.s > agents_[head].veh.s) head = id;
  }
  if (head >= 0 && agents_[head].role == CaseRole::Yielder) return -1;
  return head;
}

std::vector<int> Simulation::case_heads(const DeadlockCase& c) const {
  std::vector<int> heads;
  for (std::size_t p = 0; p < scene_.paths().size(); ++p) {
    const int h = case_head(c, static_cast<int>(p));
    if (h >= 0) heads.push_back(h);
  }
  return heads;
}

void Simulation::decide_v2v(DeadlockCase& c) {
  std::vector<Contender> cs;
  for (int id : case_heads(c)) {
    const DeadlockCase::Frozen* f = c.frozen_of(id);
    if (f) cs.push_back({f->id, f->rho, f->chi_comm, f->r});
  }
  if (cs.empty()) return;
  const std::vector<Contender> ranked = priority_order(std::move(cs));
  const int winner = ranked.front().id;
  c.winner = winner;
  Agent& w = agents_[winner];
  w.role = CaseRole::Winner;
  w.may_proceed = true;

  // First pass: members physically contesting the winner's space back out.
  std::vector<int> clearing;
  for (int id : c.members) {
    if (id == winner) continue;
    Agent& a = agents_[id];
    if (!a.active || a.role == CaseRole::Yielder) continue;
    const SectionCrossing* cr = scene_.first_crossing(a.veh.path);
    const bool inside = cr && a.veh.front() > cr->entrance && a.veh.rear() < cr->exit;
    if (inside && scene_.paths_conflict(a.veh.path, w.veh.path)) {
      start_yield_member(c, a, /*to_clear=*/true);
      clearing.push_back(id);
    }
  }
  // Second pass: queue members stuck behind a clearing vehicle make room.
  for (int id : c.members) {
    if (id == winner) continue;
    Agent& a = agents_[id];
    if (!a.active || a.role == CaseRole::Yielder) continue;
    bool behind_clearing = false;
    for (int y : clearing) {
      const Agent& b = agents_[y];
      if (b.veh.path == a.veh.path && a.veh.s < b.veh.s) behind_clearing = true;
    }
    if (behind_clearing) {
      start_yield_member(c, a, /*to_clear=*/false);
    } else {
      a.role = CaseRole::Holder;
    }
  }
  events_.record(now(), "deadlock_decided",
                 {{"case", c.id}, {"mode", "v2v"}, {"winner", winner},
                  {"yielders", c.yielders}});
}

void Simulation::decide_lane_priority(DeadlockCase& c) {
  // Baseline recovery: the higher-priority lane always keeps the right of
  // way, and anyone on a lower-priority lane inside the section clears it
  // completely — even from just short of the far side.
  int winner = -1;
  int best_pri = 0;
  for (int id : case_heads(c)) {
    const Agent& a = agents_[id];
    const int pri = scene_.paths()[a.veh.path].lane_priority;
    bool better;
    if (winner < 0 || pri > best_pri) {
      better = true;
    } else if (pri == best_pri) {
      const Vehicle& wv = agents_[winner].veh;
      better = a.veh.s > wv.s || (a.veh.s == wv.s && id < winner);
    } else {
      better = false;
    }
    if (better) {
      winner = id;
      best_pri = pri;
    }
  }
  if (winner < 0) return;
  c.winner = winner;
  Agent& w = agents_[winner];
  w.role = CaseRole::Winner;
  w.may_proceed = true;

  std::vector<int> clearing;
  for (int id : c.members) {
    if (id == winner) continue;
    Agent& a = agents_[id];
    if (!a.active || a.role == CaseRole::Yielder) continue;
    const SectionCrossing* cr = scene_.first_crossing(a.veh.path);
    const bool inside = cr && a.veh.front() > cr->entrance && a.veh.rear() < cr->exit;
    if (inside && scene_.paths_conflict(a.veh.path, w.veh.path)) {
      start_yield_member(c, a, /*to_clear=*/true);
      clearing.push_back(id);
    }
  }
  for (int id : c.members) {
    if (id == winner) continue;
    Agent& a = agents_[id];
    if (!a.active || a.role == CaseRole::Yielder) continue;
    bool behind_clearing = false;
    for (int y : clearing) {
      const Agent& b = agents_[y];
      if (b.veh.path == a.veh.path && a.veh.s < b.veh.s) behind_clearing = true;
    }
    if (behind_clearing) {
      start_yield_member(c, a, /*to_clear=*/false);
    } else {
      a.role = CaseRole::Holder;
    }
  }
  events_.record(now(), "deadlock_decided",
                 {{"case", c.id}, {"mode", "lane-priority"}, {"winner", winner},
                  {"yielders", c.yielders}});
}

void Simulation::tick_perception_case(DeadlockCase& c) {
  const double elapsed = now() - c.detected_at;
  for (int id : c.members) {
    Agent& a = agents_[id];
    if (!a.active || a.role == CaseRole::Yielder || a.role == CaseRole::Winner)
      continue;
    const DeadlockCase::Frozen* f = c.frozen_of(id);
    if (!f || elapsed <= f->delta) continue;
    // Threshold exceeded: yield only if an opposing member is stuck and
    // nobody is already backing (no double-yield).
    bool opposing_stopped = false, opposing_receding = false;
    const Vec2 own = scene_.locate(a.veh.path, a.veh.s).point;
    for (int other : c.members) {
      if (other == id) continue;
      const Agent& o = agents_[other];
      if (!o.active || !scene_.paths_conflict(a.veh.path, o.veh.path)) continue;
      if (dist(own, scene_.locate(o.veh.path, o.veh.s).point) >
          cfg_.driver.sensor_range_m)
        continue;
      const MotionClass mc = classify_motion(o.veh.v);
      if (mc == MotionClass::Receding) opposing_receding = true;
      if (mc == MotionClass::Stopped) opposing_stopped = true;
    }
    if (opposing_receding || !opposing_stopped) continue;
    start_yield_member(c, a, /*to_clear=*/true);
  }
}

bool Simulation::entry_clear_of(const Agent& m) const {
  const SectionCrossing* mc = scene_.first_crossing(m.veh.path);
  if (!mc || m.veh.front() >= mc->entrance) return true;
  const int sec = scene_.first_section(m.veh.path);
  for (int id : section_occupants_[sec]) {
    const Agent& o = agents_[id];
    if (id == m.veh.id || !scene_.paths_conflict(m.veh.path, o.veh.path)) continue;
    if (o.veh.state == VehicleState::Yielding || o.veh.v < -kMotionGate) continue;
    return false;
  }
  // Not clear either while a conflicting vehicle is rolling up to its
  // entrance or holds an unexpired crossing grant: advancing now would plant
  // the (possibly drift-corrupted) believed stop position in its way.
  for (int id : near_) {
    const Agent& o = agents_[id];
    if (id == m.veh.id || !scene_.paths_conflict(m.veh.path, o.veh.path)) continue;
    const SectionCrossing* oc = scene_.crossing(sec, o.veh.path);
    if (!oc || o.veh.front() >= oc->entrance) continue;
    if (o.may_proceed) return false;
    if (o.veh.v > 0.5 && oc->entrance - o.veh.front() <= cfg_.driver.entry_guard_m)
      return false;
  }
  return true;
}

void Simulation::check_resolution(DeadlockCase& c) {
  auto free_to_move = [&](const Agent& m) {
    const Blocker fb = forward_blocker(m);
    return fb.barrier_s - m.veh.s > kFreeClearM && entry_clear_of(m);
  };

  if (c.winner >= 0) {
    const Agent& w = agents_[c.winner];
    if (!w.active || free_to_move(w) ||
        w.veh.state == VehicleState::NotAroundIntersection)
      resolve_case(c, c.winner);
    return;
  }
  for (int id : c.members) {
    const Agent& m = agents_[id];
    if (!m.active || m.role == CaseRole::Yielder) continue;
    if (free_to_move(m)) {
      resolve_case(c, id);
      return;
    }
  }
}

void Simulation::resolve_case(DeadlockCase& c, int winner) {
  c.resolved_at = now();
  c.winner = winner;
  --open_cases_;
  for (int id : c.members) {
    Agent& a = agents_[id];
    a.case_id = -1;
    a.veh.hv_flag = false;
    if (!a.active) {
      a.role = CaseRole::None;
      continue;
    }
    if (id == winner) {
      a.may_proceed = true;
      a.role = CaseRole::None;
      if (a.veh.state == VehicleState::InDeadlock) {
        a.veh.state = transition(a.veh.state, FsmEvent::DeadlockResolved);
        events_.record(now(), "state",
                       {{"vehicle", id},
                        {"to", to_string(a.veh.state)},
                        {"on", to_string(FsmEvent::DeadlockResolved)}});
      }
      continue;
    }
    if (a.veh.state == VehicleState::InDeadlock) {
      // Re-queue: holders go back to waiting their turn.
      const SectionCrossing* cr = scene_.first_crossing(a.veh.path);
      const double bfront = believed_position(a.veh, scene_) + a.veh.length / 2.0;
      a.veh.state = (cr && bfront > cr->entrance) ? VehicleState::Crossing
                                                  : VehicleState::Wait;
      a.holdoff_until = now() + holdoff_draw(a);
      a.stop_arrival_t = now();
      if (a.queue_since < 0.0) a.queue_since = now();
      events_.record(now(), "requeue", {{"vehicle", id}, {"case", c.id}});
    }
    if (a.veh.state != VehicleState::Yielding) a.role = CaseRole::None;
  }
  events_.record(now(), "deadlock_resolved",
                 {{"case", c.id}, {"winner", winner},
                  {"duration_s", c.resolved_at - c.detected_at},
                  {"bound_s", c.bound_s}});
}

void Simulation::absorb_blockers(DeadlockCase& c) {
  // A decided case can wedge on a vehicle that was still rolling at detection
  // time: the winner advances, meets it head to head, and neither side is
  // told to yield because the blocker never joined the episode. Pull such a
  // blocker into the case and re-run the decision over the enlarged set.
  std::vector<int> add;
  for (int id : c.members) {
    const Agent& m = agents_[id];
    if (!m.active || m.role == CaseRole::Yielder) continue;
    if (c.winner >= 0 && id != c.winner) continue;
    if (m.stationary_s < cfg_.driver.t_wait_detect_s) continue;
    const Blocker fb = forward_blocker(m);
    if (fb.id < 0 || fb.barrier_s - m.veh.s > kBlockNearM) continue;
    const Agent& o = agents_[fb.id];
    if (!o.active || o.case_id >= 0 || o.veh.state == VehicleState::Yielding ||
        o.stationary_s < cfg_.driver.t_wait_detect_s)
      continue;
    if (std::find(add.begin(), add.end(), fb.id) == add.end()) add.push_back(fb.id);
  }
  if (add.empty()) return;
  for (int id : add) {
    Agent& a = agents_[id];
    a.case_id = c.id;
    a.role = CaseRole::Holder;
    if (a.veh.state == VehicleState::Wait || a.veh.state == VehicleState::Crossing) {
      a.veh.state = transition(a.veh.state, FsmEvent::DeadlockDetected);
      events_.record(now(), "state",
                     {{"vehicle", id},
                      {"to", to_string(a.veh.state)},
                      {"on", to_string(FsmEvent::DeadlockDetected)}});
    }
    c.members.push_back(id);
  }
  std::sort(c.members.begin(), c.members.end());
  c.frozen.clear();
  freeze_case(c);
  if (c.winner >= 0) {
    Agent& w = agents_[c.winner];
    if (w.active && w.role == CaseRole::Winner) {
      w.role = CaseRole::Holder;
      w.may_proceed = false;
    }
  }
  c.winner = -1;
  c.decided = false;
  events_.record(now(), "case_extended",
                 {{"case", c.id}, {"added", add}, {"bound_s", c.bound_s}});
}

void Simulation::manage_cases() {
  for (auto& c : cases_) {
    if (c.resolved()) continue;
    // Drop members that left the road.
    c.members.erase(std::remove_if(c.members.begin(), c.members.end(),
                                   [this](int id) { return !agents_[id].active; }),
                    c.members.end());
    if (c.members.size() < 2) {
      resolve_case(c, c.members.empty() ? -1 : c.members.front());
      continue;
    }
    absorb_blockers(c);
    if (cfg_.protocol == Protocol::ADrive) {
      bool hv = false;
      for (int id : c.members)
        if (agents_[id].veh.hv_flag) hv = true;
      if (hv && !c.perception_mode) {
        c.perception_mode = true;
        events_.record(now(), "mode_switch", {{"case", c.id}, {"mode", "perception"}});
        if (c.decided && c.winner >= 0) {
          // Mode consistency: stop acting on the V2V outcome.
          Agent& w = agents_[c.winner];
          if (w.active && w.veh.state != VehicleState::Yielding) {
            w.may_proceed = false;
            w.role = CaseRole::Holder;
          }
          c.winner = -1;
        }
      }
      if (!c.decided && now() >= c.detected_at + kSettleS) {
        c.decided = true;
        if (!c.perception_mode) decide_v2v(c);
      }
      if (c.decided && c.perception_mode && c.winner < 0) tick_perception_case(c);
    } else if (!c.decided && now() >= c.detected_at + kSettleS) {
      c.decided = true;
      decide_lane_priority(c);
    }
    if (c.decided) check_resolution(c);
  }
}

// ---------------------------------------------------------------------------
// Per-vehicle decisions

MotionCommand Simulation::yield_cmd(Agent& a) {
  Vehicle& v = a.veh;
  if (v.v > kMotionGate) {
    // Still rolling forward: a Recede command carries no forward barrier, so
    // brake to a stop behind whatever is ahead before reversing.
    MotionCommand brake;
    brake.kind = MotionCommand::Kind::Proceed;
    brake.target_speed = 0.0;
    const Blocker fb = forward_blocker(a);
    double barrier = fb.barrier_s;
    if (fb.id >= 0 && fb.closing)
      barrier -= fb.closing_speed * (v.v / cfg_.driver.accel_limit + cfg_.dt) +
                 v.v * cfg_.dt;
    brake.barrier_s = barrier;
    return brake;
  }
  const double floor_s = recede_floor(a);
  bool settled;
  if (a.yield_to_clear) {
    // Tolerance wider than the push-chain slack so a yielder pinned a few
    // centimetres short of its floor still counts as arrived.
    settled = v.s <= a.yield_floor + 0.3;
  } else {
    // Chain member: back only far enough to give the vehicle ahead room.
    double gap = 1e18;
    int lid = a.leader_id;
    while (lid >= 0 && agents_[lid].pulled_aside) lid = agents_[lid].leader_id;
    if (lid >= 0) gap = agents_[lid].veh.rear() - v.front();
    settled = gap >= cfg_.driver.stop_gap + kChainGapM;
  }
  if (!settled && v.s > floor_s + 0.02) {
    MotionCommand cmd;
    cmd.kind = MotionCommand::Kind::Recede;
    cmd.target_speed = cfg_.driver.backing_speed;
    cmd.barrier_s = floor_s;
    return cmd;
  }
  if (settled && std::fabs(v.v) < kMotionGate) {
    if (a.yield_to_clear) {
      for (const auto& pp : scene_.passing_places())
        if (pp.path == v.path && pp.in_section_turnout &&
            std::fabs(pp.position - a.yield_floor) < 1e-6)
          a.pulled_aside = true;
    }
    v.state = transition(v.state, FsmEvent::ArriveStopLine);
    a.stop_arrival_t = now();
    if (a.queue_since < 0.0) a.queue_since = now();
    a.holdoff_until = now() + holdoff_draw(a);
    if (a.yield_to_clear) a.hold_short = true;
    if (a.case_id < 0) a.role = CaseRole::None;
    events_.record(now(), "yield_complete", {{"vehicle", v.id}});
  }
  return {};
}

MotionCommand Simulation::decide_drive(Agent& a) {
  Vehicle& v = a.veh;
  if (v.state == VehicleState::Yielding) return yield_cmd(a);
  if (a.case_id >= 0 && !a.may_proceed) return {};  // hold for the episode

  MotionCommand cmd;
  cmd.kind = MotionCommand::Kind::Proceed;
  cmd.target_speed = cfg_.driver.cruise_speed;
  const Blocker fb = forward_blocker(a);
  double barrier = fb.barrier_s;
  if (fb.id >= 0 && fb.closing) {
    // The barrier keeps advancing while we brake: pull it back by the ground
    // the opposer covers over our stopping time, plus one tick of slack.
    const double brake_t = std::max(v.v, 0.0) / cfg_.driver.accel_limit;
    barrier -= fb.closing_speed * (brake_t + cfg_.dt) +
               std::max(v.v, 0.0) * cfg_.dt;
  }
  const SectionCrossing* c = scene_.first_crossing(v.path);
  if (c) {
    const double bfront = believed_position(v, scene_) + v.length / 2.0;
    if (bfront < c->entrance && bfront >= c->stop_line - scene_.approach_zone_m) {
      // A winner's grant skips the queueing etiquette, but it must still let
      // any non-yielding crosser finish before taking the section; nosing in
      // early wedges the two head to head with no room to pass.
      const bool hold = a.may_proceed ? !entry_clear_of(a) : !entry_allowed(a, nullptr);
      if (hold) {
        if (a.hold_short && !entry_clear_of(a)) {
          // After backing out of a recovery, stay put until the section is
          // actually clear: a believed line corrupted by localization drift
          // otherwise noses back into the crossing stream and re-wedges it.
          if (v.s < barrier) barrier = v.s;
        } else {
          // An overshooting stop carries past the believed line, but the
          // vehicle still brakes for anything its sensors place ahead, so the
          // overshoot is applied here and capped by the blocker barrier.
          const double sl = stop_line_barrier(a) + v.failure.overshoot_m;
          if (sl < barrier) barrier = sl;
        }
      }
    }
  }
  cmd.barrier_s = barrier;
  return cmd;
}

MotionCommand Simulation::decide(Agent& a) {
  MotionCommand cmd = decide_drive(a);
  if (cmd.kind != MotionCommand::Kind::Recede &&
      a.veh.state != VehicleState::Yielding &&
      a.veh.s > a.push_target + 0.05) {
    // Back-pressure from a yielder somewhere ahead in the queue: give way,
    // whoever we are, but never into the vehicle currently behind us. A
    // vehicle still rolling forward first brakes under its normal command,
    // which keeps the forward barrier; it reverses once stopped.
    if (a.veh.v > kMotionGate) {
      if (cmd.kind == MotionCommand::Kind::Proceed) cmd.target_speed = 0.0;
      return cmd;
    }
    MotionCommand back;
    back.kind = MotionCommand::Kind::Recede;
    back.target_speed = cfg_.driver.backing_speed;
    double floor_s = std::max(a.push_target, a.veh.length / 2.0);
    int fid = a.follower_id;
    while (fid >= 0 && agents_[fid].pulled_aside) fid = agents_[fid].follower_id;
    if (fid >= 0)
      floor_s = std::max(floor_s, agents_[fid].veh.front() +
                                      a.veh.length / 2.0 + cfg_.driver.stop_gap);
    back.barrier_s = floor_s;
    return back;
  }
  return cmd;
}

// ---------------------------------------------------------------------------
// Movement, metrics, audit

void Simulation::move_and_audit() {
  const double t = now();
  bool removed = false;
  for (int id : active_) {
    Agent& a = agents_[id];
    Vehicle& v = a.veh;
    if (std::fabs(v.v) < kMotionGate) {
      a.stationary_s += cfg_.dt;
    } else {
      a.stationary_s = 0.0;
    }
    if (a.pulled_aside && v.v > kMotionGate) a.pulled_aside = false;
    if (v.front() >= finish_line(v.path)) {
      v.trip.end_point_t = t;
      a.active = false;
      a.finished = true;
      removed = true;
      channel_.forget(static_cast<std::uint32_t>(id));
      ++completed_;
      events_.record(t, "trip_complete",
                     {{"vehicle", id}, {"delay_s", trip_delay(v.trip)}});
    }
  }
  if (removed) {
    active_.erase(std::remove_if(active_.begin(), active_.end(),
                                 [this](int id) { return !agents_[id].active; }),
                  active_.end());
    refresh_path_order();
  }

  // Safety audit: same-lane spacing and in-section separation.
  for (const auto& order : by_path_) {
    for (std::size_t i = 1; i < order.size(); ++i) {
      const Agent& back = agents_[order[i - 1]];
      const Agent& front = agents_[order[i]];
      if (back.pulled_aside || front.pulled_aside) continue;
      const double min_sep = (back.veh.length + front.veh.length) / 2.0 + 0.5;
      if (front.veh.s - back.veh.s < min_sep - 1e-9) {
        ++collisions_;
        aborted_ = true;
        abort_reason_ = "collision";
        events_.record(now(), "collision",
                       {{"a", back.veh.id},
                        {"b", front.veh.id},
                        {"gap", front.veh.s - back.veh.s}});
        return;
      }
    }
  }
  refresh_occupancy();
  for (const auto& occ : section_occupants_) {
    for (std::size_t i = 0; i < occ.size(); ++i) {
      for (std::size_t j = i + 1; j < occ.size(); ++j) {
        const Vehicle& a = agents_[occ[i]].veh;
        const Vehicle& b = agents_[occ[j]].veh;
        if (a.path == b.path || !scene_.paths_conflict(a.path, b.path)) continue;
        const double d = dist(scene_.locate(a.path, a.s).point,
                              scene_.locate(b.path, b.s).point);
        if (d < (a.length + b.length) / 2.0 + 0.5 - 1e-9) {
          ++collisions_;
          aborted_ = true;
          abort_reason_ = "collision";
          events_.record(now(), "collision", {{"a", a.id}, {"b", b.id}, {"dist", d}});
          return;
        }
      }
    }
  }
}

void Simulation::step() {
  if (aborted_) return;
  if (now() < cfg_.duration_s) draw_arrivals();
  activate_spawns();
  refresh_path_order();
  refresh_occupancy();
  compute_push_targets();
  if (tick_ % ticks_per_beacon_ == 0) {
    beacon_phase();
    if (cfg_.protocol == Protocol::ADrive) update_hv_flags();
    detect_cases();
  }
  manage_cases();
  for (int id : active_) update_position_states(agents_[id]);

  std::vector<std::pair<int, MotionCommand>> cmds;
  cmds.reserve(active_.size());
  for (int id : active_) cmds.emplace_back(id, decide(agents_[id]));

  KinematicsParams kp;
  kp.accel_limit = cfg_.driver.accel_limit;
  kp.stop_gap = cfg_.driver.stop_gap;
  ++tick_;
  for (auto& [id, cmd] : cmds)
    step_kinematics(agents_[id].veh, scene_, cmd, cfg_.dt, kp);
  move_and_audit();
}

RunResult Simulation::run() {
  const int duration_ticks = static_cast<int>(std::lround(cfg_.duration_s / cfg_.dt));
  while (tick_ < duration_ticks && !aborted_) step();
  const int drain_ticks =
      duration_ticks + static_cast<int>(std::lround(cfg_.drain_cap_s / cfg_.dt));
  while (!idle() && tick_ < drain_ticks && !aborted_) step();
  return result();
}

RunResult Simulation::result() const {
  RunResult r;
  r.protocol = to_string(cfg_.protocol);
  r.volume_vph = cfg_.arrival_vph;
  double size = 0.0;
  for (const auto& sec : scene_.sections()) size = std::max(size, sec.length_m);
  r.size_m = size;
  r.seed = cfg_.seed;
  r.spawned = static_cast<int>(agents_.size());
  r.completed = completed_;
  r.in_flight = r.spawned - r.completed;
  const double w0 = cfg_.scoring_start();
  const double w1 = w0 + cfg_.scoring_window_s;
  double sum = 0.0;
  for (const auto& a : agents_) {
    const TripRecord& tr = a.veh.trip;
    if (tr.spawn_t < w0 || tr.spawn_t >= w1) continue;
    ++r.scored;
    if (tr.completed()) {
      ++r.scored_completed;
      const double d = trip_delay(tr);
      sum += d;
      r.worst_delay_s = std::max(r.worst_delay_s, d);
    } else {
      ++r.scored_incomplete;
    }
  }
  if (r.scored_completed > 0) r.avg_delay_s = sum / r.scored_completed;
  r.deadlocks = static_cast<int>(cases_.size());
  double rsum = 0.0;
  int rn = 0;
  for (const auto& c : cases_) {
    if (c.resolved()) {
      const double d = c.resolved_at - c.detected_at;
      rsum += d;
      ++rn;
      r.max_resolution_s = std::max(r.max_resolution_s, d);
      if (c.bound_s > 0.0)
        r.max_bound_ratio = std::max(r.max_bound_ratio, d / c.bound_s);
    } else {
      // An open case is a liveness failure only once it has outlived its
      // budget (with the same 10% slack the bound check uses); a recovery
      // still on schedule when the run is cut off is truncation, not a hang.
      const double d = now() - c.detected_at;
      if (c.bound_s > 0.0) {
        r.max_bound_ratio = std::max(r.max_bound_ratio, d / c.bound_s);
        if (d > 1.1 * c.bound_s) ++r.unresolved_deadlocks;
      } else {
        ++r.unresolved_deadlocks;
      }
    }
  }
  if (rn > 0) r.mean_resolution_s = rsum / rn;
  r.collisions = collisions_;
  if (aborted_) r.error = abort_reason_;
  return r;
}

}  // namespace adrive
