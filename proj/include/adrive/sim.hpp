#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "adrive/channel.hpp"
#include "adrive/config.hpp"
#include "adrive/cost.hpp"
#include "adrive/events.hpp"
#include "adrive/perception.hpp"
#include "adrive/vehicle.hpp"
#include "adrive/waitgraph.hpp"

namespace adrive {

// Role of a vehicle inside its current deadlock episode.
enum class CaseRole { None, Holder, Yielder, Winner };

struct DeadlockCase {
  int id = -1;
  std::vector<int> members;   // sorted ascending
  double detected_at = 0.0;
  bool perception_mode = false;  // true once any member's HV flag is set
  bool decided = false;          // roles assigned (after the settle window)
  int winner = -1;               // assigned at decision (V2V) or resolution
  std::vector<int> yielders;
  double resolved_at = -1.0;
  double bound_s = 0.0;  // liveness budget computed at detection

  // Frozen at detection so the ranking cannot drift mid-episode.
  struct Frozen {
    int id = 0;
    bool rho = false;
    double chi_comm = 0.0;
    double chi_perception = 0.0;
    double r = 0.0;
    double delta = 0.0;  // threshold wait (perception mode)
    double stationary_s = 0.0;  // how long the member had been stopped
  };
  std::vector<Frozen> frozen;  // parallel to members

  bool resolved() const { return resolved_at >= 0.0; }
  const Frozen* frozen_of(int vehicle) const;
};

struct RunResult {
  std::string protocol;
  double volume_vph = 0.0;
  double size_m = 0.0;
  std::uint64_t seed = 0;

  int spawned = 0;
  int completed = 0;
  int in_flight = 0;       // still on the road (or pending) when the run ended
  int scored = 0;          // trips whose spawn fell in the scoring window
  int scored_completed = 0;
  int scored_incomplete = 0;

  double avg_delay_s = 0.0;
  double worst_delay_s = 0.0;
  int deadlocks = 0;
  int unresolved_deadlocks = 0;
  double mean_resolution_s = 0.0;
  double max_resolution_s = 0.0;
  double max_bound_ratio = 0.0;  // worst resolution_time / bound over all cases
  int collisions = 0;

  std::string error;  // non-empty when the run aborted

  static std::string csv_header();
  std::string csv_row() const;
};

// (end - start) - free_flow, floored at zero. Requires a completed record.
double trip_delay(const TripRecord& record);

// Per-vehicle runtime bookkeeping on top of the physical Vehicle.
struct Agent {
  Vehicle veh;
  Rng rng;
  bool active = false;
  bool finished = false;

  double stationary_s = 0.0;       // time with |v| below the motion gate
  double stop_arrival_t = -1.0;    // when the vehicle last settled at its stop line
  double queue_since = -1.0;       // first stop-line arrival since last crossing
  double holdoff_until = -1.0;     // entry pause after settling at the stop line

  int case_id = -1;
  CaseRole role = CaseRole::None;
  bool yield_to_clear = false;     // yield target clears the section vs. makes room
  double yield_floor = 0.0;        // recede target for Yielder roles
  bool may_proceed = false;        // winner grant, held until section exit
  bool hold_short = false;         // after backing out: wait in place until the
                                   // section is clear before advancing to the line
  bool pulled_aside = false;       // parked in an in-section turnout
  double case_delta = 0.0;         // frozen threshold wait, for introspection

  int leader_id = -1;              // same-path neighbors, refreshed per tick
  int follower_id = -1;
  double push_target = 1e18;       // back-pressure ceiling, refreshed per tick
};

// One deterministic tick-driven run: traffic generation, driving, the
// selected protocol, metrics. Single-threaded; independent instances may run
// concurrently.
class Simulation {
 public:
  explicit Simulation(SimConfig cfg);

  void step();        // one tick of `dt`
  RunResult run();    // full run: duration + drain, then metrics

  double now() const { return tick_ * cfg_.dt; }
  int tick() const { return tick_; }
  bool idle() const;  // nothing active and nothing pending

  const SimConfig& config() const { return cfg_; }
  const RoadScene& scene() const { return scene_; }
  EventLog& events() { return events_; }
  const std::vector<DeadlockCase>& cases() const { return cases_; }
  const Agent* agent(int id) const;
  Agent* agent_mut(int id);
  std::vector<const Vehicle*> active_vehicles() const;
  int collision_count() const { return collisions_; }

  RunResult result() const;  // metrics over the current state

 private:
  struct PendingSpawn {
    int id = -1;
    double spawn_t = 0.0;
    int path = -1;
    double start_s = -1.0;  // <0: default entry point
    double start_v = -1.0;  // <0: cruise
  };

  // --- tick phases -------------------------------------------------------
  void draw_arrivals();
  void activate_spawns();
  void refresh_path_order();
  void refresh_occupancy();
  void compute_push_targets();
  void beacon_phase();
  void update_position_states(Agent& a);
  void update_hv_flags();
  void manage_cases();
  MotionCommand decide(Agent& a);
  MotionCommand decide_drive(Agent& a);
  MotionCommand yield_cmd(Agent& a);
  void move_and_audit();

  // --- protocol helpers --------------------------------------------------
  struct Blocker {
    int id = -1;
    double barrier_s = 1e18;  // center barrier on the subject's path
    bool closing = false;
    double closing_speed = 0.0;  // m/s toward the subject when closing
  };
  Blocker forward_blocker(const Agent& a) const;
  bool occupying(const Vehicle& v, int section) const;
  bool entry_allowed(const Agent& a, std::vector<int>* blockers) const;
  bool entry_clear_of(const Agent& a) const;
  bool quick_entry_ok(const Agent& a) const;
  bool platoon_follow(const Agent& a) const;
  double platoon_window(int path) const;
  double holdoff_draw(Agent& a) const;
  double stop_line_barrier(const Agent& a) const;
  double yield_floor_for(const Agent& a) const;
  double recede_floor(const Agent& a) const;
  std::vector<Beacon> beacon_table_for(const Agent& a) const;
  void freeze_case(DeadlockCase& c);
  int case_head(const DeadlockCase& c, int path) const;
  std::vector<int> case_heads(const DeadlockCase& c) const;
  void decide_v2v(DeadlockCase& c);
  void decide_lane_priority(DeadlockCase& c);
  void start_yield_member(DeadlockCase& c, Agent& a, bool to_clear);
  void tick_perception_case(DeadlockCase& c);
  void check_resolution(DeadlockCase& c);
  void resolve_case(DeadlockCase& c, int winner);
  void build_wait_graph(WaitForGraph& g) const;
  void detect_cases();
  void absorb_blockers(DeadlockCase& c);
  bool in_open_case(int id) const;
  double finish_line(int path) const;

  SimConfig cfg_;
  RoadScene scene_;
  Channel channel_;
  EventLog events_;
  Rng master_;
  std::vector<Rng> arrival_rng_;       // one stream per path
  std::vector<double> next_arrival_;   // next draw time per path
  std::vector<std::deque<PendingSpawn>> pending_;
  std::deque<PendingSpawn> scripted_pending_;

  std::vector<Agent> agents_;          // index == vehicle id
  std::vector<int> active_;            // sorted ascending
  std::vector<std::vector<int>> by_path_;  // active ids ordered by s
  std::vector<std::vector<int>> section_occupants_;  // per section, sorted ids
  std::vector<int> near_;              // active agents engaged with the section
  std::vector<std::uint32_t> cav_senders_;

  std::vector<DeadlockCase> cases_;
  int open_cases_ = 0;

  int tick_ = 0;
  int ticks_per_beacon_ = 2;
  int collisions_ = 0;
  bool aborted_ = false;
  std::string abort_reason_;

  int completed_ = 0;
};

}  // namespace adrive
