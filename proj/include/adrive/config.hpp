#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adrive/channel.hpp"
#include "adrive/cost.hpp"
#include "adrive/road.hpp"
#include "adrive/vehicle.hpp"

namespace adrive {

enum class Protocol { ADrive, LanePriority };

const char* to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

enum class SceneKind { SingleTrack, FourWay, File };

// Traffic composition; remainder of the unit interval is CAVs.
struct TrafficMix {
  double ncav_fraction = 0.0;
  double human_fraction = 0.0;
};

// Driving / protocol tunables that the paper leaves open.
struct DriverParams {
  double cruise_speed = 10.0;       // m/s, defaults to the scene speed limit
  double backing_speed = 2.0;       // m/s while yielding
  double accel_limit = 3.0;         // m/s^2
  double stop_gap = 1.0;            // rest clearance between vehicles
  double vehicle_length = 4.5;
  double sensor_range_m = 80.0;
  double holdoff_min_s = 0.3;       // reaction pause before entering from rest
  double holdoff_max_s = 1.2;
  double entry_guard_m = 15.0;      // defer entry if opposer advancing this close to its entrance
  double platoon_gap_m = 25.0;      // follow a crossing leader through within this gap
  double platoon_window_s = 25.0;   // floor on how long a platoon may hold the track
  double t_wait_detect_s = 3.0;     // stationary time before deadlock detection
  double human_patience_s = 6.0;    // courtesy timer for human-driven vehicles
  double spawn_clearance_m = 12.0;  // entry head-space required to activate an arrival
  bool fcfs_tie = false;            // mutual-deferral failure at stop lines
};

// Failure injection applied to a random fraction of spawned vehicles.
struct FailureInjection {
  double overshoot_m = 0.0;
  double overshoot_fraction = 0.0;
  double localization_offset_m = 0.0;
  double localization_fraction = 0.0;
  double packet_loss_override = 0.0;
  double loss_override_fraction = 0.0;
};

struct ScriptedSpawn {
  double t = 0.0;
  std::string path;
  VehicleKind kind = VehicleKind::ConnectedAutomated;
  FailureProfile failure;
  double start_s = 0.0;
  double start_v = -1.0;  // <0: cruise speed
};

struct SimConfig {
  SceneKind scene_kind = SceneKind::SingleTrack;
  double section_length_m = 30.0;
  std::string scene_file;  // used when scene_kind == File

  Protocol protocol = Protocol::ADrive;
  double duration_s = 1800.0;
  double scoring_window_s = 1200.0;
  double score_start_s = -1.0;  // <0: duration - scoring window
  double drain_cap_s = 600.0;
  double dt = 0.05;

  double arrival_vph = 400.0;  // per direction; 0 disables stochastic traffic
  TrafficMix mix;
  CostParams cost;
  ChannelParams channel;
  DriverParams driver;
  FailureInjection failure;
  std::vector<ScriptedSpawn> scripted;

  std::uint64_t seed = 1;

  double scoring_start() const {
    return score_start_s >= 0.0 ? score_start_s : duration_s - scoring_window_s;
  }

  // Throws std::invalid_argument on any violated constraint.
  void validate() const;

  RoadScene build_scene() const;

  std::string to_json() const;
  static SimConfig from_json(const std::string& text);
  static SimConfig load_file(const std::string& path);
};

// Named failure scenarios mirroring the deadlock taxonomy.
struct FailurePreset {
  std::string name;
  std::string description;
};

const std::vector<FailurePreset>& failure_presets();

// Applies a named preset on top of `base`; throws on unknown name.
SimConfig apply_preset(SimConfig base, const std::string& name);

}  // namespace adrive
