#include "adrive/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace adrive {

using nlohmann::json;

const char* to_string(Protocol p) {
  return p == Protocol::ADrive ? "adrive" : "lane-priority";
}

Protocol protocol_from_string(const std::string& name) {
  if (name == "adrive") return Protocol::ADrive;
  if (name == "lane-priority" || name == "baseline") return Protocol::LanePriority;
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

void SimConfig::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  const double beacon_interval = 1.0 / channel.rate_hz;
  const double ratio = beacon_interval / dt;
  if (std::fabs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("dt must divide the beacon interval exactly");
  if (duration_s < scoring_window_s)
    throw std::invalid_argument("duration must cover the scoring window");
  if (arrival_vph < 0.0) throw std::invalid_argument("arrival rate must be >= 0");
  if (arrival_vph == 0.0 && scripted.empty())
    throw std::invalid_argument("no traffic: arrival rate is 0 and no scripted spawns");
  if (mix.ncav_fraction < 0.0 || mix.human_fraction < 0.0 ||
      mix.ncav_fraction + mix.human_fraction > 1.0)
    throw std::invalid_argument("traffic mix fractions must be in [0,1] and sum <= 1");
  if (channel.range_m <= 0.0 || channel.rate_hz <= 0.0)
    throw std::invalid_argument("channel range and rate must be positive");
  if (channel.loss_p < 0.0 || channel.loss_p > 1.0)
    throw std::invalid_argument("loss probability must be in [0,1]");
  if (cost.s_comm <= 0.0 || cost.t_comm <= 0.0 || cost.s_perception <= 0.0 ||
      cost.t_perception <= 0.0 || cost.a <= 0.0 || cost.r_scale <= 0.0)
    throw std::invalid_argument("cost parameters must be strictly positive");
  if (scene_kind == SceneKind::File && scene_file.empty())
    throw std::invalid_argument("scene_kind 'file' requires scene_file");
  if (section_length_m <= 0.0)
    throw std::invalid_argument("section length must be positive");
  for (const auto& s : scripted) {
    if (s.failure.packet_loss_override &&
        (*s.failure.packet_loss_override < 0.0 || *s.failure.packet_loss_override > 1.0))
      throw std::invalid_argument("packet_loss_override must be in [0,1]");
  }
}

RoadScene SimConfig::build_scene() const {
  switch (scene_kind) {
    case SceneKind::SingleTrack:
      return RoadScene::single_track(section_length_m);
    case SceneKind::FourWay:
      return RoadScene::four_way(section_length_m);
    case SceneKind::File: {
      std::ifstream in(scene_file);
      if (!in) throw std::runtime_error("cannot open scene file '" + scene_file + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      return RoadScene::from_json(ss.str());
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

const char* scene_kind_name(SceneKind k) {
  switch (k) {
    case SceneKind::SingleTrack: return "single-track";
    case SceneKind::FourWay: return "four-way";
    case SceneKind::File: return "file";
  }
  return "?";
}

SceneKind scene_kind_from(const std::string& s) {
  if (s == "single-track") return SceneKind::SingleTrack;
  if (s == "four-way") return SceneKind::FourWay;
  if (s == "file") return SceneKind::File;
  throw std::invalid_argument("unknown scene kind '" + s + "'");
}

const char* kind_name(VehicleKind k) { return to_string(k); }

VehicleKind kind_from(const std::string& s) {
  if (s == "cav") return VehicleKind::ConnectedAutomated;
  if (s == "ncav") return VehicleKind::NonConnectedAutomated;
  if (s == "human") return VehicleKind::HumanDriven;
  throw std::invalid_argument("unknown vehicle kind '" + s + "'");
}

}  // namespace

std::string SimConfig::to_json() const {
  json j;
  j["scene"] = {{"kind", scene_kind_name(scene_kind)},
                {"section_length_m", section_length_m}};
  if (!scene_file.empty()) j["scene"]["file"] = scene_file;
  j["protocol"] = to_string(protocol);
  j["duration_s"] = duration_s;
  j["scoring_window_s"] = scoring_window_s;
  if (score_start_s >= 0.0) j["score_start_s"] = score_start_s;
  j["drain_cap_s"] = drain_cap_s;
  j["dt"] = dt;
  j["arrival_vph"] = arrival_vph;
  j["mix"] = {{"ncav_fraction", mix.ncav_fraction}, {"human_fraction", mix.human_fraction}};
  j["cost"] = {{"s_comm", cost.s_comm},           {"t_comm", cost.t_comm},
               {"s_perception", cost.s_perception}, {"t_perception", cost.t_perception},
               {"a", cost.a},                     {"r_scale", cost.r_scale}};
  j["channel"] = {{"range_m", channel.range_m},
                  {"rate_hz", channel.rate_hz},
                  {"loss_model", channel.model == LossModel::Bernoulli ? "bernoulli" : "distance-ramp"},
                  {"loss_p", channel.loss_p},
                  {"ramp_start_m", channel.ramp_start_m}};
  j["driver"] = {{"cruise_speed", driver.cruise_speed},
                 {"backing_speed", driver.backing_speed},
                 {"accel_limit", driver.accel_limit},
                 {"stop_gap", driver.stop_gap},
                 {"vehicle_length", driver.vehicle_length},
                 {"sensor_range_m", driver.sensor_range_m},
                 {"holdoff_min_s", driver.holdoff_min_s},
                 {"holdoff_max_s", driver.holdoff_max_s},
                 {"entry_guard_m", driver.entry_guard_m},
                 {"platoon_gap_m", driver.platoon_gap_m},
                 {"platoon_window_s", driver.platoon_window_s},
                 {"t_wait_detect_s", driver.t_wait_detect_s},
                 {"human_patience_s", driver.human_patience_s},
                 {"spawn_clearance_m", driver.spawn_clearance_m},
                 {"fcfs_tie", driver.fcfs_tie}};
  j["failure"] = {{"overshoot_m", failure.overshoot_m},
                  {"overshoot_fraction", failure.overshoot_fraction},
                  {"localization_offset_m", failure.localization_offset_m},
                  {"localization_fraction", failure.localization_fraction},
                  {"packet_loss_override", failure.packet_loss_override},
                  {"loss_override_fraction", failure.loss_override_fraction}};
  j["seed"] = seed;
  if (!scripted.empty()) {
    j["scripted"] = json::array();
    for (const auto& s : scripted) {
      json js = {{"t", s.t}, {"path", s.path}, {"kind", kind_name(s.kind)},
                 {"start_s", s.start_s}, {"start_v", s.start_v}};
      js["failure"] = {{"localization_offset_m", s.failure.localization_offset_m},
                       {"overshoot_m", s.failure.overshoot_m}};
      if (s.failure.packet_loss_override)
        js["failure"]["packet_loss_override"] = *s.failure.packet_loss_override;
      j["scripted"].push_back(js);
    }
  }
  return j.dump(2);
}

SimConfig SimConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  SimConfig c;
  if (j.contains("scene")) {
    const auto& js = j["scene"];
    c.scene_kind = scene_kind_from(js.value("kind", "single-track"));
    c.section_length_m = js.value("section_length_m", c.section_length_m);
    c.scene_file = js.value("file", "");
  }
  if (j.contains("protocol")) c.protocol = protocol_from_string(j["protocol"]);
  c.duration_s = j.value("duration_s", c.duration_s);
  c.scoring_window_s = j.value("scoring_window_s", c.scoring_window_s);
  c.score_start_s = j.value("score_start_s", c.score_start_s);
  c.drain_cap_s = j.value("drain_cap_s", c.drain_cap_s);
  c.dt = j.value("dt", c.dt);
  c.arrival_vph = j.value("arrival_vph", c.arrival_vph);
  if (j.contains("mix")) {
    c.mix.ncav_fraction = j["mix"].value("ncav_fraction", 0.0);
    c.mix.human_fraction = j["mix"].value("human_fraction", 0.0);
  }
  if (j.contains("cost")) {
    const auto& jc = j["cost"];
    c.cost.s_comm = jc.value("s_comm", c.cost.s_comm);
    c.cost.t_comm = jc.value("t_comm", c.cost.t_comm);
    c.cost.s_perception = jc.value("s_perception", c.cost.s_perception);
    c.cost.t_perception = jc.value("t_perception", c.cost.t_perception);
    c.cost.a = jc.value("a", c.cost.a);
    c.cost.r_scale = jc.value("r_scale", c.cost.r_scale);
  }
  if (j.contains("channel")) {
    const auto& jc = j["channel"];
    c.channel.range_m = jc.value("range_m", c.channel.range_m);
    c.channel.rate_hz = jc.value("rate_hz", c.channel.rate_hz);
    const std::string model = jc.value("loss_model", "bernoulli");
    c.channel.model = model == "distance-ramp" ? LossModel::DistanceRamp : LossModel::Bernoulli;
    c.channel.loss_p = jc.value("loss_p", c.channel.loss_p);
    c.channel.ramp_start_m = jc.value("ramp_start_m", c.channel.ramp_start_m);
  }
  if (j.contains("driver")) {
    const auto& jd = j["driver"];
    c.driver.cruise_speed = jd.value("cruise_speed", c.driver.cruise_speed);
    c.driver.backing_speed = jd.value("backing_speed", c.driver.backing_speed);
    c.driver.accel_limit = jd.value("accel_limit", c.driver.accel_limit);
    c.driver.stop_gap = jd.value("stop_gap", c.driver.stop_gap);
    c.driver.vehicle_length = jd.value("vehicle_length", c.driver.vehicle_length);
    c.driver.sensor_range_m = jd.value("sensor_range_m", c.driver.sensor_range_m);
    c.driver.holdoff_min_s = jd.value("holdoff_min_s", c.driver.holdoff_min_s);
    c.driver.holdoff_max_s = jd.value("holdoff_max_s", c.driver.holdoff_max_s);
    c.driver.entry_guard_m = jd.value("entry_guard_m", c.driver.entry_guard_m);
    c.driver.platoon_gap_m = jd.value("platoon_gap_m", c.driver.platoon_gap_m);
    c.driver.platoon_window_s = jd.value("platoon_window_s", c.driver.platoon_window_s);
    c.driver.t_wait_detect_s = jd.value("t_wait_detect_s", c.driver.t_wait_detect_s);
    c.driver.human_patience_s = jd.value("human_patience_s", c.driver.human_patience_s);
    c.driver.spawn_clearance_m = jd.value("spawn_clearance_m", c.driver.spawn_clearance_m);
    c.driver.fcfs_tie = jd.value("fcfs_tie", c.driver.fcfs_tie);
  }
  if (j.contains("failure")) {
    const auto& jf = j["failure"];
    c.failure.overshoot_m = jf.value("overshoot_m", 0.0);
    c.failure.overshoot_fraction = jf.value("overshoot_fraction", 0.0);
    c.failure.localization_offset_m = jf.value("localization_offset_m", 0.0);
    c.failure.localization_fraction = jf.value("localization_fraction", 0.0);
    c.failure.packet_loss_override = jf.value("packet_loss_override", 0.0);
    c.failure.loss_override_fraction = jf.value("loss_override_fraction", 0.0);
  }
  c.seed = j.value("seed", c.seed);
  for (const auto& js : j.value("scripted", json::array())) {
    ScriptedSpawn s;
    s.t = js.value("t", 0.0);
    s.path = js.at("path").get<std::string>();
    s.kind = kind_from(js.value("kind", "cav"));
    s.start_s = js.value("start_s", 0.0);
    s.start_v = js.value("start_v", -1.0);
    if (js.contains("failure")) {
      const auto& jf = js["failure"];
      s.failure.localization_offset_m = jf.value("localization_offset_m", 0.0);
      s.failure.overshoot_m = jf.value("overshoot_m", 0.0);
      if (jf.contains("packet_loss_override"))
        s.failure.packet_loss_override = jf["packet_loss_override"].get<double>();
    }
    c.scripted.push_back(std::move(s));
  }
  c.validate();
  return c;
}

SimConfig SimConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const std::vector<FailurePreset>& failure_presets() {
  static const std::vector<FailurePreset> presets = {
      {"four-way-tie",
       "four-way stop, simultaneous arrivals mutually defer entry"},
      {"stopline-overshoot",
       "four-way stop, a fraction of vehicles rest past the stop line"},
      {"narrow-road-overshoot",
       "single-track lane, a fraction of vehicles rest past the stop line"},
      {"virtual-stop-line",
       "single-track lane, localization offset shifts the believed stop point"},
      {"long-single-track",
       "100 m single-track lane, longer than the sensor coverage"},
  };
  return presets;
}

SimConfig apply_preset(SimConfig c, const std::string& name) {
  if (name == "four-way-tie") {
    c.scene_kind = SceneKind::FourWay;
    c.section_length_m = 20.0;
    c.driver.fcfs_tie = true;
  } else if (name == "stopline-overshoot") {
    c.scene_kind = SceneKind::FourWay;
    c.section_length_m = 20.0;
    c.failure.overshoot_m = 2.5;
    c.failure.overshoot_fraction = 0.3;
  } else if (name == "narrow-road-overshoot") {
    c.scene_kind = SceneKind::SingleTrack;
    c.section_length_m = 30.0;
    c.failure.overshoot_m = 2.5;
    c.failure.overshoot_fraction = 0.3;
  } else if (name == "virtual-stop-line") {
    c.scene_kind = SceneKind::SingleTrack;
    c.section_length_m = 30.0;
    c.failure.localization_offset_m = -3.0;
    c.failure.localization_fraction = 0.3;
  } else if (name == "long-single-track") {
    c.scene_kind = SceneKind::SingleTrack;
    c.section_length_m = 100.0;
  } else {
    throw std::invalid_argument("unknown failure preset '" + name + "'");
  }
  return c;
}

}  // namespace adrive
