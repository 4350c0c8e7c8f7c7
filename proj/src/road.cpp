#include "adrive/road.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace adrive {

using nlohmann::json;

int RoadScene::add_path(std::string id, std::vector<Vec2> waypoints, int lane_priority) {
  Path p;
  p.id = std::move(id);
  p.waypoints = std::move(waypoints);
  p.lane_priority = lane_priority;
  if (p.waypoints.size() < 2)
    throw std::invalid_argument("path '" + p.id + "' needs at least 2 waypoints");
  p.cum.resize(p.waypoints.size());
  p.cum[0] = 0.0;
  for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
    const double seg = dist(p.waypoints[i - 1], p.waypoints[i]);
    if (seg <= 0.0)
      throw std::invalid_argument("path '" + p.id + "' has coincident waypoints");
    p.cum[i] = p.cum[i - 1] + seg;
  }
  p.length = p.cum.back();
  paths_.push_back(std::move(p));
  for (auto& sec : sections_) sec.crossings.resize(paths_.size());
  return static_cast<int>(paths_.size()) - 1;
}

int RoadScene::add_section(CriticalSection section) {
  section.crossings.resize(paths_.size());
  sections_.push_back(std::move(section));
  return static_cast<int>(sections_.size()) - 1;
}

void RoadScene::add_passing_place(PassingPlace place) {
  places_.push_back(std::move(place));
}

void RoadScene::validate() const {
  for (const auto& sec : sections_) {
    if (sec.length_m <= 0.0)
      throw std::invalid_argument("section '" + sec.id + "': length_m must be > 0");
    if (sec.region.size() < 3)
      throw std::invalid_argument("section '" + sec.id + "': region needs >= 3 vertices");
    for (std::size_t p = 0; p < sec.crossings.size(); ++p) {
      if (!sec.crossings[p]) continue;
      const auto& c = *sec.crossings[p];
      if (!(c.entrance < c.exit))
        throw std::invalid_argument("section '" + sec.id + "', path '" + paths_[p].id +
                                    "': entrance must precede exit");
      if (c.stop_line > c.entrance)
        throw std::invalid_argument("section '" + sec.id + "', path '" + paths_[p].id +
                                    "': stop line must lie at or before the entrance");
      if (c.exit > paths_[p].length)
        throw std::invalid_argument("section '" + sec.id + "', path '" + paths_[p].id +
                                    "': exit beyond path extent");
    }
  }
  for (const auto& pp : places_) {
    if (pp.path < 0 || pp.path >= static_cast<int>(paths_.size()))
      throw std::invalid_argument("passing place '" + pp.id + "': unknown path");
    if (pp.position < 0.0 || pp.position > paths_[pp.path].length)
      throw std::invalid_argument("passing place '" + pp.id + "': position off path");
    if (!pp.in_section_turnout) {
      for (const auto& sec : sections_) {
        const auto& c = sec.crossings[pp.path];
        if (c && pp.position > c->entrance && pp.position < c->exit)
          throw std::invalid_argument("passing place '" + pp.id +
                                      "' lies inside a section but is not flagged as a turnout");
      }
    }
  }
}

int RoadScene::path_index(const std::string& id) const {
  for (std::size_t i = 0; i < paths_.size(); ++i)
    if (paths_[i].id == id) return static_cast<int>(i);
  return -1;
}

int RoadScene::section_index(const std::string& id) const {
  for (std::size_t i = 0; i < sections_.size(); ++i)
    if (sections_[i].id == id) return static_cast<int>(i);
  return -1;
}

PoseSample RoadScene::locate(int path, double s) const {
  if (path < 0 || path >= static_cast<int>(paths_.size()))
    throw std::out_of_range("unknown path index");
  const Path& p = paths_[path];
  if (s < 0.0 || s > p.length)
    throw std::out_of_range("arc length " + std::to_string(s) + " outside path '" + p.id + "'");
  auto it = std::upper_bound(p.cum.begin(), p.cum.end(), s);
  std::size_t i = (it == p.cum.begin()) ? 1 : static_cast<std::size_t>(it - p.cum.begin());
  if (i >= p.cum.size()) i = p.cum.size() - 1;
  const Vec2 a = p.waypoints[i - 1];
  const Vec2 b = p.waypoints[i];
  const double seg = p.cum[i] - p.cum[i - 1];
  const double t = (s - p.cum[i - 1]) / seg;
  PoseSample out;
  out.point = a + t * (b - a);
  out.heading = std::atan2(b.y - a.y, b.x - a.x);
  return out;
}

PoseSample RoadScene::locate(const std::string& path_id, double s) const {
  const int idx = path_index(path_id);
  if (idx < 0) throw std::out_of_range("unknown path id '" + path_id + "'");
  return locate(idx, s);
}

bool RoadScene::in_section(int section, Vec2 point) const {
  if (section < 0 || section >= static_cast<int>(sections_.size()))
    throw std::out_of_range("unknown section index");
  return polygon_contains(sections_[section].region, point);
}

bool RoadScene::in_section(const std::string& section_id, Vec2 point) const {
  const int idx = section_index(section_id);
  if (idx < 0) throw std::out_of_range("unknown section id '" + section_id + "'");
  return in_section(idx, point);
}

const SectionCrossing* RoadScene::crossing(int section, int path) const {
  if (section < 0 || section >= static_cast<int>(sections_.size())) return nullptr;
  if (path < 0 || path >= static_cast<int>(sections_[section].crossings.size())) return nullptr;
  const auto& c = sections_[section].crossings[path];
  return c ? &*c : nullptr;
}

const SectionCrossing* RoadScene::first_crossing(int path) const {
  for (std::size_t s = 0; s < sections_.size(); ++s)
    if (const SectionCrossing* c = crossing(static_cast<int>(s), path)) return c;
  return nullptr;
}

int RoadScene::first_section(int path) const {
  for (std::size_t s = 0; s < sections_.size(); ++s)
    if (crossing(static_cast<int>(s), path)) return static_cast<int>(s);
  return -1;
}

bool RoadScene::paths_conflict(int path_a, int path_b) const {
  if (path_a == path_b) return false;
  for (std::size_t s = 0; s < sections_.size(); ++s)
    if (crossing(static_cast<int>(s), path_a) && crossing(static_cast<int>(s), path_b))
      return true;
  return false;
}

double RoadScene::evacuation_point(int path, double s) const {
  if (path < 0 || path >= static_cast<int>(paths_.size()))
    throw std::out_of_range("unknown path index");
  double best = -1.0;
  for (const auto& pp : places_)
    if (pp.path == path && pp.position <= s) best = std::max(best, pp.position);
  for (std::size_t sec = 0; sec < sections_.size(); ++sec) {
    const SectionCrossing* c = crossing(static_cast<int>(sec), path);
    if (c && c->entrance <= s) best = std::max(best, c->entrance);
  }
  return best < 0.0 ? s : best;
}

double RoadScene::distance_to_evacuation(int path, double s) const {
  return s - evacuation_point(path, s);
}

// ---------------------------------------------------------------------------
// JSON scene files

std::string RoadScene::to_json() const {
  json j;
  j["speed_limit_mps"] = speed_limit;
  j["approach_zone_m"] = approach_zone_m;
  j["paths"] = json::array();
  for (const auto& p : paths_) {
    json jp;
    jp["id"] = p.id;
    jp["lane_priority"] = p.lane_priority;
    jp["waypoints"] = json::array();
    for (const auto& w : p.waypoints) jp["waypoints"].push_back({w.x, w.y});
    j["paths"].push_back(jp);
  }
  j["sections"] = json::array();
  for (const auto& sec : sections_) {
    json js;
    js["id"] = sec.id;
    js["length_m"] = sec.length_m;
    js["region"] = json::array();
    for (const auto& w : sec.region) js["region"].push_back({w.x, w.y});
    js["crossings"] = json::object();
    for (std::size_t p = 0; p < sec.crossings.size(); ++p) {
      if (!sec.crossings[p]) continue;
      const auto& c = *sec.crossings[p];
      js["crossings"][paths_[p].id] = {
          {"entrance", c.entrance}, {"exit", c.exit}, {"stop_line", c.stop_line}};
    }
    j["sections"].push_back(js);
  }
  j["passing_places"] = json::array();
  for (const auto& pp : places_) {
    j["passing_places"].push_back({{"id", pp.id},
                                   {"path", paths_[pp.path].id},
                                   {"position", pp.position},
                                   {"in_section_turnout", pp.in_section_turnout}});
  }
  return j.dump(2);
}

RoadScene RoadScene::from_json(const std::string& text) {
  const json j = json::parse(text);
  RoadScene scene;
  scene.speed_limit = j.value("speed_limit_mps", 10.0);
  scene.approach_zone_m = j.value("approach_zone_m", 30.0);
  for (const auto& jp : j.at("paths")) {
    std::vector<Vec2> wps;
    for (const auto& w : jp.at("waypoints"))
      wps.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    scene.add_path(jp.at("id").get<std::string>(), std::move(wps),
                   jp.value("lane_priority", 0));
  }
  for (const auto& js : j.value("sections", json::array())) {
    CriticalSection sec;
    sec.id = js.at("id").get<std::string>();
    sec.length_m = js.at("length_m").get<double>();
    for (const auto& w : js.at("region"))
      sec.region.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    const int idx = scene.add_section(std::move(sec));
    for (const auto& [path_id, jc] : js.at("crossings").items()) {
      const int p = scene.path_index(path_id);
      if (p < 0) throw std::invalid_argument("crossing references unknown path '" + path_id + "'");
      SectionCrossing c;
      c.entrance = jc.at("entrance").get<double>();
      c.exit = jc.at("exit").get<double>();
      c.stop_line = jc.value("stop_line", c.entrance);
      scene.sections_[idx].crossings[p] = c;
    }
  }
  for (const auto& jpp : j.value("passing_places", json::array())) {
    PassingPlace pp;
    pp.id = jpp.at("id").get<std::string>();
    pp.path = scene.path_index(jpp.at("path").get<std::string>());
    if (pp.path < 0) throw std::invalid_argument("passing place references unknown path");
    pp.position = jpp.at("position").get<double>();
    pp.in_section_turnout = jpp.value("in_section_turnout", false);
    scene.add_passing_place(pp);
  }
  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------
// Canonical scenes

RoadScene RoadScene::single_track(double section_length_m, double approach_m) {
  RoadScene scene;
  const double L = section_length_m;
  const double A = approach_m;
  // Shared segment occupies x in [0, L]; both directions run along y = 0.
  scene.add_path("east", {{-A, 0.0}, {L + A, 0.0}}, /*lane_priority=*/1);
  scene.add_path("west", {{L + A, 0.0}, {-A, 0.0}}, /*lane_priority=*/0);
  CriticalSection sec;
  sec.id = "track";
  sec.length_m = L;
  sec.region = {{0.0, -1.75}, {L, -1.75}, {L, 1.75}, {0.0, 1.75}};
  const int idx = scene.add_section(std::move(sec));
  scene.sections_[idx].crossings[0] = SectionCrossing{A, A + L, A - 2.0};
  scene.sections_[idx].crossings[1] = SectionCrossing{A, A + L, A - 2.0};
  scene.validate();
  return scene;
}

RoadScene RoadScene::four_way(double section_size_m, double approach_m) {
  RoadScene scene;
  const double H = section_size_m / 2.0;
  const double A = approach_m;
  scene.add_path("east", {{-H - A, 0.0}, {H + A, 0.0}}, 3);
  scene.add_path("west", {{H + A, 0.0}, {-H - A, 0.0}}, 2);
  scene.add_path("north", {{0.0, -H - A}, {0.0, H + A}}, 1);
  scene.add_path("south", {{0.0, H + A}, {0.0, -H - A}}, 0);
  CriticalSection sec;
  sec.id = "crossing";
  sec.length_m = section_size_m;
  sec.region = {{-H, -H}, {H, -H}, {H, H}, {-H, H}};
  const int idx = scene.add_section(std::move(sec));
  for (int p = 0; p < 4; ++p)
    scene.sections_[idx].crossings[p] = SectionCrossing{A, A + 2.0 * H, A - 2.0};
  scene.validate();
  return scene;
}

}  // namespace adrive
