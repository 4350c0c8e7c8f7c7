#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adrive/geometry.hpp"

namespace adrive {

struct PoseSample {
  Vec2 point;
  double heading = 0.0;  // radians, direction of travel
};

struct Path {
  std::string id;
  std::vector<Vec2> waypoints;
  int lane_priority = 0;  // right-of-way rank: baseline recovery, entry ties
  // derived
  std::vector<double> cum;  // cumulative arc length per waypoint
  double length = 0.0;
};

// Arc-length anchors of one path through one critical section.
struct SectionCrossing {
  double entrance = 0.0;
  double exit = 0.0;
  double stop_line = 0.0;
};

struct CriticalSection {
  std::string id;
  std::vector<Vec2> region;  // simple polygon
  double length_m = 0.0;
  // crossings[path_index]; paths not crossing the section hold nullopt
  std::vector<std::optional<SectionCrossing>> crossings;
};

struct PassingPlace {
  std::string id;
  int path = -1;
  double position = 0.0;  // arc length on its path
  bool in_section_turnout = false;
};

// Static road geometry. Immutable after construction; shared freely across
// concurrent simulation runs.
class RoadScene {
 public:
  double speed_limit = 10.0;     // m/s
  double approach_zone_m = 30.0;  // zone before the stop line

  int add_path(std::string id, std::vector<Vec2> waypoints, int lane_priority = 0);
  int add_section(CriticalSection section);
  void add_passing_place(PassingPlace place);

  // Checks all structural invariants; throws std::invalid_argument on the
  // first violation. Call once after construction.
  void validate() const;

  const std::vector<Path>& paths() const { return paths_; }
  const std::vector<CriticalSection>& sections() const { return sections_; }
  const std::vector<PassingPlace>& passing_places() const { return places_; }

  int path_index(const std::string& id) const;  // -1 when unknown
  int section_index(const std::string& id) const;

  PoseSample locate(int path, double s) const;
  PoseSample locate(const std::string& path_id, double s) const;

  bool in_section(int section, Vec2 point) const;
  bool in_section(const std::string& section_id, Vec2 point) const;

  // Arc-length anchors of `path` through `section`; nullptr when the path
  // does not cross it.
  const SectionCrossing* crossing(int section, int path) const;
  // First section crossed by `path` (scenes here have a single section).
  const SectionCrossing* first_crossing(int path) const;
  int first_section(int path) const;

  bool paths_conflict(int path_a, int path_b) const;

  // Arc-length target of the nearest evacuation site behind position s:
  // a passing place if one lies behind, otherwise the section entrance the
  // vehicle came through, otherwise s itself (already evacuated).
  double evacuation_point(int path, double s) const;
  double distance_to_evacuation(int path, double s) const;

  std::string to_json() const;
  static RoadScene from_json(const std::string& text);

  // Canonical scenes used by the experiments.
  static RoadScene single_track(double section_length_m, double approach_m = 300.0);
  static RoadScene four_way(double section_size_m, double approach_m = 300.0);

 private:
  std::vector<Path> paths_;
  std::vector<CriticalSection> sections_;
  std::vector<PassingPlace> places_;
};

}  // namespace adrive
