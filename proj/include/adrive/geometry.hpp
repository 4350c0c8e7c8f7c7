#pragma once

#include <cmath>
#include <vector>

namespace adrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// Distance from point p to segment [a,b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

// Even-odd rule containment over a simple polygon; points on the boundary
// count as inside.
bool polygon_contains(const std::vector<Vec2>& poly, Vec2 p);

}  // namespace adrive
