#include "adrive/geometry.hpp"

namespace adrive {

namespace {
constexpr double kBoundaryEps = 1e-9;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 == 0.0) return dist(p, a);
  double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
  t = std::max(0.0, std::min(1.0, t));
  return dist(p, a + t * ab);
}

bool polygon_contains(const std::vector<Vec2>& poly, Vec2 p) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= kBoundaryEps)
      return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xcross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < xcross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace adrive
