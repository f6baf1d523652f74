#include "support/polygon_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace ruleflow::testing {

bool oracle_point_in_polygon(double px, double py, const Polygon& polygon) {
  double angle_sum = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& [x1, y1] = polygon[i];
    const auto& [x2, y2] = polygon[(i + 1) % polygon.size()];
    const double ax = x1 - px, ay = y1 - py;
    const double bx = x2 - px, by = y2 - py;
    angle_sum += std::atan2(ax * by - ay * bx, ax * bx + ay * by);
  }
  return std::fabs(angle_sum) > M_PI;  // +-2*pi inside, ~0 outside
}

double distance_to_boundary(double px, double py, const Polygon& polygon) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& [x1, y1] = polygon[i];
    const auto& [x2, y2] = polygon[(i + 1) % polygon.size()];
    const double dx = x2 - x1, dy = y2 - y1;
    const double len2 = dx * dx + dy * dy;
    double t = len2 == 0.0 ? 0.0 : ((px - x1) * dx + (py - y1) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = x1 + t * dx - px;
    const double cy = y1 + t * dy - py;
    best = std::min(best, std::sqrt(cx * cx + cy * cy));
  }
  return best;
}

Polygon random_simple_polygon(std::mt19937_64& rng, int min_vertices, int max_vertices) {
  std::uniform_int_distribution<int> count_dist(min_vertices, max_vertices);
  std::uniform_real_distribution<double> center_dist(-5.0, 5.0);
  std::uniform_real_distribution<double> radius_dist(0.5, 2.5);
  std::uniform_real_distribution<double> jitter(0.0, 2.0 * M_PI);

  const int n = count_dist(rng);
  const double cx = center_dist(rng);
  const double cy = center_dist(rng);
  const double phase = jitter(rng);

  // Evenly spaced sectors with jitter inside each keeps the angles
  // distinct, so the star-shaped construction cannot self-intersect.
  std::vector<double> angles(n);
  std::uniform_real_distribution<double> within(0.0, 0.8);
  for (int i = 0; i < n; ++i) {
    angles[i] = (i + within(rng)) * 2.0 * M_PI / n;
  }

  Polygon polygon;
  polygon.reserve(n);
  for (double a : angles) {
    const double r = radius_dist(rng);
    polygon.emplace_back(cx + r * std::cos(a + phase), cy + r * std::sin(a + phase));
  }
  return polygon;
}

}  // namespace ruleflow::testing
