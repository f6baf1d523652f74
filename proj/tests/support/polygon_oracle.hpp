#pragma once

#include <random>
#include <utility>
#include <vector>

namespace ruleflow::testing {

using Polygon = std::vector<std::pair<double, double>>;

/// Winding-number containment test (sum of subtended angles); independent
/// of the engine's crossing-count implementation. Boundary behavior is
/// undefined, so callers exclude near-edge points.
bool oracle_point_in_polygon(double px, double py, const Polygon& polygon);

/// Distance from a point to the nearest polygon edge.
double distance_to_boundary(double px, double py, const Polygon& polygon);

/// Random star-shaped (hence simple) polygon around a random center.
Polygon random_simple_polygon(std::mt19937_64& rng, int min_vertices = 3,
                              int max_vertices = 12);

}  // namespace ruleflow::testing
