#pragma once

// Approximate convex-hull membership via the randomized triangle algorithm.

#include "gel/common.hpp"

#include <cstdint>

namespace gel {

enum class HullKind {
  Inside,
  Outside,
  // Iteration budget exhausted without a certificate either way. EL callers
  // treat this as Outside.
  Indeterminate,
};

std::string hull_kind_name(HullKind kind);

struct HullVerdict {
  HullKind kind = HullKind::Indeterminate;
  // Convex coefficients of the last iterate p' = sum_i w_i points_i. For
  // Inside this is the witness with ||p' - target|| <= epsilon * scale.
  Vector coefficients;
  // For Outside: p' is a pivot-free point. Every hull point x satisfies
  // x . direction <= threshold < target . direction.
  Vector pivot;
  Vector direction;
  // Inside: ||p' - target||. Outside: a lower bound on the distance from the
  // target to the hull. Indeterminate: ||p' - target|| at exit.
  double distance_bound = 0.0;
  // max_i ||points_i - target||; epsilon is relative to this.
  double scale = 0.0;
  Index iterations = 0;
};

struct HullOptions {
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  Index max_iterations = 50000;
};

/// Decides whether `target` lies in conv{rows of points} up to epsilon.
///
/// Each major step adds a pivot v (a hull vertex with ||p' - v|| >= ||target - v||)
/// to the active set, then moves p' to the point of the active set's convex
/// hull nearest the target (Wolfe's minor cycle). When no pivot exists the
/// perpendicular bisector of [p', target] separates the target from the hull.
/// `iterations` counts major and minor steps together.
HullVerdict hull_membership(const Matrix& points, const Vector& target,
                            const HullOptions& options = {});

}  // namespace gel
