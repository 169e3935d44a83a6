#include "gel/hull.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gel {

std::string hull_kind_name(HullKind kind) {
  switch (kind) {
    case HullKind::Inside: return "inside";
    case HullKind::Outside: return "outside";
    case HullKind::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

namespace {

// Convex weights mu over the active set minimizing ||sum mu_a q_a||^2 subject
// to sum mu = 1 (no sign constraint): mu is proportional to (G + 11^T)^{-1} 1.
Vector affine_minimizer(const Matrix& gram) {
  const Index k = gram.rows();
  const Matrix lifted = gram + Matrix::Ones(k, k);
  const Vector ones = Vector::Ones(k);
  Vector v = lifted.ldlt().solve(ones);
  double total = v.sum();
  if (!v.allFinite() || !(std::abs(total) > 0.0) || (lifted * v - ones).norm() > 1e-8 * k) {
    v = lifted.completeOrthogonalDecomposition().solve(ones);
    total = v.sum();
  }
  return v / total;
}

void erase_index(Matrix& gram, Index a) {
  const Index k = gram.rows();
  Matrix g(k - 1, k - 1);
  for (Index i = 0, r = 0; i < k; ++i) {
    if (i == a) continue;
    for (Index j = 0, c = 0; j < k; ++j) {
      if (j == a) continue;
      g(r, c++) = gram(i, j);
    }
    ++r;
  }
  gram = std::move(g);
}

}  // namespace

HullVerdict hull_membership(const Matrix& points, const Vector& target,
                            const HullOptions& options) {
  if (points.rows() < 1) throw GelError(ErrorCode::EmptyInput, "hull check on empty point set");
  if (points.cols() != target.size()) {
    throw GelError(ErrorCode::DimensionMismatch, "hull target dimension mismatch");
  }
  if (!(options.epsilon > 0.0)) {
    throw GelError(ErrorCode::InvalidArgument, "hull epsilon must be positive");
  }

  const Index n = points.rows();
  // Work relative to the target, which then sits at the origin.
  const Matrix q = points.rowwise() - target.transpose();
  const Vector sq_norms = q.rowwise().squaredNorm();

  HullVerdict verdict;
  verdict.scale = std::sqrt(sq_norms.maxCoeff());
  const double tolerance = options.epsilon * verdict.scale;

  // Seeded scan order; ties in every argmin go to the earliest index in it.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Index start = order.front();
  for (Index i : order) {
    if (sq_norms(i) < sq_norms(start)) start = i;
  }

  std::vector<Index> active{start};
  Vector lambda = Vector::Ones(1);
  Matrix gram = Matrix::Constant(1, 1, sq_norms(start));
  Vector current = q.row(start).transpose();
  Index iter = 0;

  auto coefficients = [&] {
    Vector alpha = Vector::Zero(n);
    for (std::size_t a = 0; a < active.size(); ++a) alpha(active[a]) = lambda(static_cast<Index>(a));
    return Vector(alpha / alpha.sum());
  };
  auto finish = [&](HullKind kind) {
    verdict.kind = kind;
    verdict.coefficients = coefficients();
    verdict.iterations = iter;
    if (kind != HullKind::Outside) verdict.distance_bound = current.norm();
    return verdict;
  };

  while (iter < options.max_iterations) {
    const double cur_sq = current.squaredNorm();
    if (std::sqrt(cur_sq) <= tolerance) return finish(HullKind::Inside);

    const Vector s = q * current;  // s_i = q_i . p'
    Index fw = order.front();
    for (Index i : order) {
      if (s(i) < s(fw)) fw = i;
    }
    if (s(fw) > 0.5 * cur_sq) {
      // No pivot: the bisector of [p', target] separates the target.
      verdict.pivot = current + target;
      verdict.direction = -current / std::sqrt(cur_sq);
      verdict.distance_bound = s(fw) / std::sqrt(cur_sq);
      return finish(HullKind::Outside);
    }
    if (std::find(active.begin(), active.end(), fw) != active.end()) {
      // The active set already holds the best pivot; round-off stalled progress.
      break;
    }

    const Index k = static_cast<Index>(active.size());
    Matrix grown(k + 1, k + 1);
    grown.topLeftCorner(k, k) = gram;
    for (Index a = 0; a < k; ++a) {
      grown(a, k) = grown(k, a) = q.row(active[static_cast<std::size_t>(a)]).dot(q.row(fw));
    }
    grown(k, k) = sq_norms(fw);
    gram = std::move(grown);
    active.push_back(fw);
    lambda.conservativeResize(k + 1);
    lambda(k) = 0.0;
    ++iter;

    // Minor cycle: move toward the affine minimizer, dropping vertices whose
    // weight reaches zero, until it lies inside the active simplex.
    while (iter < options.max_iterations) {
      ++iter;
      const Vector mu = affine_minimizer(gram);
      if ((mu.array() > 0.0).all()) {
        lambda = mu;
        break;
      }
      double theta = 1.0;
      Index blocking = -1;
      for (Index a = 0; a < mu.size(); ++a) {
        if (mu(a) <= 0.0) {
          const double t = lambda(a) / (lambda(a) - mu(a));
          if (t < theta) {
            theta = t;
            blocking = a;
          }
        }
      }
      lambda = (1.0 - theta) * lambda + theta * mu;
      if (blocking >= 0) lambda(blocking) = 0.0;
      for (Index a = lambda.size() - 1; a >= 0; --a) {
        if (lambda(a) <= 0.0) {
          active.erase(active.begin() + a);
          erase_index(gram, a);
          const Index m = lambda.size();
          Vector shorter(m - 1);
          shorter << lambda.head(a), lambda.tail(m - a - 1);
          lambda = shorter;
        }
      }
      lambda /= lambda.sum();
    }

    current = Vector::Zero(q.cols());
    for (std::size_t a = 0; a < active.size(); ++a) {
      current += lambda(static_cast<Index>(a)) * q.row(active[a]).transpose();
    }
  }

  if (current.norm() <= tolerance) return finish(HullKind::Inside);
  return finish(HullKind::Indeterminate);
}

}  // namespace gel
