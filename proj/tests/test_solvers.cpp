#include "gel/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gel {
namespace {

MomentMatrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return wrap_user_moments(m);
}

// Rows x_i - c where c is a random strictly convex combination of the x_i,
// so the returned weights are an interior feasible point.
std::pair<MomentMatrix, Vector> interior_instance(Index n, Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Matrix x(n, p);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  Vector a(n);
  for (Index i = 0; i < n; ++i) a(i) = u(rng);
  a /= a.sum();
  const Vector c = x.transpose() * a;
  return {wrap_user_moments(x.rowwise() - c.transpose()), a};
}

double el_primal(const Vector& pi) {
  const double n = static_cast<double>(pi.size());
  return -(pi.array() * n).log().sum() / n;
}

double et_primal(const Vector& pi) {
  const double n = static_cast<double>(pi.size());
  double total = 0.0;
  for (Index i = 0; i < pi.size(); ++i) {
    if (pi(i) > 0.0) total += pi(i) * std::log(n * pi(i));
  }
  return total;
}

// Direct primal minimization over {pi : M^T pi = 0, sum pi = 1}, parametrized
// as pi = start + N z with N a null-space basis, by damped Newton that keeps
// pi strictly positive.
double primal_oracle(const Matrix& m, const Vector& start, bool et) {
  const Index n = m.rows();
  Matrix a(m.cols() + 1, n);
  a << m.transpose(), Matrix::Ones(1, n);
  const Eigen::FullPivLU<Matrix> lu(a);
  const Matrix basis = lu.kernel();
  auto objective = [&](const Vector& pi) { return et ? et_primal(pi) : el_primal(pi); };
  Vector pi = start;
  const double dn = static_cast<double>(n);
  for (int iter = 0; iter < 500; ++iter) {
    Vector grad(n), curv(n);
    for (Index i = 0; i < n; ++i) {
      if (et) {
        grad(i) = std::log(dn * pi(i)) + 1.0;
        curv(i) = 1.0 / pi(i);
      } else {
        grad(i) = -1.0 / (dn * pi(i));
        curv(i) = 1.0 / (dn * pi(i) * pi(i));
      }
    }
    const Vector gz = basis.transpose() * grad;
    if (gz.norm() < 1e-13) break;
    const Matrix hz = basis.transpose() * curv.asDiagonal() * basis;
    const Vector dir = basis * hz.ldlt().solve(-gz);
    double t = 1.0;
    for (Index i = 0; i < n; ++i) {
      if (dir(i) < 0.0) t = std::min(t, -0.99 * pi(i) / dir(i));
    }
    const double f0 = objective(pi);
    while (t > 1e-16 && objective(pi + t * dir) > f0) t *= 0.5;
    pi += t * dir;
  }
  return objective(pi);
}

TEST(ModifiedLog, BranchesAndContinuity) {
  EXPECT_DOUBLE_EQ(modified_log(1.0, 2), 0.0);
  for (Index n : {1, 2, 7, 1000}) {
    const double z = 1.0 / static_cast<double>(n);
    const double lo = std::nextafter(z, 0.0);
    EXPECT_NEAR(modified_log(z, n), std::log(z), 1e-12);
    EXPECT_NEAR(modified_log(lo, n), std::log(z), 1e-9);
    EXPECT_NEAR(modified_log_d1(z, n), static_cast<double>(n), 1e-9);
    EXPECT_NEAR(modified_log_d1(lo, n), static_cast<double>(n), 1e-6);
    EXPECT_NEAR(modified_log_d2(lo, n), modified_log_d2(z, n), 1e-6 * n * n);
  }
  // Finite for non-positive arguments.
  EXPECT_TRUE(std::isfinite(modified_log(-3.0, 5)));
}

TEST(Wilks, DirectEvaluation) {
  EXPECT_DOUBLE_EQ(wilks_statistic(Vector::Constant(4, 0.25)), 0.0);
  EXPECT_NEAR(wilks_statistic((Vector(2) << 0.75, 0.25).finished()), -2.0 * std::log(0.75), 1e-12);
  EXPECT_NEAR(wilks_statistic((Vector(2) << 0.75, 0.25).finished()), 0.57536, 1e-5);
  EXPECT_TRUE(std::isinf(wilks_statistic((Vector(2) << 1.0, 0.0).finished())));
}

TEST(Config, Validation) {
  SolverConfig bad;
  bad.grad_tolerance = -1.0;
  EXPECT_THROW(bad.validate(), GelError);
  SolverConfig zero_iters;
  zero_iters.max_iterations = 0;
  EXPECT_THROW(zero_iters.validate(), GelError);
  EXPECT_NO_THROW(SolverConfig{}.validate());
  EXPECT_EQ(parse_divergence("el"), DivergenceKind::EmpiricalLikelihood);
  EXPECT_EQ(parse_divergence("et"), DivergenceKind::ExponentialTilting);
  EXPECT_EQ(parse_divergence("euclidean"), DivergenceKind::Euclidean);
  EXPECT_THROW(parse_divergence("chi2"), GelError);
}

TEST(SolveEl, ZeroRowsAreUniform) {
  const GelSolution s = solve_el(wrap_user_moments(Matrix::Zero(5, 3)));
  ASSERT_TRUE(s.converged());
  EXPECT_LE((s.weights.array() - 0.2).abs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(s.divergence_nats, 0.0);
  EXPECT_DOUBLE_EQ(s.score, 1.0);
}

TEST(SolveEl, TwoPointAnalytic) {
  const GelSolution s = solve_el(column({-1, 3}));
  ASSERT_TRUE(s.converged());
  EXPECT_NEAR(s.weights(0), 0.75, 1e-8);
  EXPECT_NEAR(s.weights(1), 0.25, 1e-8);
  EXPECT_NEAR(s.divergence_nats, 0.5 * std::log(4.0 / 3.0), 1e-10);
  EXPECT_NEAR(s.divergence_nats, 0.14384, 1e-5);
  EXPECT_NEAR(s.divergence_bits, s.divergence_nats / std::log(2.0), 1e-12);
  EXPECT_NEAR(s.score, std::pow(2.0, s.divergence_bits), 1e-12);
  EXPECT_NEAR(s.wilks, 0.57536, 1e-5);
  EXPECT_NEAR(wilks_statistic(s), s.wilks, 1e-12);
  EXPECT_EQ(s.hessian_rank, 1);
}

TEST(SolveEl, OutsideHullFails) {
  const GelSolution s = solve_el(column({1, 2}));
  EXPECT_EQ(s.status, SolveStatus::HullFail);
  EXPECT_TRUE(std::isinf(s.divergence_nats));
  EXPECT_TRUE(std::isinf(s.score));
  EXPECT_TRUE(std::isinf(wilks_statistic(s)));
}

TEST(SolveEl, BoundaryDiverges) {
  const GelSolution s = solve_el(column({0, 2}));
  EXPECT_EQ(s.status, SolveStatus::DivergedInfinite);
  EXPECT_TRUE(std::isinf(s.divergence_nats));
  EXPECT_TRUE(std::isinf(s.score));
}

TEST(SolveEl, MaxIterationsReportedDistinctly) {
  SolverConfig config;
  config.max_iterations = 1;
  const GelSolution s = solve_el(column({-1, 3}), config);
  EXPECT_EQ(s.status, SolveStatus::MaxIterations);
  EXPECT_EQ(s.iterations, 1);
}

TEST(SolveEt, ZeroRowsAreUniform) {
  const GelSolution s = solve_et(wrap_user_moments(Matrix::Zero(4, 2)));
  ASSERT_TRUE(s.converged());
  EXPECT_LE((s.weights.array() - 0.25).abs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(s.divergence_nats, 0.0);
}

TEST(SolveEt, TwoPointAnalytic) {
  const GelSolution s = solve_et(column({-1, 3}));
  ASSERT_TRUE(s.converged());
  EXPECT_NEAR(s.weights(0), 0.75, 1e-8);
  EXPECT_NEAR(s.weights(1), 0.25, 1e-8);
  EXPECT_NEAR(s.divergence_nats, 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-8);
  EXPECT_NEAR(s.divergence_nats, 0.13082, 1e-5);
}

TEST(SolveEt, BoundaryLimit) {
  const GelSolution s = solve_et(column({0, 2}));
  ASSERT_NE(s.status, SolveStatus::HullFail);
  ASSERT_EQ(s.weights.size(), 2);
  EXPECT_NEAR(s.weights(0), 1.0, 1e-6);
  EXPECT_NEAR(s.weights(1), 0.0, 1e-6);
  EXPECT_NEAR(s.divergence_nats, std::log(2.0), 1e-4);
}

TEST(SolveEt, OutsideHullFails) {
  const GelSolution s = solve_et(column({1, 2}));
  EXPECT_EQ(s.status, SolveStatus::HullFail);
  EXPECT_TRUE(std::isinf(s.score));
}

TEST(SolveEuclidean, ZeroRowsAreUniform) {
  const GelSolution s = solve_euclidean(wrap_user_moments(Matrix::Zero(4, 2)));
  ASSERT_TRUE(s.converged());
  EXPECT_LE((s.weights.array() - 0.25).abs().maxCoeff(), 1e-15);
  EXPECT_NEAR(s.divergence_nats, 0.0, 1e-30);
}

TEST(SolveEuclidean, TwoPointAnalytic) {
  const GelSolution s = solve_euclidean(column({-1, 3}));
  ASSERT_TRUE(s.converged());
  EXPECT_NEAR(s.weights(0), 0.75, 1e-12);
  EXPECT_NEAR(s.weights(1), 0.25, 1e-12);
  EXPECT_NEAR(s.divergence_nats, 1.0 / 16.0, 1e-12);
  ASSERT_TRUE(s.hotelling_t2);
  EXPECT_NEAR(*s.hotelling_t2, 0.25, 1e-12);
}

TEST(SolveEuclidean, OutsideHullHasNegativeWeights) {
  const GelSolution s = solve_euclidean(column({1, 2}));
  ASSERT_TRUE(s.converged());
  EXPECT_NEAR(s.weights(0), 2.0, 1e-12);
  EXPECT_NEAR(s.weights(1), -1.0, 1e-12);
  EXPECT_NEAR(s.divergence_nats, 2.25, 1e-12);
}

TEST(SolveEuclidean, InconsistentSystemIsSingular) {
  try {
    solve_euclidean(column({1, 1}));
    FAIL();
  } catch (const GelError& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularHessian);
  }
}

TEST(SolveEuclidean, HotellingIdentity) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  const Index n = 50, p = 5;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix m(n, p);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng) + 0.1;
    const GelSolution s = solve_euclidean(wrap_user_moments(m));
    ASSERT_TRUE(s.converged());
    const Vector mean = m.colwise().mean().transpose();
    const Matrix centered = m.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
    const double t2 = static_cast<double>(n) * mean.dot(cov.ldlt().solve(mean));
    const double from_objective = s.divergence_nats * 2.0 * n * (n - 1);
    EXPECT_NEAR(from_objective / t2, 1.0, 1e-8);
    EXPECT_NEAR(*s.hotelling_t2 / t2, 1.0, 1e-8);
  }
}

TEST(Dispatch, SolveSelectsMember) {
  EXPECT_EQ(solve(DivergenceKind::EmpiricalLikelihood, column({-1, 3})).kind,
            DivergenceKind::EmpiricalLikelihood);
  EXPECT_EQ(solve(DivergenceKind::ExponentialTilting, column({-1, 3})).kind,
            DivergenceKind::ExponentialTilting);
  EXPECT_EQ(solve(DivergenceKind::Euclidean, column({-1, 3})).kind, DivergenceKind::Euclidean);
}

TEST(Feasibility, ConvergedSolutionsSatisfyConstraints) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const auto [moments, interior] = interior_instance(30, 4, rng);
    for (auto kind : {DivergenceKind::EmpiricalLikelihood, DivergenceKind::ExponentialTilting,
                      DivergenceKind::Euclidean}) {
      const GelSolution s = solve(kind, moments);
      ASSERT_TRUE(s.converged()) << divergence_name(kind) << " trial " << trial;
      EXPECT_NEAR(s.weights.sum(), 1.0, 1e-9);
      const Vector residual = moments.rows.transpose() * s.weights;
      EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-6);
      if (kind == DivergenceKind::EmpiricalLikelihood) EXPECT_GT(s.weights.minCoeff(), 0.0);
      if (kind == DivergenceKind::ExponentialTilting) EXPECT_GE(s.weights.minCoeff(), -1e-12);
    }
  }
}

TEST(DualPrimal, SimplexGridOracle) {
  // n = 3, p = 1: the feasible set is a segment, scanned on a fine grid.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto [moments, interior] = interior_instance(3, 1, rng);
    const Vector m = moments.rows.col(0);
    double best_el = std::numeric_limits<double>::infinity();
    double best_et = std::numeric_limits<double>::infinity();
    const int steps = 200000;
    for (int k = 1; k < steps; ++k) {
      // pi_0 on a grid; pi_1, pi_2 from the two equality constraints.
      const double p0 = static_cast<double>(k) / steps;
      const double rest = 1.0 - p0;
      const double det = m(1) - m(2);
      if (std::abs(det) < 1e-12) continue;
      const double p1 = (-p0 * m(0) - rest * m(2)) / det;
      const double p2 = rest - p1;
      if (p1 < 0.0 || p2 < 0.0) continue;
      const Vector pi = (Vector(3) << p0, p1, p2).finished();
      best_et = std::min(best_et, et_primal(pi));
      if (p1 > 0.0 && p2 > 0.0) best_el = std::min(best_el, el_primal(pi));
    }
    const GelSolution el = solve_el(moments);
    const GelSolution et = solve_et(moments);
    ASSERT_TRUE(el.converged());
    ASSERT_TRUE(et.converged());
    EXPECT_NEAR(el.divergence_nats, best_el, 1e-3);
    EXPECT_NEAR(et.divergence_nats, best_et, 1e-3);
    EXPECT_LE(el.divergence_nats, best_el + 1e-9);
    EXPECT_LE(et.divergence_nats, best_et + 1e-9);
  }
}

TEST(DualPrimal, TwoDimensionalSimplexGridOracle) {
  // n = 4, p = 1: a 2-D grid over (pi_0, pi_1).
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [moments, interior] = interior_instance(4, 1, rng);
    const Vector m = moments.rows.col(0);
    double best_el = std::numeric_limits<double>::infinity();
    double best_et = std::numeric_limits<double>::infinity();
    const int steps = 1000;
    const double det = m(2) - m(3);
    for (int a = 1; a < steps; ++a) {
      for (int b = 1; a + b < steps; ++b) {
        const double p0 = static_cast<double>(a) / steps;
        const double p1 = static_cast<double>(b) / steps;
        const double rest = 1.0 - p0 - p1;
        const double p2 = (-p0 * m(0) - p1 * m(1) - rest * m(3)) / det;
        const double p3 = rest - p2;
        if (p2 <= 0.0 || p3 <= 0.0) continue;
        const Vector pi = (Vector(4) << p0, p1, p2, p3).finished();
        best_et = std::min(best_et, et_primal(pi));
        best_el = std::min(best_el, el_primal(pi));
      }
    }
    EXPECT_NEAR(solve_el(moments).divergence_nats, best_el, 1e-3);
    EXPECT_NEAR(solve_et(moments).divergence_nats, best_et, 1e-3);
  }
}

TEST(DualPrimal, PrimalNewtonOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<Index> size(4, 12);
  std::uniform_int_distribution<Index> dims(1, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = size(rng);
    const Index p = dims(rng);
    const auto [moments, interior] = interior_instance(n, p, rng);
    const GelSolution el = solve_el(moments);
    const GelSolution et = solve_et(moments);
    ASSERT_TRUE(el.converged());
    ASSERT_TRUE(et.converged());
    EXPECT_NEAR(el.divergence_nats, primal_oracle(moments.rows, interior, false), 1e-3);
    EXPECT_NEAR(et.divergence_nats, primal_oracle(moments.rows, interior, true), 1e-3);
  }
}

TEST(Properties, MonotoneElDualAscent) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [moments, interior] = interior_instance(40, 3, rng);
    const GelSolution s = solve_el(moments);
    ASSERT_GE(s.dual_trace.size(), 1u);
    for (std::size_t k = 1; k < s.dual_trace.size(); ++k) {
      EXPECT_GE(s.dual_trace[k], s.dual_trace[k - 1] - 1e-12 * std::abs(s.dual_trace[k - 1]));
    }
  }
}

TEST(Properties, PermutationInvariance) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto [moments, interior] = interior_instance(25, 3, rng);
    std::vector<Index> perm(25);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix shuffled(25, 3);
    for (Index i = 0; i < 25; ++i) shuffled.row(i) = moments.rows.row(perm[static_cast<std::size_t>(i)]);
    for (auto kind : {DivergenceKind::EmpiricalLikelihood, DivergenceKind::ExponentialTilting,
                      DivergenceKind::Euclidean}) {
      const GelSolution a = solve(kind, moments);
      const GelSolution b = solve(kind, wrap_user_moments(shuffled));
      ASSERT_TRUE(a.converged());
      ASSERT_TRUE(b.converged());
      for (Index i = 0; i < 25; ++i) {
        EXPECT_NEAR(b.weights(i), a.weights(perm[static_cast<std::size_t>(i)]), 1e-10);
      }
      EXPECT_NEAR(a.divergence_nats, b.divergence_nats, 1e-10);
    }
  }
}

TEST(Properties, ZeroWeightOnDisjointBlock) {
  // Kept points and the target share the first block; dropped points are
  // positive only in the second, so the mean constraint zeroes them.
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 1.0);
  const Index kept = 400, dropped = 200, block = 3;
  Matrix x = Matrix::Zero(kept + dropped, 2 * block);
  for (Index i = 0; i < kept; ++i) {
    for (Index j = 0; j < block; ++j) x(i, j) = 10.0 + g(rng);
  }
  for (Index i = kept; i < kept + dropped; ++i) {
    for (Index j = block; j < 2 * block; ++j) x(i, j) = 10.0 + g(rng);
  }
  Vector c = Vector::Zero(2 * block);
  c.head(block) = x.topRows(kept).leftCols(block).colwise().mean().transpose() +
                  Vector::Constant(block, 0.05);
  const MomentMatrix moments = build_mean_moments(FeatureSet::from_matrix(x), c);
  const GelSolution s = solve_et(moments);
  ASSERT_TRUE(s.converged());
  // The weighted mean of the moments equals the dual gradient divided by
  // exp(-KL). Its dropped block is at least the dropped mass times the
  // smallest entry there, so the tolerance bounds that mass.
  const double smallest = x.bottomRightCorner(dropped, block).minCoeff();
  const double bound = SolverConfig{}.grad_tolerance * std::exp(s.divergence_nats) / smallest;
  EXPECT_GE(s.weights.tail(dropped).minCoeff(), 0.0);
  EXPECT_LE(s.weights.tail(dropped).sum(), bound);
  EXPECT_NEAR(s.weights.head(kept).sum(), 1.0, bound);
  EXPECT_FALSE(solve_el(moments).converged());
}

TEST(Properties, WeightsIgnoreColumnMagnitude) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    const auto [moments, interior] = interior_instance(40, 3, rng);
    Matrix huge = moments.rows;
    huge.col(0) *= 1e30;
    huge.col(2) *= 1e-20;
    for (auto kind : {DivergenceKind::EmpiricalLikelihood, DivergenceKind::ExponentialTilting,
                      DivergenceKind::Euclidean}) {
      const GelSolution a = solve(kind, moments);
      const GelSolution b = solve(kind, wrap_user_moments(huge));
      ASSERT_TRUE(a.converged());
      ASSERT_TRUE(b.converged()) << divergence_name(kind);
      EXPECT_LE((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Properties, Deterministic) {
  std::mt19937_64 rng(15);
  const auto [moments, interior] = interior_instance(30, 3, rng);
  const GelSolution a = solve_et(moments);
  const GelSolution b = solve_et(moments);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.iterations, b.iterations);
}

}  // namespace
}  // namespace gel
