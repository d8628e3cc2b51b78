#include <cmath>
#include <sstream>

#include "doctest.h"
#include "simloc/bounds.hpp"
#include "simloc/channel.hpp"
#include "simloc/error.hpp"
#include "simloc/simopt.hpp"
#include "testing.hpp"

using namespace simloc;

namespace {

struct Desk {
  SimLayout layout = testing::desk_layout();
  SimNetwork net = make_analytic_network(layout, AnalyticImpedance{});
  CMat u;

  explicit Desk(double distance = 1.0) {
    const CovarianceModel cov = estimate_covariance(layout.sim, region_at(distance, 0.3, 0.6),
                                                    GainModel{}, {4000, 1, 1e-6});
    u = reduce_subspace(cov, 4).basis;
  }
};

double oracle_objective(const CMat& v, const CMat& t, ScaleMode mode) {
  CMat b = CMat::Identity(v.rows(), v.rows());
  if (mode == ScaleMode::scalar) {
    cplx num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        num += std::conj(v(i, j)) * t(i, j);
        den += std::norm(v(i, j));
      }
    b *= num / den;
  } else if (mode == ScaleMode::combiner) {
    b = t * v.adjoint() * (v * v.adjoint()).inverse();
  }
  const CMat bv = b * v;
  double e = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) e += std::norm(bv(i, j) - t(i, j));
  return e;
}

}  // namespace

TEST_SUITE("simopt") {

TEST_CASE("objective vanishes on the target and equals L at V = 0") {
  Desk d;
  d.net.set_eta(random_phases(48, 3));
  const CMat v = d.net.effective_projection();
  for (ScaleMode m : {ScaleMode::none, ScaleMode::scalar, ScaleMode::combiner})
    CHECK(objective(d.net, v, m) < 1e-24);

  const SimNetwork silent(d.net.static_impedance(), CMat::Zero(4, 96), 16, 3);
  for (ScaleMode m : {ScaleMode::none, ScaleMode::scalar, ScaleMode::combiner})
    CHECK(objective(silent, d.u.adjoint(), m) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("objective matches the elementwise-sum oracle") {
  Desk d;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    d.net.set_eta(random_phases(48, s));
    const CMat v = d.net.effective_projection();
    for (ScaleMode m : {ScaleMode::none, ScaleMode::scalar, ScaleMode::combiner}) {
      const double oracle = oracle_objective(v, d.u.adjoint(), m);
      CHECK(std::abs(objective(d.net, d.u.adjoint(), m) - oracle) <= 1e-12 * std::max(oracle, 1.0));
    }
  }
}

TEST_CASE("gradient vanishes at a stationary point") {
  Desk d;
  d.net.set_eta(random_phases(48, 5));
  const CMat v = d.net.effective_projection();
  for (ScaleMode m : {ScaleMode::none, ScaleMode::combiner})
    CHECK(gradient(d.net, v, m).norm() <= 1e-8);
}

TEST_CASE("gradient matches central differences per coordinate") {
  Desk d;
  for (std::uint64_t s = 11; s <= 13; ++s) {
    d.net.set_eta(random_phases(48, s));
    for (ScaleMode m : {ScaleMode::none, ScaleMode::scalar, ScaleMode::combiner}) {
      const RVec g = gradient(d.net, d.u.adjoint(), m);
      const RVec fd = finite_difference_gradient(d.net, d.u.adjoint(), m, 1e-5);
      for (Eigen::Index i = 0; i < g.size(); ++i)
        CHECK(std::abs(g(i) - fd(i)) <= 1e-5 * std::abs(fd(i)) + 1e-9);
    }
  }
}

TEST_CASE("doubling the objective doubles the gradient") {
  Desk d;
  d.net.set_eta(random_phases(48, 8));
  // sqrt(2) on both the coupling and the target turns E into 2E.
  const SimNetwork twice(d.net.static_impedance(), std::sqrt(2.0) * d.net.coupling(), 16, 3,
                         CellLoad{}, d.net.eta());
  const CMat t = d.u.adjoint();
  CHECK(objective(twice, std::sqrt(2.0) * t, ScaleMode::none) ==
        doctest::Approx(2.0 * objective(d.net, t, ScaleMode::none)));
  const RVec g1 = gradient(d.net, t, ScaleMode::none);
  const RVec g2 = gradient(twice, std::sqrt(2.0) * t, ScaleMode::none);
  CHECK((g2 - 2.0 * g1).norm() <= 1e-12 * g1.norm());
}

TEST_CASE("random phases lie in (-pi, pi] and are seeded") {
  const RVec a = random_phases(1000, 4);
  CHECK(a.maxCoeff() <= kPi);
  CHECK(a.minCoeff() > -kPi);
  CHECK(random_phases(1000, 4) == a);
  CHECK(random_phases(1000, 5) != a);
}

TEST_CASE("optimizer reaches the subspace mismatch target on the desk network") {
  Desk d;
  OptimizerConfig cfg;
  d.net.set_eta(random_phases(48, 1));
  const OptimizationTrace t = optimize(d.net, d.u.adjoint(), cfg);
  CHECK(t.converged);
  CHECK(t.final_delta_u() <= 0.1);
  CHECK(t.final_eta == d.net.eta());
  const MismatchMetrics m = mismatch_metrics(t.projection, d.u);
  CHECK(m.delta_u == doctest::Approx(t.final_delta_u()));
  const CMat v = d.net.effective_projection();
  CHECK(testing::rel_err(t.combiner * v, t.projection) < 1e-12);
}

TEST_CASE("already satisfied target takes no iterations") {
  Desk d;
  OptimizerConfig cfg;
  cfg.target_delta_u = std::numeric_limits<double>::infinity();
  d.net.set_eta(random_phases(48, 2));
  const RVec start = d.net.eta();
  const OptimizationTrace t = optimize(d.net, d.u.adjoint(), cfg);
  CHECK(t.iterations() == 0);
  CHECK(t.converged);
  CHECK(d.net.eta() == start);

  // Target equal to the current projection: stationary and converged at once.
  OptimizerConfig tight;
  const OptimizationTrace s = optimize(d.net, d.net.effective_projection(), tight);
  CHECK(s.iterations() == 0);
  CHECK(s.converged);
}

TEST_CASE("accepted steps never increase the objective") {
  Desk d(2.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    OptimizerConfig cfg;
    cfg.max_iters = 40;
    cfg.method = seed % 2 ? DescentMethod::lbfgs : DescentMethod::gradient;
    d.net.set_eta(random_phases(48, seed));
    const OptimizationTrace t = optimize(d.net, d.u.adjoint(), cfg);
    REQUIRE(t.rows.size() >= 2);
    for (std::size_t i = 1; i < t.rows.size(); ++i)
      CHECK(t.rows[i].objective <= t.rows[i - 1].objective);
    CHECK(t.rows.back().objective < t.rows.front().objective);
  }
}

TEST_CASE("equal seeds give identical traces") {
  Desk d;
  OptimizerConfig cfg;
  cfg.max_iters = 60;
  d.net.set_eta(random_phases(48, 9));
  const OptimizationTrace a = optimize(d.net, d.u.adjoint(), cfg);
  d.net.set_eta(random_phases(48, 9));
  const OptimizationTrace b = optimize(d.net, d.u.adjoint(), cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].objective == b.rows[i].objective);
    CHECK(a.rows[i].step == b.rows[i].step);
  }
  CHECK(a.final_eta == b.final_eta);

  const OptimizationTrace m1 = optimize_multistart(d.net, d.u.adjoint(), cfg, 2);
  const OptimizationTrace m2 = optimize_multistart(d.net, d.u.adjoint(), cfg, 2);
  CHECK(m1.final_eta == m2.final_eta);
}

TEST_CASE("periodic gradient checks agree with finite differences") {
  Desk d;
  OptimizerConfig cfg;
  cfg.max_iters = 30;
  cfg.gradient_check_period = 10;
  d.net.set_eta(random_phases(48, 4));
  const OptimizationTrace t = optimize(d.net, d.u.adjoint(), cfg);
  int checked = 0;
  for (const TraceRow& r : t.rows)
    if (!std::isnan(r.gradient_check)) {
      ++checked;
      CHECK(r.gradient_check < 1e-4);
    }
  CHECK(checked >= 1);
}

TEST_CASE("trace CSV and failure modes") {
  Desk d;
  OptimizerConfig cfg;
  cfg.max_iters = 3;
  d.net.set_eta(random_phases(48, 6));
  const OptimizationTrace t = optimize(d.net, d.u.adjoint(), cfg);
  CHECK_FALSE(t.converged);
  std::ostringstream out;
  write_trace_csv(out, t);
  CHECK(out.str().rfind("iteration,objective,delta_U,delta_rel,step\n", 0) == 0);

  CMat nan_target = d.u.adjoint();
  nan_target(0, 0) = std::nan("");
  CHECK_THROWS_AS(optimize(d.net, nan_target, cfg), OptimizationError);
  CHECK_THROWS_AS(optimize(d.net, CMat::Zero(3, 16), cfg), DimensionError);
  OptimizerConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = OptimizerConfig{};
  bad.target_delta_u = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE
