// Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "simloc/bounds.hpp"
#include "simloc/channel.hpp"
#include "simloc/config.hpp"
#include "simloc/estimation.hpp"
#include "simloc/harness.hpp"
#include "simloc/localizer.hpp"
#include "simloc/simopt.hpp"
#include "testing.hpp"

using namespace simloc;

namespace {

// Pinned tolerances.
constexpr double kFraunhoferLow = 18.5, kFraunhoferHigh = 20.5;
constexpr double kFormTol = 1e-10;
constexpr double kRslsTol = 0.03;
constexpr double kBoxSlack = 1e-12;
constexpr double kGradRelTol = 1e-5;
constexpr double kGradAbsFloor = 1e-8;  // times max |g_i|, for coordinates near zero
constexpr double kDeltaTarget = 0.1;
constexpr int kRequiredStarts = 3;
constexpr double kRatioCap = 1.266;
constexpr double kJacobianTol = 1e-6;
constexpr double kPebLinearTol = 1e-8;
constexpr double kFimThetaTol = 1e-13;
constexpr double kBaselineMargin = 0.9;
constexpr double kZ99 = 2.3263478740408408;  // one-sided 99% normal quantile

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double max_rel(const CMat& a, const CMat& b) { return testing::rel_err(a, b); }

CMat fd_jacobian(const ArrayGeometry& g, const ChannelParams& p) {
  CMat j(g.elements_per_layer(), 4);
  const double steps[4] = {1e-6, 1e-6, 1e-8, 1e-8};
  for (int c = 0; c < 4; ++c) {
    ChannelParams lo = p, hi = p;
    double* fl[4] = {&lo.x, &lo.y, &lo.gain, &lo.phase};
    double* fh[4] = {&hi.x, &hi.y, &hi.gain, &hi.phase};
    *fl[c] -= steps[c];
    *fh[c] += steps[c];
    j.col(c) = (channel_of(g, hi) - channel_of(g, lo)) / (2.0 * steps[c]);
  }
  return j;
}

Outcome geometry_scalars() {
  const ScenarioConfig cfg = paper_scale_preset();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const int n = layout.sim.element_count();
  const double f = fraunhofer_distance(layout.sim);
  return {n == 1792 && f >= kFraunhoferLow && f <= kFraunhoferHigh,
          fmt("elements=%.0f fraunhofer=%.3f m", n, f)};
}

Outcome estimator_forms() {
  SplitMix64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(uniform01(rng) * 63);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(uniform01(rng) * (k - 1));
    const CovarianceModel cov(testing::random_psd(k, rank, rng), 1e-9);
    const Subspace sub = reduce_subspace(cov);
    const double s = 0.05 + uniform01(rng);
    const CVec r = testing::random_complex(k, 1, rng);
    const EstimationReport full = mmse_full(r, cov, s);
    const EstimationReport spec = mmse_spectral(r, cov, s);
    const EstimationReport red = mmse_reduced(sub.target() * r, sub, cov, s);
    worst = std::max({worst, max_rel(spec.h_hat, full.h_hat), max_rel(red.h_hat, full.h_hat),
                      max_rel(spec.error_covariance, full.error_covariance),
                      max_rel(red.error_covariance, full.error_covariance)});
  }
  return {worst <= kFormTol, fmt("max relative difference %.3g over 100 instances", worst)};
}

Outcome rsls_noise_floor() {
  const ScenarioConfig cfg = desk_scale_preset();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const UncertaintyRegion region = cfg.region_model();
  const CovarianceModel cov = estimate_covariance(layout.sim, region, cfg.gains, cfg.covariance);
  const Subspace sub = reduce_subspace(cov, cfg.subspace_dim);
  const double s2 = noise_variance_for_snr(cov, 10.0);
  const LinearEstimator est = make_rsls_ideal(sub, cov.covariance(), s2);
  const ObservationModel obs{ObservationMode::ideal_projection, sub.target(), s2};
  const CMat p = sub.basis * sub.target();
  const int trials = 10000;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    SplitMix64 rng(derive_seed(303, t));
    const CVec h = draw_channel(layout.sim, region, cfg.gains, rng).h;
    const CVec r = h + complex_normal(h.size(), s2, rng);
    sum += (est.apply(obs.matrix(16) * r) - p * h).squaredNorm();
  }
  const double mse = sum / trials, ref = s2 * sub.dim();
  const double rel = std::abs(mse / ref - 1.0);
  return {rel <= kRslsTol, fmt("empirical %.5g vs sigma^2 L = %.5g (rel %.4f)", mse, ref, rel)};
}

Outcome perturbation_bounds() {
  SplitMix64 rng(404);
  int box_fail = 0, ratio_fail = 0, ratio_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index k = 8 + trial % 25, l = 1 + trial % 6;
    const CMat u = testing::random_orthonormal(k, l, rng);
    const CMat d = testing::random_complex(l, k, rng);
    const double du0 = Eigen::JacobiSVD<CMat>(d * u).singularValues()(0);
    const CMat v = u.adjoint() + (0.3 * uniform01(rng) / du0) * d;
    const MismatchMetrics m = mismatch_metrics(v, u);
    const CMat a = v * u;
    const RVec eig = Eigen::SelfAdjointEigenSolver<CMat>(a.adjoint() * a).eigenvalues();
    if (eig.minCoeff() < m.box_low - kBoxSlack || eig.maxCoeff() > m.box_high + kBoxSlack)
      ++box_fail;
    const CMat vo = testing::orthonormalize_rows(v);
    if (mismatch_metrics(vo, u).delta_u <= 0.3) {
      ++ratio_checked;
      if (!mse_ratio_check(vo, u, 0.1 + uniform01(rng)).holds) ++ratio_fail;
    }
  }
  std::ostringstream s;
  s << "box violations " << box_fail << "/1000, ratio violations " << ratio_fail << "/"
    << ratio_checked;
  return {box_fail == 0 && ratio_fail == 0, s.str()};
}

struct DeskTarget {
  SimLayout layout;
  CMat target;
};

DeskTarget desk_target() {
  const ScenarioConfig cfg = desk_scale_preset();
  SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const CovarianceModel cov =
      estimate_covariance(layout.sim, cfg.region_model(), cfg.gains, cfg.covariance);
  return {std::move(layout), reduce_subspace(cov, cfg.subspace_dim).target()};
}

Outcome gradient_check() {
  const DeskTarget d = desk_target();
  SimNetwork net = make_analytic_network(d.layout, AnalyticImpedance{});
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    net.set_eta(random_phases(net.parameter_count(), derive_seed(505, i)));
    const RVec g = gradient(net, d.target);
    const RVec fd = finite_difference_gradient(net, d.target, ScaleMode::combiner);
    const double floor = kGradAbsFloor * g.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < g.size(); ++k)
      worst = std::max(worst, std::abs(g(k) - fd(k)) / (std::abs(g(k)) + floor / kGradRelTol));
  }
  return {worst <= kGradRelTol, fmt("max per-coordinate relative error %.3g (K=16, Q=3)", worst)};
}

Outcome optimizer_target() {
  const DeskTarget d = desk_target();
  SimNetwork net = make_analytic_network(d.layout, AnalyticImpedance{});
  OptimizerConfig cfg;
  cfg.target_delta_u = kDeltaTarget;
  int reached = 0;
  std::ostringstream s;
  s << "delta_U per start:";
  for (int i = 0; i < 5; ++i) {
    OptimizerConfig c = cfg;
    c.seed = derive_seed(606, i);
    net.set_eta(random_phases(net.parameter_count(), c.seed));
    const OptimizationTrace t = optimize(net, d.target, c);
    if (t.converged && t.final_delta_u() <= kDeltaTarget) ++reached;
    s << ' ' << fmt("%.4f", t.final_delta_u());
  }
  s << " (" << reached << "/5 reached)";
  return {reached >= kRequiredStarts, s.str()};
}

Outcome near_indistinguishable() {
  ScenarioConfig cfg = desk_scale_preset();
  cfg.sweep.sim_mode = SimMode::optimize;
  bool ok = true;
  double worst = 0.0, worst_delta = 0.0;
  int unconverged = 0;
  for (double dist : cfg.sweep.distances_m)
    for (double ang : cfg.sweep.angles_rad) {
      const CellModel cell = build_cell(cfg, dist, ang);
      const double du = cell.projection.mismatch.delta_u;
      worst_delta = std::max(worst_delta, du);
      if (du > kDeltaTarget) {
        ++unconverged;
        ok = false;
        continue;
      }
      const double cap = std::min(kRatioCap, mse_ratio_bound(du));
      for (double snr : cfg.snr_db) {
        const auto est = cell_estimators(cell, noise_variance_for_snr(cell.covariance, snr));
        const double mmse = est[2].total_mse() / est[0].total_mse();
        const double rsls = est[3].total_mse() / est[1].total_mse();
        worst = std::max({worst, mmse, rsls});
        if (mmse > cap || rsls > cap) ok = false;
      }
    }
  std::ostringstream s;
  s << fmt("max post-SIM/ideal MSE ratio %.4f, max delta_U %.4f", worst, worst_delta)
    << ", cells above target " << unconverged;
  return {ok, s.str()};
}

Outcome fim_checks() {
  const ScenarioConfig cfg = desk_scale_preset();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const ArrayGeometry paper = build_sim_geometry(paper_scale_preset().geometry_config()).sim;
  double jac = 0.0;
  for (const auto& [geom, p] : {std::pair{&layout.sim, ChannelParams{1.1, 0.3, 0.9, 0.4}},
                                std::pair{&paper, ChannelParams{4.0, -1.2, 1.3, -2.0}}}) {
    const CMat j = channel_jacobian(*geom, p);
    const CMat fd = fd_jacobian(*geom, p);
    for (int c = 0; c < 4; ++c) jac = std::max(jac, max_rel(j.col(c), fd.col(c)));
  }
  const ChannelParams p{1.5, -0.2, 1.7, 0.9};
  const double s2 = 0.04;
  const PebReport a = fim_peb(layout.sim, p, s2);
  const PebReport b = fim_peb(layout.sim, p, 4.0 * s2);
  const double lin = std::abs(b.peb / a.peb - 2.0) / 2.0;
  const double theta_ref = 16.0 * p.gain * p.gain / s2;
  const double theta = std::abs(a.fim(3, 3) - theta_ref) / theta_ref;
  return {jac <= kJacobianTol && lin < kPebLinearTol && theta <= kFimThetaTol,
          fmt("jacobian rel %.3g, PEB linearity rel %.3g, theta-theta rel %.3g", jac, lin, theta)};
}

Outcome ordering() {
  const ScenarioConfig cfg = desk_scale_preset();
  bool ok;
  int baseline_wins = 0, misordered = 0, mismatched = 0;
  double shortest = *std::min_element(cfg.sweep.distances_m.begin(), cfg.sweep.distances_m.end());
  bool wins_at_shortest = false;
  std::vector<double> win_distances;
  for (double dist : cfg.sweep.distances_m)
    for (double ang : cfg.sweep.angles_rad) {
      const CellModel cell = build_cell(cfg, dist, ang);
      for (double snr : cfg.snr_db) {
        const double s2 = noise_variance_for_snr(cell.covariance, snr);
        const auto est = cell_estimators(cell, s2);
        if (est[0].total_mse() > est[1].total_mse() * (1.0 + 1e-12)) ++misordered;
        const bool wins = est[4].total_mse() < kBaselineMargin * est[0].total_mse();
        const bool rich = cell.covariance.rank_above(s2) > cell.subspace.dim();
        if (wins) {
          ++baseline_wins;
          if (std::find(win_distances.begin(), win_distances.end(), dist) == win_distances.end())
            win_distances.push_back(dist);
        }
        if (wins && dist == shortest) wins_at_shortest = true;
        if (wins != rich) ++mismatched;
      }
    }
  const double longest =
      *std::max_element(cfg.sweep.distances_m.begin(), cfg.sweep.distances_m.end());
  const bool wins_at_longest =
      std::find(win_distances.begin(), win_distances.end(), longest) != win_distances.end();
  ok = misordered == 0 && mismatched == 0 && wins_at_shortest && !wins_at_longest;
  std::ostringstream s;
  s << "MMSE>RS-LS cells " << misordered << ", baseline wins " << baseline_wins
    << " (at shortest distance: " << (wins_at_shortest ? "yes" : "no")
    << "), wins not matching effective rank > L: " << mismatched << ", win distances [m]:";
  for (double d : win_distances) s << ' ' << d;
  return {ok, s.str()};
}

Outcome localizer_consistency() {
  const ScenarioConfig cfg = desk_scale_preset();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const UncertaintyRegion region = region_at(1.0, kPi / 6, 0.6);

  // Noiseless, on the coarse grid.
  const std::vector<Point2> grid = coarse_grid(region, cfg.localizer.coarse_grid);
  int exact = 0, exact_total = 0;
  for (std::size_t i = 0; i < grid.size(); i += grid.size() / 20) {
    ++exact_total;
    const CVec h = 0.8 * std::polar(1.0, 1.3) * steering_vector(layout.sim, grid[i]);
    const LocalizationResult r = localize(h, layout.sim, region, cfg.localizer);
    exact += r.position.x == grid[i].x && r.position.y == grid[i].y &&
             std::abs(r.score - 1.0) < 1e-12;
  }

  // Noisy trials at matched sigma_n^2 (per real component).
  const ChannelParams p{region.center().x, region.center().y, 1.0, 0.5};
  const double unit_peb = fim_peb(layout.sim, p, 1.0).peb;
  const double target_peb = 5e-3;
  const double s2 = std::pow(target_peb / unit_peb, 2);
  const double peb = fim_peb(layout.sim, p, s2).peb;
  const CVec h0 = channel_of(layout.sim, p);
  const int trials = 1000;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    SplitMix64 rng(derive_seed(1010, t));
    const CVec r = h0 + complex_normal(h0.size(), 2.0 * s2, rng);
    const double e2 =
        std::pow(distance(localize(r, layout.sim, region, cfg.localizer).position, {p.x, p.y}), 2);
    sum += e2;
    sum_sq += e2 * e2;
  }
  const double mse = sum / trials;
  const double se = std::sqrt(std::max(sum_sq / trials - mse * mse, 0.0) / (trials - 1.0));
  const double z = (peb * peb - mse) / se;
  std::ostringstream s;
  s << "on-grid exact " << exact << "/" << exact_total
    << fmt(", RMSE %.4g m vs PEB %.4g m (z = %.2f)", std::sqrt(mse), peb, z);
  return {exact == exact_total && z < kZ99, s.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"geometry scalars", 1, geometry_scalars},
      {"estimator form equivalence", 30, estimator_forms},
      {"RS-LS ideal MSE", 60, rsls_noise_floor},
      {"perturbation bounds", 60, perturbation_bounds},
      {"gradient correctness", 300, gradient_check},
      {"SIM optimization target", 900, optimizer_target},
      {"near-indistinguishability", 300, near_indistinguishable},
      {"FIM/PEB correctness", 30, fim_checks},
      {"ordering properties", 600, ordering},
      {"localizer consistency", 600, localizer_consistency},
  };
  int failed = 0, index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget_s;
    failed += !pass;
    std::printf("criterion %2d %s: %s  %s [%.2f s, budget %.0f s]\n", index, pass ? "PASS" : "FAIL",
                c.name, o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
