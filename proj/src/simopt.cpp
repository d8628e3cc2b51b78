#include "simloc/simopt.hpp"

#include <cmath>
#include <deque>
#include <ostream>

#include "simloc/bounds.hpp"
#include "simloc/error.hpp"

namespace simloc {

void OptimizerConfig::validate() const {
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative", "max_iters");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive", "step_size");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw ConfigError("backtrack factor must lie in (0, 1)", "backtrack");
  if (max_halvings < 0) throw ConfigError("max_halvings must be nonnegative", "max_halvings");
  if (!(target_delta_u >= 0.0)) throw ConfigError("target_delta_U must be >= 0", "target_delta_U");
  if (gradient_check_period < 0)
    throw ConfigError("gradient_check_period must be nonnegative", "gradient_check_period");
  if (lbfgs_memory < 1) throw ConfigError("lbfgs_memory must be positive", "lbfgs_memory");
}

ScaleMode parse_scale_mode(const std::string& s) {
  if (s == "none") return ScaleMode::none;
  if (s == "scalar") return ScaleMode::scalar;
  if (s == "combiner") return ScaleMode::combiner;
  throw ConfigError("unknown scale mode '" + s + "'", "scale");
}

DescentMethod parse_descent_method(const std::string& s) {
  if (s == "gradient") return DescentMethod::gradient;
  if (s == "lbfgs") return DescentMethod::lbfgs;
  throw ConfigError("unknown descent method '" + s + "'", "method");
}

std::string to_string(ScaleMode m) {
  switch (m) {
    case ScaleMode::none: return "none";
    case ScaleMode::scalar: return "scalar";
    case ScaleMode::combiner: return "combiner";
  }
  return "combiner";
}

std::string to_string(DescentMethod m) {
  return m == DescentMethod::gradient ? "gradient" : "lbfgs";
}

RVec random_phases(int count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RVec eta(count);
  // 1 - u lies in (0, 1], so pi - 2 pi u covers (-pi, pi].
  for (int i = 0; i < count; ++i) eta(i) = kPi - 2.0 * kPi * uniform01(rng);
  return eta;
}

Alignment align(const CMat& v, const CMat& target, ScaleMode mode) {
  if (v.rows() != target.rows() || v.cols() != target.cols())
    throw DimensionError("projection and target shapes differ");
  const Eigen::Index l = v.rows();
  Alignment a;
  switch (mode) {
    case ScaleMode::none:
      a.combiner = CMat::Identity(l, l);
      break;
    case ScaleMode::scalar: {
      const double vv = v.squaredNorm();
      const cplx c = vv > 0.0 ? v.conjugate().cwiseProduct(target).sum() / vv : cplx{0.0};
      a.combiner = c * CMat::Identity(l, l);
      break;
    }
    case ScaleMode::combiner: {
      // B = U^H V^H (V V^H)^+ minimises ||B V - U^H||_F.
      const CMat gram = v * v.adjoint();
      a.combiner = gram.completeOrthogonalDecomposition().solve(v * target.adjoint()).adjoint();
      break;
    }
  }
  a.aligned = a.combiner * v;
  a.residual = a.aligned - target;
  a.value = a.residual.squaredNorm();
  return a;
}

double objective(const SimNetwork& net, const CMat& target, ScaleMode mode) {
  return align(net.effective_projection(), target, mode).value;
}

RVec gradient(const SimNetwork& net, const CMat& target, ScaleMode mode) {
  const CMat y = net.input_response();  // T E_in
  const Alignment a = align(net.coupling() * y, target, mode);
  // W = B C_out T = (T (B C_out)^T)^T since T is symmetric.
  const CMat w = net.solve((a.combiner * net.coupling()).transpose()).transpose();
  const CMat m = a.residual.adjoint() * w;  // K x 2QK
  const CVec diag = y.cwiseProduct(m.transpose()).rowwise().sum();

  RVec g(net.parameter_count());
  for (int cell = 0; cell < net.parameter_count(); ++cell) {
    const double xp = net.load().derivative(net.eta()(cell));
    const cplx s = diag(2 * cell) + diag(2 * cell + 1);
    g(cell) = -2.0 * (cplx{0.0, xp} * s).real();
  }
  return g;
}

RVec finite_difference_gradient(SimNetwork& net, const CMat& target, ScaleMode mode,
                                double step) {
  const RVec eta = net.eta();
  RVec g(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    RVec e = eta;
    e(i) = eta(i) + step;
    net.set_eta(e);
    const double fp = objective(net, target, mode);
    e(i) = eta(i) - step;
    net.set_eta(e);
    const double fm = objective(net, target, mode);
    g(i) = (fp - fm) / (2.0 * step);
  }
  net.set_eta(eta);
  return g;
}

namespace {

struct Evaluation {
  double value;
  double delta_u;
  double delta_rel;
  Alignment alignment;
};

Evaluation evaluate(const SimNetwork& net, const CMat& target, ScaleMode mode) {
  Alignment a = align(net.effective_projection(), target, mode);
  if (!std::isfinite(a.value)) throw OptimizationError("objective is not finite");
  const MismatchMetrics m = mismatch_metrics(a.aligned, target.adjoint());
  return {a.value, m.delta_u, m.delta_rel, std::move(a)};
}

// Largest relative coordinate error of the analytic gradient.
double gradient_check(SimNetwork& net, const CMat& target, ScaleMode mode, const RVec& g) {
  const RVec fd = finite_difference_gradient(net, target, mode);
  const double floor = 1e-8 * std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    worst = std::max(worst, std::abs(fd(i) - g(i)) / std::max(std::abs(g(i)), floor));
  return worst;
}

// Two-loop recursion; returns -H g.
RVec lbfgs_direction(const RVec& g, const std::deque<RVec>& s, const std::deque<RVec>& y) {
  const std::size_t m = s.size();
  std::vector<double> alpha(m), rho(m);
  RVec q = g;
  for (std::size_t i = m; i-- > 0;) {
    rho[i] = 1.0 / y[i].dot(s[i]);
    alpha[i] = rho[i] * s[i].dot(q);
    q -= alpha[i] * y[i];
  }
  const double gamma = s.back().dot(y.back()) / y.back().squaredNorm();
  RVec r = gamma * q;
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho[i] * y[i].dot(r);
    r += (alpha[i] - beta) * s[i];
  }
  return -r;
}

}  // namespace

OptimizationTrace optimize(SimNetwork& net, const CMat& target, const OptimizerConfig& cfg) {
  cfg.validate();
  if (target.rows() != net.output_count() || target.cols() != net.input_count())
    throw DimensionError("target must be M x K with M receiver chains");

  OptimizationTrace trace;
  RVec eta = net.eta();  // unwrapped working copy
  Evaluation cur = evaluate(net, target, cfg.scale);
  trace.rows.push_back({0, cur.value, cur.delta_u, cur.delta_rel, 0.0});

  std::deque<RVec> hist_s, hist_y;
  double sd_step = cfg.step_size;
  RVec g;
  bool need_gradient = true;

  for (int it = 1; it <= cfg.max_iters && cur.delta_u > cfg.target_delta_u; ++it) {
    if (need_gradient) g = gradient(net, target, cfg.scale);
    if (!(g.norm() > 0.0)) break;  // stationary
    double check = std::numeric_limits<double>::quiet_NaN();
    if (cfg.gradient_check_period > 0 && it % cfg.gradient_check_period == 0)
      check = gradient_check(net, target, cfg.scale, g);

    bool accepted = false;
    RVec next_eta;
    Evaluation next = cur;
    // Quasi-Newton direction first; steepest descent as the fallback.
    bool tried_quasi = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1 && !tried_quasi) break;
      const bool quasi = cfg.method == DescentMethod::lbfgs && attempt == 0 && !hist_s.empty();
      tried_quasi = quasi;
      const RVec d = quasi ? lbfgs_direction(g, hist_s, hist_y) : RVec(-g);
      const double slope = g.dot(d);
      if (quasi && !(slope < 0.0)) {
        hist_s.clear();
        hist_y.clear();
        continue;
      }
      double t = quasi ? 1.0 : sd_step;
      for (int h = 0; h <= cfg.max_halvings; ++h, t *= cfg.backtrack) {
        const RVec trial = eta + t * d;
        try {
          net.set_eta(trial);
        } catch (const ConditioningError&) {
          continue;
        }
        Evaluation e = evaluate(net, target, cfg.scale);
        if (e.value <= cur.value + cfg.armijo * t * slope) {
          accepted = true;
          next_eta = trial;
          next = std::move(e);
          if (!quasi) sd_step = t / cfg.backtrack;
          break;
        }
      }
      if (!accepted) {
        hist_s.clear();
        hist_y.clear();
      }
    }

    if (!accepted) {
      net.set_eta(eta);
      break;
    }

    const RVec g_next = gradient(net, target, cfg.scale);
    const RVec s = next_eta - eta;
    const RVec yv = g_next - g;
    if (cfg.method == DescentMethod::lbfgs && s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      hist_s.push_back(s);
      hist_y.push_back(yv);
      if (static_cast<int>(hist_s.size()) > cfg.lbfgs_memory) {
        hist_s.pop_front();
        hist_y.pop_front();
      }
    }
    g = g_next;
    need_gradient = false;
    eta = next_eta;
    cur = std::move(next);
    trace.rows.push_back({it, cur.value, cur.delta_u, cur.delta_rel, s.norm(), check});
  }

  trace.final_eta = net.eta();
  trace.combiner = cur.alignment.combiner;
  trace.projection = cur.alignment.aligned;
  trace.converged = cur.delta_u <= cfg.target_delta_u;
  return trace;
}

OptimizationTrace optimize_multistart(SimNetwork& net, const CMat& target,
                                      const OptimizerConfig& cfg, int starts) {
  if (starts < 1) throw ConfigError("need at least one start", "starts");
  OptimizationTrace best;
  bool have = false;
  for (int s = 0; s < starts; ++s) {
    OptimizerConfig c = cfg;
    c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(s));
    RVec init = random_phases(net.parameter_count(), c.seed);
    try {
      net.set_eta(init);
    } catch (const ConditioningError&) {
      continue;
    }
    OptimizationTrace t = optimize(net, target, c);
    if (!have || t.final_delta_u() < best.final_delta_u()) {
      best = std::move(t);
      have = true;
    }
    if (best.converged) break;
  }
  if (!have) throw OptimizationError("no start produced a well-conditioned network");
  net.set_eta(best.final_eta);
  return best;
}

void write_trace_csv(std::ostream& out, const OptimizationTrace& trace) {
  out << "iteration,objective,delta_U,delta_rel,step\n";
  out.precision(17);
  for (const TraceRow& r : trace.rows)
    out << r.iteration << ',' << r.objective << ',' << r.delta_u << ',' << r.delta_rel << ','
        << r.step << '\n';
}

}  // namespace simloc
