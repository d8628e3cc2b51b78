#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "simloc/multiport.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// How the network output is aligned with the target before measuring the
/// residual: not at all, by one complex scalar, or by an L x L combiner at
/// the receiver chains (the default).
enum class ScaleMode { none, scalar, combiner };

enum class DescentMethod { gradient, lbfgs };

struct OptimizerConfig {
  int max_iters = 5000;
  double step_size = 1e-2;     // first trial step of steepest-descent iterations
  double backtrack = 0.5;
  int max_halvings = 20;
  double armijo = 1e-4;
  double target_delta_u = 0.1;
  int gradient_check_period = 0;  // 0 disables
  std::uint64_t seed = 1;
  ScaleMode scale = ScaleMode::combiner;
  DescentMethod method = DescentMethod::lbfgs;
  int lbfgs_memory = 10;

  void validate() const;
};

ScaleMode parse_scale_mode(const std::string& s);
DescentMethod parse_descent_method(const std::string& s);
std::string to_string(ScaleMode m);
std::string to_string(DescentMethod m);

/// Uniform phases in (-pi, pi], one per cell.
RVec random_phases(int count, std::uint64_t seed);

/// Alignment of V with a target U^H.
struct Alignment {
  CMat combiner;  // L x L (c I for scalar mode, I for none)
  CMat aligned;   // combiner * V
  CMat residual;  // aligned - target
  double value = 0.0;
};

Alignment align(const CMat& v, const CMat& target, ScaleMode mode);

/// E(eta) = ||B V(eta) - U^H||_F^2 with B chosen per `mode`.
double objective(const SimNetwork& net, const CMat& target, ScaleMode mode = ScaleMode::combiner);

/// Adjoint gradient of `objective` with respect to eta (KQ entries).
RVec gradient(const SimNetwork& net, const CMat& target, ScaleMode mode = ScaleMode::combiner);

/// Central finite differences of `objective`; restores the network's eta.
RVec finite_difference_gradient(SimNetwork& net, const CMat& target, ScaleMode mode,
                                double step = 1e-5);

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double delta_u = 0.0;
  double delta_rel = 0.0;
  double step = 0.0;  // Euclidean length of the accepted update
  double gradient_check = std::numeric_limits<double>::quiet_NaN();
};

struct OptimizationTrace {
  std::vector<TraceRow> rows;
  RVec final_eta;
  CMat combiner;
  CMat projection;  // combiner * V at final_eta
  bool converged = false;
  int iterations() const noexcept { return rows.empty() ? 0 : rows.back().iteration; }
  double final_delta_u() const { return rows.empty() ? 0.0 : rows.back().delta_u; }
};

/// Minimises the objective from the network's current eta; the final eta is
/// left in `net`. Stops when delta_U <= target_delta_u or after max_iters.
OptimizationTrace optimize(SimNetwork& net, const CMat& target, const OptimizerConfig& cfg);

/// Runs `optimize` from `starts` seeded random initialisations and keeps the
/// first converged run (or the lowest delta_U when none converges).
OptimizationTrace optimize_multistart(SimNetwork& net, const CMat& target,
                                      const OptimizerConfig& cfg, int starts);

/// CSV with header iteration,objective,delta_U,delta_rel,step.
void write_trace_csv(std::ostream& out, const OptimizationTrace& trace);

}  // namespace simloc
