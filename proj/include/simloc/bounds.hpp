#pragma once

#include <limits>

#include "simloc/estimation.hpp"
#include "simloc/geometry.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// Largest singular value.
double spectral_norm(const CMat& m);

struct MismatchMetrics {
  double delta_rel = 0.0;  // ||V - U^H||_F / sqrt(L)
  double delta_u = 0.0;    // ||(V - U^H) U||_2
  double e_norm = 0.0;     // ||E||_2, E = G(V) - I
  double box_low = 1.0;    // eigenvalue box of G(V) = (VU)^H (VU)
  double box_high = 1.0;
  double mse_ratio_bound = 1.0;  // +inf when 2 delta_U + delta_U^2 >= 1
};

/// Radius 2 d + d^2 of the eigenvalue box.
double eigen_box_radius(double delta_u);
double mse_ratio_bound(double delta_u);

/// `u` is the K x L basis; `v` the L x K projection.
MismatchMetrics mismatch_metrics(const CMat& v, const CMat& u);

struct MseRatioCheck {
  double actual_ratio = 1.0;  // tr(C_LS,g) / (sigma_z^2 L)
  double bound = 1.0;
  bool holds = true;          // true (not falsified) when inapplicable
  bool applicable = true;     // row-orthonormality precondition met
  double orthonormality_gap = 0.0;
};

MseRatioCheck mse_ratio_check(const CMat& v, const CMat& u, double noise_variance,
                              double gap_tolerance = 1e-8);

/// Parameter vector [x, y, G, theta].
struct ChannelParams {
  double x = 1.0;
  double y = 0.0;
  double gain = 1.0;
  double phase = 0.0;
};

/// h = G exp(j theta) a(p).
CVec channel_of(const ArrayGeometry& geometry, const ChannelParams& params);

/// K x 4 Jacobian of h with respect to [x, y, G, theta].
CMat channel_jacobian(const ArrayGeometry& geometry, const ChannelParams& params);

struct PebReport {
  RMat fim;
  RMat crlb;
  double peb = 0.0;
  bool pseudo_inverse = false;  // set when cond(FIM) > 1e12
  double condition = 1.0;
  ChannelParams params;
};

inline constexpr double kFimConditionLimit = 1e12;

/// I = Re{J^H J} / sigma_n^2, with sigma_n^2 the noise variance per real
/// component (E|n_k|^2 = 2 sigma_n^2).
PebReport fim_peb(const ArrayGeometry& geometry, const ChannelParams& params, double sigma_n2);

/// Whitened variant for a residual with complex covariance C:
/// I = 2 Re{J^H C^+ J}. Equals fim_peb at sigma_n^2 = s/2 when C = s I.
PebReport fim_peb_colored(const ArrayGeometry& geometry, const ChannelParams& params,
                          const CMat& error_covariance);

/// White-equivalent per-real-component variance total_mse / (2K).
double effective_noise_from_estimation(const EstimationReport& report);
double effective_noise_from_mse(double total_mse, Eigen::Index k);

/// FIM inverse with the pseudo-inverse fallback.
PebReport peb_from_fim(RMat fim, const ChannelParams& params);

}  // namespace simloc
