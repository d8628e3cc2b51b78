#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "simloc/channel.hpp"
#include "simloc/rng.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// sigma_z^2 for an SNR (dB) relative to the average received energy per element.
double noise_variance_for_snr(const CovarianceModel& cov, double snr_db);

enum class ObservationMode { full_array, ideal_projection, sim_projection, digital_baseline };

/// y = O r with r = h + z and z ~ CN(0, sigma_z^2 I) at the first layer.
struct ObservationModel {
  ObservationMode mode = ObservationMode::full_array;
  std::optional<CMat> projection;  // U^H or V; absent for full-array modes
  double noise_variance = 1.0;

  /// Observation matrix O for K first-layer elements.
  CMat matrix(Eigen::Index k) const;
  CVec observe(const CVec& r) const;
};

struct EstimationReport {
  std::string tag;
  CVec h_hat;
  /// Analytic error covariance of the estimator's own model (Eq. 19 form for
  /// MMSE estimators, U C_LS,g U^H for RS-LS).
  CMat error_covariance;
  double scalar_mse = 0.0;
  /// Subspace-truncation bias (I - W O) R_h (I - W O)^H not captured above.
  CMat bias_covariance;
  double total_mse = 0.0;
};

/// Linear estimator h_hat = W y for an observation y = O r, with its analytic
/// covariances computed once so Monte Carlo loops only apply W.
class LinearEstimator {
 public:
  LinearEstimator(std::string tag, CMat observation, CMat gain, CMat error_covariance,
                  CMat bias_covariance);

  const std::string& tag() const noexcept { return tag_; }
  const CMat& observation() const noexcept { return observation_; }
  const CMat& gain() const noexcept { return gain_; }
  const CMat& error_covariance() const noexcept { return error_cov_; }
  const CMat& bias_covariance() const noexcept { return bias_cov_; }
  double scalar_mse() const noexcept { return scalar_mse_; }
  double total_mse() const noexcept { return scalar_mse_ + bias_mse_; }

  CVec apply(const CVec& y) const;
  EstimationReport report(const CVec& y) const;

 private:
  std::string tag_;
  CMat observation_, gain_, error_cov_, bias_cov_;
  double scalar_mse_ = 0.0, bias_mse_ = 0.0;
};

LinearEstimator make_mmse_full(const CMat& r_h, double noise_variance,
                               std::string tag = "mmse_full");
LinearEstimator make_mmse_spectral(const CovarianceModel& cov, double noise_variance);
LinearEstimator make_mmse_reduced(const Subspace& sub, const CMat& r_h, double noise_variance);
LinearEstimator make_rsls_ideal(const Subspace& sub, const CMat& r_h, double noise_variance);
LinearEstimator make_mmse_post_sim(const CMat& v, const CMat& r_h, double noise_variance,
                                   const Subspace* ideal = nullptr);
LinearEstimator make_rsls_post_sim(const CMat& v, const Subspace& sub, const CMat& r_h,
                                   double noise_variance);
LinearEstimator make_digital_baseline(const CMat& r_full, double noise_variance);

// Single-observation entry points.
EstimationReport mmse_full(const CVec& r, const CovarianceModel& cov, double noise_variance);
EstimationReport mmse_spectral(const CVec& r, const CovarianceModel& cov, double noise_variance);
EstimationReport mmse_reduced(const CVec& y, const Subspace& sub, const CovarianceModel& cov,
                              double noise_variance);
EstimationReport rsls_ideal(const CVec& y, const Subspace& sub, const CovarianceModel& cov,
                            double noise_variance);
EstimationReport mmse_post_sim(const CVec& y, const CMat& v, const CovarianceModel& cov,
                               double noise_variance, const Subspace* ideal = nullptr);
EstimationReport rsls_post_sim(const CVec& y, const CMat& v, const Subspace& sub,
                               const CovarianceModel& cov, double noise_variance);
EstimationReport digital_baseline(const CVec& r_full, const CovarianceModel& cov_full,
                                  double noise_variance);

/// Draws one true channel per call.
using ChannelSource = std::function<CVec(SplitMix64&)>;

ChannelSource region_channel_source(const ArrayGeometry& geometry,
                                    const UncertaintyRegion& region, const GainModel& gains);

struct MonteCarloResult {
  double mse = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
};

/// Mean of ||h - h_hat||^2 over fresh channel and noise draws. Trial i uses
/// the stream derive_seed(seed, i); the sum is reduced in trial order.
MonteCarloResult monte_carlo_mse(const ObservationModel& model, const LinearEstimator& estimator,
                                 const ChannelSource& source, std::size_t trials,
                                 std::uint64_t seed);

/// Circularly-symmetric complex Gaussian vector with E|z_k|^2 = variance.
CVec complex_normal(Eigen::Index n, double variance, SplitMix64& rng);

}  // namespace simloc
