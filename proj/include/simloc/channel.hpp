#pragma once

#include <cstdint>
#include <optional>

#include "simloc/geometry.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// Near-field steering vector over the first layer of `geometry`:
/// entry k is exp(-j 2 pi d_k(p) / lambda), the transmitter sitting at z = 0.
CVec steering_vector(const ArrayGeometry& geometry, const Point2& p);

/// K x n matrix of steering vectors, one column per point.
CMat steering_matrix(const ArrayGeometry& geometry, const std::vector<Point2>& points);

struct ChannelRealization {
  CVec h;
  double gain = 1.0;
  double phase = 0.0;
  Point2 position;
};

ChannelRealization draw_channel(const ArrayGeometry& geometry, const Point2& p,
                                const GainModel& gains, std::uint64_t seed);

/// Draws position, gain and phase from one engine.
ChannelRealization draw_channel(const ArrayGeometry& geometry, const UncertaintyRegion& region,
                                const GainModel& gains, SplitMix64& rng);

struct CovarianceOptions {
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  double rank_threshold = 1e-6;
};

/// Channel covariance with its ordered eigendecomposition.
///
/// Eigenpairs are sorted by descending eigenvalue; each eigenvector is
/// phase-normalised so that its first non-negligible entry is real positive,
/// and exact ties are ordered lexicographically on the normalised entries.
class CovarianceModel {
 public:
  CovarianceModel(CMat covariance, double rank_threshold, std::size_t samples = 0,
                  double top_eigenvalue_jitter = 0.0);

  const CMat& covariance() const noexcept { return covariance_; }
  const RVec& eigenvalues() const noexcept { return eigenvalues_; }
  const CMat& eigenvectors() const noexcept { return eigenvectors_; }
  int size() const noexcept { return static_cast<int>(covariance_.rows()); }
  /// Number of eigenvalues above rank_threshold * lambda_max.
  int rank() const noexcept { return rank_; }
  double rank_threshold() const noexcept { return rank_threshold_; }
  std::size_t samples() const noexcept { return samples_; }
  double top_eigenvalue_jitter() const noexcept { return top_jitter_; }
  double trace() const noexcept { return covariance_.trace().real(); }

  /// Rank-L basis and eigenvalues with L = rank().
  CMat basis() const { return eigenvectors_.leftCols(rank_); }
  RVec spectrum() const { return eigenvalues_.head(rank_); }

  /// Smallest count of eigenvalues holding `fraction` of the trace.
  int energy_rank(double fraction = 0.99) const;
  /// Count of eigenvalues strictly above `level` (e.g. the noise variance).
  int rank_above(double level) const;

 private:
  friend CovarianceModel estimate_covariance(const ArrayGeometry&, const RegionSampler&,
                                             const GainModel&, const CovarianceOptions&);

  CMat covariance_;
  RVec eigenvalues_;
  CMat eigenvectors_;
  int rank_ = 0;
  double rank_threshold_;
  std::size_t samples_;
  double top_jitter_;
};

/// R_h = sigma_G^2 (1/n) sum_i a(p_i) a(p_i)^H over region samples.
CovarianceModel estimate_covariance(const ArrayGeometry& geometry, const RegionSampler& sampler,
                                    const GainModel& gains, const CovarianceOptions& options = {});
CovarianceModel estimate_covariance(const ArrayGeometry& geometry, const UncertaintyRegion& region,
                                    const GainModel& gains, const CovarianceOptions& options = {});

struct Subspace {
  CMat basis;       // K x L, orthonormal columns (U)
  RVec eigenvalues; // L dominant eigenvalues (D)
  double captured_energy = 1.0;  // tr(D) / tr(R_h)
  /// Target projection U^H.
  CMat target() const { return basis.adjoint(); }
  int dim() const noexcept { return static_cast<int>(basis.cols()); }
};

/// Dominant eigenpairs; `fixed_dim` overrides the model's rank (truncating or
/// padding with numerically-zero modes).
Subspace reduce_subspace(const CovarianceModel& model, std::optional<int> fixed_dim = std::nullopt);

}  // namespace simloc
