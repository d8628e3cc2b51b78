#include "simloc/estimation.hpp"

#include <cmath>
#include <sstream>

#include "simloc/error.hpp"

namespace simloc {

namespace {

CMat hermitian(const CMat& m) { return 0.5 * (m + m.adjoint()); }

// (I - W O) R (I - W O)^H
CMat residual_covariance(const CMat& gain, const CMat& observation, const CMat& r_h) {
  const Eigen::Index k = r_h.rows();
  const CMat leak = CMat::Identity(k, k) - gain * observation;
  return hermitian(leak * r_h * leak.adjoint());
}

void check_noise(double noise_variance) {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw ConfigError("noise variance must be positive", "noise_variance");
}

void check_square(const CMat& r_h, Eigen::Index k) {
  if (r_h.rows() != k || r_h.cols() != k) throw DimensionError("covariance must be K x K");
}

// Solve M X = B for an L x L system, rejecting numerically singular M.
CMat guarded_solve(const CMat& m, const CMat& b, const char* what) {
  Eigen::PartialPivLU<CMat> lu(m);
  const double rc = lu_rcond(lu);
  if (!(rc > 1e-12)) {
    std::ostringstream msg;
    msg << what << " (rcond " << rc << ")";
    throw EstimationError(msg.str());
  }
  return lu.solve(b);
}

}  // namespace

double noise_variance_for_snr(const CovarianceModel& cov, double snr_db) {
  const double energy = cov.trace() / cov.size();
  return energy / std::pow(10.0, snr_db / 10.0);
}

CMat ObservationModel::matrix(Eigen::Index k) const {
  if (mode == ObservationMode::full_array || mode == ObservationMode::digital_baseline)
    return CMat::Identity(k, k);
  if (!projection) throw ConfigError("projection modes need a projection matrix", "projection");
  if (projection->cols() != k) throw DimensionError("projection must have K columns");
  return *projection;
}

CVec ObservationModel::observe(const CVec& r) const {
  if (mode == ObservationMode::full_array || mode == ObservationMode::digital_baseline) return r;
  return matrix(r.size()) * r;
}

LinearEstimator::LinearEstimator(std::string tag, CMat observation, CMat gain,
                                 CMat error_covariance, CMat bias_covariance)
    : tag_(std::move(tag)),
      observation_(std::move(observation)),
      gain_(std::move(gain)),
      error_cov_(hermitian(error_covariance)),
      bias_cov_(hermitian(bias_covariance)) {
  if (gain_.cols() != observation_.rows() || gain_.rows() != observation_.cols())
    throw DimensionError("estimator gain and observation shapes disagree");
  scalar_mse_ = error_cov_.trace().real();
  bias_mse_ = bias_cov_.trace().real();
}

CVec LinearEstimator::apply(const CVec& y) const {
  if (y.size() != gain_.cols()) throw DimensionError("observation length mismatch");
  return gain_ * y;
}

EstimationReport LinearEstimator::report(const CVec& y) const {
  return {tag_, apply(y), error_cov_, scalar_mse_, bias_cov_, total_mse()};
}

LinearEstimator make_mmse_full(const CMat& r_h, double noise_variance, std::string tag) {
  check_noise(noise_variance);
  const Eigen::Index k = r_h.rows();
  check_square(r_h, k);
  const CMat loaded = r_h + noise_variance * CMat::Identity(k, k);
  // R (R + s I)^{-1} = ((R + s I)^{-1} R)^H for Hermitian R.
  const CMat gain = Eigen::LDLT<CMat>(loaded).solve(r_h).adjoint();
  CMat error = r_h - gain * r_h;
  return {std::move(tag), CMat::Identity(k, k), gain, error, CMat::Zero(k, k)};
}

LinearEstimator make_mmse_spectral(const CovarianceModel& cov, double noise_variance) {
  check_noise(noise_variance);
  const Eigen::Index k = cov.size();
  const RVec lam = cov.eigenvalues().cwiseMax(0.0);
  const RVec shrink = lam.array() / (lam.array() + noise_variance);
  const RVec residual = lam.array() * noise_variance / (lam.array() + noise_variance);
  const CMat& ut = cov.eigenvectors();
  const CMat gain = ut * shrink.cast<cplx>().asDiagonal() * ut.adjoint();
  const CMat error = ut * residual.cast<cplx>().asDiagonal() * ut.adjoint();
  return {"mmse_spectral", CMat::Identity(k, k), gain, error, CMat::Zero(k, k)};
}

LinearEstimator make_mmse_reduced(const Subspace& sub, const CMat& r_h, double noise_variance) {
  check_noise(noise_variance);
  const Eigen::Index k = sub.basis.rows();
  check_square(r_h, k);
  const RVec& d = sub.eigenvalues;
  const RVec shrink = d.array() / (d.array() + noise_variance);
  const CMat gain = sub.basis * shrink.cast<cplx>().asDiagonal();
  // R - U D^2 (D + s)^{-1} U^H; exact also when L truncates the rank.
  const RVec kept = d.array() * shrink.array();
  CMat error = r_h - sub.basis * kept.cast<cplx>().asDiagonal() * sub.basis.adjoint();
  return {"mmse_reduced", sub.target(), gain, error, CMat::Zero(k, k)};
}

LinearEstimator make_rsls_ideal(const Subspace& sub, const CMat& r_h, double noise_variance) {
  check_noise(noise_variance);
  const Eigen::Index k = sub.basis.rows();
  check_square(r_h, k);
  const CMat observation = sub.target();
  const CMat error = noise_variance * sub.basis * sub.basis.adjoint();
  return {"rsls_ideal", observation, sub.basis, error,
          residual_covariance(sub.basis, observation, r_h)};
}

LinearEstimator make_mmse_post_sim(const CMat& v, const CMat& r_h, double noise_variance,
                                   const Subspace* ideal) {
  check_noise(noise_variance);
  const Eigen::Index k = r_h.rows();
  check_square(r_h, k);
  if (v.cols() != k) throw DimensionError("projection must have K columns");
  if (ideal != nullptr && ideal->basis.rows() == k && v.rows() == ideal->dim() &&
      v == ideal->target()) {
    LinearEstimator reduced = make_mmse_reduced(*ideal, r_h, noise_variance);
    return {"mmse_post_sim", v, reduced.gain(), reduced.error_covariance(), CMat::Zero(k, k)};
  }
  const CMat rv = r_h * v.adjoint();
  const CMat inner = v * rv + noise_variance * (v * v.adjoint());
  // W = R V^H M^{-1} = (M^{-H} V R)^H with M Hermitian.
  const CMat gain = guarded_solve(inner, rv.adjoint(),
                                  "post-SIM MMSE inner matrix V R V^H + s V V^H is singular")
                        .adjoint();
  CMat error = r_h - gain * rv.adjoint();
  return {"mmse_post_sim", v, gain, error, CMat::Zero(k, k)};
}

LinearEstimator make_rsls_post_sim(const CMat& v, const Subspace& sub, const CMat& r_h,
                                   double noise_variance) {
  check_noise(noise_variance);
  const Eigen::Index k = sub.basis.rows();
  check_square(r_h, k);
  if (v.cols() != k || v.rows() != sub.dim())
    throw DimensionError("projection must be L x K");
  const CMat a = v * sub.basis;
  const CMat gram = a.adjoint() * a;
  const CMat pinv = guarded_solve(
      gram, a.adjoint(),
      "A = V U is rank deficient; the subspace mismatch delta_U is too large for RS-LS");
  const CMat c_g = noise_variance * pinv * (v * v.adjoint()) * pinv.adjoint();
  const CMat gain = sub.basis * pinv;
  const CMat error = sub.basis * c_g * sub.basis.adjoint();
  return {"rsls_post_sim", v, gain, error, residual_covariance(gain, v, r_h)};
}

LinearEstimator make_digital_baseline(const CMat& r_full, double noise_variance) {
  return make_mmse_full(r_full, noise_variance, "digital_baseline");
}

EstimationReport mmse_full(const CVec& r, const CovarianceModel& cov, double noise_variance) {
  return make_mmse_full(cov.covariance(), noise_variance).report(r);
}

EstimationReport mmse_spectral(const CVec& r, const CovarianceModel& cov, double noise_variance) {
  return make_mmse_spectral(cov, noise_variance).report(r);
}

EstimationReport mmse_reduced(const CVec& y, const Subspace& sub, const CovarianceModel& cov,
                              double noise_variance) {
  return make_mmse_reduced(sub, cov.covariance(), noise_variance).report(y);
}

EstimationReport rsls_ideal(const CVec& y, const Subspace& sub, const CovarianceModel& cov,
                            double noise_variance) {
  return make_rsls_ideal(sub, cov.covariance(), noise_variance).report(y);
}

EstimationReport mmse_post_sim(const CVec& y, const CMat& v, const CovarianceModel& cov,
                               double noise_variance, const Subspace* ideal) {
  return make_mmse_post_sim(v, cov.covariance(), noise_variance, ideal).report(y);
}

EstimationReport rsls_post_sim(const CVec& y, const CMat& v, const Subspace& sub,
                               const CovarianceModel& cov, double noise_variance) {
  return make_rsls_post_sim(v, sub, cov.covariance(), noise_variance).report(y);
}

EstimationReport digital_baseline(const CVec& r_full, const CovarianceModel& cov_full,
                                  double noise_variance) {
  return make_digital_baseline(cov_full.covariance(), noise_variance).report(r_full);
}

ChannelSource region_channel_source(const ArrayGeometry& geometry,
                                    const UncertaintyRegion& region, const GainModel& gains) {
  return [geometry, region, gains](SplitMix64& rng) {
    return draw_channel(geometry, region, gains, rng).h;
  };
}

CVec complex_normal(Eigen::Index n, double variance, SplitMix64& rng) {
  const double s = std::sqrt(0.5 * variance);
  CVec z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    z(i) = cplx{s * re, s * im};
  }
  return z;
}

MonteCarloResult monte_carlo_mse(const ObservationModel& model, const LinearEstimator& estimator,
                                 const ChannelSource& source, std::size_t trials,
                                 std::uint64_t seed) {
  if (trials < 100) throw ConfigError("Monte Carlo needs at least 100 trials", "trials");
  check_noise(model.noise_variance);
  const CMat o = model.matrix(estimator.observation().cols());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng(derive_seed(seed, t));
    const CVec h = source(rng);
    const CVec r = h + complex_normal(h.size(), model.noise_variance, rng);
    const double e = (h - estimator.apply(o * r)).squaredNorm();
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
  return {mean, std::sqrt(var / n), trials};
}

}  // namespace simloc
