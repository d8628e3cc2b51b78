#include "simloc/bounds.hpp"

#include <cmath>

#include "simloc/channel.hpp"
#include "simloc/error.hpp"
#include "simloc/multiport.hpp"

namespace simloc {

double spectral_norm(const CMat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<CMat>(m).singularValues()(0);
}

double eigen_box_radius(double delta_u) { return 2.0 * delta_u + delta_u * delta_u; }

double mse_ratio_bound(double delta_u) {
  const double r = eigen_box_radius(delta_u);
  return r < 1.0 ? 1.0 / (1.0 - r) : std::numeric_limits<double>::infinity();
}

MismatchMetrics mismatch_metrics(const CMat& v, const CMat& u) {
  if (v.rows() != u.cols() || v.cols() != u.rows())
    throw DimensionError("projection must be L x K for a K x L basis");
  const Eigen::Index l = u.cols();
  const CMat delta = v - u.adjoint();
  const CMat du = delta * u;
  const CMat e = du + du.adjoint() + du.adjoint() * du;

  MismatchMetrics m;
  m.delta_rel = delta.norm() / std::sqrt(static_cast<double>(l));
  m.delta_u = spectral_norm(du);
  m.e_norm = spectral_norm(e);
  const double r = eigen_box_radius(m.delta_u);
  m.box_low = 1.0 - r;
  m.box_high = 1.0 + r;
  m.mse_ratio_bound = mse_ratio_bound(m.delta_u);
  return m;
}

MseRatioCheck mse_ratio_check(const CMat& v, const CMat& u, double noise_variance,
                              double gap_tolerance) {
  if (!(noise_variance > 0.0)) throw ConfigError("noise variance must be positive");
  const MismatchMetrics m = mismatch_metrics(v, u);
  MseRatioCheck c;
  c.bound = m.mse_ratio_bound;
  c.orthonormality_gap = row_orthonormality_gap(v);
  c.applicable = c.orthonormality_gap <= gap_tolerance;

  const CMat a = v * u;
  const CMat gram = a.adjoint() * a;
  Eigen::FullPivLU<CMat> lu(gram);
  if (!lu.isInvertible()) {
    c.actual_ratio = std::numeric_limits<double>::infinity();
  } else {
    const CMat pinv = lu.solve(a.adjoint());
    const CMat c_g = noise_variance * pinv * (v * v.adjoint()) * pinv.adjoint();
    c.actual_ratio = c_g.trace().real() / (noise_variance * static_cast<double>(u.cols()));
  }
  c.holds = !c.applicable || c.actual_ratio <= c.bound + 1e-9;
  return c;
}

CVec channel_of(const ArrayGeometry& geometry, const ChannelParams& params) {
  return std::polar(params.gain, params.phase) *
         steering_vector(geometry, Point2{params.x, params.y});
}

CMat channel_jacobian(const ArrayGeometry& geometry, const ChannelParams& params) {
  if (!(params.gain > 0.0)) throw ConfigError("channel gain must be positive", "gain");
  const Eigen::Matrix3Xd layer = geometry.first_layer();
  const double k = 2.0 * kPi / geometry.wavelength();
  const CVec h = channel_of(geometry, params);
  CMat j(h.size(), 4);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double dx = params.x - layer(0, i);
    const double dy = params.y - layer(1, i);
    const double dz = -layer(2, i);
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (d == 0.0) throw GeometryError("transmitter coincides with an array element");
    j(i, 0) = cplx{0.0, -k * dx / d} * h(i);
    j(i, 1) = cplx{0.0, -k * dy / d} * h(i);
    j(i, 2) = h(i) / params.gain;
    j(i, 3) = cplx{0.0, 1.0} * h(i);
  }
  return j;
}

PebReport peb_from_fim(RMat fim, const ChannelParams& params) {
  fim = 0.5 * (fim + fim.transpose());
  // Condition is judged on the unit-free equilibrated matrix S F S.
  RVec scale(fim.rows());
  for (Eigen::Index i = 0; i < fim.rows(); ++i)
    scale(i) = fim(i, i) > 0.0 ? 1.0 / std::sqrt(fim(i, i)) : 1.0;
  const RMat eq = scale.asDiagonal() * fim * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMat> eig(0.5 * (eq + eq.transpose()));
  const RVec& w = eig.eigenvalues();
  const double top = w.cwiseAbs().maxCoeff();
  const double bottom = w.minCoeff();

  PebReport rep;
  rep.params = params;
  rep.condition = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
  RMat eq_inv;
  if (rep.condition <= kFimConditionLimit) {
    eq_inv = eq.llt().solve(RMat::Identity(eq.rows(), eq.cols()));
  } else {
    rep.pseudo_inverse = true;
    const double cut = top / kFimConditionLimit;
    RVec inv = RVec::Zero(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w(i) > cut) inv(i) = 1.0 / w(i);
    eq_inv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }
  rep.crlb = scale.asDiagonal() * eq_inv * scale.asDiagonal();
  rep.crlb = 0.5 * (rep.crlb + rep.crlb.transpose());
  rep.fim = std::move(fim);
  rep.peb = std::sqrt(std::max(rep.crlb(0, 0) + rep.crlb(1, 1), 0.0));
  return rep;
}

PebReport fim_peb(const ArrayGeometry& geometry, const ChannelParams& params, double sigma_n2) {
  if (!(sigma_n2 > 0.0)) throw ConfigError("noise variance must be positive", "sigma_n2");
  const CMat j = channel_jacobian(geometry, params);
  return peb_from_fim((j.adjoint() * j).real() / sigma_n2, params);
}

PebReport fim_peb_colored(const ArrayGeometry& geometry, const ChannelParams& params,
                          const CMat& error_covariance) {
  const CMat j = channel_jacobian(geometry, params);
  if (error_covariance.rows() != j.rows() || error_covariance.cols() != j.rows())
    throw DimensionError("error covariance must be K x K");
  Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (error_covariance + error_covariance.adjoint()));
  const RVec& w = eig.eigenvalues();
  const double top = w.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw ConfigError("error covariance is zero");
  RVec inv = RVec::Zero(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) > 1e-12 * top) inv(i) = 1.0 / w(i);
  const CMat white = inv.cwiseSqrt().cast<cplx>().asDiagonal() * eig.eigenvectors().adjoint() * j;
  return peb_from_fim(2.0 * (white.adjoint() * white).real(), params);
}

double effective_noise_from_mse(double total_mse, Eigen::Index k) {
  if (!(total_mse >= 0.0)) throw ConfigError("MSE must be nonnegative");
  return total_mse / (2.0 * static_cast<double>(k));
}

double effective_noise_from_estimation(const EstimationReport& report) {
  return effective_noise_from_mse(report.total_mse, report.error_covariance.rows());
}

}  // namespace simloc
