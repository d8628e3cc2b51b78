#include "simloc/localizer.hpp"

#include <cmath>
#include <ostream>

#include "simloc/channel.hpp"
#include "simloc/error.hpp"

namespace simloc {

namespace {

struct Local {
  double value;
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
};

// |a(p)^H h|^2 with its gradient and Hessian in p. With
// s(p) = sum_k exp(j k0 d_k) h_k: grad f = 2 Re(conj(s) grad s) and
// hess f = 2 Re(conj(grad s) grad s^T + conj(s) hess s).
Local local_model(const Eigen::Matrix3Xd& layer, double k0, const CVec& h, const Point2& p) {
  cplx s = 0.0;
  Eigen::Vector2cd ds = Eigen::Vector2cd::Zero();
  Eigen::Matrix2cd dds = Eigen::Matrix2cd::Zero();
  const cplx j{0.0, 1.0};
  for (Eigen::Index i = 0; i < layer.cols(); ++i) {
    const Eigen::Vector3d r{p.x - layer(0, i), p.y - layer(1, i), -layer(2, i)};
    const double d = r.norm();
    const Eigen::Vector2d u = r.head<2>() / d;
    const cplx t = std::polar(1.0, k0 * d) * h(i);
    const Eigen::Matrix2d ddd = (Eigen::Matrix2d::Identity() - u * u.transpose()) / d;
    s += t;
    ds += (j * k0 * t) * u.cast<cplx>();
    dds += t * (j * k0 * ddd.cast<cplx>() - k0 * k0 * (u * u.transpose()).cast<cplx>());
  }
  Local out;
  out.value = std::norm(s);
  out.grad = 2.0 * (std::conj(s) * ds).real();
  out.hess = 2.0 * (ds.conjugate() * ds.transpose() + std::conj(s) * dds).real();
  return out;
}

// Damped Newton ascent from the grid incumbent. Steps are kept only when they
// raise the objective by more than rounding and stay inside the region.
void newton_polish(const ArrayGeometry& geometry, const CVec& h, const UncertaintyRegion& region,
                   LocalizationResult& best) {
  constexpr int kMaxIters = 30;
  constexpr double kRelGain = 1e-13;
  const Eigen::Matrix3Xd layer = geometry.first_layer();
  const double k0 = 2.0 * kPi / geometry.wavelength();
  for (int it = 0; it < kMaxIters; ++it) {
    const Local m = local_model(layer, k0, h, best.position);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m.hess);
    Eigen::Vector2d step;
    if (eig.eigenvalues().maxCoeff() < 0.0) {
      step = -eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
             eig.eigenvectors().transpose() * m.grad;
    } else {
      const double curv = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
      step = m.grad / curv;
    }
    bool moved = false;
    for (int halving = 0; halving < 30 && !moved; ++halving, step *= 0.5) {
      const Point2 p{best.position.x + step(0), best.position.y + step(1)};
      if (!region.contains(p)) continue;
      const double v = local_model(layer, k0, h, p).value;
      if (v > best.score * (1.0 + kRelGain)) {
        best = {p, v};
        moved = true;
      }
    }
    if (!moved) break;
  }
}

}  // namespace

void LocalizerConfig::validate() const {
  if (coarse_grid < 2) throw ConfigError("coarse grid needs at least 2 points per axis", "coarse_grid");
  if (refine_iters < 0) throw ConfigError("refine_iters must be nonnegative", "refine_iters");
  if (!(refine_shrink > 0.0 && refine_shrink < 1.0))
    throw ConfigError("refine_shrink must lie in (0, 1)", "refine_shrink");
}

double match_score(const ArrayGeometry& geometry, const CVec& h_hat, const Point2& p) {
  const double e = h_hat.squaredNorm();
  if (!(e > 0.0)) throw EstimationError("channel estimate is zero; position is undefined");
  return std::norm(steering_vector(geometry, p).dot(h_hat)) /
         (static_cast<double>(h_hat.size()) * e);
}

std::vector<Point2> coarse_grid(const UncertaintyRegion& region, int points_per_axis) {
  const double r = region.radius();
  const double h = 2.0 * r / (points_per_axis - 1);
  std::vector<Point2> pts;
  for (int i = 0; i < points_per_axis; ++i)
    for (int j = 0; j < points_per_axis; ++j) {
      const Point2 p{region.center().x - r + i * h, region.center().y - r + j * h};
      if (region.contains(p)) pts.push_back(p);
    }
  return pts;
}

LocalizationResult localize(const CVec& h_hat, const ArrayGeometry& geometry,
                            const UncertaintyRegion& region, const LocalizerConfig& cfg) {
  cfg.validate();
  if (!(region.diameter() > 0.0)) throw ConfigError("localizer needs a nondegenerate region");
  if (h_hat.size() != geometry.elements_per_layer())
    throw DimensionError("channel estimate must have K entries");
  if (!(h_hat.squaredNorm() > 0.0))
    throw EstimationError("channel estimate is zero; position is undefined");

  // The common factor K ||h||^2 does not change the argmax.
  auto corr = [&](const Point2& p) { return std::norm(steering_vector(geometry, p).dot(h_hat)); };

  LocalizationResult best{region.center(), -1.0};
  for (const Point2& p : coarse_grid(region, cfg.coarse_grid)) {
    const double c = corr(p);
    if (c > best.score) best = {p, c};
  }

  double h = region.diameter() / (cfg.coarse_grid - 1);
  const int span = static_cast<int>(std::ceil(1.0 / cfg.refine_shrink));
  // Each round re-centres on the incumbent until no neighbour improves, so
  // the search follows elongated ridges before the step shrinks.
  constexpr int kMaxMovesPerRound = 64;
  for (int round = 0; round < cfg.refine_iters; ++round) {
    h *= cfg.refine_shrink;
    for (int move = 0; move < kMaxMovesPerRound; ++move) {
      const Point2 centre = best.position;
      for (int i = -span; i <= span; ++i)
        for (int j = -span; j <= span; ++j) {
          const Point2 p{centre.x + i * h, centre.y + j * h};
          if (!region.contains(p)) continue;
          const double c = corr(p);
          if (c > best.score) best = {p, c};
        }
      if (best.position == centre) break;
    }
  }
  newton_polish(geometry, h_hat, region, best);
  best.score /= static_cast<double>(h_hat.size()) * h_hat.squaredNorm();
  return best;
}

void write_localization_csv(std::ostream& out, const std::vector<LocalizationRecord>& records) {
  out << "true_x,true_y,est_x,est_y,error_m,score\n";
  out.precision(17);
  for (const LocalizationRecord& r : records)
    out << r.truth.x << ',' << r.truth.y << ',' << r.estimate.x << ',' << r.estimate.y << ','
        << r.error_m << ',' << r.score << '\n';
}

}  // namespace simloc
