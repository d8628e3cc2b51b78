#include "simloc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simloc/error.hpp"

namespace simloc {

namespace {

constexpr std::size_t kSampleChunk = 2048;

Eigen::Vector3d transmitter_point(const Point2& p) { return {p.x, p.y, 0.0}; }

// Rotate a vector so its first entry with |v_i| > tol * |v|_inf is real positive.
void normalise_phase(Eigen::Ref<CVec> v) {
  const double tol = 1e-8 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tol) {
      v *= std::conj(v(i)) / std::abs(v(i));
      v(i) = std::abs(v(i));
      return;
    }
  }
}

bool lexicographic_less(const CVec& a, const CVec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
    if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
  }
  return false;
}

}  // namespace

CVec steering_vector(const ArrayGeometry& geometry, const Point2& p) {
  const Eigen::Matrix3Xd layer = geometry.first_layer();
  const Eigen::Vector3d tx = transmitter_point(p);
  const double k = 2.0 * kPi / geometry.wavelength();
  CVec a(layer.cols());
  for (Eigen::Index i = 0; i < layer.cols(); ++i)
    a(i) = std::polar(1.0, -k * (tx - layer.col(i)).norm());
  return a;
}

CMat steering_matrix(const ArrayGeometry& geometry, const std::vector<Point2>& points) {
  CMat a(geometry.elements_per_layer(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) a.col(i) = steering_vector(geometry, points[i]);
  return a;
}

ChannelRealization draw_channel(const ArrayGeometry& geometry, const Point2& p,
                                const GainModel& gains, std::uint64_t seed) {
  SplitMix64 rng(seed);
  ChannelRealization out;
  out.position = p;
  out.gain = gains.draw_gain(rng);
  out.phase = gains.draw_phase(rng);
  out.h = std::polar(out.gain, out.phase) * steering_vector(geometry, p);
  return out;
}

ChannelRealization draw_channel(const ArrayGeometry& geometry, const UncertaintyRegion& region,
                                const GainModel& gains, SplitMix64& rng) {
  ChannelRealization out;
  out.position = region.draw(rng);
  out.gain = gains.draw_gain(rng);
  out.phase = gains.draw_phase(rng);
  out.h = std::polar(out.gain, out.phase) * steering_vector(geometry, out.position);
  return out;
}

CovarianceModel::CovarianceModel(CMat covariance, double rank_threshold, std::size_t samples,
                                 double top_eigenvalue_jitter)
    : covariance_(std::move(covariance)),
      rank_threshold_(rank_threshold),
      samples_(samples),
      top_jitter_(top_eigenvalue_jitter) {
  if (covariance_.rows() != covariance_.cols() || covariance_.rows() == 0)
    throw DimensionError("covariance must be a non-empty square matrix");
  if (!(rank_threshold > 0.0 && rank_threshold < 1.0))
    throw ConfigError("rank threshold must lie in (0, 1)", "rank_threshold");

  // Exact Hermitian symmetrisation; Monte Carlo sums are Hermitian only up to rounding.
  covariance_ = (0.5 * (covariance_ + covariance_.adjoint())).eval();

  Eigen::SelfAdjointEigenSolver<CMat> solver(covariance_);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");

  const Eigen::Index n = covariance_.rows();
  CMat vectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < n; ++j) normalise_phase(vectors.col(j));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const RVec& values = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values(a) != values(b)) return values(a) > values(b);
    return lexicographic_less(vectors.col(a), vectors.col(b));
  });

  eigenvalues_.resize(n);
  eigenvectors_.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    eigenvalues_(j) = values(order[static_cast<std::size_t>(j)]);
    eigenvectors_.col(j) = vectors.col(order[static_cast<std::size_t>(j)]);
  }

  const double cutoff = rank_threshold_ * std::max(eigenvalues_(0), 0.0);
  rank_ = static_cast<int>((eigenvalues_.array() > cutoff).count());
  rank_ = std::max(rank_, 1);
}

int CovarianceModel::energy_rank(double fraction) const {
  const double total = eigenvalues_.cwiseMax(0.0).sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    acc += std::max(eigenvalues_(i), 0.0);
    if (acc >= fraction * total) return static_cast<int>(i + 1);
  }
  return static_cast<int>(eigenvalues_.size());
}

int CovarianceModel::rank_above(double level) const {
  return static_cast<int>((eigenvalues_.array() > level).count());
}

CovarianceModel estimate_covariance(const ArrayGeometry& geometry, const RegionSampler& sampler,
                                    const GainModel& gains, const CovarianceOptions& options) {
  if (options.samples < 1) throw ConfigError("covariance needs at least one sample", "samples");
  const std::vector<Point2> points = sampler(options.samples, options.seed);
  const Eigen::Index k = geometry.elements_per_layer();

  CMat sum = CMat::Zero(k, k);
  for (std::size_t start = 0; start < points.size(); start += kSampleChunk) {
    const std::size_t stop = std::min(points.size(), start + kSampleChunk);
    const std::vector<Point2> chunk(points.begin() + static_cast<std::ptrdiff_t>(start),
                                    points.begin() + static_cast<std::ptrdiff_t>(stop));
    const CMat a = steering_matrix(geometry, chunk);
    sum.noalias() += a * a.adjoint();
  }
  const double n = static_cast<double>(points.size());
  const double sigma_g2 = gains.second_moment();
  CMat r = (sigma_g2 / n) * sum;

  CovarianceModel model(std::move(r), options.rank_threshold, options.samples);

  // First-order Monte Carlo standard error of the top eigenvalue.
  const CVec u1 = model.eigenvectors().col(0);
  double m1 = 0.0, m2 = 0.0;
  for (const Point2& p : points) {
    const double v = std::norm(u1.dot(steering_vector(geometry, p)));
    m1 += v;
    m2 += v * v;
  }
  m1 /= n;
  m2 /= n;
  model.top_jitter_ = n > 1 ? sigma_g2 * std::sqrt(std::max(m2 - m1 * m1, 0.0) / n) : 0.0;
  return model;
}

CovarianceModel estimate_covariance(const ArrayGeometry& geometry, const UncertaintyRegion& region,
                                    const GainModel& gains, const CovarianceOptions& options) {
  return estimate_covariance(geometry, sampler_for(region), gains, options);
}

Subspace reduce_subspace(const CovarianceModel& model, std::optional<int> fixed_dim) {
  const int k = model.size();
  const int dim = fixed_dim.value_or(model.rank());
  if (dim < 1 || dim > k)
    throw ConfigError("subspace dimension must lie in [1, K]", "L");
  Subspace out;
  out.basis = model.eigenvectors().leftCols(dim);
  out.eigenvalues = model.eigenvalues().head(dim).cwiseMax(0.0);
  const double total = model.trace();
  out.captured_energy = total > 0.0 ? out.eigenvalues.sum() / total : 1.0;
  return out;
}

}  // namespace simloc
