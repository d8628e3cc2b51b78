#include "simloc/geometry.hpp"

#include <cmath>

#include "simloc/error.hpp"

namespace simloc {

ArrayGeometry::ArrayGeometry(int ky, int kz, int layers, double spacing,
                             double layer_spacing, double wavelength, double x0)
    : ky_(ky),
      kz_(kz),
      layers_(layers),
      spacing_(spacing),
      layer_spacing_(layer_spacing),
      wavelength_(wavelength),
      x0_(x0) {
  if (ky < 1 || kz < 1 || layers < 1)
    throw ConfigError("array dimensions must be >= 1");
  if (!(spacing > 0.0) || !(wavelength > 0.0))
    throw ConfigError("element spacing and wavelength must be positive");
  if (layers > 1 && !(layer_spacing > 0.0))
    throw ConfigError("layer spacing must be positive");

  const int k = ky * kz;
  positions_.resize(3, static_cast<Eigen::Index>(k) * layers);
  for (int q = 0; q < layers; ++q) {
    for (int iz = 0; iz < kz; ++iz) {
      for (int iy = 0; iy < ky; ++iy) {
        const Eigen::Index col = static_cast<Eigen::Index>(q) * k + iz * ky + iy;
        positions_(0, col) = layer_x(q);
        positions_(1, col) = (iy - 0.5 * (ky - 1)) * spacing;
        positions_(2, col) = (iz - 0.5 * (kz - 1)) * spacing;
      }
    }
  }

  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      aperture_ = std::max(aperture_, (positions_.col(a) - positions_.col(b)).norm());
}

Eigen::Vector3d ArrayGeometry::position(int layer, int element) const {
  return positions_.col(static_cast<Eigen::Index>(layer) * elements_per_layer() + element);
}

ArrayGeometry ArrayGeometry::rotated_z(double angle) const {
  ArrayGeometry out = *this;
  out.positions_ = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix() * positions_;
  return out;
}

Eigen::Matrix3Xd ArrayGeometry::first_layer() const {
  return positions_.leftCols(elements_per_layer());
}

double wavelength_for(double carrier_hz) {
  if (!(carrier_hz > 0.0)) throw ConfigError("carrier frequency must be positive", "carrier_hz");
  return kSpeedOfLight / carrier_hz;
}

SimLayout build_sim_geometry(const GeometryConfig& config) {
  const double lambda = wavelength_for(config.carrier_hz);
  if (config.ky < 1 || config.kz < 1 || config.layers < 1 || config.receiver_elements < 1)
    throw ConfigError("array dimensions must be >= 1");
  if (config.element_spacing < 0.0 || config.layer_spacing < 0.0 || config.receiver_spacing < 0.0)
    throw ConfigError("spacings must be positive");
  const double spacing = config.element_spacing > 0.0 ? config.element_spacing : 0.5 * lambda;
  const double layer_spacing = config.layer_spacing > 0.0 ? config.layer_spacing : 0.5 * lambda;
  const double rx_spacing = config.receiver_spacing > 0.0 ? config.receiver_spacing : 0.5 * lambda;

  ArrayGeometry sim(config.ky, config.kz, config.layers, spacing, layer_spacing, lambda);
  const double rx_x = sim.layer_x(config.layers - 1) - lambda;
  ArrayGeometry receiver(config.receiver_elements, 1, 1, rx_spacing, layer_spacing, lambda, rx_x);
  return SimLayout{std::move(sim), std::move(receiver)};
}

double fraunhofer_distance(double aperture, double wavelength) {
  return 2.0 * aperture * aperture / wavelength;
}

double fraunhofer_distance(const ArrayGeometry& geometry) {
  return fraunhofer_distance(geometry.aperture(), geometry.wavelength());
}

bool in_radiative_near_field(const ArrayGeometry& geometry, const Point2& p) {
  return std::hypot(p.x, p.y) < fraunhofer_distance(geometry);
}

UncertaintyRegion::UncertaintyRegion(Point2 center, double diameter)
    : center_(center), diameter_(diameter) {
  if (!(diameter >= 0.0) || !std::isfinite(diameter))
    throw ConfigError("region diameter must be non-negative", "diameter_m");
  if (!(center.x > 0.0)) throw ConfigError("region centre must satisfy x > 0", "distance_m");
}

bool UncertaintyRegion::contains(const Point2& p, double slack) const noexcept {
  return distance(p, center_) <= radius() + slack;
}

Point2 UncertaintyRegion::draw(SplitMix64& rng) const {
  const double r = radius() * std::sqrt(uniform01(rng));
  const double t = 2.0 * kPi * uniform01(rng);
  return {center_.x + r * std::cos(t), center_.y + r * std::sin(t)};
}

std::vector<Point2> UncertaintyRegion::sample(std::size_t n, std::uint64_t seed) const {
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, i));
    out.push_back(draw(rng));
  }
  return out;
}

UncertaintyRegion region_at(double distance, double bearing, double diameter) {
  return UncertaintyRegion({distance * std::cos(bearing), distance * std::sin(bearing)}, diameter);
}

RegionSampler sampler_for(const UncertaintyRegion& region) {
  return [region](std::size_t n, std::uint64_t seed) { return region.sample(n, seed); };
}

double GainModel::second_moment() const {
  const double s = shadowing_std_db * std::log(10.0) / 10.0;
  return mean_gain * mean_gain * std::exp(0.5 * s * s);
}

double GainModel::draw_gain(SplitMix64& rng) const {
  if (shadowing_std_db == 0.0) return mean_gain;
  return mean_gain * std::pow(10.0, shadowing_std_db * standard_normal(rng) / 20.0);
}

double GainModel::draw_phase(SplitMix64& rng) const { return 2.0 * kPi * uniform01(rng); }

}  // namespace simloc
