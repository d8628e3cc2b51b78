#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "simloc/rng.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// Layout parameters of a SIM and its receiver array. Spacings are in meters.
struct GeometryConfig {
  int ky = 16;                    // elements per layer along y
  int kz = 1;                     // elements per layer along z
  int layers = 3;                 // Q
  double carrier_hz = 28e9;
  double element_spacing = 0.0;   // 0 selects lambda/2
  double layer_spacing = 0.0;     // 0 selects lambda/2
  int receiver_elements = 4;      // M (= L outputs)
  double receiver_spacing = 0.0;  // 0 selects lambda/2
};

/// Element positions of a stack of identical planar layers.
///
/// Positions are stored layer-major (all elements of layer 0, then layer 1,
/// ...); within a layer the element index is `iz * ky + iy`. Layer 0 is
/// centred at the origin in the y-z plane and layer q sits at x = -q *
/// layer_spacing.
class ArrayGeometry {
 public:
  ArrayGeometry(int ky, int kz, int layers, double spacing, double layer_spacing,
                double wavelength, double x0 = 0.0);

  int ky() const noexcept { return ky_; }
  int kz() const noexcept { return kz_; }
  int layers() const noexcept { return layers_; }
  int elements_per_layer() const noexcept { return ky_ * kz_; }
  int element_count() const noexcept { return ky_ * kz_ * layers_; }
  double spacing() const noexcept { return spacing_; }
  double layer_spacing() const noexcept { return layer_spacing_; }
  double wavelength() const noexcept { return wavelength_; }
  /// Largest distance between two elements of the first layer.
  double aperture() const noexcept { return aperture_; }

  /// 3 x (K*Q) matrix of element coordinates.
  const Eigen::Matrix3Xd& positions() const noexcept { return positions_; }
  Eigen::Vector3d position(int layer, int element) const;
  /// 3 x K block of the first (input) layer.
  Eigen::Matrix3Xd first_layer() const;
  double layer_x(int layer) const noexcept { return x0_ - layer * layer_spacing_; }

  /// Copy with every position rotated by `angle` about the z axis.
  ArrayGeometry rotated_z(double angle) const;

 private:
  int ky_, kz_, layers_;
  double spacing_, layer_spacing_, wavelength_, x0_;
  double aperture_ = 0.0;
  Eigen::Matrix3Xd positions_;
};

struct SimLayout {
  ArrayGeometry sim;
  ArrayGeometry receiver;  // single layer, one wavelength behind layer Q
};

SimLayout build_sim_geometry(const GeometryConfig& config);

double wavelength_for(double carrier_hz);

/// 2 D^2 / lambda.
double fraunhofer_distance(const ArrayGeometry& geometry);
double fraunhofer_distance(double aperture, double wavelength);

/// True when p lies strictly inside the radiative near field of the first layer.
bool in_radiative_near_field(const ArrayGeometry& geometry, const Point2& p);

/// Circular uncertainty region with a uniform density.
class UncertaintyRegion {
 public:
  UncertaintyRegion(Point2 center, double diameter);

  const Point2& center() const noexcept { return center_; }
  double diameter() const noexcept { return diameter_; }
  double radius() const noexcept { return 0.5 * diameter_; }
  bool contains(const Point2& p, double slack = 1e-12) const noexcept;

  /// Point drawn with the given engine (used for per-sample streams).
  Point2 draw(SplitMix64& rng) const;
  /// n i.i.d. uniform points; sample i comes from stream derive_seed(seed, i).
  std::vector<Point2> sample(std::size_t n, std::uint64_t seed) const;

 private:
  Point2 center_;
  double diameter_;
};

/// Region centred at `distance` along `bearing` (radians from the x axis).
UncertaintyRegion region_at(double distance, double bearing, double diameter);

/// Generic sampler for region shapes other than the disk.
using RegionSampler = std::function<std::vector<Point2>(std::size_t n, std::uint64_t seed)>;

RegionSampler sampler_for(const UncertaintyRegion& region);

/// Log-normal shadowing with uniform phase offset.
struct GainModel {
  double shadowing_std_db = 3.0;
  double mean_gain = 1.0;  // gain at 0 dB shadowing (median of G)

  /// sigma_G^2 = E[G^2].
  double second_moment() const;
  double draw_gain(SplitMix64& rng) const;
  double draw_phase(SplitMix64& rng) const;
};

}  // namespace simloc
