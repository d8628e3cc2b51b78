#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "simloc/channel.hpp"
#include "simloc/geometry.hpp"
#include "simloc/localizer.hpp"
#include "simloc/multiport.hpp"
#include "simloc/simopt.hpp"

namespace simloc {

enum class SimMode { ideal, optimize, file };
enum class NoiseMapping { white, colored };

struct RegionConfig {
  double distance_m = 2.0;
  double bearing_rad = 0.0;
  double diameter_m = 0.6;
};

struct SweepConfig {
  std::vector<double> distances_m{0.5, 1.0, 2.0, 4.0};
  std::vector<double> angles_rad{0.0, kPi / 6.0, kPi / 3.0};
  std::size_t trials = 10000;     // Monte Carlo MSE trials per cell
  std::size_t loc_trials = 200;   // localizer trials per cell and estimator
  std::uint64_t seed = 7;
  SimMode sim_mode = SimMode::ideal;
  std::optional<std::filesystem::path> eta_file;
  int workers = 1;
};

struct ImpedanceConfig {
  std::string provider = "analytic";  // analytic | file
  AnalyticImpedance analytic;         // cell_depth in meters (0 selects lambda/4)
  double x0 = 50.0;
  std::optional<std::filesystem::path> file;
};

/// Full scenario description. Spacings are given in wavelengths in the file
/// and converted to meters by `geometry_config()`.
struct ScenarioConfig {
  std::string scenario = "desk-scale";
  GeometryConfig geometry;
  RegionConfig region;
  GainModel gains;
  CovarianceOptions covariance;
  int subspace_dim = 4;  // L, also the receiver chain count M
  std::vector<double> snr_db{0.0, 10.0};
  SweepConfig sweep;
  ImpedanceConfig impedance;
  OptimizerConfig optimizer;
  int starts = 5;  // optimizer random restarts
  LocalizerConfig localizer;
  NoiseMapping noise_mapping = NoiseMapping::white;

  void validate() const;
  /// Geometry with the receiver chain count set to L.
  GeometryConfig geometry_config() const;
  UncertaintyRegion region_model() const;
};

ScenarioConfig desk_scale_preset();
ScenarioConfig paper_scale_preset();
ScenarioConfig preset(const std::string& name);

/// Parses and validates; unknown keys raise ConfigError naming the key.
/// Relative file paths resolve against `base_dir`.
ScenarioConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ScenarioConfig& cfg);

std::string to_string(SimMode m);
SimMode parse_sim_mode(const std::string& s);

}  // namespace simloc
