#pragma once

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "simloc/bounds.hpp"
#include "simloc/config.hpp"
#include "simloc/estimation.hpp"

namespace simloc {

/// Exit statuses of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitConditioning = 3,
  kExitNotConverged = 4,
};

/// One output row. `snr_db` is NaN for SNR-independent metrics; equality
/// treats two NaN fields as equal.
struct ResultRecord {
  std::string scenario;
  std::string tag;
  double distance_m = 0.0;
  double angle_rad = 0.0;
  double snr_db = 0.0;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  std::string provenance;  // analytic | monte-carlo

  friend bool operator==(const ResultRecord& a, const ResultRecord& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.scenario == b.scenario && a.tag == b.tag && same(a.distance_m, b.distance_m) &&
           same(a.angle_rad, b.angle_rad) && same(a.snr_db, b.snr_db) && a.metric == b.metric &&
           same(a.value, b.value) && same(a.stderr_, b.stderr_) && a.provenance == b.provenance;
  }
};

inline constexpr const char* kRecordHeader =
    "scenario,tag,distance_m,angle_rad,snr_db,metric,value,stderr,provenance";

void write_records_csv(std::ostream& out, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_records_csv(std::istream& in);
nlohmann::json records_to_json(const std::vector<ResultRecord>& records);

/// Effective projection used by the post-SIM estimators of one cell.
struct CellProjection {
  CMat v;              // L x K (combiner applied)
  RVec eta;            // empty in ideal mode
  bool converged = true;
  int iterations = 0;
  MismatchMetrics mismatch;
  double orthonormality_gap = 0.0;
};

/// Everything the pipelines derive for one (distance, angle) cell.
struct CellModel {
  double distance_m = 0.0;
  double angle_rad = 0.0;
  std::uint64_t seed = 0;
  SimLayout layout;
  UncertaintyRegion region;
  CovarianceModel covariance;
  Subspace subspace;
  CellProjection projection;
};

/// Seed of a cell, derived from the master seed and the cell coordinates
/// only, so any subset of cells reproduces the same values.
std::uint64_t cell_seed(std::uint64_t master, double distance_m, double angle_rad);

/// Builds the network for a layout per the impedance block.
SimNetwork make_network(const ScenarioConfig& cfg, const SimLayout& layout);

/// Covariance, subspace and (per sim mode) projection of a cell.
CellModel build_cell(const ScenarioConfig& cfg, double distance_m, double angle_rad);

/// Five estimators of a cell at one noise level, in reporting order.
std::vector<LinearEstimator> cell_estimators(const CellModel& cell, double noise_variance);

/// ObservationModel matching an estimator built by `cell_estimators`.
ObservationModel observation_for(const LinearEstimator& est, double noise_variance);

/// All records of one cell.
std::vector<ResultRecord> run_cell(const ScenarioConfig& cfg, double distance_m,
                                   double angle_rad);

/// Runs every (distance, angle) cell with up to cfg.sweep.workers threads;
/// records come back in configuration order regardless of scheduling.
std::vector<ResultRecord> run_sweep(const ScenarioConfig& cfg);

// Command entry points. Each writes its files under `out_dir` and returns an
// ExitCode; errors propagate as exceptions.
int cmd_covariance(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
int cmd_optimize_sim(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& subspace,
                     const std::filesystem::path& out_dir);
int cmd_estimate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
int cmd_bounds(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
int cmd_sweep(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
/// Splits records into per-figure tables (mse, loc), one per angle. `angles`
/// adds tables for angles with no records.
int cmd_plot_data(const std::vector<ResultRecord>& records, const std::filesystem::path& out_dir,
                  const std::vector<double>& angles = {});

/// Maps an exception thrown by the commands to its exit status.
int exit_code_for(const std::exception& e);

}  // namespace simloc
