#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "simloc/config.hpp"
#include "simloc/error.hpp"
#include "simloc/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::string preset = "desk-scale";
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> workers;
};

simloc::ScenarioConfig resolve_config(const Common& c) {
  simloc::ScenarioConfig cfg =
      c.config.empty() ? simloc::preset(c.preset) : simloc::load_config(c.config);
  if (c.seed) {
    cfg.sweep.seed = *c.seed;
    cfg.covariance.seed = *c.seed;
  }
  if (c.workers) cfg.sweep.workers = *c.workers;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("-p,--preset", c.preset, "Built-in preset when no config is given")
      ->check(CLI::IsMember({"desk-scale", "paper-scale"}));
  sub->add_option("-s,--seed", c.seed, "Master seed override");
  sub->add_option("-o,--out", c.out, "Output directory");
  sub->add_option("-w,--workers", c.workers, "Concurrent sweep cells")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIM-aided near-field channel estimation and localization simulator"};
  app.require_subcommand(1);

  Common common;
  std::string subspace_file, records_file;

  auto* cov = app.add_subcommand("covariance", "Channel covariance, subspace and rank report");
  add_common(cov, common);
  auto* opt = app.add_subcommand("optimize-sim", "Configure SIM phases toward the target subspace");
  add_common(opt, common);
  opt->add_option("--subspace", subspace_file, "K x L subspace matrix file")
      ->check(CLI::ExistingFile);
  auto* est = app.add_subcommand("estimate", "Estimator reports for the configured region");
  add_common(est, common);
  auto* bnd = app.add_subcommand("bounds", "Mismatch metrics and position error bounds");
  add_common(bnd, common);
  auto* swp = app.add_subcommand("sweep", "Distance x angle x SNR sweep");
  add_common(swp, common);
  auto* plot = app.add_subcommand("plot-data", "Per-figure tidy tables from sweep records");
  add_common(plot, common);
  plot->add_option("--records", records_file, "records.csv from a sweep")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? simloc::kExitOk : simloc::kExitConfig;
  }

  try {
    const std::filesystem::path out = common.out;
    if (*cov) return simloc::cmd_covariance(resolve_config(common), out);
    if (*opt) {
      std::optional<std::filesystem::path> sub;
      if (!subspace_file.empty()) sub = subspace_file;
      return simloc::cmd_optimize_sim(resolve_config(common), sub, out);
    }
    if (*est) return simloc::cmd_estimate(resolve_config(common), out);
    if (*bnd) return simloc::cmd_bounds(resolve_config(common), out);
    if (*swp) return simloc::cmd_sweep(resolve_config(common), out);
    if (*plot) {
      std::ifstream in(records_file);
      const auto records = simloc::read_records_csv(in);
      std::vector<double> angles;
      if (!common.config.empty()) angles = resolve_config(common).sweep.angles_rad;
      return simloc::cmd_plot_data(records, out, angles);
    }
  } catch (const simloc::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << '\n';
    return simloc::kExitConfig;
  } catch (const simloc::ConditioningError& e) {
    std::cerr << "conditioning error: " << e.what() << "\n  eta =";
    for (Eigen::Index i = 0; i < e.eta().size(); ++i) std::cerr << ' ' << e.eta()(i);
    std::cerr << '\n';
    return simloc::kExitConditioning;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return simloc::exit_code_for(e);
  }
  return simloc::kExitFailure;
}
