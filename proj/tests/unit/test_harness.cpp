#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "simloc/error.hpp"
#include "simloc/harness.hpp"
#include "simloc/matrix_io.hpp"

using namespace simloc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("simloc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ScenarioConfig small_config() {
  ScenarioConfig c = desk_scale_preset();
  c.covariance.samples = 3000;
  c.sweep.distances_m = {0.5, 2.0};
  c.sweep.angles_rad = {0.0, kPi / 6};
  c.sweep.trials = 200;
  c.sweep.loc_trials = 5;
  c.localizer.coarse_grid = 16;
  c.localizer.refine_iters = 3;
  return c;
}

std::string key_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("presets") {
  const ScenarioConfig d = preset("desk-scale");
  CHECK(d.geometry.ky == 16);
  CHECK(d.geometry.layers == 3);
  CHECK(d.subspace_dim == 4);
  CHECK(d.sweep.angles_rad == std::vector<double>{0.0, kPi / 6, kPi / 3});
  const ScenarioConfig p = preset("paper-scale");
  CHECK(p.geometry.ky * p.geometry.kz * p.geometry.layers == 1792);
  CHECK(p.subspace_dim == 6);
  CHECK_NOTHROW(d.validate());
  CHECK_NOTHROW(p.validate());
  CHECK_THROWS_AS(preset("huge"), ConfigError);
}

TEST_CASE("bundled config files match the presets") {
  for (const char* name : {"desk-scale", "paper-scale"}) {
    const fs::path path = fs::path(SIMLOC_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
    CHECK(config_to_json(load_config(path)) == config_to_json(preset(name)));
  }
}

TEST_CASE("config parsing is strict and names the offending key") {
  CHECK(key_of([] { config_from_json(json{{"bogus", 1}}); }) == "bogus");
  CHECK(key_of([] { config_from_json(json{{"geometry", {{"kx", 4}}}}); }) == "geometry.kx");
  CHECK(key_of([] { config_from_json(json{{"region", {{"distance_m", "far"}}}}); }) ==
        "region.distance_m");
  CHECK(key_of([] { config_from_json(json{{"reduction", {{"L", 99}}}}); }) == "reduction.L");
  CHECK(key_of([] { config_from_json(json{{"sweep", {{"sim_mode", "file"}}}}); }) ==
        "sweep.eta_file");
  CHECK(key_of([] {
          config_from_json(json{{"impedance", {{"provider", "file"}, {"file", "/no/such"}}}});
        }) == "impedance.file");
  CHECK(key_of([] { config_from_json(json{{"noise", {{"peb_noise", "pink"}}}}); }) ==
        "noise.peb_noise");
  CHECK(key_of([] { config_from_json(json{{"sweep", {{"trials", 10}}}}); }) == "sweep.trials");
}

TEST_CASE("config values and json round trip") {
  const json j = {{"preset", "desk-scale"},
                  {"geometry", {{"ky", 8}, {"element_spacing_wl", 0.4}}},
                  {"reduction", {{"L", 3}, {"target_delta_U", "inf"}}},
                  {"noise", {{"snr_db", {5.0}}}},
                  {"sweep", {{"distances_m", {1.0}}, {"workers", 2}}},
                  {"optimizer", {{"starts", 2}, {"method", "gradient"}}}};
  const ScenarioConfig c = config_from_json(j);
  CHECK(c.geometry.ky == 8);
  CHECK(c.geometry.element_spacing == doctest::Approx(0.4 * wavelength_for(28e9)));
  CHECK(c.subspace_dim == 3);
  CHECK(c.geometry_config().receiver_elements == 3);
  CHECK(std::isinf(c.optimizer.target_delta_u));
  CHECK(c.snr_db == std::vector<double>{5.0});
  CHECK(c.sweep.workers == 2);
  CHECK(c.starts == 2);
  CHECK(c.optimizer.method == DescentMethod::gradient);

  const json once = config_to_json(c);
  const json twice = config_to_json(config_from_json(once));
  CHECK(once == twice);
}

TEST_CASE("config file paths resolve against the config directory") {
  const fs::path dir = scratch("paths");
  save_vector(dir / "eta.txt", RVec::Zero(48));
  {
    std::ofstream out(dir / "cfg.json");
    out << R"({"sweep": {"sim_mode": "file", "eta_file": "eta.txt"}})";
  }
  const ScenarioConfig c = load_config(dir / "cfg.json");
  CHECK(c.sweep.sim_mode == SimMode::file);
  CHECK(*c.sweep.eta_file == dir / "eta.txt");
  {
    std::ofstream out(dir / "broken.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("records csv round trip") {
  const std::vector<ResultRecord> recs{
      {"desk-scale", "mmse_ideal", 0.5, kPi / 6, 10.0, "mse", 0.1 + 0.2, 1.0 / 3.0, "monte-carlo"},
      {"desk-scale", "covariance", 2.0, 0.0, std::nan(""), "effective_rank", 3.0, 0.0, "analytic"},
      {"x", "peb", 1e-300, -0.0, -5.0, "peb", 6.02214076e23, 0.0, "analytic"}};
  std::stringstream s;
  write_records_csv(s, recs);
  const std::vector<ResultRecord> back = read_records_csv(s);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].scenario == recs[i].scenario);
    CHECK(back[i].distance_m == recs[i].distance_m);
    CHECK(back[i].angle_rad == recs[i].angle_rad);
    CHECK((back[i].snr_db == recs[i].snr_db || (std::isnan(back[i].snr_db) && std::isnan(recs[i].snr_db))));
    CHECK(back[i].value == recs[i].value);
    CHECK(back[i].stderr_ == recs[i].stderr_);
    CHECK(back[i].provenance == recs[i].provenance);
  }
  std::stringstream bad("wrong,header\n");
  CHECK_THROWS_AS(read_records_csv(bad), ConfigError);
  CHECK(records_to_json(recs)[1]["snr_db"].is_null());
}

TEST_CASE("plot data splits by angle and round-trips") {
  std::vector<ResultRecord> recs;
  for (double a : {0.0, kPi / 6, kPi / 3})
    for (double d : {1.0, 2.0}) {
      recs.push_back({"s", "mmse_ideal", d, a, 0.0, "mse", d * 0.1 + a, 0.0, "analytic"});
      recs.push_back({"s", "mmse_ideal", d, a, 0.0, "peb", d * 0.01, 0.0, "analytic"});
      recs.push_back({"s", "covariance", d, a, std::nan(""), "effective_rank", 2.0, 0.0, "analytic"});
    }
  const fs::path dir = scratch("plot");
  CHECK(cmd_plot_data(recs, dir) == kExitOk);
  std::size_t rows = 0;
  for (int i = 0; i < 3; ++i) {
    for (const char* fig : {"mse", "loc"}) {
      const fs::path f = dir / (std::string(fig) + "_angle_" + std::to_string(i) + ".csv");
      REQUIRE(fs::exists(f));
      std::ifstream in(f);
      const std::vector<ResultRecord> back = read_records_csv(in);
      CHECK(back.size() == 2);
      for (const ResultRecord& r : back) {
        const bool found = std::find(recs.begin(), recs.end(), r) != recs.end();
        CHECK(found);
        CHECK(r.angle_rad == std::vector<double>{0.0, kPi / 6, kPi / 3}[i]);
      }
      rows += back.size();
    }
  }
  CHECK(rows == 12);
  CHECK_FALSE(fs::exists(dir / "mse_angle_3.csv"));

  const fs::path empty = scratch("plot_empty");
  CHECK(cmd_plot_data({}, empty) == kExitOk);
  for (const char* f : {"mse.csv", "loc.csv"})
    CHECK(slurp(empty / f) == std::string(kRecordHeader) + "\n");
  const fs::path angles = scratch("plot_angles");
  cmd_plot_data({}, angles, {0.0, 1.0, 2.0});
  CHECK(slurp(angles / "loc_angle_2.csv") == std::string(kRecordHeader) + "\n");
}

TEST_CASE("cell seeds depend only on the cell") {
  CHECK(cell_seed(7, 1.0, 0.5) == cell_seed(7, 1.0, 0.5));
  CHECK(cell_seed(7, 1.0, 0.5) != cell_seed(8, 1.0, 0.5));
  CHECK(cell_seed(7, 1.0, 0.5) != cell_seed(7, 0.5, 1.0));
  CHECK(cell_seed(7, 1.0, 0.0) != cell_seed(7, 1.0, -0.0));
}

TEST_CASE("sweep is deterministic and cells are independent") {
  ScenarioConfig c = small_config();
  const std::vector<ResultRecord> a = run_sweep(c);
  c.sweep.workers = 3;
  const std::vector<ResultRecord> b = run_sweep(c);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // One cell alone, and cells in reversed order.
  ScenarioConfig sub = small_config();
  sub.sweep.distances_m = {2.0, 0.5};
  sub.sweep.angles_rad = {kPi / 6};
  const std::vector<ResultRecord> c2 = run_sweep(sub);
  std::size_t matched = 0;
  for (const ResultRecord& r : c2) matched += std::count(a.begin(), a.end(), r);
  CHECK(matched == c2.size());

  bool every_provenance = true;
  for (const ResultRecord& r : a)
    every_provenance &= r.provenance == "analytic" || r.provenance == "monte-carlo";
  CHECK(every_provenance);
}

TEST_CASE("sweep records carry every estimator and metric") {
  ScenarioConfig c = small_config();
  c.sweep.distances_m = {2.0};
  c.sweep.angles_rad = {0.0};
  c.snr_db = {10.0};
  const std::vector<ResultRecord> recs = run_sweep(c);
  for (const char* tag : {"mmse_ideal", "rsls_ideal", "mmse_sim", "rsls_sim", "digital_baseline"})
    for (const char* metric : {"mse", "nmse", "peb", "peb_condition_flag", "loc_rmse"}) {
      const bool found = std::any_of(recs.begin(), recs.end(), [&](const ResultRecord& r) {
        return r.tag == tag && r.metric == metric;
      });
      CHECK_MESSAGE(found, tag << " " << metric);
    }
  // Ideal mode: the post-SIM estimators coincide with the ideal ones.
  auto value = [&](const char* tag, const char* prov) {
    for (const ResultRecord& r : recs)
      if (r.tag == tag && r.metric == "mse" && r.provenance == prov) return r.value;
    return std::nan("");
  };
  CHECK(value("mmse_sim", "analytic") == doctest::Approx(value("mmse_ideal", "analytic")));
  CHECK(value("rsls_sim", "analytic") == doctest::Approx(value("rsls_ideal", "analytic")));
  CHECK(value("rsls_ideal", "analytic") >= value("mmse_ideal", "analytic"));
}

TEST_CASE("covariance command output") {
  ScenarioConfig c = small_config();
  const fs::path a = scratch("cov_a"), b = scratch("cov_b");
  CHECK(cmd_covariance(c, a) == kExitOk);
  CHECK(cmd_covariance(c, b) == kExitOk);
  for (const char* f :
       {"covariance.txt", "subspace_U.txt", "subspace_D.txt", "spectrum.txt", "rank_report.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const json rep = json::parse(slurp(a / "rank_report.json"));
  CHECK(rep["K"] == 16);
  CHECK(rep["L"] == 4);
  CHECK(rep["eigenvalues"].size() == 16);
  CHECK(load_complex_matrix(a / "subspace_U.txt").cols() == 4);

  c.region.diameter_m = 0.0;
  c.gains.shadowing_std_db = 0.0;
  const fs::path z = scratch("cov_point");
  cmd_covariance(c, z);
  CHECK(json::parse(slurp(z / "rank_report.json"))["rank"] == 1);
}

TEST_CASE("optimize command") {
  ScenarioConfig c = small_config();
  c.starts = 1;
  c.optimizer.target_delta_u = std::numeric_limits<double>::infinity();
  const fs::path inf = scratch("opt_inf");
  CHECK(cmd_optimize_sim(c, std::nullopt, inf) == kExitOk);
  const json rep = json::parse(slurp(inf / "optimize_report.json"));
  CHECK(rep["iterations"] == 0);
  CHECK(rep["target_delta_U"] == "inf");
  CHECK(load_vector(inf / "eta.txt") == random_phases(48, derive_seed(c.sweep.seed, 0)));

  c.optimizer.target_delta_u = 0.1;
  c.starts = 3;
  const fs::path dir = scratch("opt");
  const int code = cmd_optimize_sim(c, std::nullopt, dir);
  CHECK((code == kExitOk || code == kExitNotConverged));
  std::ifstream in(dir / "trace.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,objective,delta_U,delta_rel,step");
  double prev = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(in, line)) {
    const double obj = std::stod(line.substr(line.find(',') + 1));
    CHECK(obj <= prev);
    prev = obj;
    ++rows;
  }
  CHECK(rows > 1);
  const json r2 = json::parse(slurp(dir / "optimize_report.json"));
  CHECK(r2["converged"] == (code == kExitOk));
  if (code == kExitOk) CHECK(r2["delta_U"].get<double>() <= 0.1);
}

TEST_CASE("estimate and bounds commands") {
  ScenarioConfig c = small_config();
  c.snr_db = {10.0};
  const fs::path dir = scratch("est");
  CHECK(cmd_estimate(c, dir) == kExitOk);
  const json est = json::parse(slurp(dir / "estimation.json"));
  CHECK(est["reports"].size() == 5);
  CHECK(cmd_bounds(c, dir) == kExitOk);
  const json b = json::parse(slurp(dir / "bounds.json"));
  CHECK(b["peb"].size() == 5);
  CHECK(b["mismatch"]["delta_U"].get<double>() < 1e-12);
  CHECK(b["mse_ratio_check"]["holds"] == true);
}

TEST_CASE("file mode requires an eta vector of the right size") {
  ScenarioConfig c = small_config();
  const fs::path dir = scratch("eta");
  save_vector(dir / "eta.txt", RVec::Zero(5));
  c.sweep.sim_mode = SimMode::file;
  c.sweep.eta_file = dir / "eta.txt";
  CHECK_THROWS_AS(build_cell(c, 1.0, 0.0), DimensionError);
  c.sweep.eta_file.reset();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x", "k")) == kExitConfig);
  CHECK(exit_code_for(ConditioningError("x", 1e-20)) == kExitConditioning);
  CHECK(exit_code_for(EstimationError("x")) == kExitFailure);
  CHECK(exit_code_for(std::runtime_error("x")) == kExitFailure);
}

}  // TEST_SUITE
