#include "simloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "simloc/error.hpp"
#include "simloc/localizer.hpp"
#include "simloc/matrix_io.hpp"
#include "simloc/multiport.hpp"
#include "simloc/simopt.hpp"

namespace simloc {

using nlohmann::json;

namespace {

constexpr double kNoSnr = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

json vector_json(const RVec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

LinearEstimator retag(const LinearEstimator& e, std::string tag) {
  return {std::move(tag), e.observation(), e.gain(), e.error_covariance(), e.bias_covariance()};
}

// Finite doubles print with round-trip precision; NaN as "nan".
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in records", "records");
  }
  if (used != s.size()) throw ConfigError("bad number '" + s + "' in records", "records");
  return v;
}

ChannelParams centre_params(const CellModel& cell, const ScenarioConfig& cfg) {
  return {cell.region.center().x, cell.region.center().y, cfg.gains.mean_gain, 0.0};
}

PebReport estimator_peb(const ScenarioConfig& cfg, const CellModel& cell,
                        const LinearEstimator& est) {
  const ChannelParams p = centre_params(cell, cfg);
  if (cfg.noise_mapping == NoiseMapping::colored)
    return fim_peb_colored(cell.layout.sim, p, est.error_covariance() + est.bias_covariance());
  return fim_peb(cell.layout.sim, p,
                 effective_noise_from_mse(est.total_mse(), cell.layout.sim.elements_per_layer()));
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << kRecordHeader << '\n';
  for (const ResultRecord& r : records) {
    if (r.scenario.find(',') != std::string::npos || r.tag.find(',') != std::string::npos)
      throw ConfigError("record text fields may not contain commas", "scenario");
    out << r.scenario << ',' << r.tag << ',' << fmt(r.distance_m) << ',' << fmt(r.angle_rad)
        << ',' << fmt(r.snr_db) << ',' << r.metric << ',' << fmt(r.value) << ','
        << fmt(r.stderr_) << ',' << r.provenance << '\n';
  }
}

std::vector<ResultRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader)
    throw ConfigError("records file has an unexpected header", "records");
  std::vector<ResultRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw ConfigError("records row must have 9 fields: " + line, "records");
    out.push_back({f[0], f[1], parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), f[5],
                   parse_double(f[6]), parse_double(f[7]), f[8]});
  }
  return out;
}

json records_to_json(const std::vector<ResultRecord>& records) {
  json arr = json::array();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const ResultRecord& r : records)
    arr.push_back({{"scenario", r.scenario},
                   {"tag", r.tag},
                   {"distance_m", r.distance_m},
                   {"angle_rad", r.angle_rad},
                   {"snr_db", num(r.snr_db)},
                   {"metric", r.metric},
                   {"value", num(r.value)},
                   {"stderr", num(r.stderr_)},
                   {"provenance", r.provenance}});
  return arr;
}

std::uint64_t cell_seed(std::uint64_t master, double distance_m, double angle_rad) {
  return derive_seed(derive_seed(master, std::bit_cast<std::uint64_t>(distance_m)),
                     std::bit_cast<std::uint64_t>(angle_rad));
}

SimNetwork make_network(const ScenarioConfig& cfg, const SimLayout& layout) {
  const CellLoad load{cfg.impedance.x0};
  if (cfg.impedance.provider == "file") {
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(layout.sim.element_count());
    CMat z = load_impedance(*cfg.impedance.file, n);
    return SimNetwork(std::move(z), output_coupling(layout.sim, layout.receiver, cfg.impedance.analytic),
                      layout.sim.elements_per_layer(), layout.sim.layers(), load);
  }
  return make_analytic_network(layout, cfg.impedance.analytic, load);
}

CellModel build_cell(const ScenarioConfig& cfg, double distance_m, double angle_rad) {
  SimLayout layout = build_sim_geometry(cfg.geometry_config());
  UncertaintyRegion region = region_at(distance_m, angle_rad, cfg.region.diameter_m);
  CovarianceModel cov = estimate_covariance(layout.sim, region, cfg.gains, cfg.covariance);
  Subspace sub = reduce_subspace(cov, cfg.subspace_dim);
  const std::uint64_t seed = cell_seed(cfg.sweep.seed, distance_m, angle_rad);

  CellProjection proj;
  const CMat target = sub.target();
  switch (cfg.sweep.sim_mode) {
    case SimMode::ideal:
      proj.v = target;
      break;
    case SimMode::optimize: {
      SimNetwork net = make_network(cfg, layout);
      OptimizerConfig oc = cfg.optimizer;
      oc.seed = derive_seed(seed, 1);
      const OptimizationTrace trace = optimize_multistart(net, target, oc, cfg.starts);
      proj.v = trace.projection;
      proj.eta = trace.final_eta;
      proj.converged = trace.converged;
      proj.iterations = trace.iterations();
      break;
    }
    case SimMode::file: {
      SimNetwork net = make_network(cfg, layout);
      net.set_eta(load_vector(*cfg.sweep.eta_file));
      proj.v = align(net.effective_projection(), target, cfg.optimizer.scale).aligned;
      proj.eta = net.eta();
      proj.converged = mismatch_metrics(proj.v, sub.basis).delta_u <= cfg.optimizer.target_delta_u;
      break;
    }
  }
  proj.mismatch = mismatch_metrics(proj.v, sub.basis);
  proj.orthonormality_gap = row_orthonormality_gap(proj.v);
  return {distance_m, angle_rad, seed, std::move(layout), region, std::move(cov),
          std::move(sub), std::move(proj)};
}

std::vector<LinearEstimator> cell_estimators(const CellModel& cell, double noise_variance) {
  const CMat& r = cell.covariance.covariance();
  std::vector<LinearEstimator> out;
  out.push_back(retag(make_mmse_reduced(cell.subspace, r, noise_variance), "mmse_ideal"));
  out.push_back(make_rsls_ideal(cell.subspace, r, noise_variance));
  out.push_back(retag(make_mmse_post_sim(cell.projection.v, r, noise_variance, &cell.subspace),
                      "mmse_sim"));
  out.push_back(retag(make_rsls_post_sim(cell.projection.v, cell.subspace, r, noise_variance),
                      "rsls_sim"));
  out.push_back(make_digital_baseline(r, noise_variance));
  return out;
}

ObservationModel observation_for(const LinearEstimator& est, double noise_variance) {
  if (est.tag() == "digital_baseline")
    return {ObservationMode::digital_baseline, std::nullopt, noise_variance};
  if (est.tag() == "mmse_full" || est.tag() == "mmse_spectral")
    return {ObservationMode::full_array, std::nullopt, noise_variance};
  const bool sim = est.tag().find("sim") != std::string::npos;
  return {sim ? ObservationMode::sim_projection : ObservationMode::ideal_projection,
          est.observation(), noise_variance};
}

std::vector<ResultRecord> run_cell(const ScenarioConfig& cfg, double distance_m,
                                   double angle_rad) {
  const CellModel cell = build_cell(cfg, distance_m, angle_rad);
  std::vector<ResultRecord> out;
  auto add = [&](const std::string& tag, double snr, const std::string& metric, double value,
                 double se, const char* prov) {
    out.push_back({cfg.scenario, tag, distance_m, angle_rad, snr, metric, value, se, prov});
  };

  const std::string sim_tag = "sim_" + to_string(cfg.sweep.sim_mode);
  add(sim_tag, kNoSnr, "delta_U", cell.projection.mismatch.delta_u, 0.0, "analytic");
  add(sim_tag, kNoSnr, "delta_rel", cell.projection.mismatch.delta_rel, 0.0, "analytic");
  add(sim_tag, kNoSnr, "orthonormality_gap", cell.projection.orthonormality_gap, 0.0, "analytic");
  add(sim_tag, kNoSnr, "converged", cell.projection.converged ? 1.0 : 0.0, 0.0, "analytic");
  add("covariance", kNoSnr, "effective_rank", cell.covariance.energy_rank(0.99), 0.0, "analytic");
  add("covariance", kNoSnr, "captured_energy", cell.subspace.captured_energy, 0.0, "analytic");

  const ChannelSource source = region_channel_source(cell.layout.sim, cell.region, cfg.gains);
  const double trace_r = cell.covariance.trace();
  for (double snr : cfg.snr_db) {
    const double s2 = noise_variance_for_snr(cell.covariance, snr);
    const std::uint64_t snr_seed = derive_seed(cell.seed, std::bit_cast<std::uint64_t>(snr));
    add("noise", snr, "noise_level_rank", cell.covariance.rank_above(s2), 0.0, "analytic");
    for (const LinearEstimator& est : cell_estimators(cell, s2)) {
      const ObservationModel obs = observation_for(est, s2);
      add(est.tag(), snr, "mse", est.total_mse(), 0.0, "analytic");
      add(est.tag(), snr, "nmse", est.total_mse() / trace_r, 0.0, "analytic");
      // Common random numbers across estimators: same stream for every tag.
      const MonteCarloResult mc =
          monte_carlo_mse(obs, est, source, cfg.sweep.trials, derive_seed(snr_seed, 1));
      add(est.tag(), snr, "mse", mc.mse, mc.stderr_, "monte-carlo");
      add(est.tag(), snr, "nmse", mc.mse / trace_r, mc.stderr_ / trace_r, "monte-carlo");

      const PebReport peb = estimator_peb(cfg, cell, est);
      add(est.tag(), snr, "peb", peb.peb, 0.0, "analytic");
      add(est.tag(), snr, "peb_condition_flag", peb.pseudo_inverse ? 1.0 : 0.0, 0.0, "analytic");

      if (cfg.sweep.loc_trials > 0) {
        const CMat o = obs.matrix(cell.layout.sim.elements_per_layer());
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t t = 0; t < cfg.sweep.loc_trials; ++t) {
          SplitMix64 rng(derive_seed(derive_seed(snr_seed, 2), t));
          const ChannelRealization ch = draw_channel(cell.layout.sim, cell.region, cfg.gains, rng);
          const CVec r = ch.h + complex_normal(ch.h.size(), s2, rng);
          const LocalizationResult loc =
              localize(est.apply(o * r), cell.layout.sim, cell.region, cfg.localizer);
          const double e2 = std::pow(distance(loc.position, ch.position), 2);
          sum += e2;
          sum_sq += e2 * e2;
        }
        const double n = static_cast<double>(cfg.sweep.loc_trials);
        const double mse = sum / n;
        const double var = n > 1 ? std::max(sum_sq / n - mse * mse, 0.0) * n / (n - 1.0) : 0.0;
        const double rmse = std::sqrt(mse);
        add(est.tag(), snr, "loc_rmse", rmse, rmse > 0.0 ? std::sqrt(var / n) / (2.0 * rmse) : 0.0,
            "monte-carlo");
      }
    }
  }
  return out;
}

std::vector<ResultRecord> run_sweep(const ScenarioConfig& cfg) {
  cfg.validate();
  struct Cell {
    double d, a;
  };
  std::vector<Cell> cells;
  for (double d : cfg.sweep.distances_m)
    for (double a : cfg.sweep.angles_rad) cells.push_back({d, a});

  std::vector<std::vector<ResultRecord>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        results[i] = run_cell(cfg, cells[i].d, cells[i].a);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.sweep.workers, static_cast<int>(cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ResultRecord> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  return out;
}

int cmd_covariance(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  const UncertaintyRegion region = cfg.region_model();
  const CovarianceModel cov = estimate_covariance(layout.sim, region, cfg.gains, cfg.covariance);
  const Subspace sub = reduce_subspace(cov, cfg.subspace_dim);

  std::filesystem::create_directories(out_dir);
  save_matrix(out_dir / "covariance.txt", cov.covariance());
  save_matrix(out_dir / "subspace_U.txt", sub.basis);
  save_vector(out_dir / "subspace_D.txt", sub.eigenvalues, "dominant eigenvalues D");
  save_vector(out_dir / "spectrum.txt", cov.eigenvalues(), "eigenvalues of R_h, descending");

  json rep;
  rep["scenario"] = cfg.scenario;
  rep["K"] = cov.size();
  rep["tunable_elements"] = layout.sim.element_count();
  rep["aperture_m"] = layout.sim.aperture();
  rep["wavelength_m"] = layout.sim.wavelength();
  rep["fraunhofer_distance_m"] = fraunhofer_distance(layout.sim);
  rep["region"] = {{"center", {region.center().x, region.center().y}},
                   {"diameter_m", region.diameter()},
                   {"in_near_field", in_radiative_near_field(layout.sim, region.center())}};
  rep["samples"] = cov.samples();
  rep["rank_threshold"] = cov.rank_threshold();
  rep["rank"] = cov.rank();
  rep["effective_rank_99"] = cov.energy_rank(0.99);
  rep["L"] = sub.dim();
  rep["captured_energy"] = sub.captured_energy;
  rep["trace"] = cov.trace();
  rep["top_eigenvalue_jitter"] = cov.top_eigenvalue_jitter();
  rep["eigenvalues"] = vector_json(cov.eigenvalues());
  write_json(out_dir / "rank_report.json", rep);
  return kExitOk;
}

int cmd_optimize_sim(const ScenarioConfig& cfg,
                     const std::optional<std::filesystem::path>& subspace,
                     const std::filesystem::path& out_dir) {
  cfg.validate();
  const SimLayout layout = build_sim_geometry(cfg.geometry_config());
  CMat u;
  if (subspace) {
    u = load_complex_matrix(*subspace);
    if (u.rows() != layout.sim.elements_per_layer() || u.cols() != cfg.subspace_dim)
      throw DimensionError("subspace file must be K x L");
  } else {
    const CovarianceModel cov =
        estimate_covariance(layout.sim, cfg.region_model(), cfg.gains, cfg.covariance);
    u = reduce_subspace(cov, cfg.subspace_dim).basis;
  }
  SimNetwork net = make_network(cfg, layout);
  OptimizerConfig oc = cfg.optimizer;
  oc.seed = cfg.sweep.seed;
  const OptimizationTrace trace = optimize_multistart(net, u.adjoint(), oc, cfg.starts);

  std::filesystem::create_directories(out_dir);
  save_vector(out_dir / "eta.txt", trace.final_eta,
              "eta, one phase per cell, index q*K + k (layer q, element k)");
  {
    std::ofstream out = open_out(out_dir / "trace.csv");
    write_trace_csv(out, trace);
  }
  save_matrix(out_dir / "projection_V.txt", trace.projection);
  save_matrix(out_dir / "combiner.txt", trace.combiner);
  const MismatchMetrics m = mismatch_metrics(trace.projection, u);
  json rep{{"scenario", cfg.scenario},
           {"converged", trace.converged},
           {"iterations", trace.iterations()},
           {"delta_U", m.delta_u},
           {"delta_rel", m.delta_rel},
           {"orthonormality_gap", row_orthonormality_gap(trace.projection)},
           {"objective", trace.rows.back().objective},
           {"method", to_string(cfg.optimizer.method)},
           {"scale", to_string(cfg.optimizer.scale)},
           {"rcond", net.rcond()}};
  rep["target_delta_U"] = std::isfinite(cfg.optimizer.target_delta_u)
                              ? json(cfg.optimizer.target_delta_u)
                              : json("inf");
  write_json(out_dir / "optimize_report.json", rep);
  return trace.converged ? kExitOk : kExitNotConverged;
}

int cmd_estimate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const CellModel cell = build_cell(cfg, cfg.region.distance_m, cfg.region.bearing_rad);
  const ChannelSource source = region_channel_source(cell.layout.sim, cell.region, cfg.gains);
  json reports = json::array();
  for (double snr : cfg.snr_db) {
    const double s2 = noise_variance_for_snr(cell.covariance, snr);
    for (const LinearEstimator& est : cell_estimators(cell, s2)) {
      const MonteCarloResult mc =
          monte_carlo_mse(observation_for(est, s2), est, source, cfg.sweep.trials,
                          derive_seed(cell.seed, std::bit_cast<std::uint64_t>(snr)));
      reports.push_back({{"scenario", cfg.scenario},
                         {"estimator", est.tag()},
                         {"snr_db", snr},
                         {"noise_variance", s2},
                         {"analytic_mse", est.total_mse()},
                         {"analytic_nmse", est.total_mse() / cell.covariance.trace()},
                         {"error_covariance_trace", est.scalar_mse()},
                         {"truncation_bias", est.total_mse() - est.scalar_mse()},
                         {"empirical_mse", mc.mse},
                         {"stderr", mc.stderr_},
                         {"trials", mc.trials}});
    }
  }
  json rep{{"scenario", cfg.scenario},
           {"sim_mode", to_string(cfg.sweep.sim_mode)},
           {"delta_U", cell.projection.mismatch.delta_u},
           {"reports", reports}};
  std::filesystem::create_directories(out_dir);
  write_json(out_dir / "estimation.json", rep);
  return cell.projection.converged ? kExitOk : kExitNotConverged;
}

int cmd_bounds(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const CellModel cell = build_cell(cfg, cfg.region.distance_m, cfg.region.bearing_rad);
  std::filesystem::create_directories(out_dir);
  std::ofstream csv = open_out(out_dir / "peb.csv");
  csv << "distance_m,angle_rad,snr_db,tag,peb_m,condition_flag\n";
  json pebs = json::array();
  for (double snr : cfg.snr_db) {
    const double s2 = noise_variance_for_snr(cell.covariance, snr);
    for (const LinearEstimator& est : cell_estimators(cell, s2)) {
      const PebReport p = estimator_peb(cfg, cell, est);
      csv << fmt(cell.distance_m) << ',' << fmt(cell.angle_rad) << ',' << fmt(snr) << ','
          << est.tag() << ',' << fmt(p.peb) << ',' << (p.pseudo_inverse ? 1 : 0) << '\n';
      pebs.push_back({{"snr_db", snr},
                      {"tag", est.tag()},
                      {"peb_m", p.peb},
                      {"condition_flag", p.pseudo_inverse},
                      {"condition", std::isfinite(p.condition) ? json(p.condition) : json(nullptr)}});
    }
  }
  const MismatchMetrics& m = cell.projection.mismatch;
  const MseRatioCheck chk =
      mse_ratio_check(cell.projection.v, cell.subspace.basis,
                      noise_variance_for_snr(cell.covariance, cfg.snr_db.front()));
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  json rep{{"scenario", cfg.scenario},
           {"noise_mapping", cfg.noise_mapping == NoiseMapping::white ? "white" : "colored"},
           {"mismatch",
            {{"delta_rel", m.delta_rel},
             {"delta_U", m.delta_u},
             {"E_norm", m.e_norm},
             {"eig_box", {m.box_low, m.box_high}},
             {"mse_ratio_bound", num(m.mse_ratio_bound)}}},
           {"mse_ratio_check",
            {{"actual_ratio", num(chk.actual_ratio)},
             {"bound", num(chk.bound)},
             {"holds", chk.holds},
             {"applicable", chk.applicable},
             {"orthonormality_gap", chk.orthonormality_gap}}},
           {"peb", pebs}};
  write_json(out_dir / "bounds.json", rep);
  return kExitOk;
}

int cmd_sweep(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  const std::vector<ResultRecord> records = run_sweep(cfg);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out = open_out(out_dir / "records.csv");
    write_records_csv(out, records);
  }
  write_json(out_dir / "records.json", records_to_json(records));
  const bool all_converged = std::none_of(records.begin(), records.end(), [](const ResultRecord& r) {
    return r.metric == "converged" && r.value == 0.0;
  });
  return all_converged ? kExitOk : kExitNotConverged;
}

int cmd_plot_data(const std::vector<ResultRecord>& records, const std::filesystem::path& out_dir,
                  const std::vector<double>& angles) {
  const std::map<std::string, std::vector<std::string>> figures{
      {"mse", {"mse", "nmse"}}, {"loc", {"peb", "loc_rmse"}}};
  std::vector<double> all = angles;
  for (const ResultRecord& r : records) all.push_back(r.angle_rad);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::filesystem::create_directories(out_dir);
  for (const auto& [fig, metrics] : figures) {
    if (all.empty()) {
      std::ofstream out = open_out(out_dir / (fig + ".csv"));
      write_records_csv(out, {});
      continue;
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      std::vector<ResultRecord> rows;
      for (const ResultRecord& r : records)
        if (r.angle_rad == all[i] &&
            std::find(metrics.begin(), metrics.end(), r.metric) != metrics.end())
          rows.push_back(r);
      std::ofstream out = open_out(out_dir / (fig + "_angle_" + std::to_string(i) + ".csv"));
      write_records_csv(out, rows);
    }
  }
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConditioningError*>(&e)) return kExitConditioning;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const GeometryError*>(&e))
    return kExitConfig;
  return kExitFailure;
}

}  // namespace simloc
