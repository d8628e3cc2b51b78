#include "simloc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "simloc/error.hpp"

namespace simloc {

using nlohmann::json;

namespace {

// Reads one JSON object block, rejecting keys that are not consumed.
class Block {
 public:
  Block(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object", name_);
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value for '" + path(key) + "'", path(key));
    }
  }

  // Number, or the strings "inf"/"infinity".
  void get_extended(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    const json& v = j_.at(key);
    if (v.is_number()) {
      out = v.get<double>();
    } else if (v.is_string() && (v == "inf" || v == "infinity")) {
      out = std::numeric_limits<double>::infinity();
    } else {
      throw ConfigError("bad value for '" + path(key) + "'", path(key));
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown key '" + path(it.key()) + "'", path(it.key()));
  }

  std::string path(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what, const std::string& key) {
  if (!ok) throw ConfigError(what, key);
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

}  // namespace

std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::ideal: return "ideal";
    case SimMode::optimize: return "optimize";
    case SimMode::file: return "file";
  }
  return "ideal";
}

SimMode parse_sim_mode(const std::string& s) {
  if (s == "ideal") return SimMode::ideal;
  if (s == "optimize") return SimMode::optimize;
  if (s == "file") return SimMode::file;
  throw ConfigError("unknown sim_mode '" + s + "'", "sweep.sim_mode");
}

void ScenarioConfig::validate() const {
  const GeometryConfig& g = geometry;
  require(g.ky >= 1 && g.kz >= 1 && g.layers >= 1, "array dimensions must be >= 1", "geometry");
  require(g.carrier_hz > 0.0, "carrier frequency must be positive", "geometry.carrier_hz");
  require(g.element_spacing >= 0.0 && g.layer_spacing >= 0.0 && g.receiver_spacing >= 0.0,
          "spacings must be positive", "geometry");
  require(region.diameter_m >= 0.0, "region diameter must be nonnegative", "region.diameter_m");
  require(region.distance_m > 0.0, "region distance must be positive", "region.distance_m");
  require(gains.shadowing_std_db >= 0.0, "shadowing std must be nonnegative",
          "gain.shadowing_std_db");
  require(gains.mean_gain > 0.0, "mean gain must be positive", "gain.mean_gain");
  require(covariance.samples >= 1, "covariance needs at least one sample", "covariance.samples");
  require(covariance.rank_threshold > 0.0 && covariance.rank_threshold < 1.0,
          "rank threshold must lie in (0, 1)", "covariance.rank_threshold");
  require(subspace_dim >= 1 && subspace_dim <= g.ky * g.kz, "L must lie in [1, K]",
          "reduction.L");
  require(!snr_db.empty(), "at least one SNR value is needed", "noise.snr_db");
  for (double s : snr_db) require(std::isfinite(s), "SNR must be finite", "noise.snr_db");
  require(!sweep.distances_m.empty(), "sweep distances are empty", "sweep.distances_m");
  for (double d : sweep.distances_m)
    require(d > 0.0, "sweep distances must be positive", "sweep.distances_m");
  require(!sweep.angles_rad.empty(), "sweep angles are empty", "sweep.angles_rad");
  require(sweep.trials >= 100, "Monte Carlo needs at least 100 trials", "sweep.trials");
  require(sweep.workers >= 1, "workers must be >= 1", "sweep.workers");
  if (sweep.sim_mode == SimMode::file) {
    require(sweep.eta_file.has_value(), "sim_mode 'file' needs sweep.eta_file", "sweep.eta_file");
  }
  if (sweep.eta_file)
    require(std::filesystem::exists(*sweep.eta_file),
            "eta file not found: " + sweep.eta_file->string(), "sweep.eta_file");
  require(impedance.provider == "analytic" || impedance.provider == "file",
          "impedance provider must be 'analytic' or 'file'", "impedance.provider");
  if (impedance.provider == "file") {
    require(impedance.file.has_value(), "file provider needs impedance.file", "impedance.file");
    require(std::filesystem::exists(*impedance.file),
            "impedance file not found: " + impedance.file->string(), "impedance.file");
  }
  require(impedance.x0 > 0.0, "x0 must be positive", "impedance.x0");
  require(starts >= 1, "starts must be >= 1", "optimizer.starts");
  optimizer.validate();
  localizer.validate();
}

GeometryConfig ScenarioConfig::geometry_config() const {
  GeometryConfig g = geometry;
  g.receiver_elements = subspace_dim;
  return g;
}

UncertaintyRegion ScenarioConfig::region_model() const {
  return region_at(region.distance_m, region.bearing_rad, region.diameter_m);
}

ScenarioConfig desk_scale_preset() {
  ScenarioConfig c;
  c.scenario = "desk-scale";
  return c;
}

ScenarioConfig paper_scale_preset() {
  ScenarioConfig c;
  c.scenario = "paper-scale";
  c.geometry.ky = 64;
  c.geometry.kz = 4;
  c.geometry.layers = 7;
  c.geometry.element_spacing = 0.475 * wavelength_for(c.geometry.carrier_hz);
  c.subspace_dim = 6;
  c.region.distance_m = 4.0;
  c.sweep.distances_m = {2.0, 4.0, 6.0, 8.0, 12.0, 16.0};
  c.sweep.trials = 2000;
  c.sweep.loc_trials = 50;
  c.starts = 1;
  return c;
}

ScenarioConfig preset(const std::string& name) {
  if (name == "desk-scale") return desk_scale_preset();
  if (name == "paper-scale") return paper_scale_preset();
  throw ConfigError("unknown preset '" + name + "'", "preset");
}

ScenarioConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  Block root(j, "");
  ScenarioConfig c;
  std::string preset_name;
  root.get("preset", preset_name);
  if (!preset_name.empty()) c = preset(preset_name);
  root.get("scenario", c.scenario);

  if (root.has("geometry")) {
    Block b(root.raw("geometry"), "geometry");
    GeometryConfig& g = c.geometry;
    b.get("ky", g.ky);
    b.get("kz", g.kz);
    b.get("layers", g.layers);
    b.get("carrier_hz", g.carrier_hz);
    require(g.carrier_hz > 0.0, "carrier frequency must be positive", "geometry.carrier_hz");
    const double lambda = wavelength_for(g.carrier_hz);
    double es = g.element_spacing / lambda, ls = g.layer_spacing / lambda,
           rs = g.receiver_spacing / lambda;
    b.get("element_spacing_wl", es);
    b.get("layer_spacing_wl", ls);
    b.get("receiver_spacing_wl", rs);
    require(es >= 0.0 && ls >= 0.0 && rs >= 0.0, "spacings must be positive", "geometry");
    g.element_spacing = es * lambda;
    g.layer_spacing = ls * lambda;
    g.receiver_spacing = rs * lambda;
    b.finish();
  }
  if (root.has("region")) {
    Block b(root.raw("region"), "region");
    b.get("distance_m", c.region.distance_m);
    b.get("bearing_rad", c.region.bearing_rad);
    b.get("diameter_m", c.region.diameter_m);
    b.finish();
  }
  if (root.has("gain")) {
    Block b(root.raw("gain"), "gain");
    b.get("shadowing_std_db", c.gains.shadowing_std_db);
    b.get("mean_gain", c.gains.mean_gain);
    b.finish();
  }
  if (root.has("covariance")) {
    Block b(root.raw("covariance"), "covariance");
    b.get("samples", c.covariance.samples);
    b.get("seed", c.covariance.seed);
    b.get("rank_threshold", c.covariance.rank_threshold);
    b.finish();
  }
  if (root.has("reduction")) {
    Block b(root.raw("reduction"), "reduction");
    b.get("L", c.subspace_dim);
    b.get_extended("target_delta_U", c.optimizer.target_delta_u);
    b.finish();
  }
  if (root.has("noise")) {
    Block b(root.raw("noise"), "noise");
    b.get("snr_db", c.snr_db);
    std::string mapping = c.noise_mapping == NoiseMapping::white ? "white" : "colored";
    b.get("peb_noise", mapping);
    if (mapping == "white") c.noise_mapping = NoiseMapping::white;
    else if (mapping == "colored") c.noise_mapping = NoiseMapping::colored;
    else throw ConfigError("peb_noise must be 'white' or 'colored'", "noise.peb_noise");
    b.finish();
  }
  if (root.has("sweep")) {
    Block b(root.raw("sweep"), "sweep");
    SweepConfig& s = c.sweep;
    b.get("distances_m", s.distances_m);
    b.get("angles_rad", s.angles_rad);
    b.get("trials", s.trials);
    b.get("loc_trials", s.loc_trials);
    b.get("seed", s.seed);
    std::string mode = to_string(s.sim_mode);
    b.get("sim_mode", mode);
    s.sim_mode = parse_sim_mode(mode);
    std::string eta;
    b.get("eta_file", eta);
    if (!eta.empty()) s.eta_file = resolve(eta, base_dir);
    b.get("workers", s.workers);
    b.finish();
  }
  if (root.has("impedance")) {
    Block b(root.raw("impedance"), "impedance");
    ImpedanceConfig& z = c.impedance;
    b.get("provider", z.provider);
    double re = z.analytic.z_self.real(), im = z.analytic.z_self.imag();
    b.get("z_self_re", re);
    b.get("z_self_im", im);
    z.analytic.z_self = {re, im};
    b.get("beta", z.analytic.beta);
    re = z.analytic.gamma.real();
    im = z.analytic.gamma.imag();
    b.get("gamma_re", re);
    b.get("gamma_im", im);
    z.analytic.gamma = {re, im};
    const double lambda = wavelength_for(c.geometry.carrier_hz);
    double depth = z.analytic.cell_depth > 0.0 ? z.analytic.cell_depth / lambda : 0.25;
    b.get("cell_depth_wl", depth);
    require(depth > 0.0, "cell depth must be positive", "impedance.cell_depth_wl");
    z.analytic.cell_depth = depth * lambda;
    b.get("x0", z.x0);
    std::string file;
    b.get("file", file);
    if (!file.empty()) z.file = resolve(file, base_dir);
    b.finish();
  }
  if (root.has("optimizer")) {
    Block b(root.raw("optimizer"), "optimizer");
    OptimizerConfig& o = c.optimizer;
    b.get("max_iters", o.max_iters);
    b.get("step_size", o.step_size);
    b.get("backtrack", o.backtrack);
    b.get("max_halvings", o.max_halvings);
    b.get("armijo", o.armijo);
    b.get("gradient_check_period", o.gradient_check_period);
    b.get("lbfgs_memory", o.lbfgs_memory);
    std::string method = to_string(o.method), scale = to_string(o.scale);
    b.get("method", method);
    b.get("scale", scale);
    o.method = parse_descent_method(method);
    o.scale = parse_scale_mode(scale);
    b.get("starts", c.starts);
    b.finish();
  }
  if (root.has("localizer")) {
    Block b(root.raw("localizer"), "localizer");
    b.get("coarse_grid", c.localizer.coarse_grid);
    b.get("refine_iters", c.localizer.refine_iters);
    b.get("refine_shrink", c.localizer.refine_shrink);
    b.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string(), "config");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), "config");
  }
  return config_from_json(j, path.parent_path());
}

json config_to_json(const ScenarioConfig& c) {
  const double lambda = wavelength_for(c.geometry.carrier_hz);
  auto wl = [&](double meters) { return meters > 0.0 ? meters / lambda : 0.5; };
  json j;
  j["scenario"] = c.scenario;
  j["geometry"] = {{"ky", c.geometry.ky},
                   {"kz", c.geometry.kz},
                   {"layers", c.geometry.layers},
                   {"carrier_hz", c.geometry.carrier_hz},
                   {"element_spacing_wl", wl(c.geometry.element_spacing)},
                   {"layer_spacing_wl", wl(c.geometry.layer_spacing)},
                   {"receiver_spacing_wl", wl(c.geometry.receiver_spacing)}};
  j["region"] = {{"distance_m", c.region.distance_m},
                 {"bearing_rad", c.region.bearing_rad},
                 {"diameter_m", c.region.diameter_m}};
  j["gain"] = {{"shadowing_std_db", c.gains.shadowing_std_db},
               {"mean_gain", c.gains.mean_gain}};
  j["covariance"] = {{"samples", c.covariance.samples},
                     {"seed", c.covariance.seed},
                     {"rank_threshold", c.covariance.rank_threshold}};
  j["reduction"] = {{"L", c.subspace_dim}};
  if (std::isinf(c.optimizer.target_delta_u))
    j["reduction"]["target_delta_U"] = "inf";
  else
    j["reduction"]["target_delta_U"] = c.optimizer.target_delta_u;
  j["noise"] = {{"snr_db", c.snr_db},
                {"peb_noise", c.noise_mapping == NoiseMapping::white ? "white" : "colored"}};
  j["sweep"] = {{"distances_m", c.sweep.distances_m},
                {"angles_rad", c.sweep.angles_rad},
                {"trials", c.sweep.trials},
                {"loc_trials", c.sweep.loc_trials},
                {"seed", c.sweep.seed},
                {"sim_mode", to_string(c.sweep.sim_mode)},
                {"workers", c.sweep.workers}};
  if (c.sweep.eta_file) j["sweep"]["eta_file"] = c.sweep.eta_file->string();
  const AnalyticImpedance& a = c.impedance.analytic;
  j["impedance"] = {{"provider", c.impedance.provider},
                    {"z_self_re", a.z_self.real()},
                    {"z_self_im", a.z_self.imag()},
                    {"beta", a.beta},
                    {"gamma_re", a.gamma.real()},
                    {"gamma_im", a.gamma.imag()},
                    {"cell_depth_wl", a.cell_depth > 0.0 ? a.cell_depth / lambda : 0.25},
                    {"x0", c.impedance.x0}};
  if (c.impedance.file) j["impedance"]["file"] = c.impedance.file->string();
  const OptimizerConfig& o = c.optimizer;
  j["optimizer"] = {{"max_iters", o.max_iters},
                    {"step_size", o.step_size},
                    {"backtrack", o.backtrack},
                    {"max_halvings", o.max_halvings},
                    {"armijo", o.armijo},
                    {"gradient_check_period", o.gradient_check_period},
                    {"lbfgs_memory", o.lbfgs_memory},
                    {"method", to_string(o.method)},
                    {"scale", to_string(o.scale)},
                    {"starts", c.starts}};
  j["localizer"] = {{"coarse_grid", c.localizer.coarse_grid},
                    {"refine_iters", c.localizer.refine_iters},
                    {"refine_shrink", c.localizer.refine_shrink}};
  return j;
}

}  // namespace simloc
