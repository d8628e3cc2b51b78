#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simloc/bounds.hpp"
#include "simloc/channel.hpp"
#include "simloc/config.hpp"
#include "simloc/error.hpp"
#include "simloc/estimation.hpp"
#include "simloc/harness.hpp"
#include "simloc/localizer.hpp"
#include "simloc/multiport.hpp"
#include "simloc/simopt.hpp"

namespace py = pybind11;
using namespace simloc;

namespace {

Point2 point(const std::pair<double, double>& p) { return {p.first, p.second}; }
std::pair<double, double> pair_of(const Point2& p) { return {p.x, p.y}; }

py::dict record_dict(const ResultRecord& r) {
  py::dict d;
  d["scenario"] = r.scenario;
  d["tag"] = r.tag;
  d["distance_m"] = r.distance_m;
  d["angle_rad"] = r.angle_rad;
  d["snr_db"] = r.snr_db;
  d["metric"] = r.metric;
  d["value"] = r.value;
  d["stderr"] = r.stderr_;
  d["provenance"] = r.provenance;
  return d;
}

}  // namespace

PYBIND11_MODULE(_simloc, m) {
  m.doc() = "SIM-aided near-field channel estimation and localization";

  auto base = py::register_exception<Error>(m, "SimlocError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<ConditioningError>(m, "ConditioningError", base.ptr());
  py::register_exception<OptimizationError>(m, "OptimizationError", base.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", base.ptr());

  // geometry
  py::class_<GeometryConfig>(m, "GeometryConfig")
      .def(py::init<>())
      .def_readwrite("ky", &GeometryConfig::ky)
      .def_readwrite("kz", &GeometryConfig::kz)
      .def_readwrite("layers", &GeometryConfig::layers)
      .def_readwrite("carrier_hz", &GeometryConfig::carrier_hz)
      .def_readwrite("element_spacing", &GeometryConfig::element_spacing)
      .def_readwrite("layer_spacing", &GeometryConfig::layer_spacing)
      .def_readwrite("receiver_elements", &GeometryConfig::receiver_elements)
      .def_readwrite("receiver_spacing", &GeometryConfig::receiver_spacing);

  py::class_<ArrayGeometry>(m, "ArrayGeometry")
      .def(py::init<int, int, int, double, double, double, double>(), py::arg("ky"),
           py::arg("kz"), py::arg("layers"), py::arg("spacing"), py::arg("layer_spacing"),
           py::arg("wavelength"), py::arg("x0") = 0.0)
      .def_property_readonly("elements_per_layer", &ArrayGeometry::elements_per_layer)
      .def_property_readonly("element_count", &ArrayGeometry::element_count)
      .def_property_readonly("aperture", &ArrayGeometry::aperture)
      .def_property_readonly("wavelength", &ArrayGeometry::wavelength)
      .def_property_readonly("positions", &ArrayGeometry::positions);

  py::class_<SimLayout>(m, "SimLayout")
      .def_readonly("sim", &SimLayout::sim)
      .def_readonly("receiver", &SimLayout::receiver);

  m.def("build_sim_geometry", &build_sim_geometry, py::arg("config") = GeometryConfig{});
  m.def("wavelength_for", &wavelength_for);
  m.def("fraunhofer_distance", py::overload_cast<const ArrayGeometry&>(&fraunhofer_distance));

  py::class_<UncertaintyRegion>(m, "UncertaintyRegion")
      .def(py::init([](std::pair<double, double> c, double d) {
             return UncertaintyRegion(point(c), d);
           }),
           py::arg("center"), py::arg("diameter"))
      .def_property_readonly("center", [](const UncertaintyRegion& r) { return pair_of(r.center()); })
      .def_property_readonly("diameter", &UncertaintyRegion::diameter);
  m.def("region_at", &region_at, py::arg("distance"), py::arg("bearing"), py::arg("diameter"));

  // channel
  py::class_<GainModel>(m, "GainModel")
      .def(py::init<>())
      .def_readwrite("shadowing_std_db", &GainModel::shadowing_std_db)
      .def_readwrite("mean_gain", &GainModel::mean_gain)
      .def("second_moment", &GainModel::second_moment);

  py::class_<CovarianceOptions>(m, "CovarianceOptions")
      .def(py::init<>())
      .def_readwrite("samples", &CovarianceOptions::samples)
      .def_readwrite("seed", &CovarianceOptions::seed)
      .def_readwrite("rank_threshold", &CovarianceOptions::rank_threshold);

  py::class_<CovarianceModel>(m, "CovarianceModel")
      .def(py::init<CMat, double>(), py::arg("covariance"), py::arg("rank_threshold") = 1e-6)
      .def_property_readonly("covariance", &CovarianceModel::covariance)
      .def_property_readonly("eigenvalues", &CovarianceModel::eigenvalues)
      .def_property_readonly("eigenvectors", &CovarianceModel::eigenvectors)
      .def_property_readonly("rank", &CovarianceModel::rank)
      .def_property_readonly("trace", &CovarianceModel::trace)
      .def("energy_rank", &CovarianceModel::energy_rank, py::arg("fraction") = 0.99)
      .def("rank_above", &CovarianceModel::rank_above);

  m.def("steering_vector", [](const ArrayGeometry& g, std::pair<double, double> p) {
    return steering_vector(g, point(p));
  });
  m.def(
      "estimate_covariance",
      [](const ArrayGeometry& g, const UncertaintyRegion& r, const GainModel& gains,
         const CovarianceOptions& o) { return estimate_covariance(g, r, gains, o); },
      py::arg("geometry"), py::arg("region"), py::arg("gains") = GainModel{},
      py::arg("options") = CovarianceOptions{});

  py::class_<Subspace>(m, "Subspace")
      .def_readonly("basis", &Subspace::basis)
      .def_readonly("eigenvalues", &Subspace::eigenvalues)
      .def_readonly("captured_energy", &Subspace::captured_energy)
      .def("target", &Subspace::target);
  m.def("reduce_subspace", &reduce_subspace, py::arg("model"), py::arg("dim") = std::nullopt);

  // estimation
  py::class_<EstimationReport>(m, "EstimationReport")
      .def_readonly("tag", &EstimationReport::tag)
      .def_readonly("h_hat", &EstimationReport::h_hat)
      .def_readonly("error_covariance", &EstimationReport::error_covariance)
      .def_readonly("scalar_mse", &EstimationReport::scalar_mse)
      .def_readonly("bias_covariance", &EstimationReport::bias_covariance)
      .def_readonly("total_mse", &EstimationReport::total_mse);

  m.def("noise_variance_for_snr", &noise_variance_for_snr);
  m.def("mmse_full", &mmse_full);
  m.def("mmse_spectral", &mmse_spectral);
  m.def("mmse_reduced", &mmse_reduced);
  m.def("rsls_ideal", &rsls_ideal);
  m.def(
      "mmse_post_sim",
      [](const CVec& y, const CMat& v, const CovarianceModel& cov, double s) {
        return mmse_post_sim(y, v, cov, s);
      });
  m.def("rsls_post_sim", &rsls_post_sim);
  m.def("digital_baseline", &digital_baseline);

  // bounds
  py::class_<MismatchMetrics>(m, "MismatchMetrics")
      .def_readonly("delta_rel", &MismatchMetrics::delta_rel)
      .def_readonly("delta_u", &MismatchMetrics::delta_u)
      .def_readonly("e_norm", &MismatchMetrics::e_norm)
      .def_readonly("box_low", &MismatchMetrics::box_low)
      .def_readonly("box_high", &MismatchMetrics::box_high)
      .def_readonly("mse_ratio_bound", &MismatchMetrics::mse_ratio_bound);
  m.def("mismatch_metrics", &mismatch_metrics, py::arg("v"), py::arg("u"));
  m.def("mse_ratio_bound", &mse_ratio_bound);

  py::class_<ChannelParams>(m, "ChannelParams")
      .def(py::init<double, double, double, double>(), py::arg("x"), py::arg("y"),
           py::arg("gain") = 1.0, py::arg("phase") = 0.0)
      .def_readwrite("x", &ChannelParams::x)
      .def_readwrite("y", &ChannelParams::y)
      .def_readwrite("gain", &ChannelParams::gain)
      .def_readwrite("phase", &ChannelParams::phase);
  py::class_<PebReport>(m, "PebReport")
      .def_readonly("fim", &PebReport::fim)
      .def_readonly("crlb", &PebReport::crlb)
      .def_readonly("peb", &PebReport::peb)
      .def_readonly("pseudo_inverse", &PebReport::pseudo_inverse)
      .def_readonly("condition", &PebReport::condition);
  m.def("channel_of", &channel_of);
  m.def("channel_jacobian", &channel_jacobian);
  m.def("fim_peb", &fim_peb, py::arg("geometry"), py::arg("params"), py::arg("noise_variance"));
  m.def("fim_peb_colored", &fim_peb_colored);

  // multiport and optimization
  py::class_<AnalyticImpedance>(m, "AnalyticImpedance")
      .def(py::init<>())
      .def_readwrite("z_self", &AnalyticImpedance::z_self)
      .def_readwrite("beta", &AnalyticImpedance::beta)
      .def_readwrite("gamma", &AnalyticImpedance::gamma)
      .def_readwrite("cell_depth", &AnalyticImpedance::cell_depth);

  py::class_<SimNetwork>(m, "SimNetwork")
      .def_property("eta", &SimNetwork::eta, &SimNetwork::set_eta)
      .def_property_readonly("parameter_count", &SimNetwork::parameter_count)
      .def_property_readonly("rcond", &SimNetwork::rcond)
      .def("transfer_matrix", &SimNetwork::transfer_matrix)
      .def("effective_projection", &SimNetwork::effective_projection);
  m.def(
      "make_analytic_network",
      [](const SimLayout& l, const AnalyticImpedance& p) { return make_analytic_network(l, p); },
      py::arg("layout"), py::arg("params") = AnalyticImpedance{});

  py::enum_<ScaleMode>(m, "ScaleMode")
      .value("none", ScaleMode::none)
      .value("scalar", ScaleMode::scalar)
      .value("combiner", ScaleMode::combiner);
  py::enum_<DescentMethod>(m, "DescentMethod")
      .value("gradient", DescentMethod::gradient)
      .value("lbfgs", DescentMethod::lbfgs);
  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("step_size", &OptimizerConfig::step_size)
      .def_readwrite("target_delta_u", &OptimizerConfig::target_delta_u)
      .def_readwrite("seed", &OptimizerConfig::seed)
      .def_readwrite("scale", &OptimizerConfig::scale)
      .def_readwrite("method", &OptimizerConfig::method);
  py::class_<OptimizationTrace>(m, "OptimizationTrace")
      .def_readonly("final_eta", &OptimizationTrace::final_eta)
      .def_readonly("projection", &OptimizationTrace::projection)
      .def_readonly("converged", &OptimizationTrace::converged)
      .def_property_readonly("iterations", &OptimizationTrace::iterations)
      .def_property_readonly("final_delta_u", &OptimizationTrace::final_delta_u)
      .def_property_readonly("objective", [](const OptimizationTrace& t) {
        std::vector<double> v;
        for (const TraceRow& r : t.rows) v.push_back(r.objective);
        return v;
      });
  m.def("random_phases", &random_phases);
  m.def("objective", &objective, py::arg("net"), py::arg("target"),
        py::arg("mode") = ScaleMode::combiner);
  m.def("gradient", &gradient, py::arg("net"), py::arg("target"),
        py::arg("mode") = ScaleMode::combiner);
  m.def("optimize", &optimize, py::arg("net"), py::arg("target"),
        py::arg("config") = OptimizerConfig{});

  // localizer
  py::class_<LocalizerConfig>(m, "LocalizerConfig")
      .def(py::init<>())
      .def_readwrite("coarse_grid", &LocalizerConfig::coarse_grid)
      .def_readwrite("refine_iters", &LocalizerConfig::refine_iters)
      .def_readwrite("refine_shrink", &LocalizerConfig::refine_shrink);
  m.def(
      "localize",
      [](const CVec& h, const ArrayGeometry& g, const UncertaintyRegion& r,
         const LocalizerConfig& c) {
        const LocalizationResult res = localize(h, g, r, c);
        return std::make_pair(pair_of(res.position), res.score);
      },
      py::arg("h_hat"), py::arg("geometry"), py::arg("region"),
      py::arg("config") = LocalizerConfig{});

  // harness
  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("scenario", &ScenarioConfig::scenario)
      .def_readwrite("subspace_dim", &ScenarioConfig::subspace_dim)
      .def_readwrite("snr_db", &ScenarioConfig::snr_db)
      .def("to_json", [](const ScenarioConfig& c) { return config_to_json(c).dump(); })
      .def("validate", &ScenarioConfig::validate);
  m.def("preset", &preset);
  m.def("load_config", &load_config);
  m.def("config_from_json", [](const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(e.what(), "config");
    }
    return config_from_json(j);
  });
  m.def("run_cell", [](const ScenarioConfig& c, double d, double a) {
    py::list out;
    for (const ResultRecord& r : run_cell(c, d, a)) out.append(record_dict(r));
    return out;
  });
  m.def("cmd_covariance", &cmd_covariance);
  m.def("cmd_optimize_sim", &cmd_optimize_sim, py::arg("config"), py::arg("subspace"),
        py::arg("out_dir"));
  m.def("cmd_estimate", &cmd_estimate);
  m.def("cmd_bounds", &cmd_bounds);
  m.def("cmd_sweep", &cmd_sweep, py::call_guard<py::gil_scoped_release>());
}
