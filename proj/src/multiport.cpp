#include "simloc/multiport.hpp"

#include <cmath>
#include <sstream>

#include "simloc/bounds.hpp"
#include "simloc/error.hpp"
#include "simloc/matrix_io.hpp"

namespace simloc {

cplx mutual_impedance(double d, double wavelength, double beta) {
  const double kd = 2.0 * kPi * d / wavelength;
  return beta * std::polar(1.0, -kd) / kd;
}

Eigen::Matrix3Xd port_positions(const ArrayGeometry& sim, double cell_depth) {
  const double depth = cell_depth > 0.0 ? cell_depth : 0.25 * sim.wavelength();
  const Eigen::Index cells = sim.element_count();
  Eigen::Matrix3Xd ports(3, 2 * cells);
  for (Eigen::Index c = 0; c < cells; ++c) {
    ports.col(2 * c) = sim.positions().col(c);
    ports.col(2 * c + 1) = sim.positions().col(c);
    ports(0, 2 * c) += 0.5 * depth;
    ports(0, 2 * c + 1) -= 0.5 * depth;
  }
  return ports;
}

CMat analytic_impedance(const ArrayGeometry& sim, const AnalyticImpedance& params) {
  const Eigen::Matrix3Xd ports = port_positions(sim, params.cell_depth);
  const Eigen::Index n = ports.cols();
  CMat z(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, i) = params.z_self;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const cplx m = (i / 2 == j / 2)
                         ? params.gamma
                         : mutual_impedance((ports.col(i) - ports.col(j)).norm(), sim.wavelength(),
                                            params.beta);
      z(i, j) = m;
      z(j, i) = m;
    }
  }
  return z;
}

CMat output_coupling(const ArrayGeometry& sim, const ArrayGeometry& receiver,
                     const AnalyticImpedance& params) {
  const Eigen::Matrix3Xd ports = port_positions(sim, params.cell_depth);
  const PortMap map(sim.elements_per_layer(), sim.layers());
  const int last = sim.layers() - 1;
  CMat c = CMat::Zero(receiver.element_count(), map.size());
  for (int m = 0; m < receiver.element_count(); ++m) {
    for (int k = 0; k < sim.elements_per_layer(); ++k) {
      const int p = map.index(last, k, PortSide::output);
      const double d = (ports.col(p) - receiver.positions().col(m)).norm();
      c(m, p) = mutual_impedance(d, sim.wavelength(), params.beta);
    }
  }
  return c;
}

void validate_impedance(const CMat& z, Eigen::Index expected) {
  if (z.rows() != expected || z.cols() != expected) {
    std::ostringstream msg;
    msg << "impedance matrix is " << z.rows() << "x" << z.cols() << ", expected " << expected
        << "x" << expected;
    throw DimensionError(msg.str());
  }
  const double scale = z.cwiseAbs().maxCoeff();
  if ((z - z.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw ConfigError("impedance matrix is not complex symmetric (network must be reciprocal)");
  for (Eigen::Index i = 0; i < expected; ++i)
    if (!(z(i, i).real() > 0.0))
      throw ConfigError("impedance diagonal must have positive real part");
}

CMat load_impedance(const std::filesystem::path& path, Eigen::Index expected) {
  CMat z = load_complex_matrix(path);
  validate_impedance(z, expected);
  return z;
}

double CellLoad::reactance(double eta) const { return x0 * std::tan(0.5 * eta); }

double CellLoad::derivative(double eta) const {
  const double t = std::tan(0.5 * eta);
  return 0.5 * x0 * (1.0 + t * t);
}

double CellLoad::phase_for(double x) const { return 2.0 * std::atan(x / x0); }

RVec wrap_phases(const RVec& eta) {
  RVec out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    double w = std::remainder(eta(i), 2.0 * kPi);
    if (w <= -kPi) w += 2.0 * kPi;
    out(i) = w;
  }
  return out;
}

SimNetwork::SimNetwork(CMat static_impedance, CMat output_coupling, int elements_per_layer,
                       int layers, CellLoad load, std::optional<RVec> eta)
    : z_ss_(std::move(static_impedance)),
      c_out_(std::move(output_coupling)),
      ports_(elements_per_layer, layers),
      load_(load) {
  validate_impedance(z_ss_, ports_.size());
  if (c_out_.cols() != ports_.size())
    throw DimensionError("output coupling must have 2QK columns");
  set_eta(eta.value_or(RVec::Zero(parameter_count())));
}

SimNetwork::Factorization SimNetwork::factorize(const RVec& eta) const {
  CMat total = z_ss_;
  for (int cell = 0; cell < parameter_count(); ++cell) {
    const cplx x{0.0, load_.reactance(eta(cell))};
    total(2 * cell, 2 * cell) += x;
    total(2 * cell + 1, 2 * cell + 1) += x;
  }
  Factorization f{Eigen::PartialPivLU<CMat>(total), 0.0};
  f.rcond = lu_rcond(f.lu);
  if (!(f.rcond > kConditioningThreshold)) {
    std::ostringstream msg;
    msg << "total impedance is numerically singular (rcond " << f.rcond << ")";
    throw ConditioningError(msg.str(), f.rcond, eta);
  }
  return f;
}

void SimNetwork::set_eta(const RVec& eta) {
  if (eta.size() != parameter_count())
    throw DimensionError("phase vector must have KQ entries");
  if (!eta.allFinite()) throw ConfigError("phase vector has non-finite entries");
  RVec wrapped = wrap_phases(eta);
  Factorization f = factorize(wrapped);
  lu_ = std::move(f.lu);
  rcond_ = f.rcond;
  eta_ = std::move(wrapped);
}

CVec SimNetwork::load_diagonal() const {
  CVec d(port_count());
  for (int p = 0; p < port_count(); ++p) d(p) = cplx{0.0, load_.reactance(eta_(p / 2))};
  return d;
}

CMat SimNetwork::input_embedding() const {
  CMat e = CMat::Zero(port_count(), input_count());
  for (int k = 0; k < input_count(); ++k) e(ports_.index(0, k, PortSide::input), k) = 1.0;
  return e;
}

CMat SimNetwork::solve(const CMat& rhs) const {
  if (rhs.rows() != port_count()) throw DimensionError("right-hand side must have 2QK rows");
  return lu_.solve(rhs);
}

CMat SimNetwork::transfer_matrix() const {
  return lu_.solve(CMat::Identity(port_count(), port_count()));
}

CMat SimNetwork::input_response() const { return lu_.solve(input_embedding()); }

CMat SimNetwork::effective_projection() const { return c_out_ * input_response(); }

SimNetwork make_analytic_network(const SimLayout& layout, const AnalyticImpedance& params,
                                 CellLoad load) {
  return SimNetwork(analytic_impedance(layout.sim, params),
                    output_coupling(layout.sim, layout.receiver, params),
                    layout.sim.elements_per_layer(), layout.sim.layers(), load);
}

double row_orthonormality_gap(const CMat& v) {
  const CMat g = v * v.adjoint() - CMat::Identity(v.rows(), v.rows());
  return spectral_norm(g);
}

Projection make_projection(CMat v, std::optional<CMat> target) {
  Projection p{std::move(v), std::move(target), 0.0, 0.0};
  if (p.target) {
    const MismatchMetrics m = mismatch_metrics(p.v, p.target->adjoint());
    p.delta_rel = m.delta_rel;
    p.delta_u = m.delta_u;
  }
  return p;
}

}  // namespace simloc
