#pragma once

#include <filesystem>
#include <optional>

#include "simloc/geometry.hpp"
#include "simloc/types.hpp"

namespace simloc {

/// Parameters of the analytic dipole-style impedance provider. Values are in
/// ohms; `cell_depth` is the x separation of a cell's input and output ports
/// in meters (0 selects lambda/4).
struct AnalyticImpedance {
  cplx z_self{73.0, 42.5};
  double beta = 100.0;
  cplx gamma{0.0, -100.0};
  double cell_depth = 0.0;
};

enum class PortSide { input = 0, output = 1 };

/// (layer, element, side) -> port index; each cell owns two consecutive ports.
class PortMap {
 public:
  PortMap(int elements_per_layer, int layers) : k_(elements_per_layer), q_(layers) {}

  int index(int layer, int element, PortSide side) const noexcept {
    return 2 * (layer * k_ + element) + static_cast<int>(side);
  }
  int cell_of(int port) const noexcept { return port / 2; }
  int size() const noexcept { return 2 * k_ * q_; }
  int elements_per_layer() const noexcept { return k_; }
  int layers() const noexcept { return q_; }

 private:
  int k_, q_;
};

/// m(d) = beta exp(-j 2 pi d / lambda) / (2 pi d / lambda).
cplx mutual_impedance(double d, double wavelength, double beta);

/// 3 x 2KQ port coordinates: input port at +depth/2 and output port at
/// -depth/2 along x around each cell centre.
Eigen::Matrix3Xd port_positions(const ArrayGeometry& sim, double cell_depth);

/// Static 2QK x 2QK impedance matrix from the analytic provider.
CMat analytic_impedance(const ArrayGeometry& sim, const AnalyticImpedance& params);

/// M x 2QK coupling from last-layer output ports to the receiver elements.
CMat output_coupling(const ArrayGeometry& sim, const ArrayGeometry& receiver,
                     const AnalyticImpedance& params);

/// Throws unless `z` is square of size `expected`, complex symmetric (relative
/// tolerance 1e-9) and has a positive-real diagonal.
void validate_impedance(const CMat& z, Eigen::Index expected);

CMat load_impedance(const std::filesystem::path& path, Eigen::Index expected);

/// Lossless phase-shifter load shared by both ports of a cell:
/// X(eta) = x0 tan(eta / 2).
struct CellLoad {
  double x0 = 50.0;

  double reactance(double eta) const;
  double derivative(double eta) const;
  /// Phase giving reactance `x`.
  double phase_for(double x) const;
};

/// Wraps every entry into (-pi, pi].
RVec wrap_phases(const RVec& eta);

/// Reciprocal-condition threshold below which a total impedance is rejected.
inline constexpr double kConditioningThreshold = 1e-12;

/// Multiport SIM: static impedance, tunable diagonal loads and output coupling.
///
/// The LU factorisation of Z_SS + Z_S(eta) is computed once per phase update
/// and shared by every solve until the next update.
class SimNetwork {
 public:
  SimNetwork(CMat static_impedance, CMat output_coupling, int elements_per_layer, int layers,
             CellLoad load = {}, std::optional<RVec> eta = std::nullopt);

  /// Throws ConditioningError (leaving the network unchanged) when the new
  /// total impedance is numerically singular.
  void set_eta(const RVec& eta);
  const RVec& eta() const noexcept { return eta_; }

  int parameter_count() const noexcept { return ports_.elements_per_layer() * ports_.layers(); }
  int port_count() const noexcept { return ports_.size(); }
  int input_count() const noexcept { return ports_.elements_per_layer(); }
  int output_count() const noexcept { return static_cast<int>(c_out_.rows()); }
  const PortMap& ports() const noexcept { return ports_; }
  const CellLoad& load() const noexcept { return load_; }
  const CMat& static_impedance() const noexcept { return z_ss_; }
  const CMat& coupling() const noexcept { return c_out_; }
  double rcond() const noexcept { return rcond_; }

  /// Diagonal of Z_S(eta) (purely imaginary).
  CVec load_diagonal() const;
  /// 2QK x K selector of the first-layer input ports.
  CMat input_embedding() const;

  /// T(eta) * rhs using the cached factorisation.
  CMat solve(const CMat& rhs) const;
  /// Dense T(eta); intended for tests and small networks.
  CMat transfer_matrix() const;
  /// T(eta) E_in (one solve per input column).
  CMat input_response() const;
  /// V(eta) = C_out T(eta) E_in.
  CMat effective_projection() const;

 private:
  struct Factorization {
    Eigen::PartialPivLU<CMat> lu;
    double rcond;
  };
  Factorization factorize(const RVec& eta) const;

  CMat z_ss_;
  CMat c_out_;
  PortMap ports_;
  CellLoad load_;
  RVec eta_;
  Eigen::PartialPivLU<CMat> lu_;
  double rcond_ = 0.0;
};

/// Network for a layout built with the analytic provider, phases set to zero.
SimNetwork make_analytic_network(const SimLayout& layout, const AnalyticImpedance& params,
                                 CellLoad load = {});

/// ||V V^H - I_L||_2.
double row_orthonormality_gap(const CMat& v);

/// An effective L x K projection with mismatch metrics against an optional
/// target U^H.
struct Projection {
  CMat v;
  std::optional<CMat> target;
  double delta_rel = 0.0;
  double delta_u = 0.0;
};

Projection make_projection(CMat v, std::optional<CMat> target = std::nullopt);

}  // namespace simloc
