#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace simloc {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Transmitter-plane coordinates in meters.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Reciprocal condition estimate of an LU factorisation. Eigen's estimator
/// can miss exactly zero pivots, so those report 0.
inline double lu_rcond(const Eigen::PartialPivLU<CMat>& lu) {
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (pivots.size() > 0 && !(pivots.minCoeff() > 0.0)) return 0.0;
  return lu.rcond();
}

}  // namespace simloc
