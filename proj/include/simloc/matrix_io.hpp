#pragma once

#include <filesystem>
#include <iosfwd>

#include "simloc/types.hpp"

namespace simloc {

// Text matrix format shared by covariance, subspace, impedance and projection
// files:
//
//   # simloc-matrix v1
//   complex <rows> <cols>
//   re im re im ...        (one line per row, row-major, %.17g)
//
// Lines starting with '#' before the size line are comments. Real matrices
// use the tag `real` and one value per entry.

void write_matrix(std::ostream& out, const CMat& m);
void write_matrix(std::ostream& out, const RMat& m);
CMat read_complex_matrix(std::istream& in);
RMat read_real_matrix(std::istream& in);

void save_matrix(const std::filesystem::path& path, const CMat& m);
void save_matrix(const std::filesystem::path& path, const RMat& m);
CMat load_complex_matrix(const std::filesystem::path& path);
RMat load_real_matrix(const std::filesystem::path& path);

/// Plain real array, one value per line after an optional '#' header.
void save_vector(const std::filesystem::path& path, const RVec& v, const std::string& header = {});
RVec load_vector(const std::filesystem::path& path);

}  // namespace simloc
