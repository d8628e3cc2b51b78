#include "simloc/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "simloc/error.hpp"

namespace simloc {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Header {
  bool is_complex;
  Eigen::Index rows, cols;
};

Header read_header(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    long long rows = -1, cols = -1;
    ss >> tag >> rows >> cols;
    if ((tag != "complex" && tag != "real") || rows < 0 || cols < 0)
      throw ConfigError("malformed matrix header: '" + line + "'");
    return {tag == "complex", rows, cols};
  }
  throw ConfigError("matrix file has no size line");
}

std::vector<double> read_values(std::istream& in, std::size_t count) {
  std::vector<double> values;
  values.reserve(count);
  double v;
  while (values.size() < count && in >> v) values.push_back(v);
  if (values.size() != count) throw ConfigError("matrix file truncated");
  return values;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'", path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_matrix(std::ostream& out, const CMat& m) {
  out << "# simloc-matrix v1\ncomplex " << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << fmt(m(i, j).real()) << ' ' << fmt(m(i, j).imag());
    }
    out << '\n';
  }
}

void write_matrix(std::ostream& out, const RMat& m) {
  out << "# simloc-matrix v1\nreal " << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << fmt(m(i, j));
    }
    out << '\n';
  }
}

CMat read_complex_matrix(std::istream& in) {
  const Header h = read_header(in);
  const std::size_t n = static_cast<std::size_t>(h.rows * h.cols);
  const auto values = read_values(in, h.is_complex ? 2 * n : n);
  CMat m(h.rows, h.cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < h.rows; ++i)
    for (Eigen::Index j = 0; j < h.cols; ++j) {
      if (h.is_complex) {
        m(i, j) = {values[at], values[at + 1]};
        at += 2;
      } else {
        m(i, j) = values[at++];
      }
    }
  return m;
}

RMat read_real_matrix(std::istream& in) {
  const Header h = read_header(in);
  if (h.is_complex) throw ConfigError("expected a real matrix");
  const auto values = read_values(in, static_cast<std::size_t>(h.rows * h.cols));
  RMat m(h.rows, h.cols);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < h.rows; ++i)
    for (Eigen::Index j = 0; j < h.cols; ++j) m(i, j) = values[at++];
  return m;
}

void save_matrix(const std::filesystem::path& path, const CMat& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

void save_matrix(const std::filesystem::path& path, const RMat& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

CMat load_complex_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_complex_matrix(in);
}

RMat load_real_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_real_matrix(in);
}

void save_vector(const std::filesystem::path& path, const RVec& v, const std::string& header) {
  auto out = open_out(path);
  if (!header.empty()) out << "# " << header << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << fmt(v(i)) << '\n';
}

RVec load_vector(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double v;
    while (ss >> v) values.push_back(v);
  }
  return Eigen::Map<RVec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace simloc
