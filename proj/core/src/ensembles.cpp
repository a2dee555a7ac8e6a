#include "swarmflow/ensembles.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace swarmflow {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Vector default_offset(const ShapeParams& p, int d) {
  if (p.offset.size() == 0) return Vector::Zero(d);
  if (p.offset.size() != d) throw ShapeError("shape offset dimension mismatch");
  return p.offset;
}

}  // namespace

Ensemble::Ensemble(Matrix points, std::string label)
    : points_(std::move(points)), label_(std::move(label)) {
  if (points_.rows() < 1 || points_.cols() < 1) throw ShapeError("ensemble must be non-empty");
  if (!points_.allFinite()) throw NumericError("ensemble entries must be finite");
}

Ensemble gaussian(int n, const Vector& mean, const Matrix& cov_cholesky, std::uint64_t seed) {
  const auto d = mean.size();
  if (n < 1) throw DomainError("gaussian ensemble needs n >= 1");
  if (cov_cholesky.rows() != d || cov_cholesky.cols() != d) {
    throw ShapeError("Cholesky factor must be d x d");
  }
  if (!cov_cholesky.allFinite() || !mean.allFinite()) throw NumericError("non-finite Gaussian parameters");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(cov_cholesky(i, i) > 0.0)) {
      throw DomainError("covariance Cholesky factor must have a positive diagonal");
    }
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if (cov_cholesky(i, j) != 0.0) {
        throw DomainError("covariance Cholesky factor must be lower triangular");
      }
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix pts(n, d);
  Vector g(d);
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) g[k] = normal(rng);
    pts.row(i) = (mean + cov_cholesky * g).transpose();
  }
  return {std::move(pts), "gaussian"};
}

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "ring") return ShapeKind::kRing;
  if (name == "pyramid") return ShapeKind::kPyramid;
  if (name == "torus") return ShapeKind::kTorus;
  if (name == "mixture") return ShapeKind::kMixture;
  throw DomainError("unknown shape kind '" + std::string(name) + "'");
}

std::string_view shape_kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kRing:
      return "ring";
    case ShapeKind::kPyramid:
      return "pyramid";
    case ShapeKind::kTorus:
      return "torus";
    case ShapeKind::kMixture:
      return "mixture";
  }
  return "unknown";
}

Ensemble shape(ShapeKind kind, int n, const ShapeParams& p, std::uint64_t seed) {
  if (n < 1) throw DomainError("shape ensemble needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  switch (kind) {
    case ShapeKind::kRing: {
      if (!(p.radius > 0.0) || p.width < 0.0 || p.width >= 2.0 * p.radius) {
        throw DomainError("ring requires radius > 0 and 0 <= width < 2 radius");
      }
      const Vector off = default_offset(p, 2);
      Matrix pts(n, 2);
      for (int i = 0; i < n; ++i) {
        const double theta = kTwoPi * unit(rng);
        const double rad = p.radius + p.width * (unit(rng) - 0.5);
        pts(i, 0) = off[0] + rad * std::cos(theta);
        pts(i, 1) = off[1] + rad * std::sin(theta);
      }
      return {std::move(pts), "ring"};
    }
    case ShapeKind::kPyramid: {
      if (!(p.half_width > 0.0) || !(p.height > 0.0)) {
        throw DomainError("pyramid requires half_width > 0 and height > 0");
      }
      const Vector off = default_offset(p, 3);
      Matrix pts(n, 3);
      for (int i = 0; i < n; ++i) {
        // Cross-section area ~ (1 - z/h)^2, so 1 - z/h = U^{1/3} is uniform in volume.
        const double scale = std::cbrt(unit(rng));
        const double z = p.height * (1.0 - scale);
        const double half = p.half_width * scale;
        pts(i, 0) = off[0] + half * (2.0 * unit(rng) - 1.0);
        pts(i, 1) = off[1] + half * (2.0 * unit(rng) - 1.0);
        pts(i, 2) = off[2] + z;
      }
      return {std::move(pts), "pyramid"};
    }
    case ShapeKind::kTorus: {
      if (!(p.minor_radius > 0.0) || !(p.major_radius > p.minor_radius)) {
        throw DomainError("torus requires major radius > minor radius > 0");
      }
      const Vector off = default_offset(p, 3);
      const double big = p.major_radius;
      const double small = p.minor_radius;
      Matrix pts(n, 3);
      for (int i = 0; i < n; ++i) {
        // Surface element is proportional to (R + r cos phi); reject on phi accordingly.
        double phi = 0.0;
        do {
          phi = kTwoPi * unit(rng);
        } while (unit(rng) * (big + small) > big + small * std::cos(phi));
        const double theta = kTwoPi * unit(rng);
        const double rho = big + small * std::cos(phi);
        pts(i, 0) = off[0] + rho * std::cos(theta);
        pts(i, 1) = off[1] + rho * std::sin(theta);
        pts(i, 2) = off[2] + small * std::sin(phi);
      }
      return {std::move(pts), "torus"};
    }
    case ShapeKind::kMixture: {
      std::vector<Vector> centers = p.centers;
      if (centers.empty()) {
        for (double x : {0.0, 1.0}) {
          for (double y : {0.0, 1.0}) centers.push_back(Eigen::Vector2d(x, y));
        }
      }
      const auto d = centers.front().size();
      for (const Vector& c : centers) {
        if (c.size() != d || d < 1) throw DomainError("mixture centers must share one dimension");
      }
      if (!(p.stddev > 0.0)) throw DomainError("mixture stddev must be positive");
      const Vector off = default_offset(p, static_cast<int>(d));
      std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
      std::normal_distribution<double> normal;
      Matrix pts(n, d);
      for (int i = 0; i < n; ++i) {
        const Vector& c = centers[pick(rng)];
        for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = off[k] + c[k] + p.stddev * normal(rng);
      }
      return {std::move(pts), "mixture"};
    }
  }
  throw DomainError("unknown shape kind");
}

Ensemble load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point cloud: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_cells(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!parse_double(cells[k], values[k])) {
        numeric = false;
        bad = k;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      width = cells.size();
      if (!numeric) continue;  // header row
    }
    if (cells.size() != width) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(width) + " columns, found " + std::to_string(cells.size()));
    }
    if (!numeric) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                        cells[bad] + "'");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");
  Matrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return {std::move(pts), path.stem().string()};
}

void save_csv(const Ensemble& ensemble, const std::filesystem::path& path,
              const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write point cloud: " + path.string());
  if (!header.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
  }
  char buf[32];
  const Matrix& pts = ensemble.points();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index k = 0; k < pts.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", pts(i, k));
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing point cloud: " + path.string());
}

}  // namespace swarmflow
