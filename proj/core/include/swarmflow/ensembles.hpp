#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "swarmflow/lti.hpp"

namespace swarmflow {

// A finite swarm sample: one point per row.
class Ensemble {
 public:
  Ensemble(Matrix points, std::string label = {});

  const Matrix& points() const noexcept { return points_; }
  int size() const noexcept { return static_cast<int>(points_.rows()); }
  int dim() const noexcept { return static_cast<int>(points_.cols()); }
  Vector point(int i) const { return points_.row(i).transpose(); }
  const std::string& label() const noexcept { return label_; }

 private:
  Matrix points_;
  std::string label_;
};

// n draws of mean + L g, g ~ N(0, I). L must be square lower triangular with a
// positive diagonal.
Ensemble gaussian(int n, const Vector& mean, const Matrix& cov_cholesky, std::uint64_t seed);

enum class ShapeKind { kRing, kPyramid, kTorus, kMixture };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view shape_kind_name(ShapeKind kind);

struct ShapeParams {
  // ring (2D): angle uniform, radius uniform in [radius - width/2, radius + width/2]
  double radius = 1.0;
  double width = 0.0;
  // pyramid (3D): square base [-half_width, half_width]^2 at z = 0, apex at (0, 0, height)
  double half_width = 1.0;
  double height = 1.0;
  // torus (3D): major radius > minor radius > 0, axis along z
  double major_radius = 2.0;
  double minor_radius = 0.5;
  // mixture: equal-weight isotropic Gaussians; default is the unit square's corners
  std::vector<Vector> centers;
  double stddev = 0.1;
  // offset added to every generated point (empty = none)
  Vector offset;
};

Ensemble shape(ShapeKind kind, int n, const ShapeParams& params, std::uint64_t seed);

// One point per row, d numeric columns, optional single header row.
Ensemble load_csv(const std::filesystem::path& path);
void save_csv(const Ensemble& ensemble, const std::filesystem::path& path,
              const std::vector<std::string>& header = {});

}  // namespace swarmflow
