#pragma once

#include <filesystem>

#include "swarmflow/lti.hpp"

namespace swarmflow::cli {

struct SvgFrame {
  double min_x = -1.0;
  double max_x = 1.0;
  double min_y = -1.0;
  double max_y = 1.0;
};

// Bounding box of the first two coordinates over all snapshots, padded by 5%.
SvgFrame frame_for(const std::vector<Matrix>& snapshots);

// Scatter of the first two coordinates. Each point is colored by the polar angle of
// its initial position about the initial centroid, so correspondence is visible
// across snapshots.
void write_svg_scatter(const std::filesystem::path& path, const Matrix& points,
                       const Matrix& initial_points, const SvgFrame& frame, double time);

}  // namespace swarmflow::cli
