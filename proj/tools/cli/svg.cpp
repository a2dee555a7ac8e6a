#include "svg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace swarmflow::cli {

SvgFrame frame_for(const std::vector<Matrix>& snapshots) {
  SvgFrame f{INFINITY, -INFINITY, INFINITY, -INFINITY};
  for (const Matrix& s : snapshots) {
    f.min_x = std::min(f.min_x, s.col(0).minCoeff());
    f.max_x = std::max(f.max_x, s.col(0).maxCoeff());
    const Eigen::Index yc = s.cols() > 1 ? 1 : 0;
    f.min_y = std::min(f.min_y, s.col(yc).minCoeff());
    f.max_y = std::max(f.max_y, s.col(yc).maxCoeff());
  }
  const double pad = 0.05 * std::max({f.max_x - f.min_x, f.max_y - f.min_y, 1e-6});
  f.min_x -= pad;
  f.max_x += pad;
  f.min_y -= pad;
  f.max_y += pad;
  return f;
}

void write_svg_scatter(const std::filesystem::path& path, const Matrix& points,
                       const Matrix& initial_points, const SvgFrame& frame, double time) {
  constexpr double kSize = 480.0;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const double span = std::max(frame.max_x - frame.min_x, frame.max_y - frame.min_y);
  const double scale = kSize / span;
  const Eigen::Index yc = points.cols() > 1 ? 1 : 0;
  const Eigen::RowVectorXd centroid = initial_points.colwise().mean();

  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"14\">t = %.4f</text>\n", time);
  out << buf;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double dx = initial_points(i, 0) - centroid(0);
    const double dy = initial_points(i, yc) - centroid(yc);
    const double hue = std::fmod(std::atan2(dy, dx) * 180.0 / std::numbers::pi + 360.0, 360.0);
    const double x = (points(i, 0) - frame.min_x) * scale;
    const double y = kSize - (points(i, yc) - frame.min_y) * scale;
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.6\" fill=\"hsl(%.0f,80%%,45%%)\"/>\n",
                  x, y, hue);
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace swarmflow::cli
