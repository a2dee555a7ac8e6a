#include "swarmflow/propagation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "swarmflow/coeff_model.hpp"
#include "swarmflow/parallel.hpp"

namespace swarmflow {

namespace {

// c_k for every member (rows of z). Batched when the model is a CoefficientField.
Matrix query_coefficients(const CoefficientModel& model, const Matrix& z, double t, double r,
                          int threads) {
  const auto n = z.rows();
  const auto d = z.cols();
  Matrix c(n, d);
  if (const auto* field = dynamic_cast<const CoefficientField*>(&model)) {
    constexpr Eigen::Index kChunk = 256;
    const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
    parallel_for(chunks, threads, [&](std::size_t ci) {
      const Eigen::Index begin = static_cast<Eigen::Index>(ci) * kChunk;
      const Eigen::Index len = std::min(kChunk, n - begin);
      const Matrix feats = CoefficientField::make_features(
          z.middleRows(begin, len).transpose(), Vector::Constant(len, t), Vector::Constant(len, r));
      c.middleRows(begin, len) = field->forward_batch(feats).transpose();
    });
    return c;
  }
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    c.row(row) = model.evaluate(z.row(row).transpose(), t, r).transpose();
  });
  return c;
}

}  // namespace

PropagationPlan::PropagationPlan(std::vector<double> grid, double min_gap) : grid_(std::move(grid)) {
  if (grid_.size() < 2) throw DomainError("propagation grid needs at least two instants");
  if (grid_.front() != 0.0 || grid_.back() != 1.0) {
    throw DomainError("propagation grid must start at exactly 0 and end at exactly 1");
  }
  for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
    if (!(grid_[k + 1] > grid_[k])) throw DomainError("propagation grid must be strictly increasing");
    if (grid_[k + 1] - grid_[k] < min_gap) {
      std::ostringstream os;
      os << "grid gap " << grid_[k + 1] - grid_[k] << " at k = " << k << " below minimum " << min_gap;
      throw DomainError(os.str());
    }
  }
}

PropagationPlan PropagationPlan::uniform(int steps, double min_gap) {
  if (steps < 1) throw DomainError("uniform grid needs K >= 1");
  std::vector<double> grid(steps + 1);
  for (int k = 0; k <= steps; ++k) grid[k] = static_cast<double>(k) / steps;
  grid.back() = 1.0;
  return PropagationPlan(std::move(grid), min_gap);
}

PropagationTrace propagate(const LtiSystem& sys, const CoefficientModel& model,
                           const Ensemble& rho0, const PropagationPlan& plan,
                           const PropagationOptions& options) {
  require_controllable(sys);
  const int d = sys.state_dim();
  if (rho0.dim() != d) {
    throw ShapeError("ensemble dimension " + std::to_string(rho0.dim()) +
                     " does not match system dimension " + std::to_string(d));
  }
  if (model.state_dim() != d) {
    throw ShapeError("model dimension " + std::to_string(model.state_dim()) +
                     " does not match system dimension " + std::to_string(d));
  }
  if (options.reference != nullptr && options.reference->state_dim() != d) {
    throw ShapeError("reference model dimension does not match system dimension");
  }

  PropagationTrace trace;
  trace.grid = plan.grid();
  trace.states.push_back(rho0.points());
  trace.energy = Vector::Zero(rho0.size());
  WindowCache cache(sys);

  for (int k = 0; k < plan.steps(); ++k) {
    const double t = trace.grid[k];
    const double r = trace.grid[k + 1];
    Matrix z = trace.states.back();
    if (options.before_interval) {
      options.before_interval(k, z);
      trace.states.back() = z;
    }
    const std::shared_ptr<const WindowOperators> ops = cache.get(r - t);
    Matrix c = query_coefficients(model, z, t, r, options.threads);
    // Row form of z_{k+1} = Phi z_k + W c_k.
    Matrix next = z * ops->phi.transpose() + c * ops->gramian;  // W symmetric
    trace.energy += ((c * ops->gramian).array() * c.array()).rowwise().sum().matrix();
    if (options.reference != nullptr) {
      const Matrix c_ref = query_coefficients(*options.reference, z, t, r, options.threads);
      trace.eta.push_back((c_ref - c) * ops->gramian);
    }
    trace.coefficients.push_back(std::move(c));
    trace.states.push_back(std::move(next));
  }
  return trace;
}

Vector reconstruct_control(const LtiSystem& sys, const PropagationTrace& trace, int member,
                           int k, double tau) {
  if (k < 0 || k >= trace.steps()) throw DomainError("interval index out of range");
  if (member < 0 || member >= trace.members()) throw DomainError("member index out of range");
  const double t = trace.grid[k];
  const double r = trace.grid[k + 1];
  if (!(tau >= t && tau <= r)) {
    std::ostringstream os;
    os << "tau = " << tau << " outside interval [" << t << ", " << r << "]";
    throw DomainError(os.str());
  }
  const Vector c = trace.coefficients[k].row(member).transpose();
  return sys.b().transpose() * (expm(sys.a(), r - tau).transpose() * c);
}

Vector eta_residual(const LtiSystem& sys, const CoefficientModel& model, const Vector& z_t,
                    const Vector& z_r_true, const TimeWindow& w) {
  const int d = sys.state_dim();
  if (z_t.size() != d || z_r_true.size() != d || model.state_dim() != d) {
    throw ShapeError("eta_residual dimension mismatch");
  }
  const WindowOperators ops = window_operators(sys, w);
  return z_r_true - ops.phi * z_t - ops.gramian * model.evaluate(z_t, w.t(), w.r());
}

double ensemble_distance(const Ensemble& x, const Ensemble& y) {
  if (x.dim() != y.dim()) {
    throw ShapeError("ensemble dimensions differ: " + std::to_string(x.dim()) + " vs " +
                     std::to_string(y.dim()));
  }
  auto mean_pairwise = [](const Matrix& a, const Matrix& b) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      sum += (b.rowwise() - a.row(i)).rowwise().norm().sum();
    }
    return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };
  const double cross = mean_pairwise(x.points(), y.points());
  const double within_x = mean_pairwise(x.points(), x.points());
  const double within_y = mean_pairwise(y.points(), y.points());
  return std::max(0.0, 2.0 * cross - within_x - within_y);
}

void write_trace(const PropagationTrace& trace, const std::filesystem::path& dir,
                 const std::string& metadata_json) {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["format"] = "swarmflow-trace";
  doc["version"] = 1;
  try {
    doc["metadata"] = nlohmann::json::parse(metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trace metadata is not valid JSON: ") + e.what());
  }
  if (!doc["metadata"].is_object()) throw FormatError("trace metadata must be a JSON object");
  doc["grid"] = trace.grid;
  doc["members"] = trace.members();
  doc["dim"] = trace.states.empty() ? 0 : trace.states[0].cols();

  nlohmann::json steps = nlohmann::json::array();
  char name[64];
  for (int k = 0; k <= trace.steps(); ++k) {
    const Matrix& z = trace.states[k];
    std::snprintf(name, sizeof name, "snapshot_%03d.csv", k);
    nlohmann::json step;
    step["k"] = k;
    step["t"] = trace.grid[k];
    step["snapshot"] = name;
    const Vector mean = z.colwise().mean().transpose();
    step["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    step["rms_spread"] = std::sqrt((z.rowwise() - mean.transpose()).rowwise().squaredNorm().mean());
    if (k < trace.steps()) {
      step["mean_coefficient_norm"] = trace.coefficients[k].rowwise().norm().mean();
      if (!trace.eta.empty()) step["max_eta_norm"] = trace.eta[k].rowwise().norm().maxCoeff();
    }
    steps.push_back(std::move(step));

    std::ofstream csv(dir / name, std::ios::trunc);
    if (!csv) throw IoError("cannot write snapshot " + (dir / name).string());
    csv << "member_id";
    for (Eigen::Index j = 0; j < z.cols(); ++j) csv << ",x" << (j + 1);
    csv << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      csv << i;
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", z(i, j));
        csv << ',' << buf;
      }
      csv << '\n';
    }
  }
  doc["steps"] = std::move(steps);
  doc["energy"] = {{"mean", trace.energy.size() ? trace.energy.mean() : 0.0},
                   {"max", trace.energy.size() ? trace.energy.maxCoeff() : 0.0}};

  std::ofstream out(dir / "trace.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "trace.json").string());
  out << doc.dump(2) << '\n';
}

}  // namespace swarmflow
