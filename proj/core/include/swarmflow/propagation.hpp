#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swarmflow/ensembles.hpp"
#include "swarmflow/field.hpp"

namespace swarmflow {

inline constexpr int kDefaultPropagationSteps = 16;

// Sampling instants 0 = t_0 < ... < t_K = 1.
class PropagationPlan {
 public:
  // Throws DomainError unless the grid is strictly increasing from exactly 0 to
  // exactly 1 with every gap >= min_gap.
  explicit PropagationPlan(std::vector<double> grid, double min_gap = kDefaultMinWindowGap);

  static PropagationPlan uniform(int steps, double min_gap = kDefaultMinWindowGap);

  const std::vector<double>& grid() const noexcept { return grid_; }
  int steps() const noexcept { return static_cast<int>(grid_.size()) - 1; }

 private:
  std::vector<double> grid_;
};

struct PropagationTrace {
  std::vector<double> grid;
  std::vector<Matrix> states;        // K+1 snapshots, n x d each
  std::vector<Matrix> coefficients;  // K intervals, n x d each
  std::vector<Matrix> eta;           // K intervals when a reference model was given
  Vector energy;                     // per member, sum_k c_k^T W_k c_k

  int steps() const noexcept { return static_cast<int>(grid.size()) - 1; }
  int members() const noexcept { return states.empty() ? 0 : static_cast<int>(states[0].rows()); }
};

struct PropagationOptions {
  // Exact coefficient field for the eta diagnostic (single-pair / deterministic mode).
  const CoefficientModel* reference = nullptr;
  // Called with (k, states) before the coefficients of interval k are queried; may
  // modify the states (disturbance injection).
  std::function<void(int, Matrix&)> before_interval;
  int threads = 1;
};

// Few-step sampled-data propagation: per interval, c_k = model(z_k, t_k, t_{k+1}) and
// z_{k+1} = Phi z_k + W c_k for every member.
PropagationTrace propagate(const LtiSystem& sys, const CoefficientModel& model,
                           const Ensemble& rho0, const PropagationPlan& plan,
                           const PropagationOptions& options = {});

// u(tau) = B^T Phi(t_{k+1}, tau)^T c_k for the recorded coefficient of one member.
Vector reconstruct_control(const LtiSystem& sys, const PropagationTrace& trace, int member,
                           int k, double tau);

// eta = z_r_true - Phi z_t - W c_theta(z_t, t, r) = W (c_exact - c_theta).
Vector eta_residual(const LtiSystem& sys, const CoefficientModel& model, const Vector& z_t,
                    const Vector& z_r_true, const TimeWindow& w);

// Energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'| with every mean taken over all
// ordered pairs (including i == j), so identical sets give exactly 0.
double ensemble_distance(const Ensemble& x, const Ensemble& y);

// Writes trace.json plus snapshot_<k>.csv (member_id, x1..xd) into `dir`.
// `metadata_json` must be a JSON object literal (may be "{}").
void write_trace(const PropagationTrace& trace, const std::filesystem::path& dir,
                 const std::string& metadata_json = "{}");

}  // namespace swarmflow
