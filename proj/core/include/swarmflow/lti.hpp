#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>

#include <Eigen/Core>

#include "swarmflow/errors.hpp"

namespace swarmflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultMinWindowGap = 1e-3;
inline constexpr double kRankRelativeThreshold = 1e-10;

// Continuous-time LTI dynamics  z' = A z + B u.
class LtiSystem {
 public:
  // Throws ShapeError on inconsistent dimensions, NumericError on non-finite entries.
  LtiSystem(Matrix a, Matrix b);

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  // B B^T, cached since every Gramian-facing computation needs it.
  const Matrix& bbt() const noexcept { return bbt_; }
  int state_dim() const noexcept { return static_cast<int>(a_.rows()); }
  int input_dim() const noexcept { return static_cast<int>(b_.cols()); }

  // Named presets.
  static LtiSystem identity_channel(int d);
  static LtiSystem double_integrator();
  static LtiSystem rotation2d(double omega);
  // Rotation with rate omega_xy in the x-y plane plus omega_yz in the y-z plane; B = I3.
  static LtiSystem rotation3d(double omega_xy, double omega_yz);

 private:
  Matrix a_;
  Matrix b_;
  Matrix bbt_;
};

// Forward window [t, r] inside the unit horizon.
class TimeWindow {
 public:
  // Throws DomainError unless 0 <= t < r <= 1 and r - t >= min_gap.
  TimeWindow(double t, double r, double min_gap = kDefaultMinWindowGap);

  double t() const noexcept { return t_; }
  double r() const noexcept { return r_; }
  double length() const noexcept { return r_ - t_; }

 private:
  double t_;
  double r_;
};

// Transition matrix Phi(r,t) = exp(A (r-t)) and Gramian W(t,r) of one window.
struct WindowOperators {
  Matrix phi;
  Matrix gramian;
  double length = 0.0;
};

// Kalman rank test: rank [B, AB, ..., A^{d-1}B] == d, with singular values below
// kRankRelativeThreshold * sigma_max counted as zero.
bool check_controllability(const LtiSystem& sys);

// Throws UncontrollableError if the rank test fails.
void require_controllable(const LtiSystem& sys);

// exp(M s) by scaling and squaring with a Padé approximant (Higham 2005).
Matrix expm(const Eigen::Ref<const Matrix>& m, double s = 1.0);

// Phi and W for a window of the given length; W via the Van Loan block exponential.
// Throws GramianSingularError if W is not numerically positive definite.
WindowOperators window_operators(const LtiSystem& sys, double length);
WindowOperators window_operators(const LtiSystem& sys, const TimeWindow& w);

// Same as window_operators but accepts length >= 0 and skips the definiteness check.
// Length 0 yields (I, 0).
WindowOperators window_operators_unchecked(const LtiSystem& sys, double length);

// Gauss-Legendre approximation of the Gramian integral. Test oracle only.
Matrix gramian_quadrature(const LtiSystem& sys, const TimeWindow& w, int nodes);
Matrix gramian_quadrature(const LtiSystem& sys, double length, int nodes);

// Memo of WindowOperators keyed by window length quantized to 1e-9.
// Not thread-safe; give each worker its own cache.
class WindowCache {
 public:
  explicit WindowCache(const LtiSystem& sys, std::size_t max_entries = 1 << 16)
      : sys_(&sys), max_entries_(max_entries) {}

  std::shared_ptr<const WindowOperators> get(double length);
  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  const LtiSystem* sys_;
  std::size_t max_entries_;
  std::unordered_map<std::int64_t, std::shared_ptr<const WindowOperators>> entries_;
};

}  // namespace swarmflow
