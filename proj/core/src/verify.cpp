#include "swarmflow/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swarmflow/steering.hpp"

namespace swarmflow {

namespace {

constexpr double kFreeSystemTol = 1e-12;
constexpr double kAdditivityTol = 1e-8;
constexpr double kDiffIdentityTol = 1e-6;
constexpr double kGramianTol = 1e-8;
constexpr double kFiniteDiffStep = 1e-5;

Vector random_vector(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> normal;
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

CheckReport finish(std::string name, double residual, double tolerance, int trials,
                   std::string detail = {}) {
  return {std::move(name), residual, tolerance, residual <= tolerance, trials, std::move(detail)};
}

std::string suffixed(const char* base, const std::string& label) {
  return label.empty() ? std::string(base) : std::string(base) + "[" + label + "]";
}

}  // namespace

CheckReport check_free_system_reduction(const LtiSystem& sys_free, int trials, std::uint64_t seed,
                         double tolerance_scale) {
  const int d = sys_free.state_dim();
  if (!sys_free.a().isZero(0.0) || sys_free.input_dim() != d ||
      !sys_free.b().isApprox(Matrix::Identity(d, d), 0.0)) {
    throw DomainError("check_free_system_reduction requires A = 0 and B = I");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const MinimumEnergyBridge bridge(sys_free);

  // (a) closed form on the minimum-energy bridge.
  double closed_form = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Vector z0 = random_vector(rng, d);
    const Vector z1 = random_vector(rng, d);
    const double t = 0.9 * unit(rng);
    const double r = t + kDefaultMinWindowGap + (1.0 - t - kDefaultMinWindowGap) * unit(rng);
    const Vector z_t = bridge.state(z0, z1, t);
    const Vector z_r = bridge.state(z0, z1, std::min(r, 1.0));
    const TimeWindow w(t, std::min(r, 1.0));
    const Vector c = exact_coefficient(sys_free, w, z_t, z_r).c;
    const Vector expected = (z_r - z_t) / w.length();
    closed_form = std::max(closed_form, (c - expected).norm() / (1.0 + expected.norm()));
  }

  // (b) infinitesimal-window limit along z(tau) = (1-tau) z0 + tau z1 + sin(pi tau) q.
  const std::array<double, 3> hs = {1e-2, 1e-3, 1e-4};
  double ratio_dev = 0.0;
  std::ostringstream detail;
  const int limit_trials = std::max(1, std::min(trials, 20));
  for (int i = 0; i < limit_trials; ++i) {
    const Vector z0 = random_vector(rng, d);
    const Vector z1 = random_vector(rng, d);
    const Vector q = random_vector(rng, d);
    const double t = 0.1 + 0.8 * unit(rng);
    auto traj = [&](double tau) -> Vector {
      return (1.0 - tau) * z0 + tau * z1 + std::sin(std::numbers::pi * tau) * q;
    };
    const Vector velocity = z1 - z0 + std::numbers::pi * std::cos(std::numbers::pi * t) * q;
    std::array<double, 3> err{};
    for (std::size_t k = 0; k < hs.size(); ++k) {
      const TimeWindow w(t, t + hs[k], 0.0);
      const Vector c = exact_coefficient(sys_free, w, traj(t), traj(t + hs[k])).c;
      err[k] = (c - velocity).norm();
    }
    for (std::size_t k = 0; k + 1 < hs.size(); ++k) {
      const double ratio = err[k] / err[k + 1];
      const double expected = hs[k] / hs[k + 1];
      const double dev = std::isfinite(ratio) && ratio > 0.0 ? std::abs(std::log(ratio / expected))
                                                             : std::numeric_limits<double>::infinity();
      ratio_dev = std::max(ratio_dev, dev);
    }
  }
  const double ratio_tol = std::log(3.0);
  detail << "closed_form_rel_err=" << closed_form << " (tol " << kFreeSystemTol * tolerance_scale
         << "), max |log(err ratio / h ratio)|=" << ratio_dev << " (tol " << ratio_tol * tolerance_scale
         << ")";
  const double normalized = std::max(closed_form / kFreeSystemTol, ratio_dev / ratio_tol);
  return finish("free_system_reduction", normalized, tolerance_scale, trials, detail.str());
}

CheckReport check_additivity(const LtiSystem& sys, int trials, std::uint64_t seed,
                         double tolerance_scale, const std::string& label) {
  require_controllable(sys);
  const int d = sys.state_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const MinimumEnergyBridge bridge(sys);
  constexpr double kGap = 0.05;
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Vector z0 = random_vector(rng, d);
    const Vector z1 = random_vector(rng, d);
    // t < s < r with gaps >= kGap.
    const double span = 1.0 - 2.0 * kGap;
    std::array<double, 3> u = {unit(rng) * span, unit(rng) * span, unit(rng) * span};
    std::sort(u.begin(), u.end());
    const double t = u[0];
    const double s = u[1] + kGap;
    const double r = u[2] + 2.0 * kGap;
    const double res = additivity_residual(bridge, z0, z1, t, s, r);
    worst = std::max(worst, res / (1.0 + bridge.state(z0, z1, r).norm()));
  }
  return finish(suffixed("additivity", label), worst, kAdditivityTol * tolerance_scale, trials);
}

CheckReport check_differential_identity(const LtiSystem& sys, int trials, std::uint64_t seed,
                                        double tolerance_scale, const std::string& label) {
  require_controllable(sys);
  const int d = sys.state_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const MinimumEnergyBridge bridge(sys);
  const double h = kFiniteDiffStep;
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Vector z0 = random_vector(rng, d);
    const Vector z1 = random_vector(rng, d);
    const double t = 0.05 + 0.75 * unit(rng);
    const double r = t + 0.1 + (0.95 - t - 0.1) * unit(rng);
    const Vector z_r = bridge.state(z0, z1, r);
    auto coeff = [&](double tt) {
      return solve_coefficient(window_operators(sys, r - tt), bridge.state(z0, z1, tt), z_r);
    };
    const Vector c = coeff(t);
    const Vector c_dot = (coeff(t + h) - coeff(t - h)) / (2.0 * h);
    const WindowOperators ops = window_operators(sys, r - t);
    const Matrix m = ops.phi * sys.bbt() * ops.phi.transpose();
    const Vector res = ops.gramian * c_dot - m * c + ops.phi * bridge.action(z0, z1, t);
    worst = std::max(worst, res.norm() / (1.0 + c.norm()));
  }
  return finish(suffixed("differential_identity", label), worst, kDiffIdentityTol * tolerance_scale,
                trials);
}

CheckReport check_gramian_oracles(int trials, std::uint64_t seed, double tolerance_scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> dim_d(1, 6);
  std::uniform_int_distribution<int> dim_m(1, 3);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  int done = 0;
  while (done < trials) {
    const int d = dim_d(rng);
    const int m = dim_m(rng);
    Matrix a(d, d);
    Matrix b(d, m);
    for (int i = 0; i < d * d; ++i) a.data()[i] = normal(rng);
    for (int i = 0; i < d * m; ++i) b.data()[i] = normal(rng);
    // Scale A to spectral-norm-ish size 2 and shift it to be stable.
    a *= 2.0 / std::max(1.0, a.norm());
    a -= 0.5 * Matrix::Identity(d, d);
    const LtiSystem sys(a, b);
    if (!check_controllability(sys)) continue;
    const double len = 0.05 + 0.95 * unit(rng);
    // Unchecked: a controllable system can still have a numerically singular Gramian.
    const Matrix w = window_operators_unchecked(sys, len).gramian;
    const Matrix q = gramian_quadrature(sys, len, 32);
    worst = std::max(worst, (w - q).norm() / q.norm());
    ++done;
  }
  return finish("gramian_oracles", worst, kGramianTol * tolerance_scale, trials);
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed, double tolerance_scale) {
  const LtiSystem free2 = LtiSystem::identity_channel(2);
  const LtiSystem dbl = LtiSystem::double_integrator();
  const LtiSystem rot = LtiSystem::rotation2d(std::numbers::pi / 2.0);
  std::vector<CheckReport> out;
  out.push_back(check_free_system_reduction(free2, 100, seed, tolerance_scale));
  out.push_back(check_additivity(free2, 100, seed + 1, tolerance_scale, "identity-channel"));
  out.push_back(check_additivity(dbl, 100, seed + 2, tolerance_scale, "double-integrator"));
  out.push_back(check_additivity(rot, 100, seed + 3, tolerance_scale, "rotation2d"));
  out.push_back(check_differential_identity(free2, 50, seed + 4, tolerance_scale, "identity-channel"));
  out.push_back(check_differential_identity(dbl, 50, seed + 5, tolerance_scale, "double-integrator"));
  out.push_back(check_differential_identity(rot, 50, seed + 6, tolerance_scale, "rotation2d"));
  out.push_back(check_gramian_oracles(100, seed + 7, tolerance_scale));
  return out;
}

std::string reports_to_json(const std::vector<CheckReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const CheckReport& r : reports) {
    nlohmann::json j{{"name", r.name},       {"max_residual", r.max_residual},
                     {"tolerance", r.tolerance}, {"passed", r.passed},
                     {"trials", r.trials}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace swarmflow
