#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swarmflow/lti.hpp"

namespace swarmflow {

struct CheckReport {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;  // max_residual <= tolerance
  int trials = 0;
  std::string detail;
};

// Every check draws its random cases from `seed`; `tolerance_scale` multiplies the
// pass threshold (1 in normal use; the CLI exposes it as a test hook).

// A = 0, B = I: exact coefficient equals (z_r - z_t)/(r - t), and along a curved
// differentiable trajectory the coefficient over [t, t+h] approaches the velocity
// at first order. Residual is normalized: each sub-check contributes
// (its error / its threshold), so the report tolerance is 1.
CheckReport check_free_system_reduction(const LtiSystem& sys_free, int trials, std::uint64_t seed,
                         double tolerance_scale = 1.0);

// Additivity over random bridge triples t < s < r: residual / (1 + |z_r|) <= 1e-8.
CheckReport check_additivity(const LtiSystem& sys, int trials, std::uint64_t seed,
                         double tolerance_scale = 1.0, const std::string& label = {});

// W dc/dt - Phi B B^T Phi^T c + Phi B v = 0 along fixed bridges, dc/dt by central
// differences (h = 1e-5): residual / (1 + |c|) <= 1e-6.
CheckReport check_differential_identity(const LtiSystem& sys, int trials, std::uint64_t seed,
                                        double tolerance_scale = 1.0,
                                        const std::string& label = {});

// Van Loan versus 32-node Gauss-Legendre on random controllable systems
// (d <= 6, m <= 3): relative Frobenius error <= 1e-8.
CheckReport check_gramian_oracles(int trials, std::uint64_t seed, double tolerance_scale = 1.0);

// The full suite over the identity-channel, double-integrator and rotation presets.
std::vector<CheckReport> run_all_checks(std::uint64_t seed, double tolerance_scale = 1.0);

std::string reports_to_json(const std::vector<CheckReport>& reports);

}  // namespace swarmflow
