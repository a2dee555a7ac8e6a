#pragma once

#include <Eigen/Cholesky>

#include "swarmflow/field.hpp"
#include "swarmflow/lti.hpp"

namespace swarmflow {

// Coefficient c of the minimum-energy control over a window, anchored at z_t.
struct SteeringCoefficient {
  Vector c;
  TimeWindow window;
  Vector anchor_state;
};

// One supervised tuple drawn from the minimum-energy bridge between z0 and z1.
struct BridgeSample {
  Vector z0;
  Vector z1;
  TimeWindow window;
  Vector z_t;
  Vector z_r;
  Vector bridge_action;  // B v(z_t, t); v itself is never formed
};

// c = W^{-1} (z_r - Phi z_t) through a Cholesky solve of the Gramian.
Vector solve_coefficient(const WindowOperators& ops, const Vector& z_t, const Vector& z_r);

SteeringCoefficient exact_coefficient(const LtiSystem& sys, const TimeWindow& w,
                                      const Vector& z_t, const Vector& z_r);
SteeringCoefficient exact_coefficient(const WindowOperators& ops, const TimeWindow& w,
                                      const Vector& z_t, const Vector& z_r);

// u(tau) = B^T Phi(r, tau)^T c for tau in [t, r]; throws DomainError otherwise.
Vector control_at(const LtiSystem& sys, const SteeringCoefficient& coeff, double tau);

// z_r = Phi z_t + W c.
Vector endpoint_update(const WindowOperators& ops, const Vector& z_t, const Vector& c);

// Minimum-energy bridge over the full horizon [0, 1]. Caches Phi(1,0) and the
// Cholesky factor of W(0,1) so that many endpoint pairs can share them.
class MinimumEnergyBridge {
 public:
  explicit MinimumEnergyBridge(const LtiSystem& sys);

  const LtiSystem& system() const noexcept { return sys_; }

  // W(0,1)^{-1} (z1 - Phi(1,0) z0): the coefficient of the whole-horizon transfer.
  Vector horizon_coefficient(const Vector& z0, const Vector& z1) const;

  // z_tau = Phi(tau,0) z0 + W(0,tau) Phi(1,tau)^T W(0,1)^{-1} (z1 - Phi(1,0) z0).
  Vector state(const Vector& z0, const Vector& z1, double tau) const;

  // B v(z_t, t) = B B^T Phi(1,t)^T W(0,1)^{-1} (z1 - Phi(1,0) z0).
  Vector action(const Vector& z0, const Vector& z1, double t) const;

  BridgeSample sample(const Vector& z0, const Vector& z1, const TimeWindow& w) const;

 private:
  Vector state_with(const Vector& z0, const Vector& c01, double tau) const;
  Vector action_with(const Vector& c01, double t) const;

  LtiSystem sys_;
  Matrix phi_horizon_;
  Eigen::LLT<Matrix> horizon_llt_;
};

Vector bridge_state(const LtiSystem& sys, const Vector& z0, const Vector& z1, double tau);
Vector bridge_action(const LtiSystem& sys, const Vector& z0, const Vector& z1, double t);
BridgeSample make_bridge_sample(const LtiSystem& sys, const Vector& z0, const Vector& z1,
                                const TimeWindow& w);

// Norm of W(t,r)c(z_t,t,r) - Phi(r,s)W(t,s)c(z_t,t,s) - W(s,r)c(z_s,s,r) with
// z_t, z_s, z_r taken from the bridge between z0 and z1. Requires t < s < r.
double additivity_residual(const MinimumEnergyBridge& bridge, const Vector& z0,
                           const Vector& z1, double t, double s, double r);

// Exact coefficient field for one fixed endpoint pair:
//   c(z, t, r) = W(t,r)^{-1} (bridge(r) - Phi(r,t) z).
// Its jvp is analytic. Used as the reference model for residual and eta checks.
class BridgeCoefficientOracle final : public CoefficientModel {
 public:
  BridgeCoefficientOracle(const LtiSystem& sys, Vector z0, Vector z1);

  int state_dim() const override { return bridge_.system().state_dim(); }
  Vector evaluate(const Vector& z, double t, double r) const override;
  JvpResult jvp(const DirectionalDerivativeRequest& req) const override;

  const MinimumEnergyBridge& bridge() const noexcept { return bridge_; }
  const Vector& z0() const noexcept { return z0_; }
  const Vector& z1() const noexcept { return z1_; }

 private:
  MinimumEnergyBridge bridge_;
  Vector z0_;
  Vector z1_;
};

}  // namespace swarmflow
