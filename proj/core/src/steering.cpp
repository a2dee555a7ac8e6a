#include "swarmflow/steering.hpp"

#include <cmath>
#include <sstream>

namespace swarmflow {

namespace {

Eigen::LLT<Matrix> factor_gramian(const WindowOperators& ops) {
  Eigen::LLT<Matrix> llt(ops.gramian);
  if (llt.info() != Eigen::Success) {
    throw GramianSingularError("Gramian Cholesky factorization failed", 0.0);
  }
  return llt;
}

void require_state(const Vector& z, int d, const char* name) {
  if (z.size() != d) {
    std::ostringstream os;
    os << name << " has dimension " << z.size() << ", expected " << d;
    throw ShapeError(os.str());
  }
}

void require_unit_time(double tau, const char* name) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    std::ostringstream os;
    os << name << " = " << tau << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

}  // namespace

Vector solve_coefficient(const WindowOperators& ops, const Vector& z_t, const Vector& z_r) {
  const auto d = static_cast<int>(ops.phi.rows());
  require_state(z_t, d, "z_t");
  require_state(z_r, d, "z_r");
  return factor_gramian(ops).solve(z_r - ops.phi * z_t);
}

SteeringCoefficient exact_coefficient(const WindowOperators& ops, const TimeWindow& w,
                                      const Vector& z_t, const Vector& z_r) {
  return {solve_coefficient(ops, z_t, z_r), w, z_t};
}

SteeringCoefficient exact_coefficient(const LtiSystem& sys, const TimeWindow& w,
                                      const Vector& z_t, const Vector& z_r) {
  return exact_coefficient(window_operators(sys, w), w, z_t, z_r);
}

Vector control_at(const LtiSystem& sys, const SteeringCoefficient& coeff, double tau) {
  const TimeWindow& w = coeff.window;
  if (!(tau >= w.t() && tau <= w.r())) {
    std::ostringstream os;
    os << "tau = " << tau << " outside window [" << w.t() << ", " << w.r() << "]";
    throw DomainError(os.str());
  }
  require_state(coeff.c, sys.state_dim(), "coefficient");
  return sys.b().transpose() * (expm(sys.a(), w.r() - tau).transpose() * coeff.c);
}

Vector endpoint_update(const WindowOperators& ops, const Vector& z_t, const Vector& c) {
  const auto d = static_cast<int>(ops.phi.rows());
  require_state(z_t, d, "z_t");
  require_state(c, d, "coefficient");
  return ops.phi * z_t + ops.gramian * c;
}

MinimumEnergyBridge::MinimumEnergyBridge(const LtiSystem& sys) : sys_(sys) {
  const WindowOperators horizon = window_operators(sys_, 1.0);
  phi_horizon_ = horizon.phi;
  horizon_llt_.compute(horizon.gramian);
}

Vector MinimumEnergyBridge::horizon_coefficient(const Vector& z0, const Vector& z1) const {
  require_state(z0, sys_.state_dim(), "z0");
  require_state(z1, sys_.state_dim(), "z1");
  return horizon_llt_.solve(z1 - phi_horizon_ * z0);
}

Vector MinimumEnergyBridge::state_with(const Vector& z0, const Vector& c01, double tau) const {
  if (tau == 0.0) return z0;
  const WindowOperators head = window_operators_unchecked(sys_, tau);
  if (tau == 1.0) return head.phi * z0 + head.gramian * c01;
  const Matrix phi_tail = expm(sys_.a(), 1.0 - tau);
  return head.phi * z0 + head.gramian * (phi_tail.transpose() * c01);
}

Vector MinimumEnergyBridge::action_with(const Vector& c01, double t) const {
  const Matrix phi_tail = expm(sys_.a(), 1.0 - t);
  return sys_.bbt() * (phi_tail.transpose() * c01);
}

Vector MinimumEnergyBridge::state(const Vector& z0, const Vector& z1, double tau) const {
  require_unit_time(tau, "tau");
  return state_with(z0, horizon_coefficient(z0, z1), tau);
}

Vector MinimumEnergyBridge::action(const Vector& z0, const Vector& z1, double t) const {
  require_unit_time(t, "t");
  return action_with(horizon_coefficient(z0, z1), t);
}

BridgeSample MinimumEnergyBridge::sample(const Vector& z0, const Vector& z1,
                                         const TimeWindow& w) const {
  const Vector c01 = horizon_coefficient(z0, z1);
  return BridgeSample{z0,
                      z1,
                      w,
                      state_with(z0, c01, w.t()),
                      state_with(z0, c01, w.r()),
                      action_with(c01, w.t())};
}

Vector bridge_state(const LtiSystem& sys, const Vector& z0, const Vector& z1, double tau) {
  return MinimumEnergyBridge(sys).state(z0, z1, tau);
}

Vector bridge_action(const LtiSystem& sys, const Vector& z0, const Vector& z1, double t) {
  return MinimumEnergyBridge(sys).action(z0, z1, t);
}

BridgeSample make_bridge_sample(const LtiSystem& sys, const Vector& z0, const Vector& z1,
                                const TimeWindow& w) {
  return MinimumEnergyBridge(sys).sample(z0, z1, w);
}

double additivity_residual(const MinimumEnergyBridge& bridge, const Vector& z0,
                           const Vector& z1, double t, double s, double r) {
  if (!(t < s && s < r)) throw DomainError("additivity requires t < s < r");
  require_unit_time(t, "t");
  require_unit_time(r, "r");
  const LtiSystem& sys = bridge.system();
  const Vector z_t = bridge.state(z0, z1, t);
  const Vector z_s = bridge.state(z0, z1, s);
  const Vector z_r = bridge.state(z0, z1, r);

  const WindowOperators tr = window_operators(sys, r - t);
  const WindowOperators ts = window_operators(sys, s - t);
  const WindowOperators sr = window_operators(sys, r - s);
  const Vector whole = tr.gramian * solve_coefficient(tr, z_t, z_r);
  const Vector head = sr.phi * (ts.gramian * solve_coefficient(ts, z_t, z_s));
  const Vector tail = sr.gramian * solve_coefficient(sr, z_s, z_r);
  return (whole - head - tail).norm();
}

BridgeCoefficientOracle::BridgeCoefficientOracle(const LtiSystem& sys, Vector z0, Vector z1)
    : bridge_(sys), z0_(std::move(z0)), z1_(std::move(z1)) {
  require_state(z0_, sys.state_dim(), "z0");
  require_state(z1_, sys.state_dim(), "z1");
}

Vector BridgeCoefficientOracle::evaluate(const Vector& z, double t, double r) const {
  const TimeWindow w(t, r, 0.0);
  const WindowOperators ops = window_operators(bridge_.system(), w);
  return solve_coefficient(ops, z, bridge_.state(z0_, z1_, r));
}

JvpResult BridgeCoefficientOracle::jvp(const DirectionalDerivativeRequest& req) const {
  const LtiSystem& sys = bridge_.system();
  require_state(req.dz, sys.state_dim(), "dz");
  const TimeWindow w(req.t, req.r, 0.0);
  const WindowOperators ops = window_operators(sys, w);
  const Eigen::LLT<Matrix> llt = factor_gramian(ops);
  const Vector z_r = bridge_.state(z0_, z1_, req.r);
  const Vector c = llt.solve(z_r - ops.phi * req.z);

  // dW/dt = -M and dW/dr = +M with M = Phi B B^T Phi^T; dPhi/dt = -A Phi, dPhi/dr = A Phi.
  const Matrix m = ops.phi * sys.bbt() * ops.phi.transpose();
  const Vector mc = m * c;
  Vector rhs = -(ops.phi * req.dz);
  if (req.dt != 0.0) rhs += req.dt * (mc + ops.phi * (sys.a() * req.z));
  if (req.dr != 0.0) {
    const Vector z_r_dot = sys.a() * z_r + bridge_.action(z0_, z1_, req.r);
    rhs += req.dr * (z_r_dot - sys.a() * (ops.phi * req.z) - mc);
  }
  return {c, llt.solve(rhs)};
}

}  // namespace swarmflow
