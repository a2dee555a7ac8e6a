#pragma once

#include "swarmflow/lti.hpp"

namespace swarmflow {

// Tangent of the field input (z, t, r). Training always uses dt = 1, dr = 0:
// the total derivative in t along the bridge with the right endpoint held fixed.
struct DirectionalDerivativeRequest {
  Vector z;
  double t = 0.0;
  double r = 1.0;
  Vector dz;
  double dt = 1.0;
  double dr = 0.0;
};

struct JvpResult {
  Vector value;
  Vector derivative;
};

// Anything that maps (z, t, r) to an interval coefficient in R^d.
class CoefficientModel {
 public:
  virtual ~CoefficientModel() = default;

  virtual int state_dim() const = 0;
  virtual Vector evaluate(const Vector& z, double t, double r) const = 0;
  virtual JvpResult jvp(const DirectionalDerivativeRequest& req) const = 0;
};

}  // namespace swarmflow
