#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "swarmflow/coeff_model.hpp"
#include "swarmflow/ensembles.hpp"
#include "swarmflow/steering.hpp"

namespace swarmflow {

enum class Coupling { kIndependent, kMinibatchAssignment };
enum class LossWeighting { kPlain, kAdaptive };

Coupling parse_coupling(std::string_view name);
std::string_view coupling_name(Coupling c);
LossWeighting parse_loss_weighting(std::string_view name);
std::string_view loss_weighting_name(LossWeighting w);

inline constexpr double kAdaptiveWeightEps = 1e-3;
inline constexpr double kDivergenceLoss = 1e6;

struct TrainConfig {
  int batch_size = 256;
  int steps = 10000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double window_gap_min = kDefaultMinWindowGap;
  Coupling coupling = Coupling::kIndependent;
  LossWeighting loss_weighting = LossWeighting::kPlain;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {128, 128};
  Activation activation = Activation::kSilu;
  int log_every = 100;
  int threads = 1;

  // Throws DomainError on out-of-range settings.
  void validate() const;
};

struct TrainRecord {
  int step = 0;
  double loss = 0.0;
  double residual_norm_mean = 0.0;
  double grad_norm = 0.0;
  double wall_time = 0.0;  // seconds since training started
};

// "step=<int> loss=<g> residual_mean=<g> grad_norm=<g> wall_time=<g>"
std::string format_train_record(const TrainRecord& rec);
TrainRecord parse_train_record(std::string_view line);

class TrainingDivergedError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Draws endpoint pairs per the coupling, then t ~ U(0, 1 - gap), r ~ U(t + gap, 1),
// and evaluates the minimum-energy bridge at t and r.
std::vector<BridgeSample> sample_batch(std::mt19937_64& rng, const Ensemble& rho0,
                                       const Ensemble& rho1, const TrainConfig& cfg,
                                       const MinimumEnergyBridge& bridge);

struct ResidualResult {
  Vector residual;  // Phi B B^T Phi^T c - target
  Vector target;    // W dc/dt + Phi B v, detached
  Vector value;     // c(z_t, t, r)
  Vector total_derivative;  // dc/dt along the bridge, r fixed
};

ResidualResult residual(const LtiSystem& sys, const CoefficientModel& model,
                        const BridgeSample& sample);
ResidualResult residual(const LtiSystem& sys, const CoefficientModel& model,
                        const BridgeSample& sample, const WindowOperators& ops);

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
  double residual_norm_mean = 0.0;
};

// Mean squared residual norm (or its adaptive reweighting) and its gradient,
// which flows only through the Phi B B^T Phi^T c_theta branch.
LossAndGrad loss_and_grad(const LtiSystem& sys, const CoefficientField& model,
                          const std::vector<BridgeSample>& batch,
                          LossWeighting weighting = LossWeighting::kPlain,
                          WindowCache* cache = nullptr, int threads = 1);

struct TrainResult {
  CoefficientField model;
  std::vector<TrainRecord> records;
};

using TrainObserver = std::function<void(const TrainRecord&)>;

TrainResult train(const LtiSystem& sys, const Ensemble& rho0, const Ensemble& rho1,
                  const TrainConfig& cfg, const TrainObserver& observer = {});
TrainResult train(const LtiSystem& sys, const Ensemble& rho0, const Ensemble& rho1,
                  const TrainConfig& cfg, CoefficientField initial,
                  const TrainObserver& observer = {});

}  // namespace swarmflow
