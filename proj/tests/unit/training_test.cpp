#include "swarmflow/training.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace swarmflow {
namespace {

using testing::random_vector;

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Ensemble single(const Vector& p) { return Ensemble(p.transpose()); }

CoefficientField random_field(std::vector<int> dims, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<int>(CoefficientField::parameter_count(dims));
  return CoefficientField(std::move(dims), random_vector(rng, n, scale));
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.window_gap_min = 5e-5;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.beta2 = 1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.coupling = Coupling::kMinibatchAssignment;
  cfg.batch_size = 257;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(TrainRecordFormat, RoundTrip) {
  const TrainRecord rec{42, 0.125, 0.5, 3.25, 1.5};
  const std::string line = format_train_record(rec);
  EXPECT_EQ(line, "step=42 loss=0.125 residual_mean=0.5 grad_norm=3.25 wall_time=1.500000");
  const TrainRecord back = parse_train_record(line);
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.loss, 0.125);
  EXPECT_EQ(back.grad_norm, 3.25);
  EXPECT_THROW(parse_train_record("step=1 loss=2"), FormatError);
}

TEST(SampleBatch, ReproducibleAndWindowsRespectGap) {
  const LtiSystem sys = LtiSystem::rotation2d(1.0);
  const MinimumEnergyBridge bridge(sys);
  const Ensemble rho0 = gaussian(50, Vector::Zero(2), Matrix::Identity(2, 2), 1);
  const Ensemble rho1 = gaussian(50, Vector::Ones(2), Matrix::Identity(2, 2), 2);
  TrainConfig cfg;
  cfg.batch_size = 4;
  std::mt19937_64 a(9);
  std::mt19937_64 b(9);
  const auto s1 = sample_batch(a, rho0, rho1, cfg, bridge);
  const auto s2 = sample_batch(b, rho0, rho1, cfg, bridge);
  ASSERT_EQ(s1.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(s1[i].z0, s2[i].z0);
    EXPECT_EQ(s1[i].z1, s2[i].z1);
    EXPECT_EQ(s1[i].window.t(), s2[i].window.t());
    EXPECT_EQ(s1[i].window.r(), s2[i].window.r());
    EXPECT_EQ(s1[i].z_t, s2[i].z_t);
  }

  cfg.batch_size = 2000;
  cfg.window_gap_min = 0.05;
  std::mt19937_64 c(10);
  for (const BridgeSample& s : sample_batch(c, rho0, rho1, cfg, bridge)) {
    EXPECT_GE(s.window.length(), 0.05 - 1e-15);
    EXPECT_GE(s.window.t(), 0.0);
    EXPECT_LE(s.window.r(), 1.0);
    EXPECT_LE((s.z_t - bridge.state(s.z0, s.z1, s.window.t())).norm(), 1e-12);
  }
}

TEST(SampleBatch, AssignmentCouplingPairsIdenticalSetsWithThemselves) {
  const LtiSystem sys = LtiSystem::identity_channel(2);
  const Ensemble rho = gaussian(32, Vector::Zero(2), Matrix::Identity(2, 2), 3);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.coupling = Coupling::kMinibatchAssignment;
  std::mt19937_64 rng(4);
  for (const BridgeSample& s : sample_batch(rng, rho, rho, cfg, MinimumEnergyBridge(sys))) {
    EXPECT_EQ(s.z0, s.z1);
  }
}

TEST(SampleBatch, DimensionMismatch) {
  const MinimumEnergyBridge bridge(LtiSystem::identity_channel(3));
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_batch(rng, single(vec2(0, 0)), single(vec2(1, 1)), TrainConfig{}, bridge), ShapeError);
}

TEST(Residual, ReducesToForwardMeanFlowForFreeSystem) {
  // Independent straight-line MeanFlow: z_t = (1 - t) z0 + t z1, v = z1 - z0,
  // u_tgt = v + (r - t)(du/dz v + du/dt), residual = u - u_tgt.
  const LtiSystem sys = LtiSystem::identity_channel(2);
  const MinimumEnergyBridge bridge(sys);
  const CoefficientField model = random_field({5, 16, 16, 2}, 1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector z0 = random_vector(rng, 2);
    const Vector z1 = random_vector(rng, 2);
    const double t = 0.9 * unit(rng);
    const double r = t + 0.01 + (0.99 - t) * unit(rng);
    const Vector v = z1 - z0;
    const Vector zt = (1 - t) * z0 + t * z1;
    const JvpResult j = model.jvp({zt, t, r, v, 1.0, 0.0});
    const Vector meanflow = j.value - (v + (r - t) * j.derivative);

    const ResidualResult ours = residual(sys, model, bridge.sample(z0, z1, TimeWindow(t, r)));
    worst = std::max(worst, (ours.residual - meanflow).norm());
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(Residual, ExactFieldHasNoResidual) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const LtiSystem& sys : {LtiSystem::double_integrator(), LtiSystem::rotation2d(std::numbers::pi / 2)}) {
    const Vector z0 = random_vector(rng, 2);
    const Vector z1 = random_vector(rng, 2);
    const BridgeCoefficientOracle oracle(sys, z0, z1);
    for (int i = 0; i < 20; ++i) {
      const double t = 0.9 * unit(rng);
      const double r = t + 0.05 + (0.95 - t) * unit(rng);
      const BridgeSample s = make_bridge_sample(sys, z0, z1, TimeWindow(t, r));
      EXPECT_LE(residual(sys, oracle, s).residual.norm(), 1e-6);
    }
  }
}

TEST(Residual, ZeroModelOnFreeDriftPair) {
  const LtiSystem sys = LtiSystem::rotation2d(1.2);
  const Vector z0 = vec2(0.7, -0.2);
  const Vector z1 = window_operators(sys, 1.0).phi * z0;
  const CoefficientField zero = CoefficientField::init({5, 8, 2}, 0);
  const BridgeSample s = make_bridge_sample(sys, z0, z1, TimeWindow(0.3, 0.6));
  EXPECT_LE(s.bridge_action.norm(), 1e-12);
  EXPECT_LE(residual(sys, zero, s).residual.norm(), 1e-12);
}

TEST(LossAndGrad, ZeroResidualBatchGivesZeroLossAndGradient) {
  const LtiSystem sys = LtiSystem::rotation2d(0.5);
  const Vector z0 = vec2(1, 1);
  const Vector z1 = window_operators(sys, 1.0).phi * z0;
  const CoefficientField zero = CoefficientField::init({5, 8, 2}, 0);
  std::vector<BridgeSample> batch;
  for (double t : {0.0, 0.2, 0.5}) batch.push_back(make_bridge_sample(sys, z0, z1, TimeWindow(t, t + 0.4)));
  const LossAndGrad lg = loss_and_grad(sys, zero, batch);
  EXPECT_LE(lg.loss, 1e-24);
  EXPECT_LE(lg.grad.norm(), 1e-12);
}

TEST(LossAndGrad, StopGradientOnLinearModel) {
  // c = W f + b with f the feature vector. With the target detached, the gradient of
  // |M c - target|^2 is 2 M^T R f^T for W and 2 M^T R for b.
  const LtiSystem sys = LtiSystem::double_integrator();
  const CoefficientField model = random_field({5, 2}, 7);
  const BridgeSample s = make_bridge_sample(sys, vec2(0.3, -1), vec2(1.5, 0.2), TimeWindow(0.2, 0.7));
  const WindowOperators ops = window_operators(sys, s.window);
  const Matrix m = ops.phi * sys.bbt() * ops.phi.transpose();
  const ResidualResult res = residual(sys, model, s);
  Vector f(5);
  f << s.z_t, 0.2, 0.7, 0.5;
  const Vector g_out = 2.0 * m.transpose() * res.residual;
  Vector expected(12);
  Eigen::Map<Eigen::Matrix<double, 2, 5, Eigen::RowMajor>>(expected.data()) = g_out * f.transpose();
  expected.tail(2) = g_out;

  const LossAndGrad lg = loss_and_grad(sys, model, {s});
  EXPECT_NEAR(lg.loss, res.residual.squaredNorm(), 1e-12);
  EXPECT_LE((lg.grad - expected).norm(), 1e-12 * (1 + expected.norm()));
}

TEST(LossAndGrad, MatchesFiniteDifferencesWithDetachedTarget) {
  // The oracle perturbs every parameter and recomputes M c_theta, while the target
  // is evaluated once at the unperturbed parameters and held fixed: that is what
  // detaching means. Differentiating the full recomputed loss would also pass
  // through the jvp inside the target and is not the quantity being descended.
  const LtiSystem sys = LtiSystem::rotation2d(std::numbers::pi / 2);
  CoefficientField model = random_field({5, 4, 2}, 8);
  const BridgeSample s = make_bridge_sample(sys, vec2(-1, 0.5), vec2(1.5, 1.0), TimeWindow(0.1, 0.6));
  const WindowOperators ops = window_operators(sys, s.window);
  const Matrix m = ops.phi * sys.bbt() * ops.phi.transpose();
  const Vector target = residual(sys, model, s).target;
  auto loss = [&] { return (m * model.evaluate(s.z_t, 0.1, 0.6) - target).squaredNorm(); };
  const Vector g = loss_and_grad(sys, model, {s}).grad;
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double keep = model.params()[k];
    model.mutable_params()[k] = keep + h;
    const double up = loss();
    model.mutable_params()[k] = keep - h;
    const double down = loss();
    model.mutable_params()[k] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(g[k] - fd) / std::max(std::abs(fd), 1e-3));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(LossAndGrad, AdaptiveWeightingAndThreadsAgree) {
  const LtiSystem sys = LtiSystem::double_integrator();
  const MinimumEnergyBridge bridge(sys);
  const CoefficientField model = random_field({5, 8, 2}, 9);
  const Ensemble rho0 = gaussian(100, Vector::Zero(2), Matrix::Identity(2, 2), 1);
  const Ensemble rho1 = gaussian(100, Vector::Ones(2), Matrix::Identity(2, 2), 2);
  TrainConfig cfg;
  cfg.batch_size = 200;
  std::mt19937_64 rng(1);
  const auto batch = sample_batch(rng, rho0, rho1, cfg, bridge);
  const LossAndGrad one = loss_and_grad(sys, model, batch, LossWeighting::kPlain, nullptr, 1);
  const LossAndGrad four = loss_and_grad(sys, model, batch, LossWeighting::kPlain, nullptr, 4);
  EXPECT_EQ(one.loss, four.loss);
  EXPECT_EQ(one.grad, four.grad);

  double expected = 0.0;
  for (const BridgeSample& s : batch) {
    const double sq = residual(sys, model, s).residual.squaredNorm();
    expected += sq / (sq + kAdaptiveWeightEps);
  }
  expected /= static_cast<double>(batch.size());
  EXPECT_NEAR(loss_and_grad(sys, model, batch, LossWeighting::kAdaptive).loss, expected, 1e-12);
}

TEST(Train, ZeroStepsReturnsInitialModel) {
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.hidden = {8};
  cfg.seed = 3;
  const TrainResult res = train(LtiSystem::identity_channel(2), single(vec2(0, 0)), single(vec2(1, 1)), cfg);
  EXPECT_EQ(res.model.params(), CoefficientField::init({5, 8, 2}, 3).params());
  EXPECT_TRUE(res.records.empty());
}

TEST(Train, SeededRunsAreIdentical) {
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch_size = 32;
  cfg.hidden = {16, 16};
  cfg.log_every = 10;
  cfg.seed = 12;
  const LtiSystem sys = LtiSystem::rotation2d(1.0);
  const Ensemble rho0 = gaussian(64, Vector::Zero(2), Matrix::Identity(2, 2), 1);
  const Ensemble rho1 = gaussian(64, Vector::Ones(2), Matrix::Identity(2, 2) * 0.5, 2);
  const TrainResult a = train(sys, rho0, rho1, cfg);
  cfg.threads = 2;
  const TrainResult b = train(sys, rho0, rho1, cfg);
  EXPECT_EQ(a.model.params(), b.model.params());
  ASSERT_EQ(a.records.size(), 4u);  // steps 0, 10, 20 and the last one
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].step, b.records[i].step);
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(a.records[i].grad_norm, b.records[i].grad_norm);
    EXPECT_GE(a.records[i].loss, 0.0);
  }
  EXPECT_EQ(a.records.back().step, 29);
}

TEST(Train, DivergenceGuard) {
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.hidden = {4};
  EXPECT_THROW(train(LtiSystem::identity_channel(2), single(vec2(0, 0)), single(vec2(1e5, 0)), cfg),
               TrainingDivergedError);
}

TEST(Train, RejectsUncontrollableSystem) {
  Matrix b(2, 1);
  b << 1, 0;
  TrainConfig cfg;
  cfg.steps = 1;
  EXPECT_THROW(train(LtiSystem(Matrix::Zero(2, 2), b), single(vec2(0, 0)), single(vec2(1, 0)), cfg),
               UncontrollableError);
}


class DeltaTraining : public ::testing::TestWithParam<int> {};

TEST_P(DeltaTraining, LearnsTheExactCoefficient) {
  const LtiSystem sys = GetParam() == 0 ? LtiSystem::identity_channel(2)
                                        : LtiSystem::rotation2d(std::numbers::pi / 2);
  const Vector a = vec2(-1, 0.5);
  const Vector b = vec2(1.5, 1.0);
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch_size = 64;
  cfg.hidden = {32, 32};
  cfg.log_every = 1;
  cfg.seed = 1;
  const TrainResult res = train(sys, single(a), single(b), cfg);
  const Vector exact = exact_coefficient(sys, TimeWindow(0, 1), a, b).c;
  const Vector learned = res.model.evaluate(a, 0.0, 1.0);
  EXPECT_LE((learned - exact).norm() / exact.norm(), 0.05);

  // Loss trend over the first 500 steps: 100-step moving averages do not increase.
  auto window_mean = [&](int from) {
    double s = 0.0;
    for (int i = from; i < from + 100; ++i) s += res.records[i].loss;
    return s / 100.0;
  };
  for (int k = 0; k + 1 < 5; ++k) EXPECT_LE(window_mean(100 * (k + 1)), window_mean(100 * k)) << k;
}

INSTANTIATE_TEST_SUITE_P(Systems, DeltaTraining, ::testing::Values(0, 1));

}  // namespace
}  // namespace swarmflow
