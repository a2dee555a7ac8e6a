#include <numbers>
#include <random>

#include <benchmark/benchmark.h>

#include "swarmflow/coeff_model.hpp"
#include "swarmflow/ensembles.hpp"
#include "swarmflow/lti.hpp"
#include "swarmflow/propagation.hpp"
#include "swarmflow/training.hpp"

namespace sf = swarmflow;

namespace {

sf::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  sf::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void BM_Expm(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const sf::Matrix a = random_matrix(d, d, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sf::expm(a, 0.7));
}
BENCHMARK(BM_Expm)->Arg(2)->Arg(6)->Arg(12);

void BM_WindowOperators(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const sf::LtiSystem sys(random_matrix(d, d, 2) / d, random_matrix(d, d, 3));
  for (auto _ : state) benchmark::DoNotOptimize(sf::window_operators(sys, 0.37));
}
BENCHMARK(BM_WindowOperators)->Arg(2)->Arg(6);

struct FieldFixture {
  explicit FieldFixture(int width, int n)
      : field(sf::CoefficientField::init(sf::CoefficientField::default_dims(2, {width, width}), 4)) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    // Give the zero-initialised head some weight so the kernels do real work.
    for (Eigen::Index i = 0; i < field.params().size(); ++i) field.mutable_params()[i] += 0.01 * g(rng);
    const sf::Matrix z = random_matrix(2, n, 6);
    const sf::Vector t = sf::Vector::LinSpaced(n, 0.0, 0.5);
    const sf::Vector r = sf::Vector::Constant(n, 0.9);
    features = sf::CoefficientField::make_features(z, t, r);
    tangents = sf::CoefficientField::make_feature_tangents(random_matrix(2, n, 7), sf::Vector::Ones(n),
                                                           sf::Vector::Zero(n));
    cotangents = random_matrix(2, n, 8);
  }
  sf::CoefficientField field;
  sf::Matrix features;
  sf::Matrix tangents;
  sf::Matrix cotangents;
};

void BM_ForwardBatch(benchmark::State& state) {
  FieldFixture f(static_cast<int>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(f.field.forward_batch(f.features));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardBatch)->Arg(64)->Arg(128);

void BM_JvpBatch(benchmark::State& state) {
  FieldFixture f(static_cast<int>(state.range(0)), 256);
  for (auto _ : state) benchmark::DoNotOptimize(f.field.jvp_batch(f.features, f.tangents));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_JvpBatch)->Arg(64)->Arg(128);

void BM_BackpropBatch(benchmark::State& state) {
  FieldFixture f(static_cast<int>(state.range(0)), 256);
  sf::ForwardCache cache;
  f.field.forward_batch(f.features, &cache);
  for (auto _ : state) benchmark::DoNotOptimize(f.field.backprop_batch(cache, f.cotangents));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_BackpropBatch)->Arg(64)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
  const sf::LtiSystem sys = sf::LtiSystem::rotation2d(std::numbers::pi / 2);
  const sf::Ensemble rho0 = sf::gaussian(2000, sf::Vector::Zero(2), sf::Matrix::Identity(2, 2), 1);
  const sf::Ensemble rho1 = sf::shape(sf::ShapeKind::kMixture, 2000, sf::ShapeParams{}, 2);
  sf::TrainConfig cfg;
  cfg.hidden = {static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  cfg.coupling = state.range(1) ? sf::Coupling::kMinibatchAssignment : sf::Coupling::kIndependent;
  cfg.steps = 1;
  sf::CoefficientField model = sf::CoefficientField::init(sf::CoefficientField::default_dims(2, cfg.hidden), 3);
  for (auto _ : state) {
    model = sf::train(sys, rho0, rho1, cfg, std::move(model)).model;
  }
}
BENCHMARK(BM_TrainStep)->Args({64, 0})->Args({128, 0})->Args({128, 1})->Unit(benchmark::kMillisecond);

void BM_Propagate(benchmark::State& state) {
  const sf::LtiSystem sys = sf::LtiSystem::rotation2d(std::numbers::pi / 2);
  FieldFixture f(128, 1);
  const sf::Ensemble rho0 = sf::gaussian(static_cast<int>(state.range(0)), sf::Vector::Zero(2),
                                         sf::Matrix::Identity(2, 2), 9);
  const sf::PropagationPlan plan = sf::PropagationPlan::uniform(16);
  for (auto _ : state) benchmark::DoNotOptimize(sf::propagate(sys, f.field, rho0, plan));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Propagate)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_EnergyDistance(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const sf::Ensemble a = sf::gaussian(n, sf::Vector::Zero(2), sf::Matrix::Identity(2, 2), 10);
  const sf::Ensemble b = sf::gaussian(n, sf::Vector::Zero(2), sf::Matrix::Identity(2, 2), 11);
  for (auto _ : state) benchmark::DoNotOptimize(sf::ensemble_distance(a, b));
}
BENCHMARK(BM_EnergyDistance)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
