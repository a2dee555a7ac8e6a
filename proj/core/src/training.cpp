#include "swarmflow/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "swarmflow/assignment.hpp"
#include "swarmflow/parallel.hpp"

namespace swarmflow {

namespace {

constexpr std::size_t kChunk = 64;

std::mt19937_64 step_rng(std::uint64_t seed, int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), 0x5eedu};
  return std::mt19937_64(seq);
}

std::vector<int> draw_indices(std::mt19937_64& rng, int n, int count, bool without_replacement) {
  std::vector<int> idx(count);
  if (without_replacement && count <= n) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates.
    for (int i = 0; i < count; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
      idx[i] = all[i];
    }
    return idx;
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int& i : idx) i = pick(rng);
  return idx;
}

struct ChunkResult {
  double loss = 0.0;
  double residual_norm_sum = 0.0;
  Vector grad;
};

}  // namespace

Coupling parse_coupling(std::string_view name) {
  if (name == "independent") return Coupling::kIndependent;
  if (name == "minibatch_assignment") return Coupling::kMinibatchAssignment;
  throw DomainError("unknown coupling '" + std::string(name) + "'");
}

std::string_view coupling_name(Coupling c) {
  return c == Coupling::kIndependent ? "independent" : "minibatch_assignment";
}

LossWeighting parse_loss_weighting(std::string_view name) {
  if (name == "plain") return LossWeighting::kPlain;
  if (name == "adaptive") return LossWeighting::kAdaptive;
  throw DomainError("unknown loss weighting '" + std::string(name) + "'");
}

std::string_view loss_weighting_name(LossWeighting w) {
  return w == LossWeighting::kPlain ? "plain" : "adaptive";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (steps < 0) throw DomainError("steps must be >= 0");
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw DomainError("adam_eps must be > 0");
  if (!(window_gap_min >= 1e-4 && window_gap_min < 1.0)) {
    throw DomainError("window_gap_min must lie in [1e-4, 1)");
  }
  if (coupling == Coupling::kMinibatchAssignment && batch_size > 256) {
    throw DomainError("minibatch_assignment coupling supports batch_size <= 256");
  }
  for (int h : hidden) {
    if (h < 1) throw DomainError("hidden widths must be positive");
  }
  if (log_every < 1) throw DomainError("log_every must be >= 1");
  if (threads < 1) throw DomainError("threads must be >= 1");
}

std::string format_train_record(const TrainRecord& rec) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "step=%d loss=%.9g residual_mean=%.9g grad_norm=%.9g wall_time=%.6f",
                rec.step, rec.loss, rec.residual_norm_mean, rec.grad_norm, rec.wall_time);
  return buf;
}

TrainRecord parse_train_record(std::string_view line) {
  TrainRecord rec;
  std::istringstream in{std::string(line)};
  std::string field;
  int seen = 0;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw FormatError("malformed training log field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "step") {
        rec.step = std::stoi(value);
      } else if (key == "loss") {
        rec.loss = std::stod(value);
      } else if (key == "residual_mean") {
        rec.residual_norm_mean = std::stod(value);
      } else if (key == "grad_norm") {
        rec.grad_norm = std::stod(value);
      } else if (key == "wall_time") {
        rec.wall_time = std::stod(value);
      } else {
        throw FormatError("unknown training log key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw FormatError("bad value for training log key '" + key + "'");
    }
    ++seen;
  }
  if (seen != 5) throw FormatError("training log line must carry 5 fields");
  return rec;
}

std::vector<BridgeSample> sample_batch(std::mt19937_64& rng, const Ensemble& rho0,
                                       const Ensemble& rho1, const TrainConfig& cfg,
                                       const MinimumEnergyBridge& bridge) {
  const int d = bridge.system().state_dim();
  if (rho0.dim() != d || rho1.dim() != d) {
    throw ShapeError("ensemble dimension does not match the system state dimension");
  }
  const int n = cfg.batch_size;
  const bool ot = cfg.coupling == Coupling::kMinibatchAssignment;
  const std::vector<int> i0 = draw_indices(rng, rho0.size(), n, ot);
  std::vector<int> i1 = draw_indices(rng, rho1.size(), n, ot);
  if (ot) {
    Matrix x0(d, n);
    Matrix x1(d, n);
    for (int k = 0; k < n; ++k) {
      x0.col(k) = rho0.points().row(i0[k]).transpose();
      x1.col(k) = rho1.points().row(i1[k]).transpose();
    }
    const std::vector<int> match = solve_assignment(squared_distance_cost(x0, x1));
    std::vector<int> paired(n);
    for (int k = 0; k < n; ++k) paired[k] = i1[match[k]];
    i1 = std::move(paired);
  }

  const double gap = cfg.window_gap_min;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BridgeSample> batch;
  batch.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double t = (1.0 - gap) * unit(rng);
    const double r = std::min(1.0, t + gap + (1.0 - t - gap) * unit(rng));
    batch.push_back(bridge.sample(rho0.point(i0[k]), rho1.point(i1[k]), TimeWindow(t, r, gap)));
  }
  return batch;
}

ResidualResult residual(const LtiSystem& sys, const CoefficientModel& model,
                        const BridgeSample& sample, const WindowOperators& ops) {
  if (model.state_dim() != sys.state_dim()) throw ShapeError("model and system dimensions differ");
  const Vector tangent = sys.a() * sample.z_t + sample.bridge_action;
  const JvpResult j = model.jvp({sample.z_t, sample.window.t(), sample.window.r(), tangent, 1.0, 0.0});
  ResidualResult out;
  out.value = j.value;
  out.total_derivative = j.derivative;
  out.target = ops.gramian * j.derivative + ops.phi * sample.bridge_action;
  const Vector phi_t_c = ops.phi.transpose() * j.value;
  out.residual = ops.phi * (sys.bbt() * phi_t_c) - out.target;
  return out;
}

ResidualResult residual(const LtiSystem& sys, const CoefficientModel& model,
                        const BridgeSample& sample) {
  return residual(sys, model, sample, window_operators(sys, sample.window));
}

LossAndGrad loss_and_grad(const LtiSystem& sys, const CoefficientField& model,
                          const std::vector<BridgeSample>& batch, LossWeighting weighting,
                          WindowCache* cache, int threads) {
  if (batch.empty()) throw DomainError("loss_and_grad needs a non-empty batch");
  const int d = sys.state_dim();
  if (model.state_dim() != d) throw ShapeError("model and system dimensions differ");
  const auto total = batch.size();

  // Operators are gathered serially so the memo stays single-writer.
  std::vector<std::shared_ptr<const WindowOperators>> ops(total);
  for (std::size_t i = 0; i < total; ++i) {
    const double len = batch[i].window.length();
    ops[i] = cache != nullptr ? cache->get(len)
                              : std::make_shared<const WindowOperators>(window_operators(sys, len));
  }

  const std::size_t chunks = (total + kChunk - 1) / kChunk;
  std::vector<ChunkResult> partial(chunks);
  const double inv_n = 1.0 / static_cast<double>(total);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(total, begin + kChunk);
    const auto n = static_cast<Eigen::Index>(end - begin);
    Matrix z(d, n);
    Matrix dz(d, n);
    Vector t(n);
    Vector r(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const BridgeSample& s = batch[begin + k];
      z.col(k) = s.z_t;
      dz.col(k) = sys.a() * s.z_t + s.bridge_action;
      t[k] = s.window.t();
      r[k] = s.window.r();
    }
    ForwardCache fc;
    const BatchJvp j = model.jvp_batch(CoefficientField::make_features(z, t, r),
                                       CoefficientField::make_feature_tangents(
                                           dz, Vector::Ones(n), Vector::Zero(n)),
                                       &fc);
    Matrix cot(d, n);
    ChunkResult& out = partial[c];
    for (Eigen::Index k = 0; k < n; ++k) {
      const BridgeSample& s = batch[begin + k];
      const WindowOperators& w = *ops[begin + k];
      const Matrix m = w.phi * sys.bbt() * w.phi.transpose();
      const Vector target = w.gramian * j.derivative.col(k) + w.phi * s.bridge_action;
      const Vector res = m * j.value.col(k) - target;
      const double sq = res.squaredNorm();
      const double weight = weighting == LossWeighting::kAdaptive ? 1.0 / (sq + kAdaptiveWeightEps) : 1.0;
      out.loss += weight * sq * inv_n;
      out.residual_norm_sum += std::sqrt(sq);
      cot.col(k) = (2.0 * weight * inv_n) * (m.transpose() * res);
    }
    out.grad = model.backprop_batch(fc, cot);
  });

  LossAndGrad result;
  result.grad = Vector::Zero(model.params().size());
  double norm_sum = 0.0;
  for (const ChunkResult& p : partial) {
    result.loss += p.loss;
    norm_sum += p.residual_norm_sum;
    result.grad += p.grad;
  }
  result.residual_norm_mean = norm_sum * inv_n;
  return result;
}

TrainResult train(const LtiSystem& sys, const Ensemble& rho0, const Ensemble& rho1,
                  const TrainConfig& cfg, const TrainObserver& observer) {
  cfg.validate();
  return train(sys, rho0, rho1, cfg,
               CoefficientField::init(CoefficientField::default_dims(sys.state_dim(), cfg.hidden),
                                      cfg.seed, cfg.activation),
               observer);
}

TrainResult train(const LtiSystem& sys, const Ensemble& rho0, const Ensemble& rho1,
                  const TrainConfig& cfg, CoefficientField initial,
                  const TrainObserver& observer) {
  cfg.validate();
  require_controllable(sys);
  if (initial.state_dim() != sys.state_dim()) {
    throw ShapeError("model dimension " + std::to_string(initial.state_dim()) +
                     " does not match system dimension " + std::to_string(sys.state_dim()));
  }
  const MinimumEnergyBridge bridge(sys);
  WindowCache cache(sys);
  TrainResult result{std::move(initial), {}};
  Vector& theta = result.model.mutable_params();
  Vector m1 = Vector::Zero(theta.size());
  Vector m2 = Vector::Zero(theta.size());
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  const auto start = std::chrono::steady_clock::now();

  for (int step = 0; step < cfg.steps; ++step) {
    std::mt19937_64 rng = step_rng(cfg.seed, step);
    const std::vector<BridgeSample> batch = sample_batch(rng, rho0, rho1, cfg, bridge);
    const LossAndGrad lg =
        loss_and_grad(sys, result.model, batch, cfg.loss_weighting, &cache, cfg.threads);
    if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLoss || !lg.grad.allFinite()) {
      std::ostringstream os;
      os << "training diverged at step " << step << ": loss = " << lg.loss
         << " (limit " << kDivergenceLoss << ")";
      throw TrainingDivergedError(os.str());
    }

    beta1_pow *= cfg.beta1;
    beta2_pow *= cfg.beta2;
    m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * lg.grad;
    m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * lg.grad.cwiseAbs2();
    const double lr_t = cfg.learning_rate / (1.0 - beta1_pow);
    const double bias2 = 1.0 - beta2_pow;
    theta.array() -= lr_t * m1.array() / ((m2.array() / bias2).sqrt() + cfg.adam_eps);

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      TrainRecord rec;
      rec.step = step;
      rec.loss = lg.loss;
      rec.residual_norm_mean = lg.residual_norm_mean;
      rec.grad_norm = lg.grad.norm();
      rec.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(rec);
      if (observer) observer(rec);
    }
  }
  return result;
}

}  // namespace swarmflow
