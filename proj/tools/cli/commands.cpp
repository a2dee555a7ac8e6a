#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "experiment_config.hpp"
#include "svg.hpp"
#include "swarmflow/coeff_model.hpp"
#include "swarmflow/propagation.hpp"
#include "swarmflow/steering.hpp"
#include "swarmflow/training.hpp"
#include "swarmflow/verify.hpp"

namespace swarmflow::cli {

namespace {

constexpr std::uint64_t kSourceSalt = 1;
constexpr std::uint64_t kTargetSalt = 2;

class ZeroModel final : public CoefficientModel {
 public:
  explicit ZeroModel(int d) : d_(d) {}
  int state_dim() const override { return d_; }
  Vector evaluate(const Vector&, double, double) const override { return Vector::Zero(d_); }
  JvpResult jvp(const DirectionalDerivativeRequest&) const override {
    return {Vector::Zero(d_), Vector::Zero(d_)};
  }

 private:
  int d_;
};

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "file error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UncontrollableError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitConfig;
  }
}

void print_matrix(std::ostream& out, const char* name, const Matrix& m) {
  char buf[64];
  out << name << " =\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << "  [";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%s% .17g", j ? ", " : "", m(i, j));
      out << buf;
    }
    out << "]\n";
  }
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_experiment_config(args.config);
    if (args.threads) cfg.train.threads = *args.threads;
    const Ensemble rho0 = build_ensemble(cfg.source, cfg, kSourceSalt);
    const Ensemble rho1 = build_ensemble(cfg.target, cfg, kTargetSalt);
    std::filesystem::create_directories(cfg.output_dir);
    const auto log_path = cfg.output_dir / "train.log";
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());

    out << "training on " << cfg.system_description << ": " << rho0.size() << " -> " << rho1.size()
        << " points, " << cfg.train.steps << " steps\n";
    const TrainResult result = train(cfg.sys(), rho0, rho1, cfg.train, [&](const TrainRecord& rec) {
      log << format_train_record(rec) << '\n';
      log.flush();
    });
    const auto ckpt = cfg.output_dir / "model.ckpt";
    result.model.save(ckpt);
    if (!result.records.empty()) {
      out << "initial " << format_train_record(result.records.front()) << '\n';
      out << "final   " << format_train_record(result.records.back()) << '\n';
    }
    out << "checkpoint: " << ckpt.string() << '\n' << "log: " << log_path.string() << '\n';
    return kExitOk;
  });
}

int cmd_propagate(const PropagateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment_config(args.config);
    const LtiSystem& sys = cfg.sys();
    const int d = sys.state_dim();

    std::unique_ptr<CoefficientModel> model;
    if (args.zero_model) {
      model = std::make_unique<ZeroModel>(d);
    } else {
      if (args.checkpoint.empty()) throw ConfigError("propagate needs --checkpoint or --zero-model");
      auto field = std::make_unique<CoefficientField>(CoefficientField::load(args.checkpoint));
      if (field->state_dim() != d) {
        throw ShapeError("checkpoint state dimension " + std::to_string(field->state_dim()) +
                         " does not match config system dimension " + std::to_string(d));
      }
      model = std::move(field);
    }

    Ensemble rho0 = build_ensemble(cfg.source, cfg, kSourceSalt);
    const Ensemble rho1 = build_ensemble(cfg.target, cfg, kTargetSalt);
    if (rho0.dim() != d) {
      throw ShapeError("source ensemble dimension " + std::to_string(rho0.dim()) +
                       " does not match system dimension " + std::to_string(d));
    }
    if (cfg.propagate.members > 0 && cfg.propagate.members < rho0.size()) {
      rho0 = Ensemble(rho0.points().topRows(cfg.propagate.members), rho0.label());
    }

    // A single source point and a single target point define one exact transfer,
    // so the eta diagnostic is meaningful.
    std::unique_ptr<BridgeCoefficientOracle> oracle;
    PropagationOptions opts;
    opts.threads = args.threads.value_or(cfg.threads);
    if (rho0.size() == 1 && rho1.size() == 1 && rho1.dim() == d) {
      oracle = std::make_unique<BridgeCoefficientOracle>(sys, rho0.point(0), rho1.point(0));
      opts.reference = oracle.get();
    }

    const PropagationPlan plan = cfg.plan(args.steps);
    const PropagationTrace trace = propagate(sys, *model, rho0, plan, opts);
    const Ensemble terminal(trace.states.back(), "terminal");
    const double distance = ensemble_distance(terminal, rho1);

    nlohmann::json meta{{"system", cfg.system_description},
                        {"steps", plan.steps()},
                        {"seed", cfg.seed},
                        {"model", args.zero_model ? std::string("zero") : args.checkpoint.string()},
                        {"source", cfg.source.kind},
                        {"target", cfg.target.kind},
                        {"terminal_energy_distance", distance}};
    const auto dir = cfg.output_dir / "propagate";
    write_trace(trace, dir, meta.dump());
    if (cfg.propagate.svg && d >= 2) {
      const SvgFrame frame = frame_for(trace.states);
      char name[64];
      for (int k = 0; k <= trace.steps(); ++k) {
        std::snprintf(name, sizeof name, "snapshot_%03d.svg", k);
        write_svg_scatter(dir / name, trace.states[k], trace.states.front(), frame, trace.grid[k]);
      }
    }

    out << "propagated " << rho0.size() << " members over " << plan.steps() << " intervals\n";
    if (rho0.size() == 1) {
      out << "terminal state: [" << trace.states.back().row(0) << "]\n";
    }
    if (!trace.eta.empty()) {
      double worst = 0.0;
      for (const Matrix& e : trace.eta) worst = std::max(worst, e.rowwise().norm().maxCoeff());
      out << "max_eta_norm=" << worst << '\n';
    }
    out << "terminal_energy_distance=" << distance << '\n' << "trace: " << (dir / "trace.json").string() << '\n';
    return kExitOk;
  });
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::vector<CheckReport> reports = run_all_checks(args.seed, args.tolerance_scale);
    bool all = true;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-42s %14s %12s %7s  %s\n", "check", "max_residual", "tolerance",
                  "trials", "result");
    out << buf;
    for (const CheckReport& r : reports) {
      std::snprintf(buf, sizeof buf, "%-42s %14.4e %12.4e %7d  %s\n", r.name.c_str(), r.max_residual,
                    r.tolerance, r.trials, r.passed ? "PASS" : "FAIL");
      out << buf;
      if (!r.detail.empty()) out << "    " << r.detail << '\n';
      all = all && r.passed;
    }
    if (args.json) {
      std::ofstream js(*args.json, std::ios::trunc);
      if (!js) throw IoError("cannot write " + args.json->string());
      js << reports_to_json(reports) << '\n';
    }
    out << (all ? "all checks passed\n" : "some checks FAILED\n");
    return all ? kExitOk : kExitCheckFailed;
  });
}

int cmd_gramian(const GramianArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment_config(args.config);
    const TimeWindow w(args.t, args.r, 0.0);
    const WindowOperators ops = window_operators(cfg.sys(), w);
    out << "system: " << cfg.system_description << "\nwindow: [" << w.t() << ", " << w.r() << "]\n";
    print_matrix(out, "Phi(r,t)", ops.phi);
    print_matrix(out, "W(t,r)", ops.gramian);
    return kExitOk;
  });
}

}  // namespace swarmflow::cli
