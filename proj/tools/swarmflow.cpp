#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace swarmflow::cli;
  CLI::App app{"swarmflow: few-step swarm steering with learned minimum-energy coefficients"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads for batch and ensemble loops")->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a coefficient field; writes model.ckpt and train.log");
  train->add_option("config", train_args.config, "Experiment config file")->required();

  PropagateArgs prop_args;
  int prop_steps = 0;
  auto* prop = app.add_subcommand("propagate", "Few-step propagation of the source ensemble");
  prop->add_option("config", prop_args.config, "Experiment config file")->required();
  prop->add_option("--checkpoint", prop_args.checkpoint, "Checkpoint written by train");
  prop->add_option("--steps", prop_steps, "Uniform grid with K intervals (overrides config)")
      ->check(CLI::PositiveNumber);
  prop->add_flag("--zero-model", prop_args.zero_model, "Use c = 0 (pure drift) instead of a checkpoint");

  VerifyArgs verify_args;
  std::string json_path;
  auto* verify = app.add_subcommand("verify", "Run the oracle and identity checks");
  verify->add_option("--seed", verify_args.seed, "Seed for random test cases");
  verify->add_option("--json", json_path, "Write the report as JSON");
  verify->add_option("--tolerance-scale", verify_args.tolerance_scale, "Multiply every tolerance")
      ->group("");

  GramianArgs gram_args;
  auto* gram = app.add_subcommand("gramian", "Print Phi(r,t) and W(t,r) for a window");
  gram->add_option("config", gram_args.config, "Experiment config file")->required();
  gram->add_option("--window", [&](const CLI::results_t& res) {
        gram_args.t = std::stod(res.at(0));
        gram_args.r = std::stod(res.at(1));
        return true;
      }, "Window endpoints t r")
      ->expected(2)
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const std::optional<int> thread_opt = threads > 0 ? std::optional<int>(threads) : std::nullopt;
  if (*train) {
    train_args.threads = thread_opt;
    return cmd_train(train_args, std::cout, std::cerr);
  }
  if (*prop) {
    prop_args.threads = thread_opt;
    if (prop_steps > 0) prop_args.steps = prop_steps;
    return cmd_propagate(prop_args, std::cout, std::cerr);
  }
  if (*verify) {
    if (!json_path.empty()) verify_args.json = json_path;
    return cmd_verify(verify_args, std::cout, std::cerr);
  }
  return cmd_gramian(gram_args, std::cout, std::cerr);
}
