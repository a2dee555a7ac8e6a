#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace swarmflow::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,          // bad command line
  kExitConfig = 2,         // config, file, format or dimension problems
  kExitNumeric = 3,        // singular Gramian, divergence, non-finite values
  kExitCheckFailed = 4,    // verify found a failing check
};

struct TrainArgs {
  std::filesystem::path config;
  std::optional<int> threads;
};

struct PropagateArgs {
  std::filesystem::path config;
  std::filesystem::path checkpoint;  // ignored with zero_model
  std::optional<int> steps;
  bool zero_model = false;           // c == 0 stub: pure drift
  std::optional<int> threads;
};

struct VerifyArgs {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> json;
  double tolerance_scale = 1.0;  // test hook
};

struct GramianArgs {
  std::filesystem::path config;
  double t = 0.0;
  double r = 1.0;
};

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_propagate(const PropagateArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);
int cmd_gramian(const GramianArgs& args, std::ostream& out, std::ostream& err);

}  // namespace swarmflow::cli
