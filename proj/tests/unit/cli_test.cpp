#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli/commands.hpp"
#include "cli/experiment_config.hpp"
#include "swarmflow/coeff_model.hpp"
#include "swarmflow/training.hpp"

namespace swarmflow::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "swarmflow_cli_test" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("SWARMFLOW_SEED");
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  // Runs the installed binary; returns its exit status.
  int run(const std::string& args) const {
    const std::string cmd = std::string(SWARMFLOW_BIN) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
};

constexpr const char* kRotationDelta = R"(
seed = 3
output_dir = "out"

[system]
preset = "rotation2d"
omega = 1.5707963267948966

[source]
kind = points
points = [[-1.0, 0.5]]

[target]
kind = points
points = [[1.5, 1.0]]

[train]
steps = 60
batch_size = 32
hidden = [16]
log_every = 10
)";

TEST_F(CliTest, ParsesSectionsAndJsonValues) {
  const ConfigTable t = parse_config_text("a = 1\n# note\n[s]\nb = [1, 2]\nc = word\nd = \"q # not comment\"\n");
  EXPECT_EQ(t.at("").at("a"), 1);
  EXPECT_EQ(t.at("s").at("b"), nlohmann::json::array({1, 2}));
  EXPECT_EQ(t.at("s").at("c"), "word");
  EXPECT_EQ(t.at("s").at("d"), "q # not comment");
  EXPECT_THROW(parse_config_text("[s]\nb = 1\nb = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[s]\njunk\n"), ConfigError);
  EXPECT_THROW(parse_config_text("x = [1, 2\n"), ConfigError);
}

TEST_F(CliTest, ExplicitSystemAndPresets) {
  const auto cfg = parse_experiment_config(
      "[system]\nA = [[0, 1], [0, 0]]\nB = [[0], [1]]\n[source]\nkind = gaussian\n[target]\nkind = ring\n", dir_);
  EXPECT_EQ(cfg.sys().input_dim(), 1);
  EXPECT_EQ(cfg.sys().a(), LtiSystem::double_integrator().a());
  const auto r3 = parse_experiment_config(
      "[system]\npreset = rotation3d\nomega_xy = 1\nomega_yz = 2\n[source]\nkind = pyramid\n[target]\nkind = torus\n",
      dir_);
  EXPECT_EQ(r3.sys().a(), LtiSystem::rotation3d(1, 2).a());
  EXPECT_EQ(build_ensemble(r3.source, r3, 1).dim(), 3);
}

TEST_F(CliTest, UncontrollableSystemIsRefusedAtLoad) {
  const fs::path p = write("unc.ini", "[system]\nA = [[0, 0], [0, 0]]\nB = [[1], [0]]\n"
                                      "[source]\nkind = gaussian\n[target]\nkind = gaussian\n");
  try {
    load_experiment_config(p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("controllable"), std::string::npos);
  }
  EXPECT_EQ(run("train " + p.string()), kExitConfig);
  EXPECT_NE(read("stderr.txt").find("not controllable"), std::string::npos);
}

TEST_F(CliTest, MissingCsvIsFileError) {
  const fs::path p = write("csv.ini", "[system]\npreset = identity-channel\n"
                                      "[source]\nkind = csv\npath = \"nope.csv\"\n[target]\nkind = gaussian\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train({p, std::nullopt}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("not found"), std::string::npos) << err.str();
}

TEST_F(CliTest, CsvPathResolvesAgainstConfigDirectory) {
  write("cloud.csv", "x,y\n1,2\n3,4\n");
  const auto cfg = load_experiment_config(write(
      "c.ini", "[system]\npreset = identity-channel\n[source]\nkind = csv\npath = cloud.csv\n[target]\nkind = gaussian\n"));
  EXPECT_EQ(build_ensemble(cfg.source, cfg, 1).size(), 2);
  EXPECT_EQ(build_ensemble(cfg.target, cfg, 2).size(), 1000);
}

TEST_F(CliTest, SeedEnvironmentOverride) {
  const std::string text = "seed = 5\n[system]\npreset = identity-channel\n[source]\nkind = gaussian\n[target]\nkind = gaussian\n";
  EXPECT_EQ(parse_experiment_config(text, dir_).seed, 5u);
  setenv("SWARMFLOW_SEED", "99", 1);
  const auto cfg = parse_experiment_config(text, dir_);
  unsetenv("SWARMFLOW_SEED");
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.train.seed, 99u);
}

TEST_F(CliTest, BadTrainSettingsAreConfigErrors) {
  EXPECT_THROW(parse_experiment_config("[system]\npreset = identity-channel\n[source]\nkind = gaussian\n"
                                       "[target]\nkind = gaussian\n[train]\nwindow_gap_min = 1e-6\n",
                                       dir_),
               ConfigError);
  EXPECT_THROW(parse_experiment_config("[system]\npreset = warp\n[source]\nkind = gaussian\n[target]\nkind = gaussian\n",
                                       dir_),
               ConfigError);
}

TEST_F(CliTest, TrainSmokeRunWritesCheckpointAndLog) {
  const fs::path cfg = write("delta.ini", kRotationDelta);
  ASSERT_EQ(run("train " + cfg.string()), kExitOk) << read("stderr.txt");
  ASSERT_TRUE(fs::exists(dir_ / "out" / "model.ckpt"));
  std::ifstream log(dir_ / "out" / "train.log");
  std::vector<TrainRecord> recs;
  for (std::string line; std::getline(log, line);) recs.push_back(parse_train_record(line));
  ASSERT_EQ(recs.size(), 7u);
  EXPECT_LT(recs.back().loss, recs.front().loss);
  EXPECT_EQ(CoefficientField::load(dir_ / "out" / "model.ckpt").layer_dims(), (std::vector<int>{5, 16, 2}));
}

TEST_F(CliTest, TrainIsReproducible) {
  const fs::path cfg = write("delta.ini", kRotationDelta);
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train({cfg, std::nullopt}, out, err), kExitOk) << err.str();
  const Vector first = CoefficientField::load(dir_ / "out" / "model.ckpt").params();
  ASSERT_EQ(cmd_train({cfg, 2}, out, err), kExitOk) << err.str();
  EXPECT_EQ(CoefficientField::load(dir_ / "out" / "model.ckpt").params(), first);
}

TEST_F(CliTest, ZeroModelPropagationRotatesMarker) {
  const fs::path cfg = write("delta.ini", kRotationDelta);
  ASSERT_EQ(run("propagate " + cfg.string() + " --zero-model --steps 16"), kExitOk) << read("stderr.txt");
  const Ensemble last = load_csv(dir_ / "out" / "propagate" / "snapshot_016.csv");
  // A quarter turn takes (-1, 0.5) to (-0.5, -1).
  EXPECT_NEAR(last.points()(0, 1), -0.5, 1e-9);
  EXPECT_NEAR(last.points()(0, 2), -1.0, 1e-9);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "propagate" / "snapshot_016.svg"));
  EXPECT_NE(read("stdout.txt").find("terminal_energy_distance="), std::string::npos);
  std::ifstream js(dir_ / "out" / "propagate" / "trace.json");
  EXPECT_EQ(nlohmann::json::parse(js)["metadata"]["model"], "zero");
}

TEST_F(CliTest, ZeroModelSnapshotsFollowDrift) {
  const fs::path cfg = write("g.ini",
                             "[system]\npreset = double-integrator\n[source]\nkind = gaussian\nn = 20\n"
                             "[target]\nkind = gaussian\nn = 20\n[propagate]\nsteps = 4\nsvg = false\n");
  std::ostringstream out, err;
  PropagateArgs args;
  args.config = cfg;
  args.zero_model = true;
  ASSERT_EQ(cmd_propagate(args, out, err), kExitOk) << err.str();
  const auto conf = load_experiment_config(cfg);
  const Ensemble rho0 = build_ensemble(conf.source, conf, 1);
  for (int k = 0; k <= 4; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%03d.csv", k);
    const Matrix got = load_csv(dir_ / "swarmflow_out" / "propagate" / name).points().rightCols(2);
    const Matrix expected = rho0.points() * expm(conf.sys().a(), 0.25 * k).transpose();
    EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12) << k;
  }
}

TEST_F(CliTest, CheckpointDimensionMismatchNamesBoth) {
  CoefficientField::init({6, 4, 3}, 0).save(dir_ / "d3.ckpt");
  const fs::path cfg = write("delta.ini", kRotationDelta);
  std::ostringstream out, err;
  PropagateArgs args;
  args.config = cfg;
  args.checkpoint = dir_ / "d3.ckpt";
  EXPECT_EQ(cmd_propagate(args, out, err), kExitConfig);
  EXPECT_NE(err.str().find("dimension 3"), std::string::npos) << err.str();
  EXPECT_NE(err.str().find("dimension 2"), std::string::npos) << err.str();
}

TEST_F(CliTest, PropagateNeedsModel) {
  const fs::path cfg = write("delta.ini", kRotationDelta);
  std::ostringstream out, err;
  PropagateArgs args;
  args.config = cfg;
  EXPECT_EQ(cmd_propagate(args, out, err), kExitConfig);
  args.checkpoint = dir_ / "missing.ckpt";
  EXPECT_EQ(cmd_propagate(args, out, err), kExitConfig);
}

TEST_F(CliTest, VerifyExitCodesAndJson) {
  const fs::path json = dir_ / "report.json";
  EXPECT_EQ(run("verify --seed 0 --json " + json.string()), kExitOk) << read("stdout.txt");
  EXPECT_NE(read("stdout.txt").find("all checks passed"), std::string::npos);
  std::ifstream in(json);
  const nlohmann::json j = nlohmann::json::parse(in);
  EXPECT_EQ(j.size(), 8u);
  EXPECT_EQ(run("verify --tolerance-scale 1e-30"), kExitCheckFailed);
  EXPECT_NE(read("stdout.txt").find("FAIL"), std::string::npos);
}

TEST_F(CliTest, GramianCommand) {
  const fs::path cfg = write("di.ini", "[system]\npreset = double-integrator\n[source]\nkind = gaussian\n"
                                       "[target]\nkind = gaussian\n");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_gramian({cfg, 0.0, 1.0}, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("0.33333333333333"), std::string::npos) << out.str();
  EXPECT_EQ(run("gramian " + cfg.string() + " --window 0.5 0.2"), kExitConfig);
  EXPECT_EQ(run("gramian"), kExitUsage);
}

TEST_F(CliTest, ShippedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(SWARMFLOW_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    const auto cfg = load_experiment_config(entry.path());
    EXPECT_NO_THROW(build_ensemble(cfg.source, cfg, 1)) << entry.path();
    EXPECT_NO_THROW(build_ensemble(cfg.target, cfg, 2)) << entry.path();
  }
}

}  // namespace
}  // namespace swarmflow::cli
