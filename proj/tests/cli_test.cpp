#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "loblab/experiment.hpp"

// Integration tests that exercise the installed binary the way a user would:
// spawn it, parse the JSON summary from stdout and check the artifacts.

namespace fs = std::filesystem;
using namespace loblab;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string text;
  nlohmann::json out;  // parsed stdout; discarded marker when not JSON
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(LOBLAB_CLI_BIN) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr) << cmd;
  char buf[4096];
  CliResult r;
  while (size_t n = fread(buf, 1, sizeof(buf), pipe)) r.text.append(buf, n);
  int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = nlohmann::json::parse(r.text, nullptr, false);
  return r;
}

// Cheap full cell for end-to-end runs.
RunConfig tiny_config() {
  RunConfig cfg = desk_config(2500);
  cfg.synth.levels = 2;
  cfg.synth.depth_mean = {120, 160};
  cfg.synth.depth_dispersion = {4, 4};
  cfg.inject.episode_rate = 40;
  cfg.features.rolling_window = 20;
  cfg.window = 16;
  cfg.stride = 8;
  cfg.eval_levels = {2};
  cfg.input = InputMode::no_lob;
  cfg.encoder.family = EncoderFamily::feedforward;
  cfg.encoder.hidden = 16;
  cfg.encoder.latent_dim = 8;
  cfg.cascade.lob_encoder.latent_dim = 4;
  cfg.cascade.lob_encoder.hidden = 8;
  cfg.train.epochs = 1;
  cfg.train.batch = 128;
  cfg.detector.kind = DetectorKind::iforest;
  cfg.detector.trees = 40;
  reseed(cfg, 11);
  return cfg;
}

struct Workdir {
  fs::path path;
  fs::path config;
  explicit Workdir(const std::string& tag, const RunConfig& cfg) {
    path = fs::temp_directory_path() / ("loblab-cli-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
    config = path / "config.json";
    nlohmann::json j = cfg;
    std::ofstream os(config);
    os << j.dump(2) << "\n";
  }
  ~Workdir() { fs::remove_all(path); }

  std::string flags() const {
    return "--config " + config.string() + " --out " + (path / "runs").string();
  }
};

}  // namespace

TEST(Cli, ValidateAcceptsGoodConfigAndReportsHash) {
  RunConfig cfg = tiny_config();
  Workdir wd("validate", cfg);
  CliResult r = run_cli("validate " + wd.flags());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.out.at("ok").get<bool>());
  EXPECT_EQ(r.out.at("hash").get<std::string>(), config_hash_hex(cfg));
}

TEST(Cli, ShippedConfigValidates) {
  CliResult r = run_cli(std::string("validate --config ") + LOBLAB_SHIPPED_CONFIG);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(r.out.at("ok").get<bool>());
  EXPECT_FALSE(r.out.at("hash").get<std::string>().empty());
}

TEST(Cli, ValidateRejectsBadConfigWithFieldDiagnostic) {
  RunConfig cfg = tiny_config();
  Workdir wd("invalid", cfg);
  {
    nlohmann::json j = cfg;
    j["window"] = 1;
    std::ofstream os(wd.config);
    os << j.dump(2) << "\n";
  }
  CliResult r = run_cli("validate " + wd.flags());
  EXPECT_EQ(r.exit_code, 1);
  std::string msg = r.out.at("error").get<std::string>();
  EXPECT_NE(msg.find("window"), std::string::npos) << msg;
}

TEST(Cli, UnknownCommandAndFlagsFail) {
  CliResult unknown = run_cli("frobnicate");
  EXPECT_EQ(unknown.exit_code, 1);
  CliResult flag = run_cli("validate --what 3");
  EXPECT_EQ(flag.exit_code, 1);
  EXPECT_NE(flag.out.at("error").get<std::string>().find("--what"), std::string::npos);
  CliResult help = run_cli("help");
  EXPECT_EQ(help.exit_code, 0);
  EXPECT_NE(help.text.find("usage:"), std::string::npos);
}

TEST(Cli, StagesRunInOrderAndProduceAReport) {
  RunConfig cfg = tiny_config();
  cfg.input = InputMode::embedded_lob;  // exercises every stage
  Workdir wd("stages", cfg);
  for (const char* stage :
       {"synth", "inject", "features", "pretrain-lob", "train", "detect", "evaluate"}) {
    CliResult r = run_cli(std::string(stage) + " " + wd.flags());
    ASSERT_EQ(r.exit_code, 0) << stage << " failed: " << r.out.dump();
  }

  fs::path run_dir = wd.path / "runs" / ("run-" + config_hash_hex(cfg));
  EXPECT_TRUE(fs::exists(run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(run_dir / "synth" / "orderbook.csv"));
  EXPECT_TRUE(fs::exists(run_dir / "inject" / "labels.csv"));
  EXPECT_TRUE(fs::exists(run_dir / "features" / "features.csv"));
  EXPECT_TRUE(fs::exists(run_dir / "models" / "lob_encoder.json"));
  EXPECT_TRUE(fs::exists(run_dir / "models" / "encoder.json"));
  EXPECT_TRUE(fs::exists(run_dir / "detect" / "scores.csv"));
  EXPECT_TRUE(fs::exists(run_dir / "report.json"));

  nlohmann::json report = nlohmann::json::parse(std::ifstream(run_dir / "report.json"));
  const nlohmann::json& m = report.at("test");
  for (const char* key : {"auc_pr", "auroc", "f4", "precision", "recall"}) {
    double v = m.at(key).get<double>();
    EXPECT_GE(v, 0.0) << key;
    EXPECT_LE(v, 1.0) << key;
  }
  EXPECT_GT(m.at("positives").get<int64_t>(), 0);
}

TEST(Cli, StageOrderViolationIsExplicit) {
  RunConfig cfg = tiny_config();
  Workdir wd("order", cfg);
  CliResult r = run_cli("detect " + wd.flags());
  EXPECT_EQ(r.exit_code, 1);
  std::string msg = r.out.at("error").get<std::string>();
  EXPECT_NE(msg.find("run 'features' first"), std::string::npos) << msg;

  ASSERT_EQ(run_cli("synth " + wd.flags()).exit_code, 0);
  ASSERT_EQ(run_cli("inject " + wd.flags()).exit_code, 0);
  ASSERT_EQ(run_cli("features " + wd.flags()).exit_code, 0);
  r = run_cli("detect " + wd.flags());
  EXPECT_EQ(r.exit_code, 1);
  msg = r.out.at("error").get<std::string>();
  EXPECT_NE(msg.find("run 'train' first"), std::string::npos) << msg;
}

TEST(Cli, CompletedStagesAreSkippedUnlessForced) {
  RunConfig cfg = tiny_config();
  Workdir wd("skip", cfg);
  ASSERT_EQ(run_cli("synth " + wd.flags()).exit_code, 0);
  CliResult again = run_cli("synth " + wd.flags());
  EXPECT_EQ(again.exit_code, 0);
  EXPECT_TRUE(again.out.value("skipped", false));
  CliResult forced = run_cli("synth " + wd.flags() + " --force");
  EXPECT_EQ(forced.exit_code, 0);
  EXPECT_FALSE(forced.out.value("skipped", false));
}

TEST(Cli, SeedFlagRederivesEveryStageSeed) {
  RunConfig cfg = tiny_config();
  Workdir wd("seed", cfg);
  CliResult a = run_cli("validate " + wd.flags() + " --seed 21");
  CliResult b = run_cli("validate " + wd.flags() + " --seed 22");
  EXPECT_EQ(a.exit_code, 0);
  EXPECT_EQ(b.exit_code, 0);
  EXPECT_NE(a.out.at("hash").get<std::string>(), b.out.at("hash").get<std::string>());

  RunConfig expect = tiny_config();
  reseed(expect, 21);
  EXPECT_EQ(a.out.at("hash").get<std::string>(), config_hash_hex(expect));
}

TEST(Cli, ExperimentPlanWritesSummary) {
  RunConfig cfg = tiny_config();
  Workdir wd("plan", cfg);
  CliResult r = run_cli("experiment --plan depth " + wd.flags() + " --seed 3");
  ASSERT_EQ(r.exit_code, 0) << r.out.dump();
  EXPECT_EQ(r.out.at("failures").get<int64_t>(), 0);
  EXPECT_EQ(r.out.at("cells").size(), 6u);  // touch/uniform x three seeds
  fs::path summary = wd.path / "runs" / "plan-depth" / "summary.csv";
  EXPECT_TRUE(fs::exists(summary));

  CliResult again = run_cli("experiment --plan depth " + wd.flags() + " --seed 3");
  EXPECT_EQ(again.exit_code, 0);
  for (const auto& cell : again.out.at("cells")) {
    EXPECT_TRUE(cell.at("skipped").get<bool>()) << cell.dump();
  }
  EXPECT_EQ(run_cli("experiment --plan bogus " + wd.flags()).exit_code, 1);
}
