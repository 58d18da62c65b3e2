#include "loblab/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace loblab;

namespace {

// Small enough that a full cell runs in a few seconds.
RunConfig tiny_config() {
  RunConfig cfg = desk_config(3000);
  cfg.synth.levels = 2;
  cfg.synth.depth_mean = {120, 160};
  cfg.synth.depth_dispersion = {4, 4};
  cfg.inject.episode_rate = 30;
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
  cfg.train.epochs = 2;
  cfg.train.batch = 128;
  cfg.detector.kind = DetectorKind::iforest;
  cfg.detector.trees = 50;
  reseed(cfg, 7);
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  EXPECT_TRUE(is.good()) << p;
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("loblab-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(RunConfigJson, RoundTripPreservesHash) {
  RunConfig cfg = desk_config();
  cfg.input = InputMode::raw_lob;
  cfg.detector.kind = DetectorKind::iforest;
  cfg.aggregation = Aggregation::max;
  cfg.split = SplitMode::traditional;
  cfg.train.alpha = 0;
  cfg.train.oversample = 0;
  reseed(cfg, 42);

  nlohmann::json j = cfg;
  RunConfig back = j.get<RunConfig>();
  EXPECT_EQ(config_hash(cfg), config_hash(back));
  EXPECT_EQ(back.input, InputMode::raw_lob);
  EXPECT_EQ(back.detector.kind, DetectorKind::iforest);
  EXPECT_EQ(back.aggregation, Aggregation::max);
  EXPECT_EQ(back.split, SplitMode::traditional);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.synth.seed, cfg.synth.seed);
  EXPECT_EQ(back.eval_levels, cfg.eval_levels);

  back.train.lr *= 2;
  EXPECT_NE(config_hash(cfg), config_hash(back));
  EXPECT_EQ(config_hash_hex(cfg).size(), 16u);
}

TEST(RunConfigJson, ReseedForksEveryStage) {
  RunConfig a = desk_config();
  reseed(a, 5);
  RunConfig b = desk_config();
  reseed(b, 5);
  EXPECT_EQ(a.synth.seed, b.synth.seed);
  EXPECT_EQ(a.train.seed, b.train.seed);

  reseed(b, 6);
  EXPECT_NE(a.synth.seed, b.synth.seed);
  EXPECT_NE(a.inject.seed, b.inject.seed);
  EXPECT_NE(a.encoder.seed, b.encoder.seed);
  EXPECT_NE(a.cascade.lob_encoder.seed, b.cascade.lob_encoder.seed);
  EXPECT_NE(a.train.seed, b.train.seed);
  EXPECT_NE(a.detector.seed, b.detector.seed);

  std::set<uint64_t> stage_seeds{a.synth.seed,   a.inject.seed, a.encoder.seed,
                                 a.cascade.lob_encoder.seed, a.train.seed,  a.detector.seed};
  EXPECT_EQ(stage_seeds.size(), 6u) << "stage seeds must not collide";
}

TEST(RunConfigJson, ValidationCatchesBadCells) {
  RunConfig cfg = tiny_config();
  cfg.train.alpha = 0.5;
  cfg.train.oversample = 0;
  try {
    cfg.validate();
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("oversampling"), std::string::npos);
  }

  cfg = tiny_config();
  cfg.window = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = tiny_config();
  cfg.train_fraction = 0.9;
  cfg.val_fraction = 0.2;
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = tiny_config();
  cfg.eval_levels = {9};
  EXPECT_THROW(cfg.validate(), ConfigError);

  cfg = tiny_config();
  cfg.input = InputMode::embedded_lob;
  cfg.cascade.lob_encoder.family = EncoderFamily::recurrent;
  EXPECT_THROW(cfg.validate(), ConfigError);

  EXPECT_THROW(input_mode_from_string("book"), ConfigError);
  EXPECT_THROW(detector_kind_from_string("svm"), ConfigError);
  EXPECT_THROW(aggregation_from_string("median"), ConfigError);
}

TEST(Pipeline, TinyCellProducesSaneReport) {
  RunConfig cfg = tiny_config();
  PipelineResult r = run_pipeline(cfg);

  EXPECT_GT(r.train_windows, 8);
  EXPECT_GT(r.val_windows, 0);
  EXPECT_GT(r.test_windows, 0);
  EXPECT_EQ(r.test_steps, 3000 - (3000 * 6 / 10 + 3000 * 2 / 10));
  EXPECT_EQ(r.encoder_input_dim, 12);  // manual block only under no_lob

  EXPECT_GE(r.test.auroc, 0.0);
  EXPECT_LE(r.test.auroc, 1.0);
  EXPECT_GE(r.test.auc_pr, 0.0);
  EXPECT_LE(r.test.auc_pr, 1.0);
  EXPECT_GE(r.test.f4, 0.0);
  EXPECT_LE(r.test.f4, 1.0);
  EXPECT_GT(r.test.positives, 0);
  EXPECT_EQ(r.test.subset, EvalSubset::all_levels);
  if (r.restricted_valid) {
    EXPECT_EQ(r.test_restricted.subset, EvalSubset::levels_2_5);
    EXPECT_LE(r.test_restricted.positives, r.test.positives);
  }

  EXPECT_EQ(static_cast<int64_t>(r.test_series.point_scores.size()), r.test_steps);
  EXPECT_EQ(static_cast<int64_t>(r.test_labels.size()), r.test_steps);
  EXPECT_EQ(r.trace.size(), 2u);
  EXPECT_TRUE(std::isfinite(r.trace.back().total));
}

TEST(Pipeline, BitReproducibleAcrossRuns) {
  RunConfig cfg = tiny_config();
  cfg.input = InputMode::no_lob;
  PipelineResult a = run_pipeline(cfg);
  PipelineResult b = run_pipeline(cfg);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(a.test.auc_pr, b.test.auc_pr);
  EXPECT_EQ(a.test.auroc, b.test.auroc);
  ASSERT_EQ(a.test_series.point_scores.size(), b.test_series.point_scores.size());
  for (size_t i = 0; i < a.test_series.point_scores.size(); ++i) {
    ASSERT_EQ(a.test_series.point_scores[i], b.test_series.point_scores[i]) << i;
  }

  RunConfig other = tiny_config();
  reseed(other, 8);
  PipelineResult c = run_pipeline(other);
  EXPECT_NE(a.test_series.point_scores, c.test_series.point_scores);
}

TEST(Pipeline, InputModesDeriveEncoderWidth) {
  RunConfig cfg = tiny_config();
  cfg.synth.steps = 2000;
  cfg.inject.episode_rate = 40;
  cfg.train.epochs = 1;

  cfg.input = InputMode::no_lob;
  EXPECT_EQ(run_pipeline(cfg).encoder_input_dim, 12);

  cfg.input = InputMode::raw_lob;
  EXPECT_EQ(run_pipeline(cfg).encoder_input_dim, 12 + 4 * cfg.synth.levels);

  cfg.input = InputMode::embedded_lob;
  cfg.encoder.family = EncoderFamily::attention;
  EXPECT_EQ(run_pipeline(cfg).encoder_input_dim,
            cfg.cascade.lob_encoder.latent_dim + 12);
}

TEST(Experiment, WritesArtifactsAndRecordsFailures) {
  TempDir tmp("artifacts");
  ExperimentPlan plan;
  plan.root = tmp.path;

  RunConfig good = tiny_config();
  good.name = "good";
  plan.cells.push_back({good.name, good});

  RunConfig bad = tiny_config();
  bad.train.alpha = 0.5;
  bad.train.oversample = 0;
  bad.name = "bad";
  plan.cells.push_back({bad.name, bad});

  std::vector<CellReport> reports = run_experiment(plan);
  ASSERT_EQ(reports.size(), 2u);

  EXPECT_FALSE(reports[0].failed);
  fs::path good_dir = tmp.path / ("good-" + config_hash_hex(good));
  EXPECT_TRUE(fs::exists(good_dir / "config.json"));
  EXPECT_TRUE(fs::exists(good_dir / "report.json"));
  EXPECT_TRUE(fs::exists(good_dir / "trace.csv"));
  EXPECT_TRUE(fs::exists(good_dir / "scores.csv"));

  EXPECT_TRUE(reports[1].failed);
  EXPECT_NE(reports[1].error.find("oversampling"), std::string::npos);
  fs::path bad_dir = tmp.path / ("bad-" + config_hash_hex(bad));
  EXPECT_TRUE(fs::exists(bad_dir / "config.json"));
  EXPECT_TRUE(fs::exists(bad_dir / "report.json"));
  EXPECT_FALSE(fs::exists(bad_dir / "scores.csv"));

  std::string summary = slurp(tmp.path / "summary.csv");
  EXPECT_NE(summary.find("name,hash,failed"), std::string::npos);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);
  EXPECT_NE(summary.find("good,"), std::string::npos);
  EXPECT_NE(summary.find("bad,"), std::string::npos);

  // The stored config replays to the same cell.
  nlohmann::json j = nlohmann::json::parse(slurp(good_dir / "config.json"));
  EXPECT_EQ(config_hash(j.get<RunConfig>()), config_hash(good));
}

TEST(Experiment, RerunSkipsDoneCellsAndRetriesFailed) {
  TempDir tmp("skip");
  ExperimentPlan plan;
  plan.root = tmp.path;
  RunConfig good = tiny_config();
  good.name = "good";
  plan.cells.push_back({good.name, good});
  RunConfig bad = tiny_config();
  bad.train.alpha = 0.5;
  bad.train.oversample = 0;
  bad.name = "bad";
  plan.cells.push_back({bad.name, bad});

  std::vector<CellReport> first = run_experiment(plan);
  std::vector<CellReport> second = run_experiment(plan);
  ASSERT_EQ(second.size(), 2u);
  EXPECT_TRUE(second[0].skipped);
  EXPECT_EQ(second[0].test.auc_pr, first[0].test.auc_pr);
  EXPECT_EQ(second[0].threshold, first[0].threshold);
  EXPECT_FALSE(second[1].skipped) << "failed cells are retried";
  EXPECT_TRUE(second[1].failed);

  std::vector<CellReport> forced = run_experiment(plan, true);
  EXPECT_FALSE(forced[0].skipped);
  EXPECT_EQ(forced[0].test.auc_pr, first[0].test.auc_pr);
}

TEST(Experiment, RerunWritesByteIdenticalArtifacts) {
  TempDir tmp("bytes");
  ExperimentPlan plan;
  plan.root = tmp.path;
  RunConfig cfg = tiny_config();
  cfg.name = "cell";
  plan.cells.push_back({cfg.name, cfg});

  run_experiment(plan, true);
  fs::path dir = tmp.path / ("cell-" + config_hash_hex(cfg));
  std::map<std::string, std::string> before;
  for (const char* f : {"config.json", "report.json", "trace.csv", "scores.csv"}) {
    before[f] = slurp(dir / f);
  }
  std::string summary_before = slurp(tmp.path / "summary.csv");

  run_experiment(plan, true);
  for (const auto& [f, text] : before) {
    EXPECT_EQ(slurp(dir / f), text) << f << " changed across reruns";
  }
  EXPECT_EQ(slurp(tmp.path / "summary.csv"), summary_before);
}

TEST(Plans, BuildersEnumerateSweeps) {
  RunConfig base = tiny_config();

  ExperimentPlan grid = grid_plan(base, {1, 2}, "runs/grid");
  EXPECT_EQ(grid.cells.size(), 18u);
  std::set<std::string> names;
  for (const ExperimentCell& c : grid.cells) names.insert(c.name);
  EXPECT_EQ(names.size(), grid.cells.size()) << "cell names must be unique";
  EXPECT_EQ(grid.cells[0].config.synth.seed, grid.cells[2].config.synth.seed)
      << "same master seed means the same market across variants";
  EXPECT_NE(grid.cells[0].config.synth.seed, grid.cells[1].config.synth.seed);

  ExperimentPlan alpha = alpha_plan(base, {0.0, 0.5}, {1}, "runs/alpha");
  ASSERT_EQ(alpha.cells.size(), 2u);
  EXPECT_EQ(alpha.cells[0].config.train.alpha, 0.0);
  EXPECT_EQ(alpha.cells[0].config.train.oversample, 0.0)
      << "alpha zero cells must disable oversampling to stay valid";
  EXPECT_EQ(alpha.cells[1].config.train.alpha, 0.5);
  EXPECT_GT(alpha.cells[1].config.train.oversample, 0.0);
  for (const ExperimentCell& c : alpha.cells) EXPECT_NO_THROW(c.config.validate());

  ExperimentPlan beta = oversample_plan(base, {0.1, 0.3}, {1, 2}, "runs/beta");
  ASSERT_EQ(beta.cells.size(), 4u);
  EXPECT_EQ(beta.cells[0].config.train.oversample, 0.1);
  EXPECT_EQ(beta.cells[2].config.train.oversample, 0.3);

  ExperimentPlan depth = depth_plan(base, {1}, "runs/depth");
  ASSERT_EQ(depth.cells.size(), 2u);
  const std::vector<double>& touch = depth.cells[0].config.inject.level_distribution;
  ASSERT_EQ(touch.size(), static_cast<size_t>(base.synth.levels));
  EXPECT_EQ(touch[0], 1.0);
  EXPECT_TRUE(depth.cells[1].config.inject.level_distribution.empty());
  EXPECT_NE(depth.cells[0].name, depth.cells[1].name);
}
