#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loblab/detection.hpp"
#include "loblab/evaluation.hpp"
#include "loblab/feature_pipeline.hpp"
#include "loblab/market_synth.hpp"
#include "loblab/representation.hpp"
#include "loblab/spoof_inject.hpp"

// One RunConfig describes a full pipeline cell: synthetic market, spoof
// injection, feature frame, windowing, representation learning, detector fit,
// thresholding and metrics. An ExperimentPlan sweeps cells into a run
// directory with one subdirectory per cell, named by a hash of the config so
// re-running a plan can skip finished cells.

namespace loblab {

enum class InputMode { no_lob, raw_lob, embedded_lob };

inline std::string to_string(InputMode m) {
  switch (m) {
    case InputMode::no_lob: return "no_lob";
    case InputMode::raw_lob: return "raw_lob";
    default: return "embedded_lob";
  }
}

inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "no_lob") return InputMode::no_lob;
  if (s == "raw_lob") return InputMode::raw_lob;
  if (s == "embedded_lob") return InputMode::embedded_lob;
  throw ConfigError("input mode must be no_lob, raw_lob or embedded_lob, got '" + s + "'");
}

enum class DetectorKind { ocsvm, iforest };

inline std::string to_string(DetectorKind k) {
  return k == DetectorKind::ocsvm ? "ocsvm" : "iforest";
}

inline DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "ocsvm") return DetectorKind::ocsvm;
  if (s == "iforest") return DetectorKind::iforest;
  throw ConfigError("detector kind must be ocsvm or iforest, got '" + s + "'");
}

inline std::string to_string(Aggregation a) {
  return a == Aggregation::mean ? "mean" : "max";
}

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "mean") return Aggregation::mean;
  if (s == "max") return Aggregation::max;
  throw ConfigError("aggregation must be mean or max, got '" + s + "'");
}

struct DetectorConfig {
  DetectorKind kind = DetectorKind::ocsvm;
  double nu = 0.05;
  double gamma = 0;  // 0 picks 1 / (dim * variance) at fit time
  int trees = 100;
  int64_t subsample = 256;
  int64_t fit_cap = 2048;  // larger normal-latent pools are subsampled
  uint64_t seed = 1;

  void validate() const {
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("detector: nu must be in (0, 1]");
    if (gamma < 0) throw ConfigError("detector: gamma must be >= 0");
    if (trees < 1) throw ConfigError("detector: trees must be >= 1");
    if (subsample < 2) throw ConfigError("detector: subsample must be >= 2");
    if (fit_cap < 8) throw ConfigError("detector: fit_cap must be >= 8");
  }
};

inline void to_json(nlohmann::json& j, const DetectorConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}, {"nu", c.nu},
                     {"gamma", c.gamma},          {"trees", c.trees},
                     {"subsample", c.subsample},  {"fit_cap", c.fit_cap},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, DetectorConfig& c) {
  c = DetectorConfig{};
  if (j.contains("kind")) c.kind = detector_kind_from_string(j.at("kind").get<std::string>());
  c.nu = j.value("nu", c.nu);
  c.gamma = j.value("gamma", c.gamma);
  c.trees = j.value("trees", c.trees);
  c.subsample = j.value("subsample", c.subsample);
  c.fit_cap = j.value("fit_cap", c.fit_cap);
  c.seed = j.value("seed", c.seed);
}

struct RunConfig {
  std::string name = "cell";
  SynthConfig synth;
  InjectConfig inject;
  FeatureConfig features;
  int window = 32;
  int stride = 8;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  SplitMode split = SplitMode::proposed;
  InputMode input = InputMode::embedded_lob;
  EncoderSpec encoder;    // input_dim 0 means "derive from the input mode"
  CascadeSpec cascade;    // ditto for the book encoder
  TrainConfig train;
  DetectorConfig detector;
  Aggregation aggregation = Aggregation::mean;
  std::vector<int> eval_levels = {2, 3, 4, 5};  // deep-spoof breakdown subset
  uint64_t seed = 1;                            // master seed, see reseed()

  void validate() const {
    synth.validate();
    inject.validate(synth.levels);
    features.validate();
    if (window < 2) throw ConfigError("run: window must be >= 2");
    if (stride < 1) throw ConfigError("run: stride must be >= 1");
    if (!(train_fraction > 0 && val_fraction > 0 && train_fraction + val_fraction < 1)) {
      throw ConfigError("run: fractions must be positive and leave room for a test range");
    }
    encoder.validate();
    if (input == InputMode::embedded_lob) {
      cascade.lob_encoder.validate();
      if (cascade.lob_encoder.family != EncoderFamily::attention) {
        throw ConfigError("run: embedded_lob input needs an attention book encoder");
      }
    }
    train.validate();
    if (train.alpha > 0 && train.oversample == 0) {
      throw ConfigError(
          "run: a positive contrastive weight needs oversampling; "
          "set oversample > 0 or alpha = 0");
    }
    detector.validate();
    if (eval_levels.empty()) throw ConfigError("run: eval_levels must not be empty");
    for (int lvl : eval_levels) {
      if (lvl < 1 || lvl > synth.levels) {
        throw ConfigError("run: eval_levels entries must lie inside the book");
      }
    }
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"name", c.name},
                     {"synth", c.synth},
                     {"inject", c.inject},
                     {"features", c.features},
                     {"window", c.window},
                     {"stride", c.stride},
                     {"train_fraction", c.train_fraction},
                     {"val_fraction", c.val_fraction},
                     {"split", to_string(c.split)},
                     {"input", to_string(c.input)},
                     {"encoder", to_json(c.encoder)},
                     {"lob_encoder", to_json(c.cascade.lob_encoder)},
                     {"per_step_fusion", c.cascade.per_step_fusion},
                     {"train", to_json(c.train)},
                     {"detector", c.detector},
                     {"aggregation", to_string(c.aggregation)},
                     {"eval_levels", c.eval_levels},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c = RunConfig{};
  c.name = j.value("name", c.name);
  if (j.contains("synth")) c.synth = j.at("synth").get<SynthConfig>();
  if (j.contains("inject")) c.inject = j.at("inject").get<InjectConfig>();
  if (j.contains("features")) c.features = j.at("features").get<FeatureConfig>();
  c.window = j.value("window", c.window);
  c.stride = j.value("stride", c.stride);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  if (j.contains("split")) {
    std::string s = j.at("split").get<std::string>();
    if (s != "traditional" && s != "proposed") {
      throw ConfigError("run: split must be traditional or proposed, got '" + s + "'");
    }
    c.split = s == "traditional" ? SplitMode::traditional : SplitMode::proposed;
  }
  if (j.contains("input")) c.input = input_mode_from_string(j.at("input").get<std::string>());
  if (j.contains("encoder")) c.encoder = encoder_spec_from_json(j.at("encoder"));
  if (j.contains("lob_encoder")) {
    c.cascade.lob_encoder = encoder_spec_from_json(j.at("lob_encoder"));
  }
  c.cascade.per_step_fusion = j.value("per_step_fusion", c.cascade.per_step_fusion);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("detector")) c.detector = j.at("detector").get<DetectorConfig>();
  if (j.contains("aggregation")) {
    c.aggregation = aggregation_from_string(j.at("aggregation").get<std::string>());
  }
  if (j.contains("eval_levels")) c.eval_levels = j.at("eval_levels").get<std::vector<int>>();
  c.seed = j.value("seed", c.seed);
}

// Forks every stage seed off one master seed so a whole cell is pinned by a
// single number. Stage seeds stay explicit in the serialized config, which
// means a persisted config replays identically even if the fork schedule
// ever changes.
inline void reseed(RunConfig& cfg, uint64_t master) {
  cfg.seed = master;
  cfg.synth.seed = fork_seed(master, 1);
  cfg.inject.seed = fork_seed(master, 2);
  cfg.encoder.seed = fork_seed(master, 3);
  cfg.cascade.lob_encoder.seed = fork_seed(master, 4);
  cfg.train.seed = fork_seed(master, 5);
  cfg.detector.seed = fork_seed(master, 6);
}

inline uint64_t config_hash(const RunConfig& cfg) {
  nlohmann::json j = cfg;
  const std::string dump = j.dump();
  return fnv1a64(dump.data(), dump.size());
}

inline std::string config_hash_hex(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

struct PipelineResult {
  MetricReport test;             // all injected steps count as positives
  MetricReport test_restricted;  // positives limited to eval_levels episodes
  bool restricted_valid = false;
  double threshold = 0;
  bool threshold_degenerate = false;
  double val_f4 = 0;
  int64_t train_windows = 0;
  int64_t val_windows = 0;
  int64_t test_windows = 0;
  int64_t test_steps = 0;
  int encoder_input_dim = 0;  // after input-mode derivation
  std::vector<TraceRow> trace;
  ScoreSeries test_series;
  std::vector<uint8_t> test_labels;
  std::vector<std::string> warnings;
};

namespace detail {

// Anchors are absolute step indices; aggregation works per split range.
inline std::vector<int64_t> relative_anchors(const WindowBatch& b, int64_t begin) {
  std::vector<int64_t> out(b.anchors.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = b.anchors[i] - begin;
  return out;
}

inline std::vector<LatentVector> cap_for_fit(const std::vector<LatentVector>& latents,
                                             int64_t cap, uint64_t seed) {
  const int64_t n = static_cast<int64_t>(latents.size());
  if (n <= cap) return latents;
  std::vector<int64_t> idx(n);
  for (int64_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(fork_seed(seed, 7));
  for (int64_t i = 0; i < cap; ++i) {
    int64_t j = i + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  std::vector<LatentVector> out;
  out.reserve(static_cast<size_t>(cap));
  for (int64_t i = 0; i < cap; ++i) out.push_back(latents[idx[i]]);
  return out;
}

inline std::vector<double> detector_scores(const DetectorConfig& cfg,
                                           const std::vector<LatentVector>& normal_fit,
                                           const std::vector<LatentVector>& val,
                                           const std::vector<LatentVector>& test,
                                           std::vector<double>* test_out) {
  if (cfg.kind == DetectorKind::ocsvm) {
    OcSvmModel m = fit_ocsvm(normal_fit, cfg.nu, cfg.gamma);
    *test_out = score_windows(m, test);
    return score_windows(m, val);
  }
  IsoForestModel m = fit_iforest(normal_fit, cfg.trees, cfg.subsample, cfg.seed);
  *test_out = score_windows(m, test);
  return score_windows(m, val);
}

}  // namespace detail

inline PipelineResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  PipelineResult out;

  LabeledSeries clean = generate(cfg.synth);
  LabeledSeries injected = inject(clean, cfg.inject);
  FeatureFrame frame = build_manual_features(injected, cfg.features);

  SplitSpec split = SplitSpec::by_fraction(frame.size(), cfg.split, cfg.train_fraction,
                                           cfg.val_fraction);
  FeatureFrame norm = normalize(frame, split.train_begin, split.train_end).first;
  SplitBatches parts = split_windows(norm, cfg.window, cfg.stride, split);
  for (const std::string& w : parts.warnings) out.warnings.push_back(w);
  if (parts.train.count() < 8 || parts.val.count() < 1 || parts.test.count() < 1) {
    throw ConfigError("run: series too short for the window/stride/split settings");
  }

  // The embedder must outlive the cascade sources, which capture it by
  // reference.
  FrozenEmbedder embedder;
  WindowSource train_src, val_src, test_src;
  EncoderSpec enc = cfg.encoder;
  enc.window = cfg.window;
  switch (cfg.input) {
    case InputMode::no_lob:
      if (enc.input_dim == 0) enc.input_dim = norm.manual_dim();
      train_src = make_manual_source(norm, parts.train);
      val_src = make_manual_source(norm, parts.val);
      test_src = make_manual_source(norm, parts.test);
      break;
    case InputMode::raw_lob:
      if (enc.input_dim == 0) enc.input_dim = norm.dim();
      train_src = make_full_source(norm, parts.train);
      val_src = make_full_source(norm, parts.val);
      test_src = make_full_source(norm, parts.test);
      break;
    case InputMode::embedded_lob: {
      CascadeSpec cas = cfg.cascade;
      cas.lob_encoder.window = cfg.window;
      if (cas.lob_encoder.input_dim == 0) cas.lob_encoder.input_dim = norm.lob_dim();
      TrainConfig pre = cfg.train;
      pre.seed = fork_seed(cfg.train.seed, 101);
      embedder = pretrain_lob_embedder(parts.train, make_lob_source(norm, parts.train), cas,
                                       pre);
      if (enc.input_dim == 0) {
        enc.input_dim = cas.lob_encoder.latent_dim + norm.manual_dim();
      }
      train_src = make_cascade_source(norm, parts.train, embedder, cas.per_step_fusion);
      val_src = make_cascade_source(norm, parts.val, embedder, cas.per_step_fusion);
      test_src = make_cascade_source(norm, parts.test, embedder, cas.per_step_fusion);
      break;
    }
  }

  out.encoder_input_dim = enc.input_dim;
  Autoencoder model = make_autoencoder(enc);
  TrainResult trained = train(model, parts.train, train_src, cfg.train);
  out.trace = trained.trace;
  if (cfg.train.alpha > 0 && !trained.contrastive_used) {
    out.warnings.push_back("contrastive weight set but no anomalous training windows");
  }

  std::vector<LatentVector> train_lat = make_latents(model, parts.train, train_src);
  std::vector<LatentVector> val_lat = make_latents(model, parts.val, val_src);
  std::vector<LatentVector> test_lat = make_latents(model, parts.test, test_src);
  out.train_windows = parts.train.count();
  out.val_windows = parts.val.count();
  out.test_windows = parts.test.count();

  std::vector<LatentVector> normal_lat;
  for (const LatentVector& z : train_lat) {
    if (z.label == kNormal) normal_lat.push_back(z);
  }
  std::vector<LatentVector> fit_lat =
      detail::cap_for_fit(normal_lat, cfg.detector.fit_cap, cfg.detector.seed);
  if (fit_lat.size() < normal_lat.size()) {
    out.warnings.push_back("detector fit subsampled " + std::to_string(fit_lat.size()) +
                           " of " + std::to_string(normal_lat.size()) + " normal latents");
  }

  std::vector<double> test_scores;
  std::vector<double> val_scores =
      detail::detector_scores(cfg.detector, fit_lat, val_lat, test_lat, &test_scores);

  const int64_t val_begin = split.train_end;
  const int64_t val_len = split.val_end - split.train_end;
  std::vector<double> val_points =
      aggregate_to_points(val_scores, detail::relative_anchors(parts.val, val_begin),
                          cfg.window, val_len, cfg.aggregation);
  std::vector<uint8_t> val_labels(norm.labels.begin() + val_begin,
                                  norm.labels.begin() + split.val_end);
  ThresholdPick pick = pick_threshold(val_points, val_labels);
  out.threshold = pick.threshold;
  out.threshold_degenerate = pick.degenerate;
  out.val_f4 = pick.f_beta;
  if (pick.degenerate) {
    out.warnings.push_back("validation scores are all equal; threshold is arbitrary");
  }

  const int64_t test_begin = split.val_end;
  out.test_steps = split.test_end - split.val_end;
  out.test_series =
      build_score_series(test_scores, detail::relative_anchors(parts.test, test_begin),
                         cfg.window, out.test_steps, out.threshold, cfg.aggregation);
  out.test_labels.assign(norm.labels.begin() + test_begin, norm.labels.begin() + split.test_end);
  out.test = evaluate(out.test_series.point_scores, out.test_labels, out.threshold,
                      EvalSubset::all_levels);

  std::set<int> keep(cfg.eval_levels.begin(), cfg.eval_levels.end());
  LabeledSeries view = level_restricted_view(injected, keep);
  std::vector<uint8_t> restricted_labels(view.labels.begin() + test_begin,
                                         view.labels.begin() + split.test_end);
  try {
    out.test_restricted = evaluate(out.test_series.point_scores, restricted_labels,
                                   out.threshold, EvalSubset::levels_2_5);
    out.restricted_valid = true;
  } catch (const ConfigError&) {
    out.restricted_valid = false;
    out.warnings.push_back("no test positives inside eval_levels; restricted report skipped");
  }
  return out;
}

struct ExperimentCell {
  std::string name;
  RunConfig config;
};

struct ExperimentPlan {
  std::string name = "experiment";
  std::filesystem::path root = "runs";
  std::vector<ExperimentCell> cells;
};

struct CellReport {
  std::string name;
  std::string hash;
  bool skipped = false;
  bool failed = false;
  std::string error;
  MetricReport test;
  MetricReport test_restricted;
  bool restricted_valid = false;
  double threshold = 0;
  bool threshold_degenerate = false;
  double val_f4 = 0;
  int64_t train_windows = 0;
  int64_t val_windows = 0;
  int64_t test_windows = 0;
  std::vector<std::string> warnings;
  double seconds = 0;  // wall clock, never serialized
};

// Timing stays out of the report so a rerun of the same plan reproduces the
// files byte for byte.
inline nlohmann::json to_json(const CellReport& r) {
  nlohmann::json j{{"name", r.name},
                   {"hash", r.hash},
                   {"failed", r.failed},
                   {"error", r.error},
                   {"threshold", r.threshold},
                   {"threshold_degenerate", r.threshold_degenerate},
                   {"val_f4", r.val_f4},
                   {"train_windows", r.train_windows},
                   {"val_windows", r.val_windows},
                   {"test_windows", r.test_windows},
                   {"warnings", r.warnings}};
  if (!r.failed) {
    j["test"] = to_json(r.test);
    j["restricted_valid"] = r.restricted_valid;
    if (r.restricted_valid) j["test_restricted"] = to_json(r.test_restricted);
  }
  return j;
}

inline CellReport cell_report_from_json(const nlohmann::json& j) {
  CellReport r;
  r.name = j.at("name").get<std::string>();
  r.hash = j.at("hash").get<std::string>();
  r.failed = j.at("failed").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.threshold = j.at("threshold").get<double>();
  r.threshold_degenerate = j.at("threshold_degenerate").get<bool>();
  r.val_f4 = j.at("val_f4").get<double>();
  r.train_windows = j.at("train_windows").get<int64_t>();
  r.val_windows = j.at("val_windows").get<int64_t>();
  r.test_windows = j.at("test_windows").get<int64_t>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (!r.failed) {
    r.test = metric_report_from_json(j.at("test"));
    r.restricted_valid = j.at("restricted_valid").get<bool>();
    if (r.restricted_valid) r.test_restricted = metric_report_from_json(j.at("test_restricted"));
  }
  return r;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("experiment: cannot write " + path.string());
  os << text;
}

inline std::string format_cell_row(const CellReport& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                ",%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%lld,"
                "%lld,",
                r.failed ? 1 : 0, r.test.auc_pr, r.test.auroc, r.test.f4, r.test.precision,
                r.test.recall, r.restricted_valid ? r.test_restricted.auc_pr : 0.0,
                r.restricted_valid ? r.test_restricted.auroc : 0.0,
                r.restricted_valid ? r.test_restricted.f4 : 0.0, r.threshold, r.val_f4,
                static_cast<long long>(r.train_windows), static_cast<long long>(r.val_windows),
                static_cast<long long>(r.test_windows));
  // The error text goes last so embedded commas cannot shift other columns.
  return r.name + "," + r.hash + buf + r.error + "\n";
}

}  // namespace detail

inline std::string summary_csv(const std::vector<CellReport>& reports) {
  std::string out =
      "name,hash,failed,auc_pr,auroc,f4,precision,recall,restricted_auc_pr,"
      "restricted_auroc,restricted_f4,threshold,val_f4,train_windows,val_windows,"
      "test_windows,error\n";
  for (const CellReport& r : reports) out += detail::format_cell_row(r);
  return out;
}

// Runs every cell of a plan into root/<name>-<hash>/. The config is written
// before the pipeline starts so a crashed cell can be replayed; report.json
// appears only on completion and marks the cell as done. A cell that throws
// is recorded as failed and the sweep continues.
inline std::vector<CellReport> run_experiment(const ExperimentPlan& plan, bool force = false) {
  namespace fs = std::filesystem;
  if (plan.cells.empty()) throw ConfigError("experiment: plan has no cells");
  fs::create_directories(plan.root);
  std::vector<CellReport> reports;
  for (const ExperimentCell& cell : plan.cells) {
    const std::string hash = config_hash_hex(cell.config);
    const fs::path dir = plan.root / (cell.name + "-" + hash);
    const fs::path report_path = dir / "report.json";
    if (!force && fs::exists(report_path)) {
      std::ifstream is(report_path, std::ios::binary);
      nlohmann::json j = nlohmann::json::parse(is);
      CellReport r = cell_report_from_json(j);
      if (!r.failed) {
        r.skipped = true;
        std::cerr << "cell " << cell.name << ": already done, skipping\n";
        reports.push_back(std::move(r));
        continue;
      }
      // A failed cell is not a finished cell; retry it.
    }
    fs::create_directories(dir);
    {
      nlohmann::json j = cell.config;
      detail::write_text_file(dir / "config.json", j.dump(2) + "\n");
    }
    CellReport r;
    r.name = cell.name;
    r.hash = hash;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      PipelineResult p = run_pipeline(cell.config);
      r.test = p.test;
      r.test_restricted = p.test_restricted;
      r.restricted_valid = p.restricted_valid;
      r.threshold = p.threshold;
      r.threshold_degenerate = p.threshold_degenerate;
      r.val_f4 = p.val_f4;
      r.train_windows = p.train_windows;
      r.val_windows = p.val_windows;
      r.test_windows = p.test_windows;
      r.warnings = p.warnings;
      {
        std::ostringstream os;
        TrainResult tr;
        tr.trace = p.trace;
        write_loss_trace(tr, os);
        detail::write_text_file(dir / "trace.csv", os.str());
      }
      {
        std::ostringstream os;
        write_scores_csv(p.test_series, p.test_labels, os);
        detail::write_text_file(dir / "scores.csv", os.str());
      }
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      std::cerr << "cell " << cell.name << " failed: " << e.what() << "\n";
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_text_file(report_path, to_json(r).dump(2) + "\n");
    if (!r.failed) {
      std::cerr << "cell " << cell.name << ": auc_pr " << r.test.auc_pr << " in " << r.seconds
                << "s\n";
    }
    reports.push_back(std::move(r));
  }
  detail::write_text_file(plan.root / "summary.csv", summary_csv(reports));
  return reports;
}

// Desk-scale baseline cell: small enough to sweep on one core, large enough
// for the metric ordering between variants to be stable across seeds.
inline RunConfig desk_config(int64_t steps = 20000) {
  RunConfig cfg;
  cfg.name = "desk";
  cfg.synth.steps = steps;
  cfg.inject.episode_rate = 12.0;
  // Subtle interference: volumes only 1.5-3.5x the trailing level mean, so
  // reconstruction error alone does not give the episodes away.
  cfg.inject.kappa_min = 1.5;
  cfg.inject.kappa_max = 3.5;
  cfg.features.rolling_window = 50;
  cfg.window = 32;
  cfg.stride = 8;
  cfg.encoder.family = EncoderFamily::attention;
  cfg.encoder.latent_dim = 32;
  cfg.encoder.hidden = 32;
  cfg.cascade.lob_encoder.family = EncoderFamily::attention;
  cfg.cascade.lob_encoder.latent_dim = 8;
  cfg.cascade.lob_encoder.hidden = 16;
  cfg.train.alpha = 0.5;
  cfg.train.tau = 0.1;
  cfg.train.oversample = 0.1;
  cfg.train.batch = 256;
  cfg.train.epochs = 25;
  cfg.train.lr = 1e-3;
  reseed(cfg, 1);
  return cfg;
}

namespace detail {

inline std::string trimmed_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

// Encoder family x input mode sweep at fixed training settings.
inline ExperimentPlan grid_plan(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                const std::filesystem::path& root) {
  ExperimentPlan plan;
  plan.name = "grid";
  plan.root = root;
  const EncoderFamily families[] = {EncoderFamily::feedforward, EncoderFamily::recurrent,
                                    EncoderFamily::attention};
  const InputMode inputs[] = {InputMode::no_lob, InputMode::raw_lob, InputMode::embedded_lob};
  for (EncoderFamily fam : families) {
    for (InputMode in : inputs) {
      for (uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.encoder.family = fam;
        cfg.input = in;
        cfg.encoder.input_dim = 0;
        reseed(cfg, seed);
        cfg.name = std::string(to_string(fam)) + "-" + to_string(in) + "-s" +
                   std::to_string(seed);
        plan.cells.push_back({cfg.name, cfg});
      }
    }
  }
  return plan;
}

// Contrastive weight sweep; alpha = 0 turns oversampling off as well so the
// cell stays valid.
inline ExperimentPlan alpha_plan(const RunConfig& base, const std::vector<double>& alphas,
                                 const std::vector<uint64_t>& seeds,
                                 const std::filesystem::path& root) {
  ExperimentPlan plan;
  plan.name = "alpha";
  plan.root = root;
  for (double alpha : alphas) {
    for (uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.alpha = alpha;
      if (alpha == 0) cfg.train.oversample = 0;
      reseed(cfg, seed);
      cfg.name = "alpha-" + detail::trimmed_double(alpha) + "-s" + std::to_string(seed);
      plan.cells.push_back({cfg.name, cfg});
    }
  }
  return plan;
}

// Oversampling ratio sweep at fixed alpha.
inline ExperimentPlan oversample_plan(const RunConfig& base, const std::vector<double>& betas,
                                      const std::vector<uint64_t>& seeds,
                                      const std::filesystem::path& root) {
  ExperimentPlan plan;
  plan.name = "oversample";
  plan.root = root;
  for (double beta : betas) {
    for (uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.train.oversample = beta;
      reseed(cfg, seed);
      cfg.name = "beta-" + detail::trimmed_double(beta) + "-s" + std::to_string(seed);
      plan.cells.push_back({cfg.name, cfg});
    }
  }
  return plan;
}

// Injection depth contrast: every spoof at the touch versus spread uniformly
// over the book.
inline ExperimentPlan depth_plan(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                 const std::filesystem::path& root) {
  ExperimentPlan plan;
  plan.name = "depth";
  plan.root = root;
  for (bool touch_only : {true, false}) {
    for (uint64_t seed : seeds) {
      RunConfig cfg = base;
      if (touch_only) {
        cfg.inject.level_distribution.assign(static_cast<size_t>(cfg.synth.levels), 0.0);
        cfg.inject.level_distribution[0] = 1.0;
      } else {
        cfg.inject.level_distribution.clear();
      }
      reseed(cfg, seed);
      cfg.name = std::string(touch_only ? "touch" : "uniform") + "-s" + std::to_string(seed);
      plan.cells.push_back({cfg.name, cfg});
    }
  }
  return plan;
}

}  // namespace loblab
