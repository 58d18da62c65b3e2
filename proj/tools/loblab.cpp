#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "loblab/experiment.hpp"

// Stage-by-stage pipeline driver. Every command reads one JSON config (the
// whole cell in a single document) and works inside a run directory named by
// the config hash, so two invocations with the same config land in the same
// place and completed work is reused.

namespace fs = std::filesystem;
using namespace loblab;

namespace {

struct CliArgs {
  std::string command;
  std::string config_path;
  std::string plan = "grid";
  fs::path out = "runs";
  uint64_t seed = 0;
  bool has_seed = false;
  bool force = false;
  int threads = 1;
};

const char* kUsage =
    "usage: loblab <command> [options]\n"
    "\n"
    "commands:\n"
    "  synth         generate a synthetic LOB series (LOBSTER files)\n"
    "  inject        add labeled spoofing episodes to the generated series\n"
    "  features      build the per-step feature table\n"
    "  pretrain-lob  train and freeze the book-column embedder\n"
    "  train         train the window autoencoder\n"
    "  detect        fit the detector, pick a threshold, score the test range\n"
    "  evaluate      compute metrics from the scored test range\n"
    "  experiment    sweep a plan of full cells (grid|alpha|oversample|depth)\n"
    "  validate      check a config file and print its hash\n"
    "\n"
    "options:\n"
    "  --config PATH  JSON config (default: built-in desk-scale config)\n"
    "  --seed N       reseed every stage from master seed N\n"
    "  --out DIR      output root (default: runs)\n"
    "  --plan NAME    experiment plan name (default: grid)\n"
    "  --force        redo work even if artifacts exist\n"
    "  --threads N    accepted for compatibility; cells run sequentially\n";

CliArgs parse_args(int argc, char** argv) {
  CliArgs args;
  if (argc < 2) throw ConfigError("missing command");
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string a = argv[i];
    auto need_value = [&](const char* flag) -> std::string {
      if (i + 1 >= argc) throw ConfigError(std::string(flag) + " needs a value");
      return argv[++i];
    };
    if (a == "--config") args.config_path = need_value("--config");
    else if (a == "--seed") {
      args.seed = std::stoull(need_value("--seed"));
      args.has_seed = true;
    } else if (a == "--out") args.out = need_value("--out");
    else if (a == "--plan") args.plan = need_value("--plan");
    else if (a == "--force") args.force = true;
    else if (a == "--threads") {
      args.threads = std::stoi(need_value("--threads"));
      if (args.threads < 1) throw ConfigError("--threads must be >= 1");
    } else {
      throw ConfigError("unknown flag '" + a + "'");
    }
  }
  return args;
}

RunConfig load_config(const CliArgs& args) {
  RunConfig cfg;
  if (args.config_path.empty()) {
    cfg = desk_config();
  } else {
    std::ifstream is(args.config_path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file '" + args.config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config file '" + args.config_path + "': " + e.what());
    }
    cfg = j.get<RunConfig>();
  }
  if (args.has_seed) reseed(cfg, args.seed);
  cfg.validate();
  return cfg;
}

void require_artifact(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) {
    throw ConfigError("missing " + p.string() + "; run '" + stage + "' first");
  }
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error("cannot read " + p.string());
  return is;
}

// A generated series aggregates several market events per snapshot, so the
// snapshot clock cannot be recovered from the message file the way a 1:1
// event-driven LOBSTER pair allows. times.csv keeps it, one timestamp per
// orderbook row, next to the labels/spans sidecars.
void save_series(const fs::path& dir, const LabeledSeries& s, bool sidecars) {
  {
    std::ofstream os = open_out(dir / "orderbook.csv");
    write_orderbook_file(s.snapshots, os);
  }
  {
    std::ofstream os = open_out(dir / "message.csv");
    write_message_file(s.events, os);
  }
  {
    std::ofstream os = open_out(dir / "times.csv");
    for (const LobSnapshot& snap : s.snapshots) os << loblab::detail::format_time_ns(snap.time_ns) << "\n";
  }
  if (sidecars) {
    std::ofstream lb = open_out(dir / "labels.csv");
    write_labels_file(s.labels, lb);
    std::ofstream sp = open_out(dir / "spans.csv");
    write_spans_file(s.spans, sp);
  }
}

LabeledSeries load_series(const fs::path& dir, int levels, bool sidecars,
                          const std::string& stage) {
  require_artifact(dir / "orderbook.csv", stage);
  require_artifact(dir / "message.csv", stage);
  require_artifact(dir / "times.csv", stage);
  LabeledSeries s;
  {
    std::ifstream is = open_in(dir / "orderbook.csv");
    s.snapshots = parse_orderbook_file(is, levels);
  }
  {
    std::ifstream is = open_in(dir / "message.csv");
    s.events = parse_message_file(is);
  }
  {
    std::ifstream is = open_in(dir / "times.csv");
    std::string line;
    size_t row = 0;
    while (std::getline(is, line) && !line.empty()) {
      if (row >= s.snapshots.size()) throw ParseError("times.csv has extra rows");
      s.snapshots[row].time_ns = loblab::detail::parse_time_ns(line, row + 1);
      ++row;
    }
    if (row != s.snapshots.size()) throw ParseError("times.csv is missing rows");
  }
  if (sidecars) {
    require_artifact(dir / "labels.csv", stage);
    require_artifact(dir / "spans.csv", stage);
    std::ifstream lb = open_in(dir / "labels.csv");
    s.labels = parse_labels_file(lb);
    std::ifstream sp = open_in(dir / "spans.csv");
    s.spans = parse_spans_file(sp);
  } else {
    s.labels.assign(s.snapshots.size(), kNormal);
  }
  return s;
}

void save_features(const fs::path& path, const FeatureFrame& frame) {
  std::ofstream os = open_out(path);
  for (const std::string& n : frame.names) os << n << ",";
  os << "label\n";
  char buf[32];
  for (size_t t = 0; t < frame.rows.size(); ++t) {
    for (double v : frame.rows[t]) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      os << buf;
    }
    os << static_cast<int>(frame.labels[t]) << "\n";
  }
}

FeatureFrame load_features(const fs::path& path, int levels, const std::string& stage) {
  require_artifact(path, stage);
  std::ifstream is = open_in(path);
  FeatureFrame frame;
  frame.levels = levels;
  std::string line;
  if (!std::getline(is, line)) throw ParseError("features file is empty");
  std::stringstream header(line);
  std::string field;
  while (std::getline(header, field, ',')) frame.names.push_back(field);
  if (frame.names.empty() || frame.names.back() != "label") {
    throw ParseError("features file must end with a label column");
  }
  frame.names.pop_back();
  size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    std::stringstream row(line);
    std::vector<double> values;
    while (std::getline(row, field, ',')) values.push_back(std::stod(field));
    if (values.size() != frame.names.size() + 1) {
      throw ParseError("features line " + std::to_string(line_no) + ": expected " +
                       std::to_string(frame.names.size() + 1) + " fields");
    }
    frame.labels.push_back(static_cast<uint8_t>(values.back()));
    values.pop_back();
    frame.rows.push_back(std::move(values));
  }
  if (frame.rows.empty()) throw ParseError("features file has no rows");
  return frame;
}

// Everything the model-side stages recompute from the persisted feature
// table: the split, the normalized frame and the window batches.
struct Prepared {
  SplitSpec split;
  FeatureFrame norm;
  SplitBatches parts;
};

Prepared prepare(const RunConfig& cfg, const FeatureFrame& frame) {
  Prepared p;
  p.split = SplitSpec::by_fraction(frame.size(), cfg.split, cfg.train_fraction,
                                   cfg.val_fraction);
  p.norm = normalize(frame, p.split.train_begin, p.split.train_end).first;
  p.parts = split_windows(p.norm, cfg.window, cfg.stride, p.split);
  return p;
}

FrozenEmbedder load_embedder(const fs::path& path) {
  require_artifact(path, "pretrain-lob");
  std::ifstream is = open_in(path);
  FrozenEmbedder emb;
  emb.model = load_model(is);
  emb.hash = params_hash(emb.model);
  if (!emb.verify()) throw ParseError("book embedder checkpoint is not frozen");
  return emb;
}

// Main-model window sources for one split, honoring the input mode. The
// embedder reference must outlive the returned source.
WindowSource make_input_source(const RunConfig& cfg, const FeatureFrame& norm,
                               const WindowBatch& windows, const FrozenEmbedder& embedder) {
  switch (cfg.input) {
    case InputMode::no_lob: return make_manual_source(norm, windows);
    case InputMode::raw_lob: return make_full_source(norm, windows);
    default:
      return make_cascade_source(norm, windows, embedder, cfg.cascade.per_step_fusion);
  }
}

int input_width(const RunConfig& cfg, const FeatureFrame& norm) {
  switch (cfg.input) {
    case InputMode::no_lob: return norm.manual_dim();
    case InputMode::raw_lob: return norm.dim();
    default: return cfg.cascade.lob_encoder.latent_dim + norm.manual_dim();
  }
}

void emit(const nlohmann::json& summary) { std::cout << summary.dump(2) << "\n"; }

// ---------------------------------------------------------------------------
// Stage commands. Each one loads its inputs from the run directory, does one
// pipeline step and writes its artifacts plus a JSON summary on stdout.

int cmd_synth(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "synth";
  if (!force && fs::exists(out / "orderbook.csv")) {
    emit({{"stage", "synth"}, {"dir", out.string()}, {"skipped", true}});
    return 0;
  }
  LabeledSeries clean = generate(cfg.synth);
  save_series(out, clean, false);
  emit({{"stage", "synth"},
        {"dir", out.string()},
        {"steps", static_cast<int64_t>(clean.size())},
        {"levels", cfg.synth.levels}});
  return 0;
}

int cmd_inject(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "inject";
  if (!force && fs::exists(out / "labels.csv")) {
    emit({{"stage", "inject"}, {"dir", out.string()}, {"skipped", true}});
    return 0;
  }
  LabeledSeries clean = load_series(dir / "synth", cfg.synth.levels, false, "synth");
  LabeledSeries injected = inject(clean, cfg.inject);
  save_series(out, injected, true);
  int64_t anomalous = 0;
  for (uint8_t l : injected.labels) anomalous += l == kAnomaly ? 1 : 0;
  emit({{"stage", "inject"},
        {"dir", out.string()},
        {"episodes", static_cast<int64_t>(injected.spans.size())},
        {"anomalous_steps", anomalous}});
  return 0;
}

int cmd_features(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "features" / "features.csv";
  if (!force && fs::exists(out)) {
    emit({{"stage", "features"}, {"file", out.string()}, {"skipped", true}});
    return 0;
  }
  LabeledSeries injected = load_series(dir / "inject", cfg.synth.levels, true, "inject");
  FeatureFrame frame = build_manual_features(injected, cfg.features);
  save_features(out, frame);
  emit({{"stage", "features"},
        {"file", out.string()},
        {"rows", frame.size()},
        {"columns", frame.dim()}});
  return 0;
}

int cmd_pretrain_lob(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "models" / "lob_encoder.json";
  if (!force && fs::exists(out)) {
    emit({{"stage", "pretrain-lob"}, {"file", out.string()}, {"skipped", true}});
    return 0;
  }
  FeatureFrame frame = load_features(dir / "features" / "features.csv", cfg.synth.levels,
                                     "features");
  Prepared p = prepare(cfg, frame);
  CascadeSpec cas = cfg.cascade;
  cas.lob_encoder.window = cfg.window;
  if (cas.lob_encoder.input_dim == 0) cas.lob_encoder.input_dim = p.norm.lob_dim();
  TrainConfig pre = cfg.train;
  pre.seed = fork_seed(cfg.train.seed, 101);
  FrozenEmbedder emb = pretrain_lob_embedder(p.parts.train, make_lob_source(p.norm, p.parts.train),
                                             cas, pre);
  std::ofstream os = open_out(out);
  save_model(emb.model, os);
  emit({{"stage", "pretrain-lob"},
        {"file", out.string()},
        {"params_hash", std::to_string(emb.hash)},
        {"latent_dim", cas.lob_encoder.latent_dim}});
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "models" / "encoder.json";
  if (!force && fs::exists(out)) {
    emit({{"stage", "train"}, {"file", out.string()}, {"skipped", true}});
    return 0;
  }
  FeatureFrame frame = load_features(dir / "features" / "features.csv", cfg.synth.levels,
                                     "features");
  Prepared p = prepare(cfg, frame);
  FrozenEmbedder emb;
  if (cfg.input == InputMode::embedded_lob) {
    emb = load_embedder(dir / "models" / "lob_encoder.json");
  }
  EncoderSpec enc = cfg.encoder;
  enc.window = cfg.window;
  if (enc.input_dim == 0) enc.input_dim = input_width(cfg, p.norm);
  Autoencoder model = make_autoencoder(enc);
  TrainResult result =
      train(model, p.parts.train, make_input_source(cfg, p.norm, p.parts.train, emb), cfg.train);
  {
    std::ofstream os = open_out(out);
    save_model(model, os);
  }
  {
    std::ofstream os = open_out(dir / "models" / "trace.csv");
    write_loss_trace(result, os);
  }
  emit({{"stage", "train"},
        {"file", out.string()},
        {"params_hash", std::to_string(result.params_hash)},
        {"epochs", static_cast<int64_t>(result.trace.size())},
        {"final_loss", result.trace.empty() ? 0.0 : result.trace.back().total},
        {"contrastive_used", result.contrastive_used}});
  return 0;
}

int cmd_detect(const RunConfig& cfg, const fs::path& dir, bool force) {
  fs::path out = dir / "detect";
  if (!force && fs::exists(out / "scores.csv")) {
    emit({{"stage", "detect"}, {"dir", out.string()}, {"skipped", true}});
    return 0;
  }
  FeatureFrame frame = load_features(dir / "features" / "features.csv", cfg.synth.levels,
                                     "features");
  Prepared p = prepare(cfg, frame);
  FrozenEmbedder emb;
  if (cfg.input == InputMode::embedded_lob) {
    emb = load_embedder(dir / "models" / "lob_encoder.json");
  }
  require_artifact(dir / "models" / "encoder.json", "train");
  std::ifstream is = open_in(dir / "models" / "encoder.json");
  Autoencoder model = load_model(is);

  WindowSource train_src = make_input_source(cfg, p.norm, p.parts.train, emb);
  WindowSource val_src = make_input_source(cfg, p.norm, p.parts.val, emb);
  WindowSource test_src = make_input_source(cfg, p.norm, p.parts.test, emb);
  std::vector<LatentVector> train_lat = make_latents(model, p.parts.train, train_src);
  std::vector<LatentVector> val_lat = make_latents(model, p.parts.val, val_src);
  std::vector<LatentVector> test_lat = make_latents(model, p.parts.test, test_src);

  std::vector<LatentVector> normal_lat;
  for (const LatentVector& z : train_lat) {
    if (z.label == kNormal) normal_lat.push_back(z);
  }
  std::vector<LatentVector> fit_lat =
      loblab::detail::cap_for_fit(normal_lat, cfg.detector.fit_cap, cfg.detector.seed);

  std::vector<double> val_scores, test_scores;
  nlohmann::json detector_dump;
  if (cfg.detector.kind == DetectorKind::ocsvm) {
    OcSvmModel m = fit_ocsvm(fit_lat, cfg.detector.nu, cfg.detector.gamma);
    detector_dump = to_json(m);
    val_scores = score_windows(m, val_lat);
    test_scores = score_windows(m, test_lat);
  } else {
    IsoForestModel m =
        fit_iforest(fit_lat, cfg.detector.trees, cfg.detector.subsample, cfg.detector.seed);
    detector_dump = to_json(m);
    val_scores = score_windows(m, val_lat);
    test_scores = score_windows(m, test_lat);
  }

  const int64_t val_begin = p.split.train_end;
  std::vector<double> val_points = aggregate_to_points(
      val_scores, loblab::detail::relative_anchors(p.parts.val, val_begin), cfg.window,
      p.split.val_end - val_begin, cfg.aggregation);
  std::vector<uint8_t> val_labels(p.norm.labels.begin() + val_begin,
                                  p.norm.labels.begin() + p.split.val_end);
  ThresholdPick pick = pick_threshold(val_points, val_labels);

  const int64_t test_begin = p.split.val_end;
  const int64_t test_len = p.split.test_end - test_begin;
  ScoreSeries series = build_score_series(
      test_scores, loblab::detail::relative_anchors(p.parts.test, test_begin), cfg.window,
      test_len, pick.threshold, cfg.aggregation);
  std::vector<uint8_t> test_labels(p.norm.labels.begin() + test_begin,
                                   p.norm.labels.begin() + p.split.test_end);
  {
    std::ofstream os = open_out(out / "detector.json");
    os << detector_dump.dump(2) << "\n";
  }
  {
    std::ofstream os = open_out(out / "scores.csv");
    write_scores_csv(series, test_labels, os);
  }
  nlohmann::json summary{{"stage", "detect"},
                         {"dir", out.string()},
                         {"threshold", pick.threshold},
                         {"threshold_degenerate", pick.degenerate},
                         {"val_f4", pick.f_beta},
                         {"test_begin", test_begin},
                         {"test_steps", test_len}};
  {
    std::ofstream os = open_out(out / "detect.json");
    os << summary.dump(2) << "\n";
  }
  emit(summary);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& dir) {
  fs::path scores_path = dir / "detect" / "scores.csv";
  require_artifact(scores_path, "detect");
  require_artifact(dir / "detect" / "detect.json", "detect");
  nlohmann::json detect_summary;
  {
    std::ifstream is = open_in(dir / "detect" / "detect.json");
    is >> detect_summary;
  }
  const double threshold = detect_summary.at("threshold").get<double>();
  const int64_t test_begin = detect_summary.at("test_begin").get<int64_t>();

  std::vector<double> points;
  std::vector<uint8_t> labels;
  {
    std::ifstream is = open_in(scores_path);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      std::stringstream row(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.size() != 4) throw ParseError("scores.csv: expected 4 columns");
      points.push_back(std::stod(fields[1]));
      labels.push_back(static_cast<uint8_t>(std::stoi(fields[3])));
    }
  }

  LabeledSeries injected = load_series(dir / "inject", cfg.synth.levels, true, "inject");
  std::set<int> keep(cfg.eval_levels.begin(), cfg.eval_levels.end());
  LabeledSeries view = level_restricted_view(injected, keep);
  if (test_begin + static_cast<int64_t>(points.size()) >
      static_cast<int64_t>(view.labels.size())) {
    throw ValidationError("scores.csv extends past the injected series");
  }
  std::vector<uint8_t> restricted(view.labels.begin() + test_begin,
                                  view.labels.begin() + test_begin +
                                      static_cast<int64_t>(points.size()));

  MetricReport all = evaluate(points, labels, threshold, EvalSubset::all_levels);
  nlohmann::json report{{"stage", "evaluate"},
                        {"threshold", threshold},
                        {"test", to_json(all)}};
  try {
    MetricReport deep = evaluate(points, restricted, threshold, EvalSubset::levels_2_5);
    report["test_restricted"] = to_json(deep);
  } catch (const ConfigError&) {
    report["test_restricted"] = nullptr;
  }
  {
    std::ofstream os = open_out(dir / "report.json");
    os << report.dump(2) << "\n";
  }
  emit(report);
  return 0;
}

int cmd_experiment(const RunConfig& cfg, const CliArgs& args) {
  std::vector<uint64_t> seeds = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
  ExperimentPlan plan;
  fs::path root = args.out / ("plan-" + args.plan);
  if (args.plan == "grid") {
    plan = grid_plan(cfg, seeds, root);
  } else if (args.plan == "alpha") {
    plan = alpha_plan(cfg, {0.0, 0.2, 0.5, 0.8, 1.0}, seeds, root);
  } else if (args.plan == "oversample") {
    plan = oversample_plan(cfg, {0.1, 0.3, 0.5}, seeds, root);
  } else if (args.plan == "depth") {
    plan = depth_plan(cfg, seeds, root);
  } else {
    throw ConfigError("unknown plan '" + args.plan +
                      "'; expected grid, alpha, oversample or depth");
  }
  std::vector<CellReport> reports = run_experiment(plan, args.force);
  int64_t failures = 0;
  nlohmann::json cells = nlohmann::json::array();
  for (const CellReport& r : reports) {
    failures += r.failed ? 1 : 0;
    cells.push_back({{"name", r.name},
                     {"failed", r.failed},
                     {"skipped", r.skipped},
                     {"auc_pr", r.test.auc_pr}});
  }
  emit({{"stage", "experiment"},
        {"plan", args.plan},
        {"root", root.string()},
        {"cells", cells},
        {"failures", failures},
        {"summary", (root / "summary.csv").string()}});
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CliArgs args = parse_args(argc, argv);
    if (args.command == "help" || args.command == "--help" || args.command == "-h") {
      std::cout << kUsage;
      return 0;
    }
    RunConfig cfg = load_config(args);
    if (args.command == "validate") {
      emit({{"stage", "validate"},
            {"hash", config_hash_hex(cfg)},
            {"name", cfg.name},
            {"ok", true}});
      return 0;
    }
    if (args.command == "experiment") return cmd_experiment(cfg, args);

    fs::path dir = args.out / ("run-" + config_hash_hex(cfg));
    fs::create_directories(dir);
    if (!fs::exists(dir / "config.json")) {
      nlohmann::json j = cfg;
      std::ofstream os = open_out(dir / "config.json");
      os << j.dump(2) << "\n";
    }
    if (args.command == "synth") return cmd_synth(cfg, dir, args.force);
    if (args.command == "inject") return cmd_inject(cfg, dir, args.force);
    if (args.command == "features") return cmd_features(cfg, dir, args.force);
    if (args.command == "pretrain-lob") return cmd_pretrain_lob(cfg, dir, args.force);
    if (args.command == "train") return cmd_train(cfg, dir, args.force);
    if (args.command == "detect") return cmd_detect(cfg, dir, args.force);
    if (args.command == "evaluate") return cmd_evaluate(cfg, dir);
    std::cerr << kUsage;
    throw ConfigError("unknown command '" + args.command + "'");
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cout << err.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
