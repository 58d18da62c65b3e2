// Window autoencoders over feature streams: three encoder families share one
// parameter container and one training loop.  The training objective mixes
// plain reconstruction error with a supervised contrastive term computed on
// the batch's latent vectors, so a handful of labeled anomaly windows can
// shape the representation without a classification head.
//
// Layout convention: a batch of N windows of T steps and d features travels
// as one (N*T) x d matrix in step-major order (row n*T + t is step t of
// window n).  The feedforward family views the same buffer as N x (T*d).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loblab/feature_pipeline.hpp"
#include "loblab/graph.hpp"
#include "loblab/lob_model.hpp"
#include "loblab/mat.hpp"
#include "loblab/rng.hpp"

namespace loblab {

enum class EncoderFamily { feedforward, recurrent, attention };

inline std::string to_string(EncoderFamily f) {
  switch (f) {
    case EncoderFamily::feedforward: return "feedforward";
    case EncoderFamily::recurrent: return "recurrent";
    case EncoderFamily::attention: return "attention";
  }
  throw ConfigError("unknown encoder family");
}

inline EncoderFamily encoder_family_from_string(const std::string& s) {
  if (s == "feedforward") return EncoderFamily::feedforward;
  if (s == "recurrent") return EncoderFamily::recurrent;
  if (s == "attention") return EncoderFamily::attention;
  throw ConfigError("unknown encoder family: " + s);
}

struct EncoderSpec {
  EncoderFamily family = EncoderFamily::attention;
  int input_dim = 0;    // d, features per step
  int window = 32;      // T, steps per window
  int latent_dim = 64;  // F
  int hidden = 64;      // width of internal layers / state
  uint64_t seed = 1;

  // input_dim 0 is the unsized state: pipeline code fills it in once the
  // input mode fixes the per-step width. Building a model requires it set.
  void validate() const {
    if (input_dim < 0) throw ConfigError("encoder: input_dim must be >= 0");
    if (window < 2) throw ConfigError("encoder: window must be >= 2");
    if (latent_dim < 1) throw ConfigError("encoder: latent_dim must be >= 1");
    if (hidden < 1) throw ConfigError("encoder: hidden must be >= 1");
  }
};

inline nlohmann::json to_json(const EncoderSpec& s) {
  return {{"family", to_string(s.family)}, {"input_dim", s.input_dim},
          {"window", s.window},           {"latent_dim", s.latent_dim},
          {"hidden", s.hidden},           {"seed", s.seed}};
}

inline EncoderSpec encoder_spec_from_json(const nlohmann::json& j) {
  EncoderSpec s;
  s.family = encoder_family_from_string(j.at("family").get<std::string>());
  s.input_dim = j.at("input_dim").get<int>();
  s.window = j.at("window").get<int>();
  s.latent_dim = j.at("latent_dim").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.seed = j.value("seed", uint64_t{1});
  s.validate();
  return s;
}

// Two published shapes of the supervised contrastive loss: the default sums
// positive terms inside the log; the variant averages the per-positive logs.
enum class SclVariant { sum_inside_log, averaged_log };

inline std::string to_string(SclVariant v) {
  return v == SclVariant::sum_inside_log ? "sum_inside_log" : "averaged_log";
}

inline SclVariant scl_variant_from_string(const std::string& s) {
  if (s == "sum_inside_log") return SclVariant::sum_inside_log;
  if (s == "averaged_log") return SclVariant::averaged_log;
  throw ConfigError("unknown contrastive variant: " + s);
}

struct TrainConfig {
  double alpha = 0.8;       // weight of the contrastive term
  double tau = 0.1;         // contrastive temperature
  double oversample = 0.1;  // fraction of each batch drawn from anomaly windows
  int batch = 256;
  int epochs = 30;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 1;
  SclVariant variant = SclVariant::sum_inside_log;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("train: alpha must be in [0, 1]");
    if (!(tau > 0.0)) throw ConfigError("train: temperature must be positive");
    if (!(oversample >= 0.0 && oversample < 1.0)) {
      throw ConfigError("train: oversample must be in [0, 1)");
    }
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (alpha > 0.0 && batch < 2) throw ConfigError("train: contrastive loss needs batch >= 2");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("train: moment decays must be in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("train: eps must be positive");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},     {"tau", c.tau},       {"oversample", c.oversample},
          {"batch", c.batch},     {"epochs", c.epochs}, {"lr", c.lr},
          {"beta1", c.beta1},     {"beta2", c.beta2},   {"eps", c.eps},
          {"seed", c.seed},       {"variant", to_string(c.variant)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.tau = j.value("tau", c.tau);
  c.oversample = j.value("oversample", c.oversample);
  c.batch = j.value("batch", c.batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.seed = j.value("seed", c.seed);
  c.variant = scl_variant_from_string(j.value("variant", to_string(c.variant)));
  c.validate();
  return c;
}

struct Autoencoder {
  EncoderSpec spec;
  std::vector<std::string> names;
  std::vector<Mat> params;
  bool frozen = false;

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("model has no parameter named " + name);
  }
};

inline uint64_t params_hash(const Autoencoder& m) {
  uint64_t h = fnv1a64(nullptr, 0);
  for (const Mat& p : m.params) h = hash_mat(p, h);
  return h;
}

namespace detail {

struct ParamBuilder {
  Autoencoder* m;
  Rng rng;

  void weight(const std::string& name, int64_t rows, int64_t cols) {
    Mat w(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& x : w.a) x = (2.0 * rng.uniform() - 1.0) * bound;
    m->names.push_back(name);
    m->params.push_back(std::move(w));
  }

  void bias(const std::string& name, int64_t cols) {
    m->names.push_back(name);
    m->params.push_back(Mat(1, cols));
  }
};

// Fixed sinusoidal position code, one row per step.
inline Mat positional_code(int T, int width) {
  Mat p(T, width);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < width; ++c) {
      double rate = std::pow(10000.0, static_cast<double>(2 * (c / 2)) / width);
      double angle = t / rate;
      p.at(t, c) = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return p;
}

inline Mat tile_rows(const Mat& block, int64_t copies) {
  Mat out(block.rows * copies, block.cols);
  for (int64_t k = 0; k < copies; ++k) {
    std::copy(block.a.begin(), block.a.end(), out.row(k * block.rows));
  }
  return out;
}

}  // namespace detail

inline Autoencoder make_autoencoder(const EncoderSpec& spec) {
  spec.validate();
  if (spec.input_dim < 1) throw ConfigError("encoder: input_dim must be set before building");
  Autoencoder m;
  m.spec = spec;
  detail::ParamBuilder b{&m, Rng(spec.seed)};
  const int d = spec.input_dim, T = spec.window, F = spec.latent_dim, H = spec.hidden;
  switch (spec.family) {
    case EncoderFamily::feedforward:
      b.weight("enc.w1", static_cast<int64_t>(T) * d, H);
      b.bias("enc.b1", H);
      b.weight("enc.w2", H, F);
      b.bias("enc.b2", F);
      b.weight("dec.w1", F, H);
      b.bias("dec.b1", H);
      b.weight("dec.w2", H, static_cast<int64_t>(T) * d);
      b.bias("dec.b2", static_cast<int64_t>(T) * d);
      break;
    case EncoderFamily::recurrent:
      for (const char* g : {"r", "z", "n"}) {
        b.weight(std::string("enc.w") + g, d, H);
        b.weight(std::string("enc.u") + g, H, H);
        b.bias(std::string("enc.b") + g, H);
      }
      b.weight("enc.head_w", H, F);
      b.bias("enc.head_b", F);
      b.weight("dec.h0_w", F, H);
      b.bias("dec.h0_b", H);
      for (const char* g : {"r", "z", "n"}) {
        b.weight(std::string("dec.w") + g, F, H);
        b.weight(std::string("dec.u") + g, H, H);
        b.bias(std::string("dec.b") + g, H);
      }
      b.weight("dec.out_w", H, d);
      b.bias("dec.out_b", d);
      break;
    case EncoderFamily::attention:
      b.weight("enc.in_w", d, H);
      b.bias("enc.in_b", H);
      for (const char* p : {"q", "k", "v", "o"}) {
        b.weight(std::string("enc.") + p + "_w", H, H);
        b.bias(std::string("enc.") + p + "_b", H);
      }
      b.weight("enc.ff_w1", H, H);
      b.bias("enc.ff_b1", H);
      b.weight("enc.ff_w2", H, H);
      b.bias("enc.ff_b2", H);
      b.weight("enc.head_w", H, F);
      b.bias("enc.head_b", F);
      b.weight("dec.in_w", F, H);
      b.bias("dec.in_b", H);
      b.weight("dec.out_w", H, d);
      b.bias("dec.out_b", d);
      break;
  }
  return m;
}

namespace detail {

struct ParamIds {
  const Autoencoder* model = nullptr;
  std::vector<int> ids;

  int operator()(const std::string& name) const { return ids[model->find(name)]; }
};

inline ParamIds push_params(Tape& t, const Autoencoder& m) {
  ParamIds p;
  p.model = &m;
  p.ids.reserve(m.params.size());
  for (const Mat& w : m.params) p.ids.push_back(leaf(t, w));
  return p;
}

inline int affine(Tape& t, int x, int w, int b) { return add_rowvec(t, mul(t, x, w), b); }

// One gated recurrence step shared by the encoder and decoder stacks.
inline int gru_step(Tape& t, const ParamIds& p, const std::string& side, int x, int h) {
  int r = sigmoid_elem(t, add(t, affine(t, x, p(side + ".wr"), p(side + ".br")),
                              mul(t, h, p(side + ".ur"))));
  int z = sigmoid_elem(t, add(t, affine(t, x, p(side + ".wz"), p(side + ".bz")),
                              mul(t, h, p(side + ".uz"))));
  int n = tanh_elem(t, add(t, affine(t, x, p(side + ".wn"), p(side + ".bn")),
                           hadamard(t, r, mul(t, h, p(side + ".un")))));
  return add(t, hadamard(t, one_minus(t, z), n), hadamard(t, z, h));
}

struct ForwardNodes {
  int input = -1;       // leaf holding the batch (family layout)
  int latent = -1;      // N x F
  int step_embed = -1;  // (N*T) x F, attention family only
  int recon = -1;       // same layout as input
  int mse = -1;         // 1 x 1 mean squared reconstruction error
  ParamIds params;
};

inline int decoder_forward(Tape& t, const Autoencoder& m, const ParamIds& p, int latent,
                           int64_t n) {
  const int T = m.spec.window;
  switch (m.spec.family) {
    case EncoderFamily::feedforward: {
      int h = tanh_elem(t, affine(t, latent, p("dec.w1"), p("dec.b1")));
      return affine(t, h, p("dec.w2"), p("dec.b2"));
    }
    case EncoderFamily::recurrent: {
      int h = tanh_elem(t, affine(t, latent, p("dec.h0_w"), p("dec.h0_b")));
      std::vector<int> ys;
      ys.reserve(T);
      for (int step = 0; step < T; ++step) {
        h = gru_step(t, p, "dec", latent, h);
        ys.push_back(affine(t, h, p("dec.out_w"), p("dec.out_b")));
      }
      return stack_steps(t, ys);
    }
    case EncoderFamily::attention: {
      int tiled = repeat_rows(t, latent, T);
      int pos = leaf(t, tile_rows(positional_code(T, m.spec.hidden), n));
      int h = tanh_elem(t, add(t, affine(t, tiled, p("dec.in_w"), p("dec.in_b")), pos));
      return affine(t, h, p("dec.out_w"), p("dec.out_b"));
    }
  }
  throw ConfigError("unknown encoder family");
}

// `steps` is always (N*T) x d step-major; the feedforward family re-views it
// as N x (T*d), which is free because each window's rows are contiguous.
inline ForwardNodes model_forward(Tape& t, const Autoencoder& m, const Mat& steps) {
  const int T = m.spec.window, d = m.spec.input_dim;
  check_shape(steps.cols == d && steps.rows % T == 0, "model_forward");
  const int64_t n = steps.rows / T;
  ForwardNodes out;
  out.params = push_params(t, m);
  const ParamIds& p = out.params;
  if (m.spec.family == EncoderFamily::feedforward) {
    Mat flat(n, static_cast<int64_t>(T) * d);
    flat.a = steps.a;
    out.input = leaf(t, std::move(flat));
  } else {
    out.input = leaf(t, steps);
  }
  switch (m.spec.family) {
    case EncoderFamily::feedforward: {
      int h = tanh_elem(t, affine(t, out.input, p("enc.w1"), p("enc.b1")));
      out.latent = affine(t, h, p("enc.w2"), p("enc.b2"));
      break;
    }
    case EncoderFamily::recurrent: {
      int h = leaf(t, Mat(n, m.spec.hidden));
      for (int step = 0; step < T; ++step) {
        int xt = gather_step(t, out.input, T, step);
        h = gru_step(t, p, "enc", xt, h);
      }
      out.latent = affine(t, h, p("enc.head_w"), p("enc.head_b"));
      break;
    }
    case EncoderFamily::attention: {
      int pos = leaf(t, tile_rows(positional_code(T, m.spec.hidden), n));
      int h0 = add(t, affine(t, out.input, p("enc.in_w"), p("enc.in_b")), pos);
      int q = affine(t, h0, p("enc.q_w"), p("enc.q_b"));
      int k = affine(t, h0, p("enc.k_w"), p("enc.k_b"));
      int v = affine(t, h0, p("enc.v_w"), p("enc.v_b"));
      int attended = attn_apply(t, softmax_rows(t, attn_scores(t, q, k, T)), v, T);
      int h1 = add(t, h0, affine(t, attended, p("enc.o_w"), p("enc.o_b")));
      int f = affine(t, tanh_elem(t, affine(t, h1, p("enc.ff_w1"), p("enc.ff_b1"))),
                     p("enc.ff_w2"), p("enc.ff_b2"));
      int h2 = add(t, h1, f);
      out.step_embed = affine(t, h2, p("enc.head_w"), p("enc.head_b"));
      out.latent = window_mean(t, out.step_embed, T);
      break;
    }
  }
  out.recon = decoder_forward(t, m, p, out.latent, n);
  int diff = sub(t, out.recon, out.input);
  out.mse = mean_all(t, hadamard(t, diff, diff));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Losses.  The plain versions below are straightforward double-loop
// evaluations used wherever no gradient is needed; the tape builder mirrors
// them exactly.

inline double loss_mse(const Mat& a, const Mat& b) {
  check_shape(a.same_shape(b), "loss_mse");
  double s = 0;
  for (size_t i = 0; i < a.a.size(); ++i) {
    double d = a.a[i] - b.a[i];
    s += d * d;
  }
  return s / static_cast<double>(a.a.size());
}

// Supervised contrastive loss over one batch of latent vectors.  Anchors are
// the rows with at least one other same-label row; when no row qualifies the
// loss is 0 and `inert` (when given) is set.
inline double loss_scl(const Mat& latents, const std::vector<uint8_t>& labels, double tau,
                       SclVariant variant = SclVariant::sum_inside_log,
                       bool* inert = nullptr) {
  if (!(tau > 0.0)) throw ConfigError("contrastive loss: temperature must be positive");
  const int64_t n = latents.rows;
  if (n < 2) throw ConfigError("contrastive loss: batch must hold at least 2 windows");
  if (static_cast<int64_t>(labels.size()) != n) {
    throw ConfigError("contrastive loss: one label per latent required");
  }
  Mat z = latents;
  for (int64_t i = 0; i < n; ++i) {
    double norm = 0;
    for (int64_t c = 0; c < z.cols; ++c) norm += z.at(i, c) * z.at(i, c);
    norm = std::max(std::sqrt(norm), kNormFloor);
    for (int64_t c = 0; c < z.cols; ++c) z.at(i, c) /= norm;
  }
  auto sim = [&](int64_t i, int64_t j) {
    double s = 0;
    for (int64_t c = 0; c < z.cols; ++c) s += z.at(i, c) * z.at(j, c);
    return s / tau;
  };
  double total = 0;
  int64_t anchors = 0;
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> all, pos;
    for (int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = sim(i, j);
      all.push_back(s);
      if (labels[j] == labels[i]) pos.push_back(s);
    }
    if (pos.empty()) continue;
    auto lse = [](const std::vector<double>& xs) {
      double m = *std::max_element(xs.begin(), xs.end());
      double s = 0;
      for (double x : xs) s += std::exp(x - m);
      return m + std::log(s);
    };
    double den = lse(all);
    double num;
    if (variant == SclVariant::sum_inside_log) {
      num = lse(pos);
    } else {
      num = 0;
      for (double s : pos) num += s;
      num /= static_cast<double>(pos.size());
    }
    total += den - num;
    ++anchors;
  }
  if (inert != nullptr) *inert = anchors == 0;
  return anchors == 0 ? 0.0 : total / static_cast<double>(anchors);
}

inline double hybrid_loss(const Mat& window, const Mat& reconstruction, const Mat& latents,
                          const std::vector<uint8_t>& labels, double alpha, double tau,
                          SclVariant variant = SclVariant::sum_inside_log) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("hybrid loss: alpha must be in [0, 1]");
  return (1.0 - alpha) * loss_mse(window, reconstruction) +
         alpha * loss_scl(latents, labels, tau, variant);
}

namespace detail {

inline int scl_node(Tape& t, int latent, const std::vector<uint8_t>& labels, double tau,
                    SclVariant variant, bool* inert) {
  if (!(tau > 0.0)) throw ConfigError("contrastive loss: temperature must be positive");
  const int64_t n = t.val(latent).rows;
  if (n < 2) throw ConfigError("contrastive loss: batch must hold at least 2 windows");
  if (static_cast<int64_t>(labels.size()) != n) {
    throw ConfigError("contrastive loss: one label per latent required");
  }
  Mat others(n, n), positives(n, n);
  std::vector<double> anchor(n, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      others.at(i, j) = 1.0;
      if (labels[j] == labels[i]) {
        positives.at(i, j) = 1.0;
        anchor[i] = 1.0;
      }
    }
  }
  if (inert != nullptr) {
    *inert = std::none_of(anchor.begin(), anchor.end(), [](double w) { return w > 0; });
  }
  int sims = scale(t, mul_nt(t, l2_normalize_rows(t, latent), l2_normalize_rows(t, latent)),
                   1.0 / tau);
  int den = logsumexp_rows_masked(t, sims, std::move(others));
  int num = variant == SclVariant::sum_inside_log
                ? logsumexp_rows_masked(t, sims, std::move(positives))
                : masked_row_mean(t, sims, std::move(positives));
  return mean_weighted(t, sub(t, den, num), std::move(anchor));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Batching.  With oversampling enabled every batch carries a fixed count of
// anomaly windows drawn with replacement; the normal windows cycle through a
// reshuffled pool.  With oversample = 0 this is a plain shuffled split.

inline std::vector<std::vector<int64_t>> make_oversampled_batches(const WindowBatch& windows,
                                                                  double oversample,
                                                                  int64_t batch,
                                                                  uint64_t seed) {
  if (batch < 1) throw ConfigError("batching: batch size must be >= 1");
  if (!(oversample >= 0.0 && oversample < 1.0)) {
    throw ConfigError("batching: oversample must be in [0, 1)");
  }
  const int64_t n = windows.count();
  std::vector<std::vector<int64_t>> out;
  if (n == 0) return out;
  Rng rng(seed);
  auto shuffle = [&rng](std::vector<int64_t>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[rng.uniform_int(static_cast<uint64_t>(i + 1))]);
    }
  };
  if (oversample == 0.0) {
    std::vector<int64_t> perm(n);
    for (int64_t i = 0; i < n; ++i) perm[i] = i;
    shuffle(perm);
    for (int64_t lo = 0; lo < n; lo += batch) {
      int64_t hi = std::min(n, lo + batch);
      out.emplace_back(perm.begin() + lo, perm.begin() + hi);
    }
    return out;
  }
  std::vector<int64_t> pos, neg;
  for (int64_t i = 0; i < n; ++i) {
    (windows.labels[i] == Label::kAnomaly ? pos : neg).push_back(i);
  }
  if (pos.empty()) {
    throw ConfigError("batching: contrastive oversampling requires labeled anomalies");
  }
  if (neg.empty()) {
    throw ConfigError("batching: contrastive oversampling requires normal windows");
  }
  const int64_t n_pos = std::llround(oversample * static_cast<double>(batch));
  const int64_t n_neg = batch - n_pos;
  const int64_t n_batches = (n + batch - 1) / batch;
  shuffle(neg);
  size_t cursor = 0;
  for (int64_t b = 0; b < n_batches; ++b) {
    std::vector<int64_t> idx;
    idx.reserve(batch);
    for (int64_t k = 0; k < n_neg; ++k) {
      if (cursor == neg.size()) {
        shuffle(neg);
        cursor = 0;
      }
      idx.push_back(neg[cursor++]);
    }
    for (int64_t k = 0; k < n_pos; ++k) {
      idx.push_back(pos[rng.uniform_int(pos.size())]);
    }
    out.push_back(std::move(idx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.

// Materializes the step matrix for a list of window indices.  Keeping this a
// callback lets the cascaded setup run a frozen embedder per batch instead of
// holding every embedded window in memory at once.
using WindowSource = std::function<Mat(const std::vector<int64_t>&)>;

struct TraceRow {
  int epoch = 0;
  double mse = 0;
  double scl = 0;
  double total = 0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  uint64_t params_hash = 0;
  bool contrastive_used = false;  // at least one batch had a live contrastive term
};

inline void write_loss_trace(const TrainResult& r, std::ostream& os) {
  os << "epoch,mse,scl,total\n";
  char line[128];
  for (const TraceRow& row : r.trace) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", row.epoch, row.mse, row.scl,
                  row.total);
    os << line;
  }
}

namespace detail {

struct Adam {
  double lr, b1, b2, eps;
  int64_t t = 0;
  std::vector<Mat> m, v;

  explicit Adam(const TrainConfig& c, const std::vector<Mat>& params)
      : lr(c.lr), b1(c.beta1), b2(c.beta2), eps(c.eps) {
    for (const Mat& p : params) {
      m.emplace_back(p.rows, p.cols);
      v.emplace_back(p.rows, p.cols);
    }
  }

  void step(std::vector<Mat>& params, const std::vector<const Mat*>& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (size_t p = 0; p < params.size(); ++p) {
      for (size_t i = 0; i < params[p].a.size(); ++i) {
        const double g = grads[p] != nullptr ? grads[p]->a[i] : 0.0;
        double& mi = m[p].a[i];
        double& vi = v[p].a[i];
        mi = b1 * mi + (1.0 - b1) * g;
        vi = b2 * vi + (1.0 - b2) * g * g;
        params[p].a[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
      }
    }
  }
};

}  // namespace detail

inline TrainResult train(Autoencoder& model, const WindowBatch& windows,
                         const WindowSource& source, const TrainConfig& cfg) {
  cfg.validate();
  model.spec.validate();
  if (model.frozen) throw Error("train: model is frozen");
  if (windows.count() == 0) throw ConfigError("train: no training windows");
  if (windows.T != model.spec.window) {
    throw ConfigError("train: window length does not match the model");
  }
  TrainResult result;
  detail::Adam adam(cfg, model.params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches = make_oversampled_batches(windows, cfg.oversample, cfg.batch,
                                            fork_seed(cfg.seed, 1000 + epoch));
    double mse_sum = 0, scl_sum = 0, tot_sum = 0;
    int64_t seen = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      const std::vector<int64_t>& idx = batches[b];
      Mat steps = source(idx);
      check_shape(steps.rows == static_cast<int64_t>(idx.size()) * model.spec.window &&
                      steps.cols == model.spec.input_dim,
                  "train batch");
      Tape tape;
      detail::ForwardNodes f = detail::model_forward(tape, model, steps);
      double scl_val = 0;
      int total;
      if (cfg.alpha > 0.0) {
        std::vector<uint8_t> labels(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
          labels[i] = windows.labels[idx[i]] == Label::kAnomaly ? 1 : 0;
        }
        bool inert = false;
        int scl = detail::scl_node(tape, f.latent, labels, cfg.tau, cfg.variant, &inert);
        scl_val = tape.val(scl).a[0];
        if (!inert) result.contrastive_used = true;
        total = add(tape, scale(tape, f.mse, 1.0 - cfg.alpha), scale(tape, scl, cfg.alpha));
      } else {
        total = f.mse;
      }
      const double mse_val = tape.val(f.mse).a[0];
      const double tot_val = tape.val(total).a[0];
      if (!std::isfinite(tot_val)) {
        auto [lo, hi] = std::minmax_element(steps.a.begin(), steps.a.end());
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << " batch " << b
            << " (mse=" << mse_val << ", scl=" << scl_val << ", batch input range [" << *lo
            << ", " << *hi << "])";
        throw Error(msg.str());
      }
      tape.backward(total);
      std::vector<const Mat*> grads(model.params.size(), nullptr);
      for (size_t p = 0; p < model.params.size(); ++p) {
        if (tape.has_grad(f.params.ids[p])) grads[p] = &tape.grad(f.params.ids[p]);
      }
      adam.step(model.params, grads);
      const double w = static_cast<double>(idx.size());
      mse_sum += mse_val * w;
      scl_sum += scl_val * w;
      tot_sum += tot_val * w;
      seen += static_cast<int64_t>(idx.size());
    }
    result.trace.push_back({epoch, mse_sum / seen, scl_sum / seen, tot_sum / seen});
  }
  result.params_hash = params_hash(model);
  return result;
}

// ---------------------------------------------------------------------------
// Inference.

// One encoded window, tagged with where it came from so detectors and
// evaluation can line scores back up with steps.
struct LatentVector {
  std::vector<double> values;
  int64_t anchor = -1;
  uint8_t label = kNormal;
  bool eval_ignore = false;
};

inline std::vector<double> encode(const Autoencoder& model, const Mat& window) {
  check_shape(window.rows == model.spec.window && window.cols == model.spec.input_dim,
              "encode");
  Tape t;
  detail::ForwardNodes f = detail::model_forward(t, model, window);
  const Mat& z = t.val(f.latent);
  return std::vector<double>(z.a.begin(), z.a.end());
}

inline Mat decode(const Autoencoder& model, const std::vector<double>& latent) {
  check_shape(static_cast<int64_t>(latent.size()) == model.spec.latent_dim, "decode");
  Tape t;
  detail::ParamIds p = detail::push_params(t, model);
  Mat z(1, model.spec.latent_dim);
  z.a = latent;
  int recon = detail::decoder_forward(t, model, p, leaf(t, std::move(z)), 1);
  Mat out(model.spec.window, model.spec.input_dim);
  out.a = t.val(recon).a;  // feedforward emits 1 x (T*d); same buffer order
  return out;
}

// Encodes windows in chunks; returns one latent row per index.
inline Mat encode_windows(const Autoencoder& model, const WindowSource& source,
                          const std::vector<int64_t>& indices, int64_t chunk = 256) {
  if (chunk < 1) throw ConfigError("encode_windows: chunk must be >= 1");
  Mat out(static_cast<int64_t>(indices.size()), model.spec.latent_dim);
  for (size_t lo = 0; lo < indices.size(); lo += static_cast<size_t>(chunk)) {
    size_t hi = std::min(indices.size(), lo + static_cast<size_t>(chunk));
    std::vector<int64_t> part(indices.begin() + lo, indices.begin() + hi);
    Tape t;
    detail::ForwardNodes f = detail::model_forward(t, model, source(part));
    const Mat& z = t.val(f.latent);
    std::copy(z.a.begin(), z.a.end(), out.row(static_cast<int64_t>(lo)));
  }
  return out;
}

// Encodes every window of a batch and carries over its anchor and labels.
inline std::vector<LatentVector> make_latents(const Autoencoder& model,
                                              const WindowBatch& windows,
                                              const WindowSource& source, int64_t chunk = 256) {
  std::vector<int64_t> idx(windows.count());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
  Mat z = encode_windows(model, source, idx, chunk);
  std::vector<LatentVector> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    out[i].values.assign(z.row(static_cast<int64_t>(i)),
                         z.row(static_cast<int64_t>(i)) + z.cols);
    out[i].anchor = windows.anchors[i];
    out[i].label = windows.labels[i];
    out[i].eval_ignore = windows.eval_ignore[i] != 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON tensor dump with a shape manifest and a parameter hash
// that is verified on load.

inline void save_model(const Autoencoder& m, std::ostream& os) {
  nlohmann::json j;
  j["format"] = 1;
  j["spec"] = to_json(m.spec);
  j["frozen"] = m.frozen;
  j["hash"] = std::to_string(params_hash(m));
  nlohmann::json params = nlohmann::json::array();
  for (size_t i = 0; i < m.params.size(); ++i) {
    params.push_back({{"name", m.names[i]},
                      {"rows", m.params[i].rows},
                      {"cols", m.params[i].cols},
                      {"data", m.params[i].a}});
  }
  j["params"] = std::move(params);
  os << j.dump(1) << "\n";
}

inline Autoencoder load_model(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<int>() != 1) throw ParseError("model checkpoint: unknown format");
    Autoencoder m;
    m.spec = encoder_spec_from_json(j.at("spec"));
    m.frozen = j.value("frozen", false);
    for (const auto& p : j.at("params")) {
      Mat w(p.at("rows").get<int64_t>(), p.at("cols").get<int64_t>());
      auto data = p.at("data").get<std::vector<double>>();
      if (data.size() != w.a.size()) throw ParseError("model checkpoint: shape mismatch");
      w.a = std::move(data);
      m.names.push_back(p.at("name").get<std::string>());
      m.params.push_back(std::move(w));
    }
    if (std::to_string(params_hash(m)) != j.at("hash").get<std::string>()) {
      throw ParseError("model checkpoint: parameter hash mismatch");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Window extraction and the cascaded setup.  A small attention autoencoder is
// pretrained on the raw book columns with pure reconstruction loss, frozen,
// and its per-step head outputs are concatenated onto the manual features of
// the main model's input.

inline Mat window_steps(const FeatureFrame& frame, const WindowBatch& windows,
                        const std::vector<int64_t>& idx, int64_t col_lo, int64_t col_hi) {
  if (col_lo < 0 || col_hi > frame.dim() || col_lo >= col_hi) {
    throw ConfigError("window_steps: bad column range");
  }
  const int T = windows.T;
  Mat out(static_cast<int64_t>(idx.size()) * T, col_hi - col_lo);
  for (size_t w = 0; w < idx.size(); ++w) {
    const int64_t anchor = windows.anchors[idx[w]];
    for (int s = 0; s < T; ++s) {
      const std::vector<double>& row = frame.rows[anchor + s];
      std::copy(row.begin() + col_lo, row.begin() + col_hi,
                out.row(static_cast<int64_t>(w) * T + s));
    }
  }
  return out;
}

inline WindowSource make_frame_source(const FeatureFrame& frame, const WindowBatch& windows,
                                      int64_t col_lo, int64_t col_hi) {
  return [&frame, &windows, col_lo, col_hi](const std::vector<int64_t>& idx) {
    return window_steps(frame, windows, idx, col_lo, col_hi);
  };
}

inline WindowSource make_full_source(const FeatureFrame& frame, const WindowBatch& windows) {
  return make_frame_source(frame, windows, 0, frame.dim());
}

inline WindowSource make_lob_source(const FeatureFrame& frame, const WindowBatch& windows) {
  return make_frame_source(frame, windows, 0, frame.lob_dim());
}

inline WindowSource make_manual_source(const FeatureFrame& frame, const WindowBatch& windows) {
  return make_frame_source(frame, windows, frame.lob_dim(), frame.dim());
}

// Per-step concatenation of embedding and manual-feature blocks.  With zero
// manual columns this is the identity on the embedding block.
inline Mat fuse_window(const Mat& embedding, const Mat& manual) {
  check_shape(embedding.rows == manual.rows, "fuse_window");
  Mat out(embedding.rows, embedding.cols + manual.cols);
  for (int64_t r = 0; r < out.rows; ++r) {
    std::copy(embedding.row(r), embedding.row(r) + embedding.cols, out.row(r));
    std::copy(manual.row(r), manual.row(r) + manual.cols, out.row(r) + embedding.cols);
  }
  return out;
}

struct FrozenEmbedder {
  Autoencoder model;
  uint64_t hash = 0;

  bool verify() const { return model.frozen && params_hash(model) == hash; }
};

// Embeds raw book steps with a frozen attention model.  Per-step mode reads
// the pre-pool head outputs; pooled mode repeats the window latent per step.
inline Mat embed_lob_steps(const FrozenEmbedder& embedder, const Mat& steps, bool per_step) {
  if (!embedder.verify()) throw Error("embedder: frozen parameter hash mismatch");
  Tape t;
  detail::ForwardNodes f = detail::model_forward(t, embedder.model, steps);
  if (per_step) {
    if (f.step_embed < 0) throw ConfigError("embedder: family has no per-step outputs");
    return t.val(f.step_embed);
  }
  const Mat& z = t.val(f.latent);
  const int T = embedder.model.spec.window;
  Mat out(z.rows * T, z.cols);
  for (int64_t w = 0; w < z.rows; ++w) {
    for (int s = 0; s < T; ++s) std::copy(z.row(w), z.row(w) + z.cols, out.row(w * T + s));
  }
  return out;
}

struct CascadeSpec {
  EncoderSpec lob_encoder;      // attention family over the raw book columns
  bool per_step_fusion = true;  // false repeats the pooled latent per step
};

// Stage one of the cascade: pure-reconstruction pretraining on the book
// columns, then freeze.  The contrastive weight and oversampling are forced
// off regardless of what the config says.
inline FrozenEmbedder pretrain_lob_embedder(const WindowBatch& windows,
                                            const WindowSource& lob_source, CascadeSpec spec,
                                            TrainConfig cfg) {
  if (spec.lob_encoder.family != EncoderFamily::attention) {
    throw ConfigError("embedder: per-step embeddings need the attention family");
  }
  cfg.alpha = 0.0;
  cfg.oversample = 0.0;
  FrozenEmbedder out;
  out.model = make_autoencoder(spec.lob_encoder);
  train(out.model, windows, lob_source, cfg);
  out.model.frozen = true;
  out.hash = params_hash(out.model);
  return out;
}

// Step matrices for the cascade's main model: frozen embedding of the book
// block fused with the manual block, built per batch.
inline WindowSource make_cascade_source(const FeatureFrame& frame, const WindowBatch& windows,
                                        const FrozenEmbedder& embedder,
                                        bool per_step_fusion = true) {
  WindowSource lob = make_lob_source(frame, windows);
  WindowSource manual = make_manual_source(frame, windows);
  return [lob, manual, &embedder, per_step_fusion](const std::vector<int64_t>& idx) {
    return fuse_window(embed_lob_steps(embedder, lob(idx), per_step_fusion), manual(idx));
  };
}

}  // namespace loblab
