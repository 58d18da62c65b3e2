// Unsupervised detectors over latent vectors, aggregation of window scores
// to per-step scores, and threshold selection.  Both detectors emit scores
// where higher means more anomalous.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loblab/lob_model.hpp"
#include "loblab/representation.hpp"
#include "loblab/rng.hpp"

namespace loblab {

namespace detail {

inline void require_normal_training_latents(const std::vector<LatentVector>& latents,
                                            const char* who) {
  for (const LatentVector& z : latents) {
    if (z.label != kNormal) {
      throw ValidationError(std::string(who) + ": training saw an anomaly-labeled window");
    }
  }
}

inline double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
  double d2 = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One-class SVM with an RBF kernel, solved in the nu-parameterized dual:
//   min 1/2 a' K a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1.
// Decision value f(x) = sum_i a_i k(x_i, x) - rho; the anomaly score is -f.

struct OcSvmModel {
  double nu = 0.05;
  double gamma = 0;
  double rho = 0;
  std::vector<std::vector<double>> support;
  std::vector<double> coef;

  double decision(const std::vector<double>& x) const {
    double f = -rho;
    for (size_t i = 0; i < support.size(); ++i) {
      f += coef[i] * detail::rbf(support[i], x, gamma);
    }
    return f;
  }
};

// gamma <= 0 requests the default 1/(F * var), with var the mean per-feature
// population variance of the training latents.
inline OcSvmModel fit_ocsvm(const std::vector<LatentVector>& latents, double nu = 0.05,
                            double gamma = 0, double tol = 1e-4) {
  if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("ocsvm: nu must be in (0, 1]");
  if (!(tol > 0.0)) throw ConfigError("ocsvm: tolerance must be positive");
  detail::require_normal_training_latents(latents, "ocsvm");
  const int64_t n = static_cast<int64_t>(latents.size());
  if (n < 8) throw ConfigError("ocsvm: needs at least 8 training latents");
  if (n > 8192) throw ConfigError("ocsvm: too many training latents; subsample upstream");
  const int64_t dim = static_cast<int64_t>(latents[0].values.size());
  for (const LatentVector& z : latents) {
    if (static_cast<int64_t>(z.values.size()) != dim) {
      throw ConfigError("ocsvm: latent dimensions differ");
    }
  }
  if (gamma <= 0.0) {
    double var = 0;
    for (int64_t f = 0; f < dim; ++f) {
      double mean = 0;
      for (const LatentVector& z : latents) mean += z.values[f];
      mean /= static_cast<double>(n);
      for (const LatentVector& z : latents) {
        double d = z.values[f] - mean;
        var += d * d;
      }
    }
    var /= static_cast<double>(n * dim);
    gamma = var > 0 ? 1.0 / (static_cast<double>(dim) * var) : 1.0 / static_cast<double>(dim);
  }

  Mat K(n, n);
  for (int64_t i = 0; i < n; ++i) {
    K.at(i, i) = 1.0;
    for (int64_t j = i + 1; j < n; ++j) {
      double k = detail::rbf(latents[i].values, latents[j].values, gamma);
      K.at(i, j) = k;
      K.at(j, i) = k;
    }
  }

  const double upper = 1.0 / (nu * static_cast<double>(n));
  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  std::vector<double> grad(n, 0.0);  // (K alpha)_i
  for (int64_t i = 0; i < n; ++i) {
    double g = 0;
    for (int64_t j = 0; j < n; ++j) g += K.at(i, j) * alpha[j];
    grad[i] = g;
  }

  // Sequential minimal optimization on the maximal violating pair: move mass
  // from the coordinate with the largest gradient (among those above 0) to
  // the one with the smallest (among those below the box ceiling).
  const int64_t cap = std::max<int64_t>(100000, 200 * n);
  double violation = 0;
  bool converged = false;
  for (int64_t it = 0; it < cap; ++it) {
    int64_t lo = -1, hi = -1;
    for (int64_t i = 0; i < n; ++i) {
      if (alpha[i] < upper - 1e-15 && (lo < 0 || grad[i] < grad[lo])) lo = i;
      if (alpha[i] > 1e-15 && (hi < 0 || grad[i] > grad[hi])) hi = i;
    }
    violation = (lo >= 0 && hi >= 0) ? grad[hi] - grad[lo] : 0.0;
    if (violation <= tol) {
      converged = true;
      break;
    }
    const double curv = std::max(K.at(lo, lo) + K.at(hi, hi) - 2.0 * K.at(lo, hi), 1e-12);
    double step = std::min({violation / curv, upper - alpha[lo], alpha[hi]});
    alpha[lo] += step;
    alpha[hi] -= step;
    for (int64_t i = 0; i < n; ++i) grad[i] += step * (K.at(i, lo) - K.at(i, hi));
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "ocsvm: no convergence within iteration cap (KKT residual " << violation << ")";
    throw Error(msg.str());
  }

  OcSvmModel model;
  model.nu = nu;
  model.gamma = gamma;
  // rho pins to the gradient at free coefficients; with none left it sits at
  // the midpoint of the feasible interval.
  double free_sum = 0;
  int64_t free_count = 0;
  double at_upper = -1e300, at_zero = 1e300;
  for (int64_t i = 0; i < n; ++i) {
    if (alpha[i] > 1e-10 && alpha[i] < upper - 1e-10) {
      free_sum += grad[i];
      ++free_count;
    } else if (alpha[i] >= upper - 1e-10) {
      at_upper = std::max(at_upper, grad[i]);
    } else {
      at_zero = std::min(at_zero, grad[i]);
    }
  }
  if (free_count > 0) {
    model.rho = free_sum / static_cast<double>(free_count);
  } else if (at_upper > -1e300 && at_zero < 1e300) {
    model.rho = 0.5 * (at_upper + at_zero);
  } else {
    model.rho = at_upper > -1e300 ? at_upper : at_zero;  // nu = 1 pins everything
  }
  for (int64_t i = 0; i < n; ++i) {
    if (alpha[i] > 1e-12) {
      model.support.push_back(latents[i].values);
      model.coef.push_back(alpha[i]);
    }
  }
  return model;
}

inline std::vector<double> score_windows(const OcSvmModel& model,
                                         const std::vector<LatentVector>& latents) {
  std::vector<double> out(latents.size());
  for (size_t i = 0; i < latents.size(); ++i) {
    if (!model.support.empty() && latents[i].values.size() != model.support[0].size()) {
      throw ConfigError("ocsvm: latent dimension mismatch");
    }
    out[i] = -model.decision(latents[i].values);
  }
  return out;
}

inline nlohmann::json to_json(const OcSvmModel& m) {
  return {{"nu", m.nu},           {"gamma", m.gamma}, {"rho", m.rho},
          {"support", m.support}, {"coef", m.coef}};
}

inline OcSvmModel ocsvm_from_json(const nlohmann::json& j) {
  try {
    OcSvmModel m;
    m.nu = j.at("nu").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.rho = j.at("rho").get<double>();
    m.support = j.at("support").get<std::vector<std::vector<double>>>();
    m.coef = j.at("coef").get<std::vector<double>>();
    if (m.support.size() != m.coef.size()) throw ParseError("ocsvm: support/coef mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ocsvm checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Isolation forest: uniformly random split dimension and split value, trees
// grown on without-replacement subsamples to the standard depth cap.

struct IsoNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0;
  int left = -1;
  int right = -1;
  int64_t size = 0;
};

struct IsoForestModel {
  int trees = 100;
  int64_t subsample = 256;
  uint64_t seed = 1;
  int64_t dim = 0;
  std::vector<std::vector<IsoNode>> forest;
};

namespace detail {

// Expected path length of an unsuccessful BST search over m points.
inline double average_path_length(int64_t m) {
  if (m <= 1) return 0.0;
  if (m == 2) return 1.0;
  constexpr double kEuler = 0.5772156649015329;
  const double h = std::log(static_cast<double>(m - 1)) + kEuler;
  return 2.0 * h - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

inline int grow_iso_tree(std::vector<IsoNode>& nodes, std::vector<const std::vector<double>*>& pts,
                         int64_t lo, int64_t hi, int depth, int cap, Rng& rng) {
  const int id = static_cast<int>(nodes.size());
  nodes.push_back({});
  nodes[id].size = hi - lo;
  if (hi - lo <= 1 || depth >= cap) return id;
  const int64_t dim = static_cast<int64_t>(pts[lo]->size());
  // Pick among dimensions that still have spread.
  std::vector<int64_t> live;
  for (int64_t f = 0; f < dim; ++f) {
    double mn = (*pts[lo])[f], mx = mn;
    for (int64_t i = lo + 1; i < hi; ++i) {
      mn = std::min(mn, (*pts[i])[f]);
      mx = std::max(mx, (*pts[i])[f]);
    }
    if (mx > mn) live.push_back(f);
  }
  if (live.empty()) return id;
  const int64_t f = live[rng.uniform_int(live.size())];
  double mn = (*pts[lo])[f], mx = mn;
  for (int64_t i = lo + 1; i < hi; ++i) {
    mn = std::min(mn, (*pts[i])[f]);
    mx = std::max(mx, (*pts[i])[f]);
  }
  double split = mn + rng.uniform() * (mx - mn);
  if (!(split > mn && split < mx)) return id;  // degenerate draw at the edge
  int64_t mid = lo;
  for (int64_t i = lo; i < hi; ++i) {
    if ((*pts[i])[f] < split) std::swap(pts[mid++], pts[i]);
  }
  const int left = grow_iso_tree(nodes, pts, lo, mid, depth + 1, cap, rng);
  const int right = grow_iso_tree(nodes, pts, mid, hi, depth + 1, cap, rng);
  nodes[id].feature = static_cast<int>(f);
  nodes[id].split = split;
  nodes[id].left = left;
  nodes[id].right = right;
  return id;
}

inline double iso_path_length(const std::vector<IsoNode>& nodes,
                              const std::vector<double>& x) {
  int id = 0;
  double depth = 0;
  while (nodes[id].feature >= 0) {
    id = x[nodes[id].feature] < nodes[id].split ? nodes[id].left : nodes[id].right;
    depth += 1;
  }
  return depth + average_path_length(nodes[id].size);
}

}  // namespace detail

inline IsoForestModel fit_iforest(const std::vector<LatentVector>& latents, int trees = 100,
                                  int64_t subsample = 256, uint64_t seed = 1) {
  if (trees < 1) throw ConfigError("iforest: needs at least one tree");
  if (subsample < 2) throw ConfigError("iforest: subsample must be >= 2");
  detail::require_normal_training_latents(latents, "iforest");
  const int64_t n = static_cast<int64_t>(latents.size());
  if (n < 2) throw ConfigError("iforest: needs at least 2 training latents");
  IsoForestModel model;
  model.trees = trees;
  model.seed = seed;
  model.dim = static_cast<int64_t>(latents[0].values.size());
  if (subsample > n) {
    std::cerr << "iforest: subsample " << subsample << " clamped to " << n << " points\n";
    subsample = n;
  }
  model.subsample = subsample;
  const int cap = static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample))));
  std::vector<int64_t> idx(n);
  for (int64_t i = 0; i < n; ++i) idx[i] = i;
  for (int t = 0; t < trees; ++t) {
    Rng rng(fork_seed(seed, static_cast<uint64_t>(t)));
    // Partial Fisher-Yates: the first `subsample` entries become the sample.
    for (int64_t i = 0; i < subsample; ++i) {
      int64_t j = i + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n - i)));
      std::swap(idx[i], idx[j]);
    }
    std::vector<const std::vector<double>*> pts(subsample);
    for (int64_t i = 0; i < subsample; ++i) pts[i] = &latents[idx[i]].values;
    std::vector<IsoNode> nodes;
    detail::grow_iso_tree(nodes, pts, 0, subsample, 0, cap, rng);
    model.forest.push_back(std::move(nodes));
  }
  return model;
}

inline std::vector<double> score_windows(const IsoForestModel& model,
                                         const std::vector<LatentVector>& latents) {
  const double norm = detail::average_path_length(model.subsample);
  std::vector<double> out(latents.size());
  for (size_t i = 0; i < latents.size(); ++i) {
    if (static_cast<int64_t>(latents[i].values.size()) != model.dim) {
      throw ConfigError("iforest: latent dimension mismatch");
    }
    double mean = 0;
    for (const auto& tree : model.forest) {
      mean += detail::iso_path_length(tree, latents[i].values);
    }
    mean /= static_cast<double>(model.forest.size());
    out[i] = std::pow(2.0, -mean / norm);
  }
  return out;
}

inline nlohmann::json to_json(const IsoForestModel& m) {
  nlohmann::json forest = nlohmann::json::array();
  for (const auto& tree : m.forest) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const IsoNode& nd : tree) {
      nodes.push_back({nd.feature, nd.split, nd.left, nd.right, nd.size});
    }
    forest.push_back(std::move(nodes));
  }
  return {{"trees", m.trees},
          {"subsample", m.subsample},
          {"seed", m.seed},
          {"dim", m.dim},
          {"forest", std::move(forest)}};
}

inline IsoForestModel iforest_from_json(const nlohmann::json& j) {
  try {
    IsoForestModel m;
    m.trees = j.at("trees").get<int>();
    m.subsample = j.at("subsample").get<int64_t>();
    m.seed = j.at("seed").get<uint64_t>();
    m.dim = j.at("dim").get<int64_t>();
    for (const auto& tree : j.at("forest")) {
      std::vector<IsoNode> nodes;
      for (const auto& nd : tree) {
        nodes.push_back({nd.at(0).get<int>(), nd.at(1).get<double>(), nd.at(2).get<int>(),
                         nd.at(3).get<int>(), nd.at(4).get<int64_t>()});
      }
      m.forest.push_back(std::move(nodes));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("iforest checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Window-to-point aggregation and thresholding.

enum class Aggregation { mean, max };

// Each window covers steps [anchor, anchor + T).  A step covered by at least
// one window gets the mean (or max) of the covering scores; uncovered steps
// inherit the nearest covered step's score and are flagged in `covered`.
inline std::vector<double> aggregate_to_points(const std::vector<double>& window_scores,
                                               const std::vector<int64_t>& anchors, int T,
                                               int64_t n_steps,
                                               Aggregation agg = Aggregation::mean,
                                               std::vector<uint8_t>* covered_out = nullptr) {
  if (window_scores.size() != anchors.size()) {
    throw ConfigError("aggregate: one score per window required");
  }
  if (window_scores.empty()) throw ConfigError("aggregate: no windows");
  if (T < 1 || n_steps < 1) throw ConfigError("aggregate: bad window or series length");
  std::vector<double> acc(n_steps, 0.0);
  std::vector<int64_t> hits(n_steps, 0);
  for (size_t w = 0; w < anchors.size(); ++w) {
    const int64_t lo = anchors[w], hi = std::min(n_steps, anchors[w] + T);
    if (lo < 0 || lo >= n_steps) throw ConfigError("aggregate: window outside the series");
    for (int64_t s = lo; s < hi; ++s) {
      if (agg == Aggregation::mean) {
        acc[s] += window_scores[w];
      } else {
        acc[s] = hits[s] == 0 ? window_scores[w] : std::max(acc[s], window_scores[w]);
      }
      ++hits[s];
    }
  }
  std::vector<double> out(n_steps);
  std::vector<uint8_t> covered(n_steps, 0);
  for (int64_t s = 0; s < n_steps; ++s) {
    if (hits[s] > 0) {
      covered[s] = 1;
      out[s] = agg == Aggregation::mean ? acc[s] / static_cast<double>(hits[s]) : acc[s];
    }
  }
  for (int64_t s = 0; s < n_steps; ++s) {
    if (covered[s]) continue;
    int64_t best = -1;
    for (int64_t d = 1; d < n_steps; ++d) {  // nearest covered step, earlier wins ties
      if (s - d >= 0 && covered[s - d]) {
        best = s - d;
        break;
      }
      if (s + d < n_steps && covered[s + d]) {
        best = s + d;
        break;
      }
    }
    if (best < 0) throw ConfigError("aggregate: no covered steps at all");
    out[s] = out[best];
  }
  if (covered_out != nullptr) *covered_out = std::move(covered);
  return out;
}

struct ThresholdPick {
  double threshold = 0;
  double f_beta = 0;
  bool degenerate = false;  // all candidate scores equal
};

// Maximizes F_beta over decision rules of the form score > threshold.
// Candidates are the midpoints between consecutive distinct scores plus an
// accept-everything cut below the minimum; ties prefer the lower threshold.
// Steps labeled kIgnore are left out of the tally.
inline ThresholdPick pick_threshold(const std::vector<double>& point_scores,
                                    const std::vector<uint8_t>& labels, double beta = 4.0) {
  if (point_scores.size() != labels.size()) {
    throw ConfigError("threshold: one label per score required");
  }
  if (!(beta > 0.0)) throw ConfigError("threshold: beta must be positive");
  std::vector<std::pair<double, uint8_t>> pts;
  int64_t positives = 0;
  for (size_t i = 0; i < point_scores.size(); ++i) {
    if (labels[i] == kIgnore) continue;
    pts.emplace_back(point_scores[i], labels[i]);
    positives += labels[i] == kAnomaly ? 1 : 0;
  }
  if (pts.empty()) throw ConfigError("threshold: no scored steps");
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const double b2 = beta * beta;
  auto fbeta = [&](int64_t tp, int64_t fp) {
    if (tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(positives);
    return (1.0 + b2) * p * r / (b2 * p + r);
  };
  ThresholdPick best;
  best.f_beta = -1.0;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    (pts[i].second == kAnomaly ? tp : fp) += 1;
    if (i + 1 < pts.size() && pts[i + 1].first == pts[i].first) continue;
    const double cut = i + 1 < pts.size() ? 0.5 * (pts[i].first + pts[i + 1].first)
                                          : pts[i].first - 1.0;
    const double f = fbeta(tp, fp);
    if (f >= best.f_beta) {  // >= walks ties down to the lowest threshold
      best.f_beta = f;
      best.threshold = cut;
    }
  }
  best.degenerate = pts.front().first == pts.back().first;
  return best;
}

struct ScoreSeries {
  std::vector<double> window_scores;
  std::vector<double> point_scores;
  std::vector<uint8_t> covered;
  double threshold = 0;
  std::vector<uint8_t> decisions;
};

inline ScoreSeries build_score_series(std::vector<double> window_scores,
                                      const std::vector<int64_t>& anchors, int T,
                                      int64_t n_steps, double threshold,
                                      Aggregation agg = Aggregation::mean) {
  ScoreSeries s;
  s.window_scores = std::move(window_scores);
  s.point_scores = aggregate_to_points(s.window_scores, anchors, T, n_steps, agg, &s.covered);
  s.threshold = threshold;
  s.decisions.resize(n_steps);
  for (int64_t i = 0; i < n_steps; ++i) s.decisions[i] = s.point_scores[i] > threshold ? 1 : 0;
  return s;
}

inline void write_scores_csv(const ScoreSeries& s, const std::vector<uint8_t>& labels,
                             std::ostream& os) {
  if (labels.size() != s.point_scores.size()) {
    throw ConfigError("scores csv: one label per step required");
  }
  os << "step,point_score,decision,label\n";
  char line[96];
  for (size_t i = 0; i < s.point_scores.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%d,%d\n", i, s.point_scores[i],
                  static_cast<int>(s.decisions[i]), static_cast<int>(labels[i]));
    os << line;
  }
}

}  // namespace loblab
