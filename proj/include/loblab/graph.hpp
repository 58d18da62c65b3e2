#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "loblab/mat.hpp"

namespace loblab {

// Reverse-mode autodiff over Mats. A Tape lives for one forward/backward pass:
// ops append value nodes eagerly and park a closure that scatters the output
// gradient back onto the inputs. Gradients allocate lazily, so subgraphs that
// never receive gradient cost nothing on the way back.
class Tape {
 public:
  int push(Mat value) {
    nodes_.push_back({std::move(value), Mat(), nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }
  void set_back(int id, std::function<void(Tape&)> back) {
    nodes_[static_cast<size_t>(id)].back = std::move(back);
  }
  const Mat& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  Mat& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.rows == 0 && n.value.rows != 0) n.grad = Mat(n.value.rows, n.value.cols);
    return n.grad;
  }
  bool has_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad.size() > 0; }

  // Seeds d(root)/d(root) = 1 and runs the closures in reverse creation
  // order. The root must be a scalar node.
  void backward(int root) {
    if (val(root).size() != 1) throw std::invalid_argument("backward: root must be 1x1");
    grad(root).a[0] = 1.0;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.back && n.grad.size() > 0) n.back(*this);
    }
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value, grad;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

inline int leaf(Tape& t, Mat v) { return t.push(std::move(v)); }

inline int add(Tape& t, int a, int b) {
  check_shape(t.val(a).same_shape(t.val(b)), "add");
  Mat v = t.val(a);
  axpy(v, 1.0, t.val(b));
  int id = t.push(std::move(v));
  t.set_back(id, [a, b, id](Tape& tp) {
    axpy(tp.grad(a), 1.0, tp.grad(id));
    axpy(tp.grad(b), 1.0, tp.grad(id));
  });
  return id;
}

inline int sub(Tape& t, int a, int b) {
  check_shape(t.val(a).same_shape(t.val(b)), "sub");
  Mat v = t.val(a);
  axpy(v, -1.0, t.val(b));
  int id = t.push(std::move(v));
  t.set_back(id, [a, b, id](Tape& tp) {
    axpy(tp.grad(a), 1.0, tp.grad(id));
    axpy(tp.grad(b), -1.0, tp.grad(id));
  });
  return id;
}

inline int hadamard(Tape& t, int a, int b) {
  check_shape(t.val(a).same_shape(t.val(b)), "hadamard");
  Mat v = t.val(a);
  for (int64_t i = 0; i < v.size(); ++i) v.a[i] *= t.val(b).a[i];
  int id = t.push(std::move(v));
  t.set_back(id, [a, b, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& va = tp.val(a);
    const Mat& vb = tp.val(b);
    Mat& ga = tp.grad(a);
    Mat& gb = tp.grad(b);
    for (int64_t i = 0; i < g.size(); ++i) {
      ga.a[i] += g.a[i] * vb.a[i];
      gb.a[i] += g.a[i] * va.a[i];
    }
  });
  return id;
}

inline int scale(Tape& t, int a, double c) {
  Mat v = t.val(a);
  for (double& x : v.a) x *= c;
  int id = t.push(std::move(v));
  t.set_back(id, [a, c, id](Tape& tp) { axpy(tp.grad(a), c, tp.grad(id)); });
  return id;
}

inline int add_scalar(Tape& t, int a, double c) {
  Mat v = t.val(a);
  for (double& x : v.a) x += c;
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) { axpy(tp.grad(a), 1.0, tp.grad(id)); });
  return id;
}

inline int one_minus(Tape& t, int a) {
  Mat v = t.val(a);
  for (double& x : v.a) x = 1.0 - x;
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) { axpy(tp.grad(a), -1.0, tp.grad(id)); });
  return id;
}

inline int mul(Tape& t, int a, int b) {
  int id = t.push(matmul(t.val(a), t.val(b)));
  t.set_back(id, [a, b, id](Tape& tp) {
    axpy(tp.grad(a), 1.0, matmul_nt(tp.grad(id), tp.val(b)));
    axpy(tp.grad(b), 1.0, matmul_tn(tp.val(a), tp.grad(id)));
  });
  return id;
}

// a * b^T; used for latent similarity matrices.
inline int mul_nt(Tape& t, int a, int b) {
  int id = t.push(matmul_nt(t.val(a), t.val(b)));
  t.set_back(id, [a, b, id](Tape& tp) {
    axpy(tp.grad(a), 1.0, matmul(tp.grad(id), tp.val(b)));
    axpy(tp.grad(b), 1.0, matmul_tn(tp.grad(id), tp.val(a)));
  });
  return id;
}

// Broadcasts a 1 x c bias over every row of a.
inline int add_rowvec(Tape& t, int a, int b) {
  check_shape(t.val(b).rows == 1 && t.val(b).cols == t.val(a).cols, "add_rowvec");
  Mat v = t.val(a);
  const Mat& bias = t.val(b);
  for (int64_t r = 0; r < v.rows; ++r) {
    double* row = v.row(r);
    for (int64_t c = 0; c < v.cols; ++c) row[c] += bias.a[static_cast<size_t>(c)];
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, b, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    axpy(tp.grad(a), 1.0, g);
    Mat& gb = tp.grad(b);
    for (int64_t r = 0; r < g.rows; ++r) {
      const double* row = g.row(r);
      for (int64_t c = 0; c < g.cols; ++c) gb.a[static_cast<size_t>(c)] += row[c];
    }
  });
  return id;
}

inline int tanh_elem(Tape& t, int a) {
  Mat v = t.val(a);
  for (double& x : v.a) x = std::tanh(x);
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& y = tp.val(id);
    Mat& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * (1.0 - y.a[i] * y.a[i]);
  });
  return id;
}

inline int sigmoid_elem(Tape& t, int a) {
  Mat v = t.val(a);
  for (double& x : v.a) x = 1.0 / (1.0 + std::exp(-x));
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& y = tp.val(id);
    Mat& ga = tp.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * y.a[i] * (1.0 - y.a[i]);
  });
  return id;
}

inline int softmax_rows(Tape& t, int a) {
  Mat v = t.val(a);
  for (int64_t r = 0; r < v.rows; ++r) {
    double* row = v.row(r);
    double mx = row[0];
    for (int64_t c = 1; c < v.cols; ++c) mx = std::max(mx, row[c]);
    double sum = 0;
    for (int64_t c = 0; c < v.cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (int64_t c = 0; c < v.cols; ++c) row[c] /= sum;
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& y = tp.val(id);
    Mat& ga = tp.grad(a);
    for (int64_t r = 0; r < g.rows; ++r) {
      const double* gr = g.row(r);
      const double* yr = y.row(r);
      double* gar = ga.row(r);
      double dot = 0;
      for (int64_t c = 0; c < g.cols; ++c) dot += gr[c] * yr[c];
      for (int64_t c = 0; c < g.cols; ++c) gar[c] += yr[c] * (gr[c] - dot);
    }
  });
  return id;
}

constexpr double kNormFloor = 1e-12;

// Rows scaled to unit L2 norm, with a floor against zero rows.
inline int l2_normalize_rows(Tape& t, int a) {
  Mat v = t.val(a);
  for (int64_t r = 0; r < v.rows; ++r) {
    double* row = v.row(r);
    double n = 0;
    for (int64_t c = 0; c < v.cols; ++c) n += row[c] * row[c];
    n = std::max(std::sqrt(n), kNormFloor);
    for (int64_t c = 0; c < v.cols; ++c) row[c] /= n;
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& y = tp.val(id);
    const Mat& x = tp.val(a);
    Mat& ga = tp.grad(a);
    for (int64_t r = 0; r < g.rows; ++r) {
      const double* gr = g.row(r);
      const double* yr = y.row(r);
      const double* xr = x.row(r);
      double* gar = ga.row(r);
      double n = 0;
      for (int64_t c = 0; c < g.cols; ++c) n += xr[c] * xr[c];
      n = std::max(std::sqrt(n), kNormFloor);
      double dot = 0;
      for (int64_t c = 0; c < g.cols; ++c) dot += gr[c] * yr[c];
      for (int64_t c = 0; c < g.cols; ++c) gar[c] += (gr[c] - yr[c] * dot) / n;
    }
  });
  return id;
}

// Per-row log(sum_j mask_ij * exp(a_ij)), max-shifted; rows whose mask is
// empty yield 0 and pass no gradient. The mask is a plain matrix, not a node.
inline int logsumexp_rows_masked(Tape& t, int a, Mat mask) {
  check_shape(t.val(a).same_shape(mask), "logsumexp_rows_masked");
  const Mat& x = t.val(a);
  Mat v(x.rows, 1);
  for (int64_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double* mr = mask.row(r);
    double mx = -HUGE_VAL;
    for (int64_t c = 0; c < x.cols; ++c) {
      if (mr[c] != 0.0) mx = std::max(mx, xr[c]);
    }
    if (mx == -HUGE_VAL) {
      v.at(r, 0) = 0;
      continue;
    }
    double sum = 0;
    for (int64_t c = 0; c < x.cols; ++c) {
      if (mr[c] != 0.0) sum += std::exp(xr[c] - mx);
    }
    v.at(r, 0) = mx + std::log(sum);
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, mask = std::move(mask)](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& y = tp.val(id);
    const Mat& x = tp.val(a);
    Mat& ga = tp.grad(a);
    for (int64_t r = 0; r < x.rows; ++r) {
      if (g.at(r, 0) == 0.0) continue;
      const double* xr = x.row(r);
      const double* mr = mask.row(r);
      double* gar = ga.row(r);
      bool any = false;
      for (int64_t c = 0; c < x.cols; ++c) any |= mr[c] != 0.0;
      if (!any) continue;
      for (int64_t c = 0; c < x.cols; ++c) {
        if (mr[c] != 0.0) gar[c] += g.at(r, 0) * std::exp(xr[c] - y.at(r, 0));
      }
    }
  });
  return id;
}

// Per-row mean over masked entries: rows with an empty mask yield 0 and pass
// no gradient.
inline int masked_row_mean(Tape& t, int a, Mat mask) {
  check_shape(t.val(a).same_shape(mask), "masked_row_mean");
  const Mat& x = t.val(a);
  Mat v(x.rows, 1);
  for (int64_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    const double* mr = mask.row(r);
    double sum = 0, cnt = 0;
    for (int64_t c = 0; c < x.cols; ++c) {
      if (mr[c] != 0.0) {
        sum += xr[c];
        cnt += 1;
      }
    }
    v.at(r, 0) = cnt > 0 ? sum / cnt : 0;
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, mask = std::move(mask)](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    for (int64_t r = 0; r < ga.rows; ++r) {
      if (g.at(r, 0) == 0.0) continue;
      const double* mr = mask.row(r);
      double cnt = 0;
      for (int64_t c = 0; c < ga.cols; ++c) cnt += mr[c] != 0.0 ? 1 : 0;
      if (cnt == 0) continue;
      double* gar = ga.row(r);
      for (int64_t c = 0; c < ga.cols; ++c) {
        if (mr[c] != 0.0) gar[c] += g.at(r, 0) / cnt;
      }
    }
  });
  return id;
}

inline int mean_all(Tape& t, int a) {
  const Mat& x = t.val(a);
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty input");
  Mat v(1, 1);
  for (double e : x.a) v.a[0] += e;
  v.a[0] /= static_cast<double>(x.size());
  int id = t.push(std::move(v));
  t.set_back(id, [a, id](Tape& tp) {
    double g = tp.grad(id).a[0] / static_cast<double>(tp.val(a).size());
    Mat& ga = tp.grad(a);
    for (double& e : ga.a) e += g;
  });
  return id;
}

// Weighted mean of a column vector; zero total weight yields 0 with no
// gradient (the "no valid anchors" case).
inline int mean_weighted(Tape& t, int a, std::vector<double> w) {
  const Mat& x = t.val(a);
  check_shape(x.cols == 1 && x.rows == static_cast<int64_t>(w.size()), "mean_weighted");
  double total = 0;
  for (double e : w) total += e;
  Mat v(1, 1);
  if (total > 0) {
    for (int64_t r = 0; r < x.rows; ++r) v.a[0] += w[static_cast<size_t>(r)] * x.at(r, 0);
    v.a[0] /= total;
  }
  int id = t.push(std::move(v));
  if (total > 0) {
    t.set_back(id, [a, id, total, w = std::move(w)](Tape& tp) {
      double g = tp.grad(id).a[0];
      Mat& ga = tp.grad(a);
      for (int64_t r = 0; r < ga.rows; ++r) ga.at(r, 0) += g * w[static_cast<size_t>(r)] / total;
    });
  }
  return id;
}

inline int concat_cols(Tape& t, int a, int b) {
  const Mat& x = t.val(a);
  const Mat& y = t.val(b);
  check_shape(x.rows == y.rows, "concat_cols");
  Mat v(x.rows, x.cols + y.cols);
  for (int64_t r = 0; r < x.rows; ++r) {
    std::copy(x.row(r), x.row(r) + x.cols, v.row(r));
    std::copy(y.row(r), y.row(r) + y.cols, v.row(r) + x.cols);
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, b, id](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    Mat& gb = tp.grad(b);
    for (int64_t r = 0; r < g.rows; ++r) {
      for (int64_t c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, c);
      for (int64_t c = 0; c < gb.cols; ++c) gb.at(r, c) += g.at(r, ga.cols + c);
    }
  });
  return id;
}

inline int slice_cols(Tape& t, int a, int64_t lo, int64_t hi) {
  const Mat& x = t.val(a);
  if (lo < 0 || hi > x.cols || lo >= hi) throw std::invalid_argument("slice_cols: bad range");
  Mat v(x.rows, hi - lo);
  for (int64_t r = 0; r < x.rows; ++r) std::copy(x.row(r) + lo, x.row(r) + hi, v.row(r));
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, lo](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    for (int64_t r = 0; r < g.rows; ++r) {
      for (int64_t c = 0; c < g.cols; ++c) ga.at(r, lo + c) += g.at(r, c);
    }
  });
  return id;
}

// The next four ops treat an (N*T) x c matrix as N stacked windows of T rows.

// Picks row (w*T + step) of every window: (N*T) x c -> N x c.
inline int gather_step(Tape& t, int a, int T, int step) {
  const Mat& x = t.val(a);
  if (T < 1 || x.rows % T != 0 || step < 0 || step >= T) {
    throw std::invalid_argument("gather_step: bad window shape");
  }
  int64_t n = x.rows / T;
  Mat v(n, x.cols);
  for (int64_t w = 0; w < n; ++w) {
    std::copy(x.row(w * T + step), x.row(w * T + step) + x.cols, v.row(w));
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, T, step](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    for (int64_t w = 0; w < g.rows; ++w) {
      double* dst = ga.row(w * T + step);
      const double* src = g.row(w);
      for (int64_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
  return id;
}

// Inverse of gather_step over a full window: T nodes of shape N x c are
// interleaved back into (N*T) x c step-major order.
inline int stack_steps(Tape& t, const std::vector<int>& steps) {
  if (steps.empty()) throw std::invalid_argument("stack_steps: no steps");
  const int T = static_cast<int>(steps.size());
  const int64_t n = t.val(steps[0]).rows;
  const int64_t c = t.val(steps[0]).cols;
  Mat v(n * T, c);
  for (int k = 0; k < T; ++k) {
    const Mat& x = t.val(steps[k]);
    check_shape(x.rows == n && x.cols == c, "stack_steps");
    for (int64_t w = 0; w < n; ++w) std::copy(x.row(w), x.row(w) + c, v.row(w * T + k));
  }
  int id = t.push(std::move(v));
  t.set_back(id, [steps, id, T](Tape& tp) {
    const Mat& g = tp.grad(id);
    for (int k = 0; k < T; ++k) {
      Mat& ga = tp.grad(steps[k]);
      for (int64_t w = 0; w < ga.rows; ++w) {
        const double* src = g.row(w * T + k);
        double* dst = ga.row(w);
        for (int64_t c2 = 0; c2 < g.cols; ++c2) dst[c2] += src[c2];
      }
    }
  });
  return id;
}

// N x c -> (N*T) x c by repeating each row T times.
inline int repeat_rows(Tape& t, int a, int T) {
  const Mat& x = t.val(a);
  Mat v(x.rows * T, x.cols);
  for (int64_t w = 0; w < x.rows; ++w) {
    for (int k = 0; k < T; ++k) std::copy(x.row(w), x.row(w) + x.cols, v.row(w * T + k));
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, T](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    for (int64_t w = 0; w < ga.rows; ++w) {
      double* dst = ga.row(w);
      for (int k = 0; k < T; ++k) {
        const double* src = g.row(w * T + k);
        for (int64_t c = 0; c < g.cols; ++c) dst[c] += src[c];
      }
    }
  });
  return id;
}

// Mean over each window's T rows: (N*T) x c -> N x c.
inline int window_mean(Tape& t, int a, int T) {
  const Mat& x = t.val(a);
  if (T < 1 || x.rows % T != 0) throw std::invalid_argument("window_mean: bad window shape");
  Mat v(x.rows / T, x.cols);
  for (int64_t w = 0; w < v.rows; ++w) {
    double* dst = v.row(w);
    for (int k = 0; k < T; ++k) {
      const double* src = x.row(w * T + k);
      for (int64_t c = 0; c < x.cols; ++c) dst[c] += src[c];
    }
    for (int64_t c = 0; c < x.cols; ++c) dst[c] /= T;
  }
  int id = t.push(std::move(v));
  t.set_back(id, [a, id, T](Tape& tp) {
    const Mat& g = tp.grad(id);
    Mat& ga = tp.grad(a);
    for (int64_t w = 0; w < g.rows; ++w) {
      const double* src = g.row(w);
      for (int k = 0; k < T; ++k) {
        double* dst = ga.row(w * T + k);
        for (int64_t c = 0; c < g.cols; ++c) dst[c] += src[c] / T;
      }
    }
  });
  return id;
}

// Per-window scaled dot-product scores: S[w*T+i][j] = q_wi . k_wj / sqrt(h).
inline int attn_scores(Tape& t, int q, int k, int T) {
  const Mat& Q = t.val(q);
  const Mat& K = t.val(k);
  check_shape(Q.same_shape(K), "attn_scores");
  if (T < 1 || Q.rows % T != 0) throw std::invalid_argument("attn_scores: bad window shape");
  double inv = 1.0 / std::sqrt(static_cast<double>(Q.cols));
  int64_t n = Q.rows / T;
  Mat v(Q.rows, T);
  for (int64_t w = 0; w < n; ++w) {
    for (int i = 0; i < T; ++i) {
      const double* qi = Q.row(w * T + i);
      double* out = v.row(w * T + i);
      for (int j = 0; j < T; ++j) {
        const double* kj = K.row(w * T + j);
        double s = 0;
        for (int64_t c = 0; c < Q.cols; ++c) s += qi[c] * kj[c];
        out[j] = s * inv;
      }
    }
  }
  int id = t.push(std::move(v));
  t.set_back(id, [q, k, id, T, inv](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& Q = tp.val(q);
    const Mat& K = tp.val(k);
    Mat& gq = tp.grad(q);
    Mat& gk = tp.grad(k);
    int64_t n = Q.rows / T;
    for (int64_t w = 0; w < n; ++w) {
      for (int i = 0; i < T; ++i) {
        const double* gi = g.row(w * T + i);
        const double* qi = Q.row(w * T + i);
        double* gqi = gq.row(w * T + i);
        for (int j = 0; j < T; ++j) {
          double gij = gi[j] * inv;
          if (gij == 0.0) continue;
          const double* kj = K.row(w * T + j);
          double* gkj = gk.row(w * T + j);
          for (int64_t c = 0; c < Q.cols; ++c) {
            gqi[c] += gij * kj[c];
            gkj[c] += gij * qi[c];
          }
        }
      }
    }
  });
  return id;
}

// Per-window weighted value mix: out[w*T+i] = sum_j P[w*T+i][j] * v_wj.
inline int attn_apply(Tape& t, int p, int v, int T) {
  const Mat& P = t.val(p);
  const Mat& V = t.val(v);
  if (T < 1 || P.rows % T != 0 || P.cols != T || V.rows != P.rows) {
    throw std::invalid_argument("attn_apply: bad window shape");
  }
  int64_t n = P.rows / T;
  Mat out(P.rows, V.cols);
  for (int64_t w = 0; w < n; ++w) {
    for (int i = 0; i < T; ++i) {
      const double* pi = P.row(w * T + i);
      double* oi = out.row(w * T + i);
      for (int j = 0; j < T; ++j) {
        double pij = pi[j];
        if (pij == 0.0) continue;
        const double* vj = V.row(w * T + j);
        for (int64_t c = 0; c < V.cols; ++c) oi[c] += pij * vj[c];
      }
    }
  }
  int id = t.push(std::move(out));
  t.set_back(id, [p, v, id, T](Tape& tp) {
    const Mat& g = tp.grad(id);
    const Mat& P = tp.val(p);
    const Mat& V = tp.val(v);
    Mat& gp = tp.grad(p);
    Mat& gv = tp.grad(v);
    int64_t n = P.rows / T;
    for (int64_t w = 0; w < n; ++w) {
      for (int i = 0; i < T; ++i) {
        const double* gi = g.row(w * T + i);
        const double* pi = P.row(w * T + i);
        double* gpi = gp.row(w * T + i);
        for (int j = 0; j < T; ++j) {
          const double* vj = V.row(w * T + j);
          double* gvj = gv.row(w * T + j);
          double acc = 0;
          for (int64_t c = 0; c < V.cols; ++c) {
            acc += gi[c] * vj[c];
            gvj[c] += pi[j] * gi[c];
          }
          gpi[j] += acc;
        }
      }
    }
  });
  return id;
}

}  // namespace loblab
