#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace loblab {

// Dense row-major double matrix. Everything the trainers need is a handful of
// fused loops; keeping the type dumb makes gradients easy to audit.
struct Mat {
  int64_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int64_t r, int64_t c) : rows(r), cols(c), a(static_cast<size_t>(r * c), 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Mat: negative shape");
  }
  static Mat full(int64_t r, int64_t c, double v) {
    Mat m(r, c);
    std::fill(m.a.begin(), m.a.end(), v);
    return m;
  }

  double& at(int64_t r, int64_t c) { return a[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return a[static_cast<size_t>(r * cols + c)]; }
  double* row(int64_t r) { return a.data() + r * cols; }
  const double* row(int64_t r) const { return a.data() + r * cols; }
  int64_t size() const { return rows * cols; }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Mat&) const = default;
};

inline void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("Mat: shape mismatch in ") + what);
}

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
  check_shape(A.cols == B.rows, "matmul");
  Mat C(A.rows, B.cols);
  for (int64_t i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (int64_t k = 0; k < A.cols; ++k) {
      double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = B.row(k);
      for (int64_t j = 0; j < B.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return C;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& A, const Mat& B) {
  check_shape(A.cols == B.cols, "matmul_nt");
  Mat C(A.rows, B.rows);
  for (int64_t i = 0; i < A.rows; ++i) {
    const double* ai = A.row(i);
    double* ci = C.row(i);
    for (int64_t j = 0; j < B.rows; ++j) {
      const double* bj = B.row(j);
      double s = 0;
      for (int64_t k = 0; k < A.cols; ++k) s += ai[k] * bj[k];
      ci[j] = s;
    }
  }
  return C;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& A, const Mat& B) {
  check_shape(A.rows == B.rows, "matmul_tn");
  Mat C(A.cols, B.cols);
  for (int64_t r = 0; r < A.rows; ++r) {
    const double* ar = A.row(r);
    const double* br = B.row(r);
    for (int64_t i = 0; i < A.cols; ++i) {
      double ari = ar[i];
      if (ari == 0.0) continue;
      double* ci = C.row(i);
      for (int64_t j = 0; j < B.cols; ++j) ci[j] += ari * br[j];
    }
  }
  return C;
}

inline void axpy(Mat& y, double alpha, const Mat& x) {
  check_shape(y.same_shape(x), "axpy");
  for (int64_t i = 0; i < y.size(); ++i) y.a[i] += alpha * x.a[i];
}

inline bool all_finite(const Mat& m) {
  for (double v : m.a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// FNV-1a over the raw byte image; used to prove frozen weights stayed frozen.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t hash_mat(const Mat& m, uint64_t h = 0xcbf29ce484222325ULL) {
  h = fnv1a64(&m.rows, sizeof(m.rows), h);
  h = fnv1a64(&m.cols, sizeof(m.cols), h);
  return fnv1a64(m.a.data(), m.a.size() * sizeof(double), h);
}

}  // namespace loblab
