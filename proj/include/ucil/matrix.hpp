#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ucil {

/// Dense row-major matrix of doubles. The single numeric container used
/// throughout the library; all published values are expected to be finite.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("Matrix::from_rows: data length does not match shape");
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(0.0); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double max_abs_diff(const Matrix& o) const {
    if (!same_shape(o)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i)
      m = std::max(m, std::abs(data_[i] - o.data_[i]));
    return m;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// C = A * B
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  if (!accumulate) {
    out = Matrix(a.rows(), b.cols());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* out_i = out.row(i);
    const double* a_i = a.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_i[p];
      if (aip == 0.0) continue;
      const double* b_p = b.row(p);
      for (std::size_t j = 0; j < m; ++j) out_i[j] += aip * b_p[j];
    }
  }
}

// C = A * B^T
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false) {
  require_shape(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  if (!accumulate) {
    out = Matrix(a.rows(), b.rows());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* a_i = a.row(i);
    double* out_i = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* b_j = b.row(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_i[p] * b_j[p];
      out_i[j] += acc;
    }
  }
}

// C = A^T * B
inline void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate = false) {
  require_shape(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  if (!accumulate) {
    out = Matrix(a.cols(), b.cols());
  }
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_p = a.row(p);
    const double* b_p = b.row(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double aip = a_p[i];
      if (aip == 0.0) continue;
      double* out_i = out.row(i);
      for (std::size_t j = 0; j < m; ++j) out_i[j] += aip * b_p[j];
    }
  }
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  detail::gemm_nn(a, b, out);
  return out;
}

/// Deterministic random source. Wraps a SplitMix64 stream so that every draw
/// is reproducible bit-for-bit regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds diverge immediately.
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Stable seed derivation: one named substream per component, so adding or
/// removing a consumer never shifts another component's stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return seed ^ h;
}

}  // namespace ucil
