#pragma once

// Dense row-major matrices of doubles and the elementary kernels built on
// them. Every product accumulates each output element strictly in increasing
// k order starting from 0.0, so the blocked, parallel and reference paths
// agree bit for bit (requires -ffp-contract=off, set by the build).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "diet/error.hpp"

namespace diet {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " != " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m.values())) {
    throw NumericError(std::string(what) + ": non-finite entry");
  }
}

namespace detail {

using f64x4 = double __attribute__((vector_size(32)));

// c[row_begin:row_end, :] = a[row_begin:row_end, :] * b, c zero-initialised.
// 8x8 register tiles; lanes are independent output elements.
inline void gemm_rows(const double* a, const double* b, double* c,
                      std::size_t row_begin, std::size_t row_end,
                      std::size_t k, std::size_t n) {
  constexpr std::size_t kR = 8;
  constexpr std::size_t kV = 2;
  constexpr std::size_t kC = 4 * kV;
  std::size_t i = row_begin;
  for (; i + kR <= row_end; i += kR) {
    std::size_t j = 0;
    for (; j + kC <= n; j += kC) {
      f64x4 acc[kR][kV] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * n + j;
        f64x4 bv[kV];
        for (std::size_t q = 0; q < kV; ++q) std::memcpy(&bv[q], bp + 4 * q, sizeof(f64x4));
        for (std::size_t r = 0; r < kR; ++r) {
          const double ar = a[(i + r) * k + p];
          const f64x4 av = {ar, ar, ar, ar};
          for (std::size_t q = 0; q < kV; ++q) acc[r][q] += av * bv[q];
        }
      }
      for (std::size_t r = 0; r < kR; ++r)
        for (std::size_t q = 0; q < kV; ++q)
          std::memcpy(c + (i + r) * n + j + 4 * q, &acc[r][q], sizeof(f64x4));
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < kR; ++r) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += a[(i + r) * k + p] * b[p * n + j];
        c[(i + r) * n + j] = s;
      }
    }
  }
  // Leftover rows: i-k-j order, still sequential in k per element.
  for (; i < row_end; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

inline void check_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
}

}  // namespace detail

inline Matrix transpose(const Matrix& m) {
  constexpr std::size_t kTile = 32;
  Matrix t(m.cols(), m.rows());
  for (std::size_t r0 = 0; r0 < m.rows(); r0 += kTile)
    for (std::size_t c0 = 0; c0 < m.cols(); c0 += kTile) {
      const std::size_t r1 = std::min(m.rows(), r0 + kTile);
      const std::size_t c1 = std::min(m.cols(), c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) t(c, r) = m(r, c);
    }
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::check_matmul(a, b);
  Matrix c(a.rows(), b.cols());
  detail::gemm_rows(a.data(), b.data(), c.data(), 0, a.rows(), a.cols(),
                    b.cols());
  require_finite(c, "matmul");
  return c;
}

// Same contract as matmul; rows are split across `threads` workers. Each
// output element is still produced by exactly one worker in the serial
// accumulation order, so the result is bit-identical to matmul().
inline Matrix matmul_parallel(const Matrix& a, const Matrix& b,
                              unsigned threads) {
  detail::check_matmul(a, b);
  Matrix c(a.rows(), b.cols());
  threads = std::max(1u, std::min<unsigned>(threads, a.rows() ? a.rows() : 1));
  const std::size_t chunk = (a.rows() + threads - 1) / threads;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(a.rows(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        detail::gemm_rows(a.data(), b.data(), c.data(), lo, hi, a.cols(),
                          b.cols());
      });
    }
  }
  require_finite(c, "matmul");
  return c;
}

// a * b^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_bt: " + shape_str(a) + " * (" +
                         shape_str(b) + ")^T");
  }
  return matmul(a, transpose(b));
}

// a^T * b
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_at: (" + shape_str(a) + ")^T * " +
                         shape_str(b));
  }
  return matmul(transpose(a), b);
}

// Row-wise softmax with the row max subtracted before exponentiation.
inline Matrix softmax_rows(const Matrix& z) {
  require_finite(z, "softmax_rows input");
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto in = z.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

struct ReluResult {
  Matrix out;
  Matrix mask;  // 1.0 where the input was > 0, else 0.0
};

inline ReluResult relu_forward(const Matrix& z) {
  ReluResult res{Matrix(z.rows(), z.cols()), Matrix(z.rows(), z.cols())};
  auto in = z.values();
  auto out = res.out.values();
  auto mask = res.mask.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool on = in[i] > 0.0;
    out[i] = on ? in[i] : 0.0;
    mask[i] = on ? 1.0 : 0.0;
  }
  return res;
}

inline Matrix relu_backward(const Matrix& grad, const Matrix& mask) {
  if (!grad.same_shape(mask)) {
    throw DimensionError("relu_backward: grad " + shape_str(grad) +
                         " vs mask " + shape_str(mask));
  }
  Matrix out(grad.rows(), grad.cols());
  auto g = grad.values();
  auto m = mask.values();
  auto o = out.values();
  for (std::size_t i = 0; i < g.size(); ++i) o[i] = g[i] * m[i];
  return out;
}

// FNV-1a over the raw bytes; used to fingerprint parameters in tests/logs.
inline std::uint64_t checksum(std::span<const double> v) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace diet
