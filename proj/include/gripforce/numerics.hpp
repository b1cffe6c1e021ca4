// Copyright 2026 The gripforce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gripforce/error.hpp"

namespace gripforce {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows_ * cols_,
                    "Matrix: data length " + std::to_string(data_.size()) +
                        " != " + shape_string());
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  const Vector& data() const { return data_; }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// Standard product, accumulating over the inner index in ascending order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: shape mismatch " + a.shape_string() + " * " +
                            b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Vector kernels. All of them keep the per-output summation order of the
// textbook loop, so vectorised and scalar builds agree bit for bit.
namespace kernels {

/// y += A x, where `at` holds A transposed (D x N for an N x D matrix A).
/// Columns are consumed four at a time; each y[i] still sums in ascending j.
inline void matvec_acc_transposed(const Matrix& at, std::span<const double> x,
                                  std::span<double> y) {
  const std::size_t n = at.cols();
  const std::size_t d = at.rows();
  double* __restrict yp = y.data();
  std::size_t j = 0;
  for (; j + 4 <= d; j += 4) {
    const double x0 = x[j], x1 = x[j + 1], x2 = x[j + 2], x3 = x[j + 3];
    const double* __restrict c0 = at.row(j).data();
    const double* __restrict c1 = at.row(j + 1).data();
    const double* __restrict c2 = at.row(j + 2).data();
    const double* __restrict c3 = at.row(j + 3).data();
    for (std::size_t i = 0; i < n; ++i)
      yp[i] = (((yp[i] + c0[i] * x0) + c1[i] * x1) + c2[i] * x2) + c3[i] * x3;
  }
  for (; j < d; ++j) {
    const double xj = x[j];
    const double* __restrict c = at.row(j).data();
    for (std::size_t i = 0; i < n; ++i) yp[i] += c[i] * xj;
  }
}

/// y += A^T u for row-major A (N x D), u of length N, y of length D.
inline void matvec_t_acc(const Matrix& a, std::span<const double> u, std::span<double> y) {
  matvec_acc_transposed(a, u, y);
}

/// A += u v^T.
inline void outer_acc(Matrix& a, std::span<const double> u, std::span<const double> v) {
  const std::size_t d = a.cols();
  const double* __restrict vp = v.data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double ui = u[i];
    double* __restrict r = a.row(i).data();
    for (std::size_t j = 0; j < d; ++j) r[j] += ui * vp[j];
  }
}

}  // namespace kernels

/// xoshiro256** seeded through splitmix64. The stream is fixed by the seed
/// alone and does not depend on the platform's <random> implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    detail::require(n > 0, "Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  /// One N(0,1) draw: Box-Muller cosine branch, consuming two uniforms.
  double standard_normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
};

/// Derives an independent stream seed from a base seed and a tag, e.g.
/// (seed, epoch) or (seed, pair, handover).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t x = base ^ (tag * 0xd1b54a32d192ed03ULL);
  Rng::splitmix64(x);
  return Rng::splitmix64(x);
}

inline Vector rng_normal(Rng& rng, std::size_t n, double mean, double std_dev) {
  if (!(std_dev >= 0.0)) throw ContractViolation("rng_normal: std must be >= 0");
  Vector out(n);
  for (auto& v : out) v = mean + std_dev * rng.standard_normal();
  return out;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace gripforce
