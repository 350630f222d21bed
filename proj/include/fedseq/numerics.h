/*
 * Copyright 2026 The fedseq Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef FEDSEQ_NUMERICS_H_
#define FEDSEQ_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedseq {

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void set_zero();
  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// out = a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// out = a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double sigmoid(double x);

// Throws std::invalid_argument on length mismatch or a zero-norm input.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> v);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences. Throws std::domain_error naming the coordinate when f
// is not finite at a probe point.
std::vector<double> numeric_gradient(const ScalarFunction& f,
                                     std::span<const double> theta,
                                     double h = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-3);

// Deterministic generator keyed by (seed, stream label). Streams with
// different labels never share draws, so toggling one consumer leaves the
// others untouched. Only mt19937_64 raw output is used; the bounded and real
// draws below are implemented here because the standard distributions are
// implementation-defined.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string_view stream);

  // Independent child stream, e.g. fork(round).fork(client).
  SeededRng fork(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  const std::string& stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // k distinct values from [0, n), in draw order.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n,
                                                        std::uint64_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  SeededRng(std::uint64_t seed, std::string stream, std::uint64_t key);

  std::uint64_t seed_;
  std::string stream_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fedseq

#endif  // FEDSEQ_NUMERICS_H_
