#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "han/error.hpp"

namespace han {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// SplitMix64 (Steele, Lea & Flood 2014), used as a counter-based generator:
/// draw n is mix(seed + n * 0x9E3779B97F4A7C15). The stream depends only on
/// the seed and the draw counter, so results are identical on every platform.
/// Floating-point draws are built from the integer stream by hand because the
/// <random> distributions are implementation-defined.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-v1";

  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Independent child stream keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

double sigmoid(double x);

/// Softmax with max-subtraction. Throws DimensionError on empty input.
Vector stable_softmax(std::span<const double> z);

/// Log of the softmax normalizer, log(sum(exp(z))), computed stably.
double log_sum_exp(std::span<const double> z);

Vector matvec(const Matrix& m, std::span<const double> v);
/// m^T v.
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
/// out += m^T v.
void matvec_transposed_acc(const Matrix& m, std::span<const double> v, std::span<double> out);
/// m += a b^T.
void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b);

Vector hadamard(std::span<const double> a, std::span<const double> b);
Vector tanh_vec(std::span<const double> v);
Vector sigmoid_vec(std::span<const double> v);

/// a += b.
void add_inplace(std::span<double> a, std::span<const double> b);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

Vector concat(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);
/// Throws NumericError naming `what` if v holds a NaN or Inf.
void require_finite(std::span<const double> v, const std::string& what);

/// Throws DimensionError naming both sizes if they differ.
void require_size(std::size_t got, std::size_t expected, const std::string& what);

/// Central finite differences of f around theta, one coordinate at a time:
/// (f(theta + h e_i) - f(theta - h e_i)) / (2h). A non-finite f value throws
/// NumericError naming the coordinate.
Vector finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> theta, double h = 1e-5);

/// Richardson-extrapolated central differences, (4 D(h) - D(2h)) / 3. The
/// truncation error drops to O(h^4), which lets h be large enough that
/// cancellation in f(theta + h) - f(theta - h) stops dominating on tiny
/// gradient entries.
Vector richardson_gradient(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> theta, double h = 2e-3);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace han
