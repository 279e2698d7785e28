#include "han/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace han {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kUnsupportedVersion: return "unsupported version";
    case FormatErrorKind::kTruncatedHeader: return "truncated header";
    case FormatErrorKind::kTruncatedPayload: return "truncated payload";
    case FormatErrorKind::kTrailingBytes: return "header/payload length mismatch";
    case FormatErrorKind::kBadStreamCount: return "bad stream count";
    case FormatErrorKind::kBadDtype: return "bad dtype tag";
    case FormatErrorKind::kZeroDimension: return "zero dimension";
    case FormatErrorKind::kEmptySequence: return "empty sequence";
    case FormatErrorKind::kConfigMismatch: return "config mismatch";
    case FormatErrorKind::kShapeInconsistent: return "shape inconsistent";
    case FormatErrorKind::kNonFinitePayload: return "non-finite payload";
  }
  return "format error";
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return splitmix64_mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(splitmix64_mix(seed_ ^ splitmix64_mix(stream + 0x632BE59BD9B4E019ULL)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector stable_softmax(std::span<const double> z) {
  if (z.empty()) throw DimensionError("stable_softmax: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  Vector out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double log_sum_exp(std::span<const double> z) {
  if (z.empty()) throw DimensionError("log_sum_exp: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

void require_size(std::size_t got, std::size_t expected, const std::string& what) {
  if (got != expected) {
    throw DimensionError(what + ": expected size " + std::to_string(expected) + ", got " +
                         std::to_string(got));
  }
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  if (v.size() != m.cols()) {
    throw DimensionError("matvec: matrix " + m.shape_string() + " vs vector " +
                         std::to_string(v.size()));
  }
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v);
  return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  Vector out(m.cols(), 0.0);
  matvec_transposed_acc(m, v, out);
  return out;
}

void matvec_transposed_acc(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (v.size() != m.rows() || out.size() != m.cols()) {
    throw DimensionError("matvec_transposed: matrix " + m.shape_string() + " vs vector " +
                         std::to_string(v.size()) + " -> " + std::to_string(out.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = v[r];
    if (s == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += s * row[c];
  }
}

void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw DimensionError("outer_acc: matrix " + m.shape_string() + " vs " +
                         std::to_string(a.size()) + "x" + std::to_string(b.size()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = a[r];
    if (s == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += s * b[c];
  }
}

namespace {

void require_same(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": size " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

}  // namespace

Vector hadamard(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "hadamard");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vector tanh_vec(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
  return out;
}

Vector sigmoid_vec(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), sigmoid);
  return out;
}

void add_inplace(std::span<double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

Vector finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_gradient: step must be positive");
  Vector point(theta.begin(), theta.end());
  Vector grad(theta.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite objective at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Vector richardson_gradient(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> theta, double h) {
  const Vector fine = finite_diff_gradient(f, theta, h);
  const Vector coarse = finite_diff_gradient(f, theta, 2.0 * h);
  Vector out(fine.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return out;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace han
