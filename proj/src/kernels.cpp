#include "han/kernels.hpp"

#include <omp.h>

namespace han::kernels {

namespace {

void check_gemv(const Matrix& m, std::span<const double> x, std::span<double> out) {
  if (x.size() != m.cols() || out.size() != m.rows()) {
    throw DimensionError("gemv: matrix " + m.shape_string() + " vs vector " +
                         std::to_string(x.size()) + " -> " + std::to_string(out.size()));
  }
}

}  // namespace

void gemv_serial(const Matrix& m, std::span<const double> x, std::span<double> out) {
  check_gemv(m, x, out);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

void gemv_parallel(const Matrix& m, std::span<const double> x, std::span<double> out) {
  check_gemv(m, x, out);
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto row = m.row(static_cast<std::size_t>(r));
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[static_cast<std::size_t>(r)] = s;
  }
}

void gemv(const Matrix& m, std::span<const double> x, std::span<double> out) {
  if (m.size() >= kParallelThreshold && !omp_in_parallel()) {
    gemv_parallel(m, x, out);
  } else {
    gemv_serial(m, x, out);
  }
}

void gemv_t_acc_parallel(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (v.size() != m.rows() || out.size() != m.cols()) {
    throw DimensionError("gemv_t_acc: matrix " + m.shape_string() + " vs vector " +
                         std::to_string(v.size()) + " -> " + std::to_string(out.size()));
  }
  // Threads own contiguous column blocks and sweep rows in ascending order,
  // so every output sums in the same order as the serial loop while reading
  // each row segment contiguously.
  const std::size_t cols = m.cols();
#pragma omp parallel
  {
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    const auto id = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t lo = cols * id / nt;
    const std::size_t hi = cols * (id + 1) / nt;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double s = v[r];
      if (s == 0.0) continue;
      const auto row = m.row(r);
      for (std::size_t c = lo; c < hi; ++c) out[c] += s * row[c];
    }
  }
}

void gemv_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out) {
  if (m.size() >= kParallelThreshold && !omp_in_parallel()) {
    gemv_t_acc_parallel(m, v, out);
  } else {
    matvec_transposed_acc(m, v, out);
  }
}

void outer_acc_parallel(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw DimensionError("outer_acc: matrix " + m.shape_string() + " vs " +
                         std::to_string(a.size()) + "x" + std::to_string(b.size()));
  }
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const double s = a[static_cast<std::size_t>(r)];
    if (s == 0.0) continue;
    auto row = m.row(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += s * b[c];
  }
}

void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (m.size() >= kParallelThreshold && !omp_in_parallel()) {
    outer_acc_parallel(m, a, b);
  } else {
    han::outer_acc(m, a, b);
  }
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n >= 1) omp_set_num_threads(n);
}

}  // namespace han::kernels
