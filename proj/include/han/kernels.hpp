#pragma once

#include <span>

#include "han/numerics.hpp"

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; the two produce bit-identical results because each output
// element is reduced by exactly one thread in a fixed order.
namespace han::kernels {

/// out = m x (serial reference).
void gemv_serial(const Matrix& m, std::span<const double> x, std::span<double> out);
/// out = m x, rows split across OpenMP threads.
void gemv_parallel(const Matrix& m, std::span<const double> x, std::span<double> out);
/// Picks the parallel kernel once the matrix is large enough to amortize the fork.
void gemv(const Matrix& m, std::span<const double> x, std::span<double> out);

/// out += m^T v, columns split across threads (serial reference is matvec_transposed_acc).
void gemv_t_acc_parallel(const Matrix& m, std::span<const double> v, std::span<double> out);
void gemv_t_acc(const Matrix& m, std::span<const double> v, std::span<double> out);

/// m += a b^T, rows split across threads (serial reference is outer_acc).
void outer_acc_parallel(Matrix& m, std::span<const double> a, std::span<const double> b);
void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b);

/// Element count above which the dispatching kernels go parallel.
inline constexpr std::size_t kParallelThreshold = 1 << 16;

int max_threads();
/// Caps OpenMP worker threads for the whole process (values < 1 are ignored).
void set_threads(int n);

}  // namespace han::kernels
