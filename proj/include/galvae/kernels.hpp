#pragma once

// Data-parallel inner loops. Every OpenMP kernel has a serial twin that
// performs the same per-element summations in the same order, so the two
// are bit-identical regardless of thread count. The serial versions are
// kept for tests and for bench_kernels.

#include <span>
#include <vector>

#include "galvae/numerics.hpp"

namespace galvae {

/// Caps OpenMP fan-out for all kernels. n <= 0 restores the runtime default.
void set_thread_limit(int n);
int thread_limit();

namespace kernels {

Matrix mat_mul_serial(const Matrix& a, const Matrix& b);
Matrix mat_mul_parallel(const Matrix& a, const Matrix& b);

// a * b^T
Matrix mat_mul_nt_serial(const Matrix& a, const Matrix& b);
Matrix mat_mul_nt_parallel(const Matrix& a, const Matrix& b);

// a^T * b
Matrix mat_mul_tn_serial(const Matrix& a, const Matrix& b);
Matrix mat_mul_tn_parallel(const Matrix& a, const Matrix& b);

// Unbiased covariance of rows of `centered` (already mean-subtracted).
Matrix covariance_serial(const Matrix& centered);
Matrix covariance_parallel(const Matrix& centered);

// out[j] = mean_i (real_i . gen_j) / (|real_i| |gen_j|)
Vector mean_cosine_serial(std::span<const Vector> real, std::span<const Vector> gen);
Vector mean_cosine_parallel(std::span<const Vector> real, std::span<const Vector> gen);

// out[j] = max_i cos(real_i, gen_j)
Vector max_cosine_serial(std::span<const Vector> real, std::span<const Vector> gen);
Vector max_cosine_parallel(std::span<const Vector> real, std::span<const Vector> gen);

}  // namespace kernels

inline Matrix mat_mul_nt(const Matrix& a, const Matrix& b) {
  return kernels::mat_mul_nt_parallel(a, b);
}
inline Matrix mat_mul_tn(const Matrix& a, const Matrix& b) {
  return kernels::mat_mul_tn_parallel(a, b);
}

}  // namespace galvae
