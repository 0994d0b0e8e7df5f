#include "galvae/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "galvae/error.hpp"

namespace galvae {

namespace {
int g_thread_limit = 0;
}

void set_thread_limit(int n) {
  g_thread_limit = n > 0 ? n : 0;
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
}

int thread_limit() { return g_thread_limit > 0 ? g_thread_limit : omp_get_max_threads(); }

namespace kernels {

namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* op) {
  if (lhs != rhs) throw DataError(std::string(op) + ": inner dimension mismatch");
}

using Index = std::ptrdiff_t;

}  // namespace

Matrix mat_mul_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "mat_mul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix mat_mul_parallel(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "mat_mul");
  Matrix c(a.rows(), b.cols());
  const Index rows = static_cast<Index>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  // i-k-j order: each c(i, j) still accumulates over k in increasing order.
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    auto crow = c.row(static_cast<std::size_t>(i));
    const auto arow = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = arow[k];
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix mat_mul_nt_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "mat_mul_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

Matrix mat_mul_nt_parallel(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "mat_mul_nt");
  Matrix c(a.rows(), b.rows());
  const Index rows = static_cast<Index>(a.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    const auto arow = a.row(static_cast<std::size_t>(i));
    auto crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
      crow[j] = s;
    }
  }
  return c;
}

Matrix mat_mul_tn_serial(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "mat_mul_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Matrix mat_mul_tn_parallel(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "mat_mul_tn");
  Matrix c(a.cols(), b.cols());
  const Index rows = static_cast<Index>(a.cols());
  const std::size_t cols = b.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    auto crow = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.rows(); ++k) {
      const double aki = a(k, static_cast<std::size_t>(i));
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix covariance_serial(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw DataError("covariance: need at least 2 rows");
  Matrix c(d, d);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += x(k, i) * x(k, j);
      c(i, j) = s / denom;
      c(j, i) = c(i, j);
    }
  return c;
}

Matrix covariance_parallel(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw DataError("covariance: need at least 2 rows");
  const Matrix xt = transpose(x);
  Matrix c(d, d);
  const double denom = static_cast<double>(n - 1);
#pragma omp parallel for schedule(dynamic, 4)
  for (Index ii = 0; ii < static_cast<Index>(d); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto xi = xt.row(i);
    for (std::size_t j = i; j < d; ++j) {
      const auto xj = xt.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += xi[k] * xj[k];
      c(i, j) = s / denom;
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) c(j, i) = c(i, j);
  return c;
}

namespace {

Vector norms_of(std::span<const Vector> vs) {
  Vector out(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) out[i] = norm(vs[i]);
  return out;
}

void check_latents(std::span<const Vector> real, std::span<const Vector> gen) {
  if (real.empty() || gen.empty()) throw DataError("cosine scores: empty latent set");
  const std::size_t d = real.front().size();
  for (const auto& v : real)
    if (v.size() != d) throw DataError("cosine scores: dimension mismatch");
  for (const auto& v : gen)
    if (v.size() != d) throw DataError("cosine scores: dimension mismatch");
}

double cosine(std::span<const double> a, double na, std::span<const double> b, double nb) {
  return dot(a, b) / (na * nb);
}

}  // namespace

Vector mean_cosine_serial(std::span<const Vector> real, std::span<const Vector> gen) {
  check_latents(real, gen);
  const Vector rn = norms_of(real);
  const Vector gn = norms_of(gen);
  Vector out(gen.size());
  for (std::size_t j = 0; j < gen.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) s += cosine(real[i], rn[i], gen[j], gn[j]);
    out[j] = s / static_cast<double>(real.size());
  }
  return out;
}

Vector mean_cosine_parallel(std::span<const Vector> real, std::span<const Vector> gen) {
  check_latents(real, gen);
  const Vector rn = norms_of(real);
  const Vector gn = norms_of(gen);
  Vector out(gen.size());
#pragma omp parallel for schedule(static)
  for (Index jj = 0; jj < static_cast<Index>(gen.size()); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double s = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) s += cosine(real[i], rn[i], gen[j], gn[j]);
    out[j] = s / static_cast<double>(real.size());
  }
  return out;
}

Vector max_cosine_serial(std::span<const Vector> real, std::span<const Vector> gen) {
  check_latents(real, gen);
  const Vector rn = norms_of(real);
  const Vector gn = norms_of(gen);
  Vector out(gen.size());
  for (std::size_t j = 0; j < gen.size(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < real.size(); ++i)
      best = std::max(best, cosine(real[i], rn[i], gen[j], gn[j]));
    out[j] = best;
  }
  return out;
}

Vector max_cosine_parallel(std::span<const Vector> real, std::span<const Vector> gen) {
  check_latents(real, gen);
  const Vector rn = norms_of(real);
  const Vector gn = norms_of(gen);
  Vector out(gen.size());
#pragma omp parallel for schedule(static)
  for (Index jj = 0; jj < static_cast<Index>(gen.size()); ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < real.size(); ++i)
      best = std::max(best, cosine(real[i], rn[i], gen[j], gn[j]));
    out[j] = best;
  }
  return out;
}

}  // namespace kernels
}  // namespace galvae
