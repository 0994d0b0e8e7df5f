#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace galvae {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
bool all_finite(std::span<const double> xs);

/// Standard product. Throws DataError on a.cols != b.rows.
Matrix mat_mul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

struct JacobiOptions {
  double symmetry_tol = 1e-10;
  double off_diagonal_tol = 1e-12;
  int max_sweeps = 100;
  bool want_vectors = true;
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Converges when the off-diagonal Frobenius norm drops to
/// off_diagonal_tol times the Frobenius norm of the input. Eigenvalues are
/// returned in descending order with matching eigenvector columns.
/// Throws DataError for non-square or asymmetric input and NumericalError
/// if max_sweeps pass without convergence.
EigenDecomposition sym_eig(const Matrix& a, const JacobiOptions& opts = {});

/// Principal square root of a symmetric PSD matrix. Eigenvalues in
/// [-1e-10, 0) are clamped to zero; anything lower raises NumericalError.
Matrix psd_sqrt(const Matrix& a);

inline constexpr double kPsdClampTol = 1e-10;

struct GaussianStats {
  Vector mean;
  Matrix cov;
};

/// Sample mean and unbiased (n - 1) covariance. The covariance is filled
/// from its upper triangle so transposed entries are bit-equal.
GaussianStats estimate_gaussian_stats(std::span<const Vector> features);

using ScalarFn = std::function<double(const Vector&)>;

/// Central differences with h = 1e-5. Returns
/// max_i |g_fd - g_an| / max(1, |g_fd|, |g_an|).
double gradient_check(const ScalarFn& f, const Vector& x, const Vector& analytic_grad,
                      double h = 1e-5);

}  // namespace galvae
