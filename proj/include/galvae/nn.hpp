#pragma once

// Small building blocks shared by the VAE, GAN and classifier: affine
// layers over row-batched inputs, activations, Adam, and the flat tensor
// file format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "galvae/numerics.hpp"
#include "galvae/rng.hpp"

namespace galvae::nn {

/// y = x W^T + b, with W stored out x in.
struct Dense {
  Matrix w;
  Vector b;

  std::size_t in() const { return w.cols(); }
  std::size_t out() const { return w.rows(); }
};

/// He init: weights ~ N(0, 2 / fan_in), biases zero.
Dense dense_init(std::size_t in, std::size_t out, Rng& rng);

Matrix forward(const Dense& layer, const Matrix& x);

// Gradients share the parameter layout.
using DenseGrad = Dense;

/// Accumulates (+=) dW, db into grad and returns dL/dx.
Matrix backward(const Dense& layer, const Matrix& x, const Matrix& dy, DenseGrad& grad);

DenseGrad zero_grad(const Dense& layer);

inline constexpr double kLeakySlope = 0.2;

Matrix leaky_relu(const Matrix& pre);
/// dL/dpre given dL/dout and the pre-activation.
Matrix leaky_relu_backward(const Matrix& pre, const Matrix& dout);

double sigmoid(double x);
/// log(1 + e^x), overflow safe.
double softplus(double x);

/// Mutable view of one parameter tensor, shaped rows x cols.
struct TensorRef {
  std::size_t rows;
  std::size_t cols;
  std::span<double> data;
};

struct ConstTensorRef {
  std::size_t rows;
  std::size_t cols;
  std::span<const double> data;
};

inline TensorRef ref(Matrix& m) { return {m.rows(), m.cols(), m.data()}; }
inline TensorRef ref(Vector& v) { return {1, v.size(), v}; }
inline ConstTensorRef cref(const Matrix& m) { return {m.rows(), m.cols(), m.data()}; }
inline ConstTensorRef cref(const Vector& v) { return {1, v.size(), v}; }

Vector flatten(std::span<const ConstTensorRef> tensors);
void assign(std::span<const TensorRef> tensors, const Vector& flat);
std::size_t parameter_count(std::span<const ConstTensorRef> tensors);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions opts) : opts_(opts) {}

  /// One bias-corrected update. Moment buffers are sized on first use and
  /// must see the same tensor layout afterwards.
  void step(std::span<const TensorRef> params, std::span<const ConstTensorRef> grads);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return opts_; }

 private:
  AdamOptions opts_;
  std::uint64_t t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

/// "GALV1" + tag byte + u32 count + (u64 rows, u64 cols) per tensor, then
/// every tensor's entries as little-endian float64 in declared order.
void save_tensors(const std::filesystem::path& path, char tag,
                  std::span<const ConstTensorRef> tensors);
std::string encode_tensors(char tag, std::span<const ConstTensorRef> tensors);

struct TensorFile {
  char tag = 0;
  std::vector<Matrix> tensors;
};

TensorFile load_tensors(const std::filesystem::path& path);
TensorFile decode_tensors(std::string_view bytes);

}  // namespace galvae::nn
