#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "galvae/imaging.hpp"
#include "galvae/nn.hpp"

namespace galvae {

using LatentVector = Vector;

struct VaeConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden = 256;
  std::size_t epochs = 25;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// MLP VAE: side^2 -> hidden -> (mu, logvar) and latent -> hidden -> side^2.
struct VaeParams {
  nn::Dense enc_hidden;
  nn::Dense enc_mu;
  nn::Dense enc_logvar;
  nn::Dense dec_hidden;
  nn::Dense dec_out;

  std::size_t input_dim() const { return enc_hidden.in(); }
  std::size_t latent_dim() const { return enc_mu.out(); }
  std::size_t hidden() const { return enc_hidden.out(); }

  std::vector<nn::TensorRef> tensors();
  std::vector<nn::ConstTensorRef> tensors() const;
};

VaeParams vae_init(const VaeConfig& cfg, std::size_t side);
/// Same layer shapes with every entry zero.
VaeParams vae_zeros_like(const VaeParams& p);

struct Encoding {
  LatentVector mu;
  LatentVector logvar;
};

Encoding encode(const VaeParams& p, const Image& img);
LatentVector reparameterize(const LatentVector& mu, const LatentVector& logvar, const Vector& eps);
Image decode(const VaeParams& p, const LatentVector& z);

struct ElboTerms {
  double total = 0.0;
  double recon = 0.0;  // summed binary cross-entropy
  double kl = 0.0;
};

ElboTerms elbo_loss(const Image& img, const Image& recon, const LatentVector& mu,
                    const LatentVector& logvar);

struct VaeBatchResult {
  double loss = 0.0;  // mean total ELBO loss over the batch
  VaeParams grad;     // d(loss)/d(params)
};

/// Batch loss and exact gradient with fixed reparameterization noise.
/// x is batch x side^2, eps is batch x latent.
VaeBatchResult vae_loss_and_grad(const VaeParams& p, const Matrix& x, const Matrix& eps);

struct VaeTrainResult {
  VaeParams params;
  std::vector<double> loss_history;  // per-epoch mean total loss
};

/// Mini-batch Adam on the ELBO, deterministic per cfg.seed.
VaeTrainResult vae_train(const VaeConfig& cfg, std::span<const Image> dataset);

/// Deterministic query embedding: the mean head of the encoder.
LatentVector embed(const VaeParams& p, const Image& img);
std::vector<LatentVector> embed_all(const VaeParams& p, std::span<const Image> imgs);

void save_vae(const VaeParams& p, const std::filesystem::path& path);
VaeParams load_vae(const std::filesystem::path& path);
VaeParams vae_from_tensors(const nn::TensorFile& file);

/// Row-stacks 1-channel square images into a batch matrix.
Matrix images_to_batch(std::span<const Image> imgs);
Matrix images_to_batch(std::span<const Image* const> imgs);

}  // namespace galvae
