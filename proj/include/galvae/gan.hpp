#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "galvae/imaging.hpp"
#include "galvae/metrics.hpp"
#include "galvae/nn.hpp"

namespace galvae {

struct GanCycleConfig {
  std::size_t epochs_per_cycle = 20;
  std::size_t eval_every = 2;
  std::size_t gen_count = 1000;
  std::size_t d_noise = 64;
  std::size_t hidden_g = 128;
  std::size_t hidden_d = 128;
  std::size_t batch = 16;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  std::size_t eval_n = 0;  // images per FID evaluation; 0 = reference-set size
  std::uint64_t seed = 0;  // training stream (shuffles and noise)
  std::uint64_t eval_seed = 0;

  void validate() const;
};

/// Generator: noise -> hidden -> side^2, squashed to [0, 1] by (tanh + 1) / 2.
/// Discriminator: side^2 -> hidden -> one logit.
struct GanParams {
  nn::Dense g_hidden;
  nn::Dense g_out;
  nn::Dense d_hidden;
  nn::Dense d_out;

  std::size_t noise_dim() const { return g_hidden.in(); }
  std::size_t image_dim() const { return g_out.out(); }
  std::size_t side() const;

  std::vector<nn::TensorRef> generator_tensors();
  std::vector<nn::ConstTensorRef> generator_tensors() const;
  std::vector<nn::TensorRef> discriminator_tensors();
  std::vector<nn::ConstTensorRef> discriminator_tensors() const;
  std::vector<nn::ConstTensorRef> tensors() const;
};

GanParams gan_init(const GanCycleConfig& cfg, std::size_t side, std::uint64_t seed);
GanParams gan_zeros_like(const GanParams& p);

/// Generator forward on a batch of noise rows; returns images as rows in [0, 1].
Matrix generator_forward(const GanParams& p, const Matrix& noise);
/// Discriminator logits (batch x 1).
Matrix discriminator_forward(const GanParams& p, const Matrix& images);

/// n images from n fresh noise vectors drawn in order from Rng(seed), so a
/// shorter batch is a prefix of a longer one.
std::vector<Image> generate(const GanParams& p, std::size_t n, std::uint64_t seed);

struct GanLossResult {
  double loss = 0.0;
  GanParams grad;  // only the trained half is populated
};

/// mean softplus(-D(real)) + mean softplus(D(fake)); gradient w.r.t. D only.
GanLossResult discriminator_loss_and_grad(const GanParams& p, const Matrix& real, const Matrix& fake);
/// Non-saturating mean softplus(-D(G(z))); gradient w.r.t. G only.
GanLossResult generator_loss_and_grad(const GanParams& p, const Matrix& noise);

struct FidRecord {
  std::size_t epoch = 0;
  double fid = 0.0;
};

struct Checkpoint {
  double saved_fid = std::numeric_limits<double>::infinity();
  std::size_t saved_epoch = 0;
  GanParams saved_params;
  std::vector<FidRecord> history;
};

/// Trainable state carried across cycles.
struct GanModel {
  GanParams params;
  nn::Adam opt_g;
  nn::Adam opt_d;
};

GanModel make_gan_model(const GanCycleConfig& cfg, std::size_t side, std::uint64_t init_seed);

/// One cycle: epochs_per_cycle epochs of alternating D/G steps; every
/// eval_every epochs the current generator is scored against the reference
/// and the params are checkpointed on a strict improvement. The saved FID
/// starts at +inf each cycle.
Checkpoint gan_train_cycle(GanModel& model, std::span<const Image> train_set,
                           const FidEvaluator& fid_eval, const GanCycleConfig& cfg);

/// Convenience overload: pixel features on the given reference set.
Checkpoint gan_train_cycle(GanModel& model, std::span<const Image> train_set,
                           std::span<const Image> real_reference, const GanCycleConfig& cfg);

/// FID of generate(p, eval_n, eval_seed) against the evaluator's reference.
double evaluate_generator(const GanParams& p, const FidEvaluator& fid_eval,
                          const GanCycleConfig& cfg);

void save_gan(const GanParams& p, const std::filesystem::path& path);
GanParams load_gan(const std::filesystem::path& path);

/// Writes <stem>.bin (params) and <stem>.json ({saved_fid, epoch, history}).
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& stem);

}  // namespace galvae
