#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "galvae/imaging.hpp"
#include "galvae/numerics.hpp"
#include "galvae/synthdata.hpp"
#include "galvae/vae.hpp"

namespace galvae {

// ---- feature space for FID ----

enum class FeatureMode { pixel, vae_latent };

/// Fixed embedding used for every FID value of one experiment. Pixel mode
/// bilinearly downsamples to `side` x `side` and flattens; vae-latent mode
/// embeds with a frozen VAE.
struct FeatureExtractor {
  FeatureMode mode = FeatureMode::pixel;
  std::size_t side = 16;
  std::shared_ptr<const VaeParams> vae;

  static FeatureExtractor pixel(std::size_t side = 16);
  static FeatureExtractor vae_latent(std::shared_ptr<const VaeParams> params);

  std::size_t dim() const;
};

std::vector<Vector> extract_features(const FeatureExtractor& fx, std::span<const Image> imgs);

// ---- Frechet distance ----

/// ||mu_t - mu_g||^2 + Tr(S_t + S_g - 2 (S_t S_g)^(1/2)), with the root-trace
/// taken as Tr((S_t^(1/2) S_g S_t^(1/2))^(1/2)). Round-off negatives down to
/// -1e-8 clamp to 0.
double fid(const GaussianStats& t, const GaussianStats& g);

/// Caches the reference statistics and their square root so repeated
/// evaluations against one real set pay for one eigendecomposition each.
class FidEvaluator {
 public:
  FidEvaluator(FeatureExtractor fx, std::span<const Image> reference);

  double operator()(std::span<const Image> generated) const;
  double from_stats(const GaussianStats& g) const;

  const GaussianStats& reference_stats() const noexcept { return ref_; }
  const FeatureExtractor& extractor() const noexcept { return fx_; }
  std::size_t reference_size() const noexcept { return ref_count_; }

 private:
  FeatureExtractor fx_;
  GaussianStats ref_;
  Matrix ref_sqrt_;
  double ref_trace_ = 0.0;
  std::size_t ref_count_ = 0;
};

// ---- cosine ----

/// 1 - t.g / (|t||g|), in [0, 2]. Throws DataError for norms <= 1e-12.
double cosine_distance(std::span<const double> t, std::span<const double> g);
double cosine_similarity(std::span<const double> t, std::span<const double> g);

inline constexpr double kMinLatentNorm = 1e-12;

// ---- classification metrics ----

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> truth,
                          Label positive);

/// C x C count table, rows = truth, cols = prediction.
struct CountTable {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
};

CountTable count_table(std::span<const int> preds, std::span<const int> truth, std::size_t classes);
/// One-vs-rest reduction of a count table.
ConfusionMatrix binarize(const CountTable& table, std::size_t positive);

struct Scores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the metric's denominator was zero and the value was defined as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

Scores scores(const ConfusionMatrix& cm);

}  // namespace galvae
