#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "galvae/imaging.hpp"
#include "galvae/metrics.hpp"
#include "galvae/nn.hpp"
#include "galvae/synthdata.hpp"

namespace galvae {

struct ClassifierConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// side^2 -> hidden (leaky ReLU) -> 2 logits; logit 0 is cardiomegaly.
struct ClassifierParams {
  nn::Dense hidden;
  nn::Dense out;

  std::size_t input_dim() const { return hidden.in(); }

  std::vector<nn::TensorRef> tensors();
  std::vector<nn::ConstTensorRef> tensors() const;
};

ClassifierParams clf_init(const ClassifierConfig& cfg, std::size_t input_dim, std::uint64_t seed);

struct ClassifierLoss {
  double loss = 0.0;  // mean softmax cross-entropy
  ClassifierParams grad;
};

ClassifierLoss clf_loss_and_grad(const ClassifierParams& p, const Matrix& x,
                                 std::span<const Label> labels);

Matrix clf_logits(const ClassifierParams& p, const Matrix& x);

/// Adam on softmax cross-entropy. Throws DataError unless both labels occur.
ClassifierParams clf_train(std::span<const Image> images, std::span<const Label> labels,
                           const ClassifierConfig& cfg);

/// argmax of the logits; an exact tie resolves to cardiomegaly.
Label clf_predict(const ClassifierParams& p, const Image& img);
std::vector<Label> clf_predict_all(const ClassifierParams& p, std::span<const Image> imgs);

struct SessionSpec {
  std::size_t index = 0;
  std::vector<Image> disease_train;  // real base plus generated additions
  std::vector<Image> normal_train;
  std::vector<Image> test_images;
  std::vector<Label> test_labels;
};

struct SessionResult {
  std::size_t session = 0;
  std::size_t train_disease = 0;
  std::size_t train_normal = 0;
  ConfusionMatrix cm;
  Scores scores;
  double train_accuracy = 0.0;
};

/// Throws DataError if any training image's content hash matches a test image.
void check_disjoint(const SessionSpec& spec);

/// Trains one classifier per session (seed derived from cfg.seed and the
/// session index) and scores it on that session's test set, cardiomegaly
/// positive. Results come back in input order.
std::vector<SessionResult> run_sessions(std::span<const SessionSpec> specs,
                                        const ClassifierConfig& cfg);

}  // namespace galvae
