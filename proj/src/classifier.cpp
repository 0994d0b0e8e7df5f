#include "galvae/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "galvae/error.hpp"
#include "galvae/hash.hpp"
#include "galvae/rng.hpp"
#include "galvae/vae.hpp"

namespace galvae {

std::vector<nn::TensorRef> ClassifierParams::tensors() {
  return {nn::ref(hidden.w), nn::ref(hidden.b), nn::ref(out.w), nn::ref(out.b)};
}

std::vector<nn::ConstTensorRef> ClassifierParams::tensors() const {
  return {nn::cref(hidden.w), nn::cref(hidden.b), nn::cref(out.w), nn::cref(out.b)};
}

ClassifierParams clf_init(const ClassifierConfig& cfg, std::size_t input_dim, std::uint64_t seed) {
  if (cfg.hidden == 0 || input_dim == 0) throw DataError("clf_init: dimensions must be positive");
  Rng rng(seed);
  ClassifierParams p;
  p.hidden = nn::dense_init(input_dim, cfg.hidden, rng);
  p.out = nn::dense_init(cfg.hidden, kNumClasses, rng);
  return p;
}

Matrix clf_logits(const ClassifierParams& p, const Matrix& x) {
  return nn::forward(p.out, nn::leaky_relu(nn::forward(p.hidden, x)));
}

ClassifierLoss clf_loss_and_grad(const ClassifierParams& p, const Matrix& x,
                                 std::span<const Label> labels) {
  if (x.rows() == 0 || x.rows() != labels.size())
    throw DataError("classifier loss: batch/label count mismatch");
  const Matrix h_pre = nn::forward(p.hidden, x);
  const Matrix h = nn::leaky_relu(h_pre);
  const Matrix logits = nn::forward(p.out, h);
  const double inv_b = 1.0 / static_cast<double>(x.rows());

  ClassifierLoss res;
  res.grad.hidden = {Matrix(p.hidden.out(), p.hidden.in()), Vector(p.hidden.out(), 0.0)};
  res.grad.out = {Matrix(p.out.out(), p.out.in()), Vector(p.out.out(), 0.0)};
  Matrix d_logits(x.rows(), kNumClasses);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    const auto target = static_cast<std::size_t>(labels[r]);
    if (target >= kNumClasses) throw DataError("classifier loss: label outside the label set");
    res.loss += log_z - row[target];
    for (std::size_t c = 0; c < kNumClasses; ++c)
      d_logits(r, c) = (std::exp(row[c] - log_z) - (c == target ? 1.0 : 0.0)) * inv_b;
  }
  res.loss *= inv_b;
  const Matrix d_h = nn::backward(p.out, h, d_logits, res.grad.out);
  nn::backward(p.hidden, x, nn::leaky_relu_backward(h_pre, d_h), res.grad.hidden);
  return res;
}

ClassifierParams clf_train(std::span<const Image> images, std::span<const Label> labels,
                           const ClassifierConfig& cfg) {
  if (images.size() != labels.size()) throw DataError("clf_train: image/label count mismatch");
  if (images.empty()) throw DataError("clf_train: empty training set");
  const bool has_disease = std::find(labels.begin(), labels.end(), Label::cardiomegaly) != labels.end();
  const bool has_normal = std::find(labels.begin(), labels.end(), Label::normal) != labels.end();
  if (!has_disease || !has_normal) throw DataError("clf_train: training set has a single label");
  if (cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr > 0.0))
    throw DataError("clf_train: epochs, batch and lr must be positive");

  ClassifierParams p = clf_init(cfg, images.front().pixels().size(), derive_seed(cfg.seed, "clf:init"));
  nn::Adam adam(nn::AdamOptions{cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(cfg.seed, "clf:train"));
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(start + cfg.batch, order.size());
      std::vector<const Image*> members;
      std::vector<Label> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        members.push_back(&images[order[k]]);
        batch_labels.push_back(labels[order[k]]);
      }
      const Matrix x = images_to_batch(std::span<const Image* const>(members));
      const ClassifierLoss l = clf_loss_and_grad(p, x, batch_labels);
      if (!std::isfinite(l.loss)) throw NumericalError("clf_train: loss diverged");
      adam.step(p.tensors(), l.grad.tensors());
    }
  }
  return p;
}

namespace {

Label argmax_label(std::span<const double> logits) {
  // Strict comparison keeps the lower index on a tie.
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return static_cast<Label>(best);
}

}  // namespace

Label clf_predict(const ClassifierParams& p, const Image& img) {
  if (img.channels() != 1 || img.pixels().size() != p.input_dim())
    throw DataError("clf_predict: image shape mismatch");
  const Matrix x(1, img.pixels().size(), img.values());
  return argmax_label(clf_logits(p, x).row(0));
}

std::vector<Label> clf_predict_all(const ClassifierParams& p, std::span<const Image> imgs) {
  if (imgs.empty()) return {};
  for (const auto& img : imgs)
    if (img.channels() != 1 || img.pixels().size() != p.input_dim())
      throw DataError("clf_predict: image shape mismatch");
  const Matrix logits = clf_logits(p, images_to_batch(imgs));
  std::vector<Label> out;
  out.reserve(imgs.size());
  for (std::size_t r = 0; r < imgs.size(); ++r) out.push_back(argmax_label(logits.row(r)));
  return out;
}

void check_disjoint(const SessionSpec& spec) {
  std::unordered_set<std::string> test_hashes;
  for (const auto& img : spec.test_images) test_hashes.insert(image_hash(img));
  for (const auto* set : {&spec.disease_train, &spec.normal_train})
    for (const auto& img : *set)
      if (test_hashes.count(image_hash(img)))
        throw DataError("session " + std::to_string(spec.index) +
                        ": a training image duplicates a test image");
}

std::vector<SessionResult> run_sessions(std::span<const SessionSpec> specs,
                                        const ClassifierConfig& cfg) {
  std::vector<SessionResult> results;
  for (const auto& spec : specs) {
    if (spec.test_images.size() != spec.test_labels.size() || spec.test_images.empty())
      throw DataError("session " + std::to_string(spec.index) + ": malformed test set");
    check_disjoint(spec);

    std::vector<Image> train;
    std::vector<Label> labels;
    train.reserve(spec.disease_train.size() + spec.normal_train.size());
    for (const auto& img : spec.disease_train) {
      train.push_back(img);
      labels.push_back(Label::cardiomegaly);
    }
    for (const auto& img : spec.normal_train) {
      train.push_back(img);
      labels.push_back(Label::normal);
    }
    ClassifierConfig session_cfg = cfg;
    session_cfg.seed = derive_seed(cfg.seed, "clf:" + std::to_string(spec.index));
    const ClassifierParams p = clf_train(train, labels, session_cfg);

    const auto train_pred = clf_predict_all(p, train);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < train.size(); ++i) correct += train_pred[i] == labels[i] ? 1 : 0;

    SessionResult r;
    r.session = spec.index;
    r.train_disease = spec.disease_train.size();
    r.train_normal = spec.normal_train.size();
    r.cm = confusion(clf_predict_all(p, spec.test_images), spec.test_labels, Label::cardiomegaly);
    r.scores = scores(r.cm);
    r.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    results.push_back(r);
  }
  return results;
}

}  // namespace galvae
