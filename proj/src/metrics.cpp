#include "galvae/metrics.hpp"

#include <omp.h>

#include <cmath>
#include <exception>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"

namespace galvae {

FeatureExtractor FeatureExtractor::pixel(std::size_t side) {
  if (side == 0) throw DataError("feature extractor: side must be positive");
  return {FeatureMode::pixel, side, nullptr};
}

FeatureExtractor FeatureExtractor::vae_latent(std::shared_ptr<const VaeParams> params) {
  if (!params) throw DataError("feature extractor: missing VAE");
  return {FeatureMode::vae_latent, 0, std::move(params)};
}

std::size_t FeatureExtractor::dim() const {
  return mode == FeatureMode::pixel ? side * side : vae->latent_dim();
}

std::vector<Vector> extract_features(const FeatureExtractor& fx, std::span<const Image> imgs) {
  if (imgs.empty()) return {};
  const Image& first = imgs.front();
  for (const auto& img : imgs)
    if (img.width() != first.width() || img.height() != first.height() ||
        img.channels() != first.channels())
      throw DataError("extract_features: image sizes differ");
  if (fx.mode == FeatureMode::vae_latent) return embed_all(*fx.vae, imgs);
  if (first.channels() != 1) throw DataError("extract_features: expected 1-channel images");

  std::vector<Vector> out(imgs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(imgs.size()); ++i) {
    try {
      const Image small = resize_bilinear(imgs[static_cast<std::size_t>(i)], fx.side, fx.side);
      out[static_cast<std::size_t>(i)] = small.values();
    } catch (...) {
#pragma omp critical(galvae_features_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

constexpr double kJitter = 1e-10;
constexpr double kFidClampTol = 1e-8;

Matrix with_jitter(const Matrix& a) {
  Matrix j = a;
  for (std::size_t i = 0; i < j.rows(); ++i) j(i, i) += kJitter;
  return j;
}

Matrix sqrt_with_retry(const Matrix& a) {
  try {
    return psd_sqrt(a);
  } catch (const NumericalError&) {
    return psd_sqrt(with_jitter(a));
  }
}

double root_trace(const Matrix& m) {
  JacobiOptions opts;
  opts.want_vectors = false;
  auto attempt = [&](const Matrix& x) {
    const auto eig = sym_eig(x, opts);
    double tr = 0.0;
    for (double lambda : eig.values) {
      if (lambda < -kPsdClampTol)
        throw NumericalError("fid: covariance product is not PSD (eigenvalue " +
                             std::to_string(lambda) + ")");
      tr += std::sqrt(std::max(lambda, 0.0));
    }
    return tr;
  };
  try {
    return attempt(m);
  } catch (const NumericalError&) {
    return attempt(with_jitter(m));
  }
}

Matrix symmetrized_product(const Matrix& root_t, const Matrix& cov_g) {
  Matrix m = mat_mul(mat_mul(root_t, cov_g), root_t);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = avg;
      m(j, i) = avg;
    }
  return m;
}

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double finish(double value) {
  if (value < 0.0) {
    if (value >= -kFidClampTol) return 0.0;
    throw NumericalError("fid: negative distance " + std::to_string(value));
  }
  return value;
}

void check_stats(const GaussianStats& s, std::size_t d) {
  if (s.mean.size() != d || s.cov.rows() != d || s.cov.cols() != d)
    throw DataError("fid: dimension mismatch");
}

}  // namespace

double fid(const GaussianStats& t, const GaussianStats& g) {
  const std::size_t d = t.mean.size();
  check_stats(t, d);
  check_stats(g, d);
  const Matrix root_t = sqrt_with_retry(t.cov);
  const double tr_root = root_trace(symmetrized_product(root_t, g.cov));
  return finish(squared_distance(t.mean, g.mean) + trace(t.cov) + trace(g.cov) - 2.0 * tr_root);
}

FidEvaluator::FidEvaluator(FeatureExtractor fx, std::span<const Image> reference)
    : fx_(std::move(fx)) {
  const auto feats = extract_features(fx_, reference);
  ref_ = estimate_gaussian_stats(feats);
  ref_sqrt_ = sqrt_with_retry(ref_.cov);
  ref_trace_ = trace(ref_.cov);
  ref_count_ = reference.size();
}

double FidEvaluator::from_stats(const GaussianStats& g) const {
  check_stats(g, ref_.mean.size());
  const double tr_root = root_trace(symmetrized_product(ref_sqrt_, g.cov));
  return finish(squared_distance(ref_.mean, g.mean) + ref_trace_ + trace(g.cov) - 2.0 * tr_root);
}

double FidEvaluator::operator()(std::span<const Image> generated) const {
  const auto feats = extract_features(fx_, generated);
  return from_stats(estimate_gaussian_stats(feats));
}

double cosine_similarity(std::span<const double> t, std::span<const double> g) {
  if (t.size() != g.size()) throw DataError("cosine: dimension mismatch");
  const double nt = norm(t);
  const double ng = norm(g);
  if (nt <= kMinLatentNorm || ng <= kMinLatentNorm)
    throw DataError("cosine: zero-norm vector");
  return dot(t, g) / (nt * ng);
}

double cosine_distance(std::span<const double> t, std::span<const double> g) {
  return std::clamp(1.0 - cosine_similarity(t, g), 0.0, 2.0);
}

ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> truth,
                          Label positive) {
  if (preds.size() != truth.size()) throw DataError("confusion: length mismatch");
  auto valid = [](Label l) { return l == Label::cardiomegaly || l == Label::normal; };
  if (!valid(positive)) throw DataError("confusion: positive label outside the label set");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!valid(preds[i]) || !valid(truth[i]))
      throw DataError("confusion: label outside the label set");
    const bool p = preds[i] == positive;
    const bool t = truth[i] == positive;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

CountTable count_table(std::span<const int> preds, std::span<const int> truth, std::size_t classes) {
  if (preds.size() != truth.size()) throw DataError("count_table: length mismatch");
  if (classes == 0) throw DataError("count_table: no classes");
  CountTable t{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(preds[i]) >= classes ||
        static_cast<std::size_t>(truth[i]) >= classes)
      throw DataError("count_table: label outside the label set");
    ++t.counts[static_cast<std::size_t>(truth[i]) * classes + static_cast<std::size_t>(preds[i])];
  }
  return t;
}

ConfusionMatrix binarize(const CountTable& table, std::size_t positive) {
  if (positive >= table.classes) throw DataError("binarize: positive label out of range");
  ConfusionMatrix cm;
  for (std::size_t t = 0; t < table.classes; ++t)
    for (std::size_t p = 0; p < table.classes; ++p) {
      const std::size_t n = table.at(t, p);
      if (t == positive && p == positive) cm.tp += n;
      else if (p == positive) cm.fp += n;
      else if (t == positive) cm.fn += n;
      else cm.tn += n;
    }
  return cm;
}

Scores scores(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("scores: empty confusion matrix");
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const auto tn = static_cast<double>(cm.tn);
  Scores s;
  s.accuracy = (tp + tn) / (tp + tn + fp + fn);
  if (cm.tp + cm.fp > 0) s.precision = tp / (tp + fp);
  else s.precision_undefined = true;
  if (cm.tp + cm.fn > 0) s.recall = tp / (tp + fn);
  else s.recall_undefined = true;
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  else s.f1_undefined = true;
  return s;
}

}  // namespace galvae
