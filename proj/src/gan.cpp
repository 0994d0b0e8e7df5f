#include "galvae/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"

namespace galvae {

void GanCycleConfig::validate() const {
  if (epochs_per_cycle == 0 || eval_every == 0 || epochs_per_cycle % eval_every != 0)
    throw DataError("gan config: epochs_per_cycle must be a positive multiple of eval_every");
  if (d_noise == 0 || hidden_g == 0 || hidden_d == 0 || batch == 0)
    throw DataError("gan config: layer sizes and batch must be positive");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw DataError("gan config: learning rates must be positive");
  if (gen_count == 0) throw DataError("gan config: gen_count must be positive");
}

namespace {

nn::Dense zeros_like(const nn::Dense& d) { return {Matrix(d.out(), d.in()), Vector(d.out(), 0.0)}; }

template <typename Ref, typename Dense>
void push(std::vector<Ref>& out, Dense& d) {
  if constexpr (std::is_same_v<Ref, nn::TensorRef>) {
    out.push_back(nn::ref(d.w));
    out.push_back(nn::ref(d.b));
  } else {
    out.push_back(nn::cref(d.w));
    out.push_back(nn::cref(d.b));
  }
}

struct GenForward {
  Matrix h_pre;
  Matrix h;
  Matrix tanh_out;
  Matrix images;
};

GenForward gen_forward(const GanParams& p, const Matrix& noise) {
  GenForward f;
  f.h_pre = nn::forward(p.g_hidden, noise);
  f.h = nn::leaky_relu(f.h_pre);
  f.tanh_out = nn::forward(p.g_out, f.h);
  for (auto& v : f.tanh_out.data()) v = std::tanh(v);
  f.images = f.tanh_out;
  for (auto& v : f.images.data()) v = 0.5 * (v + 1.0);
  return f;
}

struct DiscForward {
  Matrix h_pre;
  Matrix h;
  Matrix logits;
};

DiscForward disc_forward(const GanParams& p, const Matrix& x) {
  DiscForward f;
  f.h_pre = nn::forward(p.d_hidden, x);
  f.h = nn::leaky_relu(f.h_pre);
  f.logits = nn::forward(p.d_out, f.h);
  return f;
}

// Backprop dL/dlogits through D; accumulates into grad and returns dL/dx.
Matrix disc_backward(const GanParams& p, const Matrix& x, const DiscForward& f,
                     const Matrix& d_logits, GanParams& grad) {
  const Matrix d_h = nn::backward(p.d_out, f.h, d_logits, grad.d_out);
  const Matrix d_h_pre = nn::leaky_relu_backward(f.h_pre, d_h);
  return nn::backward(p.d_hidden, x, d_h_pre, grad.d_hidden);
}

Matrix noise_batch(Rng& rng, std::size_t rows, std::size_t dim) {
  Matrix z(rows, dim);
  for (auto& v : z.data()) v = rng.gaussian();
  return z;
}

}  // namespace

std::size_t GanParams::side() const {
  return static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(image_dim()))));
}

std::vector<nn::TensorRef> GanParams::generator_tensors() {
  std::vector<nn::TensorRef> out;
  push(out, g_hidden);
  push(out, g_out);
  return out;
}

std::vector<nn::ConstTensorRef> GanParams::generator_tensors() const {
  std::vector<nn::ConstTensorRef> out;
  push(out, g_hidden);
  push(out, g_out);
  return out;
}

std::vector<nn::TensorRef> GanParams::discriminator_tensors() {
  std::vector<nn::TensorRef> out;
  push(out, d_hidden);
  push(out, d_out);
  return out;
}

std::vector<nn::ConstTensorRef> GanParams::discriminator_tensors() const {
  std::vector<nn::ConstTensorRef> out;
  push(out, d_hidden);
  push(out, d_out);
  return out;
}

std::vector<nn::ConstTensorRef> GanParams::tensors() const {
  auto out = generator_tensors();
  const auto d = discriminator_tensors();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

GanParams gan_init(const GanCycleConfig& cfg, std::size_t side, std::uint64_t seed) {
  if (side == 0 || cfg.d_noise == 0 || cfg.hidden_g == 0 || cfg.hidden_d == 0)
    throw DataError("gan_init: dimensions must be positive");
  Rng rng(seed);
  const std::size_t d_img = side * side;
  GanParams p;
  p.g_hidden = nn::dense_init(cfg.d_noise, cfg.hidden_g, rng);
  p.g_out = nn::dense_init(cfg.hidden_g, d_img, rng);
  p.d_hidden = nn::dense_init(d_img, cfg.hidden_d, rng);
  p.d_out = nn::dense_init(cfg.hidden_d, 1, rng);
  return p;
}

GanParams gan_zeros_like(const GanParams& p) {
  return {zeros_like(p.g_hidden), zeros_like(p.g_out), zeros_like(p.d_hidden), zeros_like(p.d_out)};
}

Matrix generator_forward(const GanParams& p, const Matrix& noise) {
  return gen_forward(p, noise).images;
}

Matrix discriminator_forward(const GanParams& p, const Matrix& images) {
  return disc_forward(p, images).logits;
}

std::vector<Image> generate(const GanParams& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DataError("generate: n must be >= 1");
  Rng rng(seed);
  const std::size_t side = p.side();
  std::vector<Image> out;
  out.reserve(n);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t rows = std::min(kChunk, n - start);
    const Matrix imgs = generator_forward(p, noise_batch(rng, rows, p.noise_dim()));
    for (std::size_t r = 0; r < rows; ++r)
      out.emplace_back(side, side, 1, std::vector<double>(imgs.row(r).begin(), imgs.row(r).end()));
  }
  return out;
}

GanLossResult discriminator_loss_and_grad(const GanParams& p, const Matrix& real, const Matrix& fake) {
  if (real.rows() == 0 || fake.rows() == 0) throw DataError("discriminator loss: empty batch");
  GanLossResult res{0.0, gan_zeros_like(p)};
  const DiscForward fr = disc_forward(p, real);
  const DiscForward ff = disc_forward(p, fake);
  const double inv_r = 1.0 / static_cast<double>(real.rows());
  const double inv_f = 1.0 / static_cast<double>(fake.rows());

  Matrix d_real(real.rows(), 1);
  double loss_real = 0.0;
  for (std::size_t i = 0; i < real.rows(); ++i) {
    const double l = fr.logits(i, 0);
    loss_real += nn::softplus(-l);
    d_real(i, 0) = -nn::sigmoid(-l) * inv_r;
  }
  Matrix d_fake(fake.rows(), 1);
  double loss_fake = 0.0;
  for (std::size_t i = 0; i < fake.rows(); ++i) {
    const double l = ff.logits(i, 0);
    loss_fake += nn::softplus(l);
    d_fake(i, 0) = nn::sigmoid(l) * inv_f;
  }
  res.loss = loss_real * inv_r + loss_fake * inv_f;
  disc_backward(p, real, fr, d_real, res.grad);
  disc_backward(p, fake, ff, d_fake, res.grad);
  return res;
}

GanLossResult generator_loss_and_grad(const GanParams& p, const Matrix& noise) {
  if (noise.rows() == 0) throw DataError("generator loss: empty batch");
  GanLossResult res{0.0, gan_zeros_like(p)};
  const GenForward g = gen_forward(p, noise);
  const DiscForward d = disc_forward(p, g.images);
  const double inv_b = 1.0 / static_cast<double>(noise.rows());

  Matrix d_logits(noise.rows(), 1);
  for (std::size_t i = 0; i < noise.rows(); ++i) {
    const double l = d.logits(i, 0);
    res.loss += nn::softplus(-l);
    d_logits(i, 0) = -nn::sigmoid(-l) * inv_b;
  }
  res.loss *= inv_b;

  GanParams scratch = gan_zeros_like(p);  // discriminator gradients are discarded
  Matrix d_out = disc_backward(p, g.images, d, d_logits, scratch);
  // images = (tanh + 1) / 2
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    const double t = g.tanh_out.data()[i];
    d_out.data()[i] *= 0.5 * (1.0 - t * t);
  }
  const Matrix d_h = nn::backward(p.g_out, g.h, d_out, res.grad.g_out);
  const Matrix d_h_pre = nn::leaky_relu_backward(g.h_pre, d_h);
  nn::backward(p.g_hidden, noise, d_h_pre, res.grad.g_hidden);
  return res;
}

GanModel make_gan_model(const GanCycleConfig& cfg, std::size_t side, std::uint64_t init_seed) {
  return {gan_init(cfg, side, init_seed), nn::Adam({cfg.lr_g, cfg.beta1, 0.999, 1e-8}),
          nn::Adam({cfg.lr_d, cfg.beta1, 0.999, 1e-8})};
}

double evaluate_generator(const GanParams& p, const FidEvaluator& fid_eval,
                          const GanCycleConfig& cfg) {
  const std::size_t n = cfg.eval_n == 0 ? fid_eval.reference_size() : cfg.eval_n;
  if (n < 2) throw DataError("evaluate_generator: need at least 2 generated images");
  const auto imgs = generate(p, n, cfg.eval_seed);
  return fid_eval(imgs);
}

Checkpoint gan_train_cycle(GanModel& model, std::span<const Image> train_set,
                           const FidEvaluator& fid_eval, const GanCycleConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("gan_train_cycle: empty training set");
  if (fid_eval.reference_size() == 0) throw DataError("gan_train_cycle: empty reference set");
  for (const auto& img : train_set)
    if (img.channels() != 1 || img.pixel_count() != model.params.image_dim())
      throw DataError("gan_train_cycle: training image shape mismatch");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Checkpoint ck;

  for (std::size_t epoch = 1; epoch <= cfg.epochs_per_cycle; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(start + cfg.batch, order.size());
      std::vector<const Image*> members;
      for (std::size_t k = start; k < end; ++k) members.push_back(&train_set[order[k]]);
      const Matrix real = images_to_batch(std::span<const Image* const>(members));
      const std::size_t b = members.size();

      const Matrix fake = generator_forward(model.params, noise_batch(rng, b, cfg.d_noise));
      const GanLossResult d = discriminator_loss_and_grad(model.params, real, fake);
      if (!std::isfinite(d.loss)) throw NumericalError("gan: discriminator loss diverged");
      model.opt_d.step(model.params.discriminator_tensors(), d.grad.discriminator_tensors());

      const GanLossResult g = generator_loss_and_grad(model.params, noise_batch(rng, b, cfg.d_noise));
      if (!std::isfinite(g.loss)) throw NumericalError("gan: generator loss diverged");
      model.opt_g.step(model.params.generator_tensors(), g.grad.generator_tensors());
    }
    if (epoch % cfg.eval_every == 0) {
      const double score = evaluate_generator(model.params, fid_eval, cfg);
      ck.history.push_back({epoch, score});
      if (score < ck.saved_fid) {
        ck.saved_fid = score;
        ck.saved_epoch = epoch;
        ck.saved_params = model.params;
      }
    }
  }
  return ck;
}

Checkpoint gan_train_cycle(GanModel& model, std::span<const Image> train_set,
                           std::span<const Image> real_reference, const GanCycleConfig& cfg) {
  if (real_reference.empty()) throw DataError("gan_train_cycle: empty reference set");
  const FidEvaluator eval(FeatureExtractor::pixel(), real_reference);
  return gan_train_cycle(model, train_set, eval, cfg);
}

void save_gan(const GanParams& p, const std::filesystem::path& path) {
  nn::save_tensors(path, 'G', p.tensors());
}

GanParams load_gan(const std::filesystem::path& path) {
  const nn::TensorFile f = nn::load_tensors(path);
  if (f.tag != 'G' || f.tensors.size() != 8) throw DataError("gan file: unexpected layout");
  auto dense = [&](std::size_t k) {
    const Matrix& w = f.tensors[2 * k];
    const Matrix& b = f.tensors[2 * k + 1];
    if (b.rows() != 1 || b.cols() != w.rows()) throw DataError("gan file: bias shape mismatch");
    return nn::Dense{w, b.values()};
  };
  GanParams p{dense(0), dense(1), dense(2), dense(3)};
  if (p.g_out.in() != p.g_hidden.out() || p.d_hidden.in() != p.image_dim() ||
      p.d_out.in() != p.d_hidden.out() || p.d_out.out() != 1 ||
      p.side() * p.side() != p.image_dim())
    throw DataError("gan file: inconsistent layer shapes");
  return p;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& stem) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path sidecar = stem;
  sidecar += ".json";
  save_gan(ck.saved_params, bin);
  nlohmann::ordered_json j;
  j["saved_fid"] = ck.saved_fid;
  j["epoch"] = ck.saved_epoch;
  j["history"] = nlohmann::ordered_json::array();
  for (const auto& h : ck.history) j["history"].push_back({{"epoch", h.epoch}, {"fid", h.fid}});
  std::ofstream out(sidecar);
  if (!out) throw DataError("checkpoint: cannot write " + sidecar.string());
  out << j.dump(2) << '\n';
}

}  // namespace galvae
