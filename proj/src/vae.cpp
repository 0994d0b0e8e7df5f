#include "galvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"

namespace galvae {

namespace {

void push(std::vector<nn::TensorRef>& out, nn::Dense& d) {
  out.push_back(nn::ref(d.w));
  out.push_back(nn::ref(d.b));
}

void push(std::vector<nn::ConstTensorRef>& out, const nn::Dense& d) {
  out.push_back(nn::cref(d.w));
  out.push_back(nn::cref(d.b));
}

nn::Dense zeros_like(const nn::Dense& d) { return {Matrix(d.out(), d.in()), Vector(d.out(), 0.0)}; }

std::size_t side_of(const VaeParams& p) {
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(double(p.input_dim()))));
  return side;
}

void check_image(const VaeParams& p, const Image& img) {
  if (img.channels() != 1 || img.pixel_count() != p.input_dim())
    throw DataError("vae: image shape does not match the encoder input");
}

Matrix to_row(const Image& img) {
  return Matrix(1, img.pixels().size(), std::vector<double>(img.pixels().begin(), img.pixels().end()));
}

}  // namespace

std::vector<nn::TensorRef> VaeParams::tensors() {
  std::vector<nn::TensorRef> out;
  for (nn::Dense* d : {&enc_hidden, &enc_mu, &enc_logvar, &dec_hidden, &dec_out}) push(out, *d);
  return out;
}

std::vector<nn::ConstTensorRef> VaeParams::tensors() const {
  std::vector<nn::ConstTensorRef> out;
  for (const nn::Dense* d : {&enc_hidden, &enc_mu, &enc_logvar, &dec_hidden, &dec_out})
    push(out, *d);
  return out;
}

VaeParams vae_init(const VaeConfig& cfg, std::size_t side) {
  if (cfg.latent_dim == 0 || cfg.hidden == 0 || side == 0)
    throw DataError("vae_init: dimensions must be positive");
  Rng rng(derive_seed(cfg.seed, "vae:init"));
  const std::size_t d_in = side * side;
  VaeParams p;
  p.enc_hidden = nn::dense_init(d_in, cfg.hidden, rng);
  p.enc_mu = nn::dense_init(cfg.hidden, cfg.latent_dim, rng);
  p.enc_logvar = nn::dense_init(cfg.hidden, cfg.latent_dim, rng);
  p.dec_hidden = nn::dense_init(cfg.latent_dim, cfg.hidden, rng);
  p.dec_out = nn::dense_init(cfg.hidden, d_in, rng);
  return p;
}

VaeParams vae_zeros_like(const VaeParams& p) {
  return {zeros_like(p.enc_hidden), zeros_like(p.enc_mu), zeros_like(p.enc_logvar),
          zeros_like(p.dec_hidden), zeros_like(p.dec_out)};
}

Encoding encode(const VaeParams& p, const Image& img) {
  check_image(p, img);
  const Matrix h = nn::leaky_relu(nn::forward(p.enc_hidden, to_row(img)));
  const Matrix mu = nn::forward(p.enc_mu, h);
  const Matrix lv = nn::forward(p.enc_logvar, h);
  return {mu.values(), lv.values()};
}

LatentVector reparameterize(const LatentVector& mu, const LatentVector& logvar, const Vector& eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size())
    throw DataError("reparameterize: dimension mismatch");
  LatentVector z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  return z;
}

Image decode(const VaeParams& p, const LatentVector& z) {
  if (z.size() != p.latent_dim()) throw DataError("decode: latent dimension mismatch");
  const Matrix zr(1, z.size(), z);
  const Matrix h = nn::leaky_relu(nn::forward(p.dec_hidden, zr));
  Matrix o = nn::forward(p.dec_out, h);
  for (auto& v : o.data()) v = nn::sigmoid(v);
  const std::size_t side = side_of(p);
  return Image(side, side, 1, o.values());
}

ElboTerms elbo_loss(const Image& img, const Image& recon, const LatentVector& mu,
                    const LatentVector& logvar) {
  if (img.pixels().size() != recon.pixels().size())
    throw DataError("elbo_loss: image/reconstruction size mismatch");
  if (mu.size() != logvar.size()) throw DataError("elbo_loss: latent dimension mismatch");
  ElboTerms t;
  auto x = img.pixels();
  auto r = recon.pixels();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(r[i] > 0.0 && r[i] < 1.0)) throw DataError("elbo_loss: reconstruction outside (0, 1)");
    t.recon -= x[i] * std::log(r[i]) + (1.0 - x[i]) * std::log1p(-r[i]);
  }
  for (std::size_t i = 0; i < mu.size(); ++i)
    t.kl -= 0.5 * (1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]));
  t.total = t.recon + t.kl;
  return t;
}

VaeBatchResult vae_loss_and_grad(const VaeParams& p, const Matrix& x, const Matrix& eps) {
  const std::size_t batch = x.rows();
  if (batch == 0 || x.cols() != p.input_dim()) throw DataError("vae: batch shape mismatch");
  if (eps.rows() != batch || eps.cols() != p.latent_dim())
    throw DataError("vae: noise shape mismatch");
  const double inv_b = 1.0 / static_cast<double>(batch);

  const Matrix h1_pre = nn::forward(p.enc_hidden, x);
  const Matrix h1 = nn::leaky_relu(h1_pre);
  const Matrix mu = nn::forward(p.enc_mu, h1);
  const Matrix lv = nn::forward(p.enc_logvar, h1);
  Matrix z = mu;
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data()[i] += std::exp(0.5 * lv.data()[i]) * eps.data()[i];
  const Matrix h2_pre = nn::forward(p.dec_hidden, z);
  const Matrix h2 = nn::leaky_relu(h2_pre);
  const Matrix logits = nn::forward(p.dec_out, h2);

  VaeBatchResult res{0.0, vae_zeros_like(p)};
  // BCE written on logits: softplus(o) - x o, with gradient sigmoid(o) - x.
  Matrix d_logits(batch, p.input_dim());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double o = logits.data()[i];
    const double xi = x.data()[i];
    total += nn::softplus(o) - xi * o;
    d_logits.data()[i] = (nn::sigmoid(o) - xi) * inv_b;
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu.data()[i];
    const double l = lv.data()[i];
    total -= 0.5 * (1.0 + l - m * m - std::exp(l));
  }
  res.loss = total * inv_b;

  const Matrix d_h2 = nn::backward(p.dec_out, h2, d_logits, res.grad.dec_out);
  const Matrix d_h2_pre = nn::leaky_relu_backward(h2_pre, d_h2);
  const Matrix d_z = nn::backward(p.dec_hidden, z, d_h2_pre, res.grad.dec_hidden);

  Matrix d_mu(batch, p.latent_dim());
  Matrix d_lv(batch, p.latent_dim());
  for (std::size_t i = 0; i < d_mu.size(); ++i) {
    const double m = mu.data()[i];
    const double l = lv.data()[i];
    const double sd = std::exp(0.5 * l);
    d_mu.data()[i] = d_z.data()[i] + m * inv_b;
    d_lv.data()[i] = d_z.data()[i] * 0.5 * sd * eps.data()[i] + 0.5 * (std::exp(l) - 1.0) * inv_b;
  }
  Matrix d_h1 = nn::backward(p.enc_mu, h1, d_mu, res.grad.enc_mu);
  const Matrix d_h1b =
      nn::backward(p.enc_logvar, h1, d_lv, res.grad.enc_logvar);
  for (std::size_t i = 0; i < d_h1.size(); ++i) d_h1.data()[i] += d_h1b.data()[i];
  const Matrix d_h1_pre = nn::leaky_relu_backward(h1_pre, d_h1);
  nn::backward(p.enc_hidden, x, d_h1_pre, res.grad.enc_hidden);
  return res;
}

Matrix images_to_batch(std::span<const Image* const> imgs) {
  if (imgs.empty()) throw DataError("images_to_batch: empty batch");
  const std::size_t d = imgs.front()->pixels().size();
  Matrix m(imgs.size(), d);
  for (std::size_t r = 0; r < imgs.size(); ++r) {
    if (imgs[r]->channels() != 1 || imgs[r]->pixels().size() != d)
      throw DataError("images_to_batch: images must share one 1-channel shape");
    std::copy(imgs[r]->pixels().begin(), imgs[r]->pixels().end(), m.row(r).begin());
  }
  return m;
}

Matrix images_to_batch(std::span<const Image> imgs) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(imgs.size());
  for (const auto& img : imgs) ptrs.push_back(&img);
  return images_to_batch(std::span<const Image* const>(ptrs));
}

VaeTrainResult vae_train(const VaeConfig& cfg, std::span<const Image> dataset) {
  if (dataset.empty()) throw DataError("vae_train: empty dataset");
  if (cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr > 0.0))
    throw DataError("vae_train: epochs, batch and lr must be positive");
  const Image& first = dataset.front();
  if (first.channels() != 1 || first.width() != first.height())
    throw DataError("vae_train: expected square 1-channel images");
  for (const auto& img : dataset)
    if (img.width() != first.width() || img.height() != first.height() || img.channels() != 1)
      throw DataError("vae_train: images must share one size");

  VaeTrainResult out{vae_init(cfg, first.width()), {}};
  nn::Adam adam(nn::AdamOptions{cfg.lr, 0.9, 0.999, 1e-8});
  Rng rng(derive_seed(cfg.seed, "vae:train"));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(start + cfg.batch, order.size());
      std::vector<const Image*> members;
      for (std::size_t k = start; k < end; ++k) members.push_back(&dataset[order[k]]);
      const Matrix x = images_to_batch(std::span<const Image* const>(members));
      Matrix eps(members.size(), cfg.latent_dim);
      for (auto& e : eps.data()) e = rng.gaussian();
      VaeBatchResult r = vae_loss_and_grad(out.params, x, eps);
      if (!std::isfinite(r.loss)) throw NumericalError("vae_train: loss diverged");
      epoch_loss += r.loss * static_cast<double>(members.size());
      const auto grads = std::as_const(r.grad).tensors();
      adam.step(out.params.tensors(), grads);
    }
    out.loss_history.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return out;
}

LatentVector embed(const VaeParams& p, const Image& img) { return encode(p, img).mu; }

std::vector<LatentVector> embed_all(const VaeParams& p, std::span<const Image> imgs) {
  if (imgs.empty()) return {};
  for (const auto& img : imgs) check_image(p, img);
  const Matrix x = images_to_batch(imgs);
  const Matrix h = nn::leaky_relu(nn::forward(p.enc_hidden, x));
  const Matrix mu = nn::forward(p.enc_mu, h);
  std::vector<LatentVector> out(imgs.size());
  for (std::size_t r = 0; r < imgs.size(); ++r) out[r].assign(mu.row(r).begin(), mu.row(r).end());
  return out;
}

void save_vae(const VaeParams& p, const std::filesystem::path& path) {
  const auto t = p.tensors();
  nn::save_tensors(path, 'V', t);
}

VaeParams vae_from_tensors(const nn::TensorFile& f) {
  if (f.tag != 'V' || f.tensors.size() != 10) throw DataError("vae file: unexpected layout");
  auto dense = [&](std::size_t k) {
    const Matrix& w = f.tensors[2 * k];
    const Matrix& b = f.tensors[2 * k + 1];
    if (b.rows() != 1 || b.cols() != w.rows()) throw DataError("vae file: bias shape mismatch");
    return nn::Dense{w, b.values()};
  };
  VaeParams p{dense(0), dense(1), dense(2), dense(3), dense(4)};
  const std::size_t side = side_of(p);
  if (side * side != p.input_dim() || p.enc_mu.in() != p.hidden() ||
      p.enc_logvar.out() != p.latent_dim() || p.dec_hidden.in() != p.latent_dim() ||
      p.dec_out.out() != p.input_dim() || p.dec_out.in() != p.dec_hidden.out())
    throw DataError("vae file: inconsistent layer shapes");
  return p;
}

VaeParams load_vae(const std::filesystem::path& path) { return vae_from_tensors(nn::load_tensors(path)); }

}  // namespace galvae
