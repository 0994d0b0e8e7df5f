#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "galvae/error.hpp"
#include "galvae/synthdata.hpp"
#include "galvae/vae.hpp"

using namespace galvae;

namespace {

VaeConfig toy_config() {
  VaeConfig cfg;
  cfg.latent_dim = 4;
  cfg.hidden = 8;
  cfg.seed = 21;
  return cfg;
}

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

double leaky(double v) { return v > 0 ? v : 0.2 * v; }

}  // namespace

TEST_CASE("vae_init") {
  VaeConfig cfg;
  cfg.seed = 3;
  const VaeParams a = vae_init(cfg, 32);
  const VaeParams b = vae_init(cfg, 32);
  CHECK(nn::flatten(a.tensors()) == nn::flatten(b.tensors()));
  CHECK(a.input_dim() == 1024);
  CHECK(a.latent_dim() == 32);
  for (const auto* bias : {&a.enc_hidden.b, &a.enc_mu.b, &a.enc_logvar.b, &a.dec_hidden.b, &a.dec_out.b})
    for (double v : *bias) CHECK(v == 0.0);

  // enc_hidden holds 256 x 1024 entries drawn with variance 2 / 1024
  double ss = 0.0;
  for (double v : a.enc_hidden.w.data()) ss += v * v;
  const double var = ss / static_cast<double>(a.enc_hidden.w.size());
  CHECK(std::abs(var - 2.0 / 1024.0) <= 0.1 * 2.0 / 1024.0);
}

TEST_CASE("encode zero propagation and hand trace") {
  VaeConfig cfg = toy_config();
  const VaeParams zero = vae_zeros_like(vae_init(cfg, 4));
  const Encoding e = encode(zero, Image(4, 4, 1));
  for (double v : e.mu) CHECK(v == 0.0);
  for (double v : e.logvar) CHECK(v == 0.0);
  const Image z0 = decode(zero, Vector(4, 0.0));
  for (double p : z0.pixels()) CHECK(p == 0.5);

  // 2x2 image, hidden 2, latent 2 with hand-set weights
  VaeParams p;
  p.enc_hidden = {Matrix{{1, -1, 0.5, 0}, {0.2, 0.3, -0.4, 1}}, Vector{0.1, -0.2}};
  p.enc_mu = {Matrix{{1, 2}, {-1, 0.5}}, Vector{0, 0.3}};
  p.enc_logvar = {Matrix{{0.5, 0}, {0, -0.5}}, Vector{0.1, 0}};
  p.dec_hidden = {Matrix{{1, 0}, {0.5, -1}}, Vector{0, 0.1}};
  p.dec_out = {Matrix{{1, 1}, {-1, 0}, {0, 2}, {0.3, -0.3}}, Vector{0, 0, -0.5, 0.2}};
  const Image img(2, 2, 1, {0.1, 0.2, 0.3, 0.4});

  // hidden pre-activations by hand: [0.1-0.2+0.15+0+0.1, 0.02+0.06-0.12+0.4-0.2]
  const double h0 = leaky(0.15), h1 = leaky(0.16);
  const double mu0 = h0 + 2 * h1, mu1 = -h0 + 0.5 * h1 + 0.3;
  const double lv0 = 0.5 * h0 + 0.1, lv1 = -0.5 * h1;
  const Encoding enc = encode(p, img);
  CHECK(enc.mu[0] == doctest::Approx(mu0).epsilon(1e-14));
  CHECK(enc.mu[1] == doctest::Approx(mu1).epsilon(1e-14));
  CHECK(enc.logvar[0] == doctest::Approx(lv0).epsilon(1e-14));
  CHECK(enc.logvar[1] == doctest::Approx(lv1).epsilon(1e-14));
  CHECK(embed(p, img) == enc.mu);

  const Vector z{0.4, -0.6};
  const double d0 = leaky(0.4), d1 = leaky(0.2 + 0.6 + 0.1);
  const double outs[4] = {d0 + d1, -d0, 2 * d1 - 0.5, 0.3 * d0 - 0.3 * d1 + 0.2};
  const Image dec = decode(p, z);
  for (int i = 0; i < 4; ++i) CHECK(dec.pixels()[i] == doctest::Approx(1.0 / (1.0 + std::exp(-outs[i]))).epsilon(1e-14));

  CHECK_THROWS_AS(encode(p, Image(3, 3, 1)), DataError);
  CHECK_THROWS_AS(decode(p, Vector{1, 2, 3}), DataError);
}

TEST_CASE("reparameterize") {
  CHECK(reparameterize({1, 2}, {0.3, -1}, {0, 0}) == Vector{1, 2});
  CHECK(reparameterize({1, 2}, {0, 0}, {0.5, -1}) == Vector{1.5, 1});
  CHECK(reparameterize({1}, {std::log(4.0)}, {0.5})[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(reparameterize({1}, {0, 0}, {0}), DataError);
}

TEST_CASE("elbo_loss terms") {
  const Image img(2, 1, 1, {0.0, 1.0});
  const Image recon(2, 1, 1, {0.25, 0.5});
  const ElboTerms t0 = elbo_loss(img, recon, {0, 0}, {0, 0});
  CHECK(t0.kl == 0.0);
  CHECK(t0.recon == doctest::Approx(-std::log(0.75) - std::log(0.5)).epsilon(1e-14));
  const ElboTerms t1 = elbo_loss(img, recon, {1, 0}, {0, 0});
  CHECK(t1.kl == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t1.total == doctest::Approx(t1.recon + t1.kl));
  CHECK(elbo_loss(img, recon, {0.3, -0.2}, {0.5, -0.4}).kl > 0.0);
  CHECK_THROWS_AS(elbo_loss(img, Image(2, 1, 1, {0.0, 0.5}), {0}, {0}), DataError);
  CHECK_THROWS_AS(elbo_loss(img, Image(2, 1, 1, {1.0, 0.5}), {0}, {0}), DataError);
}

TEST_CASE("vae gradient matches finite differences") {
  const VaeConfig cfg = toy_config();
  VaeParams p = vae_init(cfg, 4);  // d_in 16, hidden 8, latent 4
  Rng rng(77);
  // perturb biases so every path is exercised
  for (auto t : p.tensors())
    for (auto& v : t.data) v += rng.uniform(-0.1, 0.1);
  const Matrix x = random_batch(3, 16, rng, 0.0, 1.0);
  const Matrix eps = random_batch(3, 4, rng, -1.0, 1.0);

  const VaeBatchResult res = vae_loss_and_grad(p, x, eps);
  const Vector theta = nn::flatten(std::as_const(p).tensors());
  const Vector grad = nn::flatten(std::as_const(res.grad).tensors());
  VaeParams probe = p;
  const ScalarFn f = [&](const Vector& th) {
    nn::assign(probe.tensors(), th);
    return vae_loss_and_grad(probe, x, eps).loss;
  };
  CHECK(gradient_check(f, theta, grad) <= 1e-4);

  // the loss is the mean ELBO of the per-image forward path
  double total = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    const Image img(4, 4, 1, Vector(x.row(r).begin(), x.row(r).end()));
    const Encoding e = encode(p, img);
    const Vector z = reparameterize(e.mu, e.logvar, Vector(eps.row(r).begin(), eps.row(r).end()));
    total += elbo_loss(img, decode(p, z), e.mu, e.logvar).total;
  }
  CHECK(res.loss == doctest::Approx(total / 3.0).epsilon(1e-12));
}

TEST_CASE("vae_train lowers the loss and is deterministic") {
  DatasetOptions opts;
  opts.n_per_label = 100;
  opts.side = 32;
  opts.seed = 2;
  std::vector<Image> disease;
  for (const auto& li : make_dataset(opts))
    if (li.label == Label::cardiomegaly) disease.push_back(li.image);
  REQUIRE(disease.size() == 100);

  VaeConfig cfg;
  cfg.seed = 5;
  const auto r1 = vae_train(cfg, disease);
  REQUIRE(r1.loss_history.size() == 25);
  CHECK(r1.loss_history.back() < r1.loss_history.front());

  // distinct phantoms embed to distinct vectors
  const auto lat = embed_all(r1.params, disease);
  for (std::size_t i = 0; i < lat.size(); ++i)
    for (std::size_t j = i + 1; j < lat.size(); ++j) CHECK_FALSE(lat[i] == lat[j]);
  CHECK(lat[7] == embed(r1.params, disease[7]));

  cfg.epochs = 3;
  const auto a = vae_train(cfg, std::span<const Image>(disease).first(20));
  const auto b = vae_train(cfg, std::span<const Image>(disease).first(20));
  CHECK(a.loss_history == b.loss_history);
  CHECK(nn::flatten(a.params.tensors()) == nn::flatten(b.params.tensors()));

  cfg.epochs = 40;
  const auto one = vae_train(cfg, std::span<const Image>(disease).first(1));
  CHECK(one.loss_history.back() < one.loss_history.front());

  CHECK_THROWS_AS(vae_train(cfg, std::vector<Image>{}), DataError);
}

TEST_CASE("vae save and load round-trip") {
  const VaeParams p = vae_init(toy_config(), 4);
  const auto path = std::filesystem::temp_directory_path() / "galvae_test_vae.bin";
  save_vae(p, path);
  const VaeParams q = load_vae(path);
  CHECK(nn::flatten(q.tensors()) == nn::flatten(p.tensors()));
  CHECK(q.latent_dim() == 4);

  const std::string bytes = nn::encode_tensors('V', p.tensors());
  CHECK(bytes.substr(0, 5) == "GALV1");
  CHECK_THROWS_AS(nn::decode_tensors(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(vae_from_tensors(nn::decode_tensors(nn::encode_tensors('G', p.tensors()))), DataError);
}
