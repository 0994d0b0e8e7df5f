// Runs the eight acceptance checks and prints one PASS/FAIL line for each.
// Exit status is nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "galvae/classifier.hpp"
#include "galvae/gan.hpp"
#include "galvae/hash.hpp"
#include "galvae/imaging.hpp"
#include "galvae/kernels.hpp"
#include "galvae/metrics.hpp"
#include "galvae/numerics.hpp"
#include "galvae/pipeline.hpp"
#include "galvae/query.hpp"
#include "galvae/rng.hpp"
#include "galvae/synthdata.hpp"
#include "galvae/vae.hpp"

using namespace galvae;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failed conditions for one criterion.
struct Check {
  std::vector<std::string> failures;
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool report(int n, const Check& c, const std::string& details) {
  std::printf("criterion %d: %s %s", n, c.failures.empty() ? "PASS" : "FAIL", details.c_str());
  for (const auto& f : c.failures) std::printf(" [%s]", f.c_str());
  std::printf("\n");
  std::fflush(stdout);
  return c.failures.empty();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Matrix random_psd(std::size_t n, Rng& rng) {
  // rank-deficient about a third of the time
  const std::size_t k = rng.below(3) == 0 ? std::max<std::size_t>(1, n / 2) : n;
  Matrix a(n, k);
  for (auto& v : a.data()) v = rng.gaussian();
  Matrix p = mat_mul(a, transpose(a));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) p(i, j) = p(j, i);
  return p;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

template <class Params>
void jitter(Params& p, Rng& rng) {
  for (auto t : p.tensors())
    for (auto& v : t.data) v += rng.uniform(-0.1, 0.1);
}

bool criterion_1() {
  Check c;
  const auto t0 = Clock::now();
  const auto id = Matrix::identity(2);
  const GaussianStats base{{0, 0}, id};
  c.require(std::abs(fid(base, base)) <= 1e-10, "fid(t,t)");
  c.require(std::abs(fid(base, {{1, 0}, id}) - 1.0) <= 1e-8, "mean shift");
  c.require(std::abs(fid(base, {{0, 0}, scale(id, 4.0)}) - 2.0) <= 1e-8, "covariance scale");

  c.require(std::abs(cosine_distance(Vector{0.3, -2, 5}, Vector{0.3, -2, 5})) <= 1e-12, "cosine 0");
  c.require(std::abs(cosine_distance(Vector{1, 0}, Vector{0, 1}) - 1.0) <= 1e-12, "cosine 1");
  c.require(std::abs(cosine_distance(Vector{1, 1}, Vector{1, 0}) - (1.0 - 1.0 / std::sqrt(2.0))) <= 1e-12,
            "cosine 1-1/sqrt2");

  const Scores half = scores({1, 1, 1, 1});
  c.require(half.accuracy == 0.5 && half.precision == 0.5 && half.recall == 0.5 && half.f1 == 0.5, "scores 0.5");
  const Scores s = scores({2, 1, 0, 1});
  c.require(s.precision == 2.0 / 3.0 && s.recall == 1.0 && s.f1 == 0.8 && s.accuracy == 0.75, "scores mixed");

  const double t = seconds_since(t0);
  c.require(t < 1.0, "runtime");
  return report(1, c, "metrics " + fmt(t) + "s");
}

bool criterion_2() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst_sqrt = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(32);
    const Matrix p = random_psd(n, rng);
    const Matrix q = psd_sqrt(p);
    const double denom = std::max(frobenius_norm(p), 1e-300);
    worst_sqrt = std::max(worst_sqrt, frobenius_norm(sub(mat_mul(q, q), p)) / denom);
    const auto e = sym_eig(p);
    worst_orth = std::max(worst_orth,
                          frobenius_norm(sub(mat_mul(transpose(e.vectors), e.vectors), Matrix::identity(n))));
  }
  c.require(worst_sqrt <= 1e-8, "psd_sqrt residual");
  c.require(worst_orth <= 1e-8, "orthonormality");
  const double t = seconds_since(t0);
  c.require(t < 10.0, "runtime");
  return report(2, c, "sqrt residual " + fmt(worst_sqrt) + ", orthonormality " + fmt(worst_orth) + ", " + fmt(t) +
                          "s");
}

bool criterion_3() {
  Check c;
  const auto t0 = Clock::now();
  Rng rng(33);
  double worst = 0.0;
  auto record = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    c.require(err <= 1e-4, name + " " + fmt(err));
  };

  {
    VaeConfig cfg;
    cfg.latent_dim = 4;
    cfg.hidden = 8;
    VaeParams p = vae_init(cfg, 4);
    jitter(p, rng);
    const Matrix x = random_matrix(3, 16, rng, 0.0, 1.0);
    const Matrix eps = random_matrix(3, 4, rng, -1.0, 1.0);
    const VaeBatchResult res = vae_loss_and_grad(p, x, eps);
    VaeParams probe = p;
    const ScalarFn f = [&](const Vector& th) {
      nn::assign(probe.tensors(), th);
      return vae_loss_and_grad(probe, x, eps).loss;
    };
    record("vae", gradient_check(f, nn::flatten(std::as_const(p).tensors()),
                                 nn::flatten(std::as_const(res.grad).tensors())));
  }
  {
    GanCycleConfig cfg;
    cfg.d_noise = 5;
    cfg.hidden_g = 6;
    cfg.hidden_d = 7;
    GanParams p = gan_init(cfg, 3, 4);
    for (auto t : p.generator_tensors())
      for (auto& v : t.data) v += rng.uniform(-0.1, 0.1);
    for (auto t : p.discriminator_tensors())
      for (auto& v : t.data) v += rng.uniform(-0.1, 0.1);
    const Matrix real = random_matrix(4, 9, rng, 0.0, 1.0);
    const Matrix fake = random_matrix(3, 9, rng, 0.0, 1.0);
    const Matrix noise = random_matrix(5, 5, rng, -1.0, 1.0);

    const GanLossResult d = discriminator_loss_and_grad(p, real, fake);
    GanParams probe = p;
    const ScalarFn fd = [&](const Vector& th) {
      nn::assign(probe.discriminator_tensors(), th);
      return discriminator_loss_and_grad(probe, real, fake).loss;
    };
    record("discriminator", gradient_check(fd, nn::flatten(std::as_const(p).discriminator_tensors()),
                                           nn::flatten(std::as_const(d.grad).discriminator_tensors())));

    const GanLossResult g = generator_loss_and_grad(p, noise);
    probe = p;
    const ScalarFn fg = [&](const Vector& th) {
      nn::assign(probe.generator_tensors(), th);
      return generator_loss_and_grad(probe, noise).loss;
    };
    record("generator", gradient_check(fg, nn::flatten(std::as_const(p).generator_tensors()),
                                       nn::flatten(std::as_const(g.grad).generator_tensors())));
  }
  {
    ClassifierConfig cfg;
    cfg.hidden = 5;
    ClassifierParams p = clf_init(cfg, 6, 3);
    jitter(p, rng);
    const Matrix x = random_matrix(4, 6, rng, 0.0, 1.0);
    const std::vector<Label> labels{Label::cardiomegaly, Label::normal, Label::normal, Label::cardiomegaly};
    const ClassifierLoss l = clf_loss_and_grad(p, x, labels);
    ClassifierParams probe = p;
    const ScalarFn f = [&](const Vector& th) {
      nn::assign(probe.tensors(), th);
      return clf_loss_and_grad(probe, x, labels).loss;
    };
    record("classifier", gradient_check(f, nn::flatten(std::as_const(p).tensors()),
                                        nn::flatten(std::as_const(l.grad).tensors())));
  }
  const double t = seconds_since(t0);
  c.require(t < 30.0, "runtime");
  return report(3, c, "worst relative error " + fmt(worst) + ", " + fmt(t) + "s");
}

bool criterion_4() {
  Check c;
  Rng rng(44);
  auto latents = [&](std::size_t n, std::size_t d) {
    std::vector<Vector> out(n, Vector(d));
    for (auto& v : out)
      for (auto& x : v) x = rng.gaussian();
    return out;
  };
  const auto real = latents(100, 32);
  const auto gen = latents(200, 32);
  double worst = 0.0;
  for (Aggregation agg : {Aggregation::mean, Aggregation::max}) {
    const auto got = score_generated(real, gen, agg);
    for (std::size_t j = 0; j < gen.size(); ++j) {
      double sum = 0.0, best = -2.0;
      for (const auto& r : real) {
        double dot = 0.0, nr = 0.0, ng = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
          dot += r[k] * gen[j][k];
          nr += r[k] * r[k];
          ng += gen[j][k] * gen[j][k];
        }
        const double sim = dot / (std::sqrt(nr) * std::sqrt(ng));
        sum += sim;
        best = std::max(best, sim);
      }
      const double want = agg == Aggregation::mean ? sum / static_cast<double>(real.size()) : best;
      worst = std::max(worst, std::abs(got[j] - want));
    }
  }
  c.require(worst <= 1e-12, "oracle mismatch " + fmt(worst));

  std::vector<double> scores(1000);
  for (auto& s : scores) s = rng.uniform();
  const QueryResult q = select_top_fraction(scores, 0.10);
  c.require(q.selected.size() == 100, "selected " + std::to_string(q.selected.size()));
  std::vector<bool> chosen(scores.size(), false);
  for (std::size_t i : q.selected) chosen[i] = true;
  double lowest_in = 2.0, highest_out = -1.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (chosen[i])
      lowest_in = std::min(lowest_in, scores[i]);
    else
      highest_out = std::max(highest_out, scores[i]);
  }
  c.require(lowest_in >= highest_out, "threshold invariant");
  c.require(q.threshold_score == lowest_in, "threshold score");
  return report(4, c, "oracle max deviation " + fmt(worst) + ", kept " + std::to_string(q.selected.size()));
}

bool criterion_5() {
  Check c;
  DatasetOptions opts;
  opts.n_per_label = 25;
  opts.side = 64;
  opts.annotate_frac = 1.0;
  opts.seed = 5;
  const auto data = make_dataset(opts);
  std::size_t stroke_total = 0, stroke_hit = 0, annotated = 0, changed_unmasked = 0;
  double worst_mae = 0.0, worst_masked_mae = 0.0;
  for (const auto& li : data) {
    if (!li.spec.annotate) continue;
    ++annotated;
    const BinaryMask mask = extract_green_mask(li.image);
    const Image gray = to_grayscale(li.image);
    const Image filled = inpaint(gray, mask);
    PhantomSpec clean_spec = li.spec;
    clean_spec.annotate = false;
    const Image clean = render_phantom(clean_spec, opts.side).image;

    double abs_sum = 0.0, masked_sum = 0.0;
    std::size_t masked = 0;
    for (std::size_t y = 0; y < gray.height(); ++y)
      for (std::size_t x = 0; x < gray.width(); ++x) {
        if (li.stroke.get(x, y)) {
          ++stroke_total;
          stroke_hit += mask.get(x, y);
        }
        const double err = std::abs(filled.at(x, y) - clean.at(x, y));
        abs_sum += err;
        if (mask.get(x, y)) {
          masked_sum += err;
          ++masked;
        } else if (filled.at(x, y) != gray.at(x, y)) {
          ++changed_unmasked;
        }
      }
    worst_mae = std::max(worst_mae, abs_sum / static_cast<double>(gray.width() * gray.height()));
    if (masked > 0) worst_masked_mae = std::max(worst_masked_mae, masked_sum / static_cast<double>(masked));
  }
  const double coverage = stroke_total ? static_cast<double>(stroke_hit) / static_cast<double>(stroke_total) : 0.0;
  c.require(annotated == 50, "annotated " + std::to_string(annotated));
  c.require(coverage >= 0.99, "stroke coverage");
  c.require(worst_mae <= 0.05, "inpaint MAE");
  c.require(changed_unmasked == 0, std::to_string(changed_unmasked) + " unmasked pixels changed");
  return report(5, c, "stroke coverage " + fmt(coverage) + ", worst image MAE " + fmt(worst_mae) +
                          " (masked-region MAE " + fmt(worst_masked_mae) + ")");
}

struct SeedRun {
  std::uint64_t seed;
  fs::path dir;
  ExperimentResult result;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "galvae_acceptance" / name;
  fs::remove_all(dir);
  return dir;
}

bool criterion_6(std::vector<SeedRun>& runs) {
  Check c;
  set_thread_limit(1);
  const auto t0 = Clock::now();
  std::size_t improved = 0;
  std::string trend;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.out_dir = scratch("seed" + std::to_string(seed));
    ExperimentResult r = run_experiment(cfg);
    const auto& first = r.cycles.front();
    const auto& last = r.cycles.back();
    c.require(r.cycles.size() == 5, "rounds " + std::to_string(r.cycles.size()));
    for (const auto& cy : r.cycles)
      c.require(cy.optimal_fid <= cy.worst_fid, "seed " + std::to_string(seed) + " " + cy.label + " optimal > worst");
    improved += last.optimal_fid < first.optimal_fid;
    trend += (trend.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " " +
             fmt(first.optimal_fid) + "->" + fmt(last.optimal_fid);
    runs.push_back({seed, cfg.out_dir, std::move(r)});
  }
  const double t = seconds_since(t0);
  c.require(improved >= 2, "improved on " + std::to_string(improved) + "/3 seeds");
  c.require(t <= 600.0, "runtime");
  return report(6, c, trend + "; " + fmt(t) + "s");
}

bool criterion_7() {
  Check c;
  set_thread_limit(1);
  ExperimentConfig cfg;
  cfg.seed = 1;
  cfg.noise_sigma = 0.0;
  const ExperimentResult r = run_experiment(cfg);

  c.require(r.sessions.size() == 5, "sessions " + std::to_string(r.sessions.size()));
  const std::size_t test_size = r.real.test_images.size();
  double worst_acc = 1.0;
  for (const auto& s : r.sessions) {
    const auto& cm = s.cm;
    const std::string tag = "session " + std::to_string(s.session);
    c.require(cm.tp + cm.fp + cm.fn + cm.tn == test_size, tag + " cm total");
    const double n = static_cast<double>(cm.tp + cm.fp + cm.fn + cm.tn);
    c.require(s.scores.accuracy == static_cast<double>(cm.tp + cm.tn) / n, tag + " accuracy identity");
    if (cm.tp + cm.fp > 0)
      c.require(s.scores.precision == static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp),
                tag + " precision identity");
    if (cm.tp + cm.fn > 0)
      c.require(s.scores.recall == static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn),
                tag + " recall identity");
    if (!s.scores.f1_undefined)
      c.require(s.scores.f1 == 2.0 * s.scores.precision * s.scores.recall / (s.scores.precision + s.scores.recall),
                tag + " f1 identity");
    worst_acc = std::min(worst_acc, s.scores.accuracy);
  }
  c.require(worst_acc >= 0.9, "accuracy " + fmt(worst_acc));

  std::vector<std::vector<Image>> selections;
  for (std::size_t i = 0; i + 1 < r.artifacts.size(); ++i) selections.push_back(r.artifacts[i].selected_images);
  const auto specs = build_sessions(r.real, selections);
  std::size_t overlaps = 0;
  for (const auto& spec : specs) {
    std::set<std::string> test_hashes;
    for (const auto& img : spec.test_images) test_hashes.insert(image_hash(img));
    for (const auto* set : {&spec.disease_train, &spec.normal_train})
      for (const auto& img : *set) overlaps += test_hashes.count(image_hash(img));
  }
  c.require(overlaps == 0, std::to_string(overlaps) + " train images share a hash with test");
  for (std::size_t s = 0; s < specs.size() && s < r.sessions.size(); ++s)
    c.require(specs[s].disease_train.size() == r.sessions[s].train_disease, "session sizes");

  c.require(r.session_seconds <= 120.0, "runtime");
  return report(7, c, "min accuracy " + fmt(worst_acc) + ", test size " + std::to_string(test_size) +
                          ", classification " + fmt(r.session_seconds) + "s");
}

bool criterion_8(const std::vector<SeedRun>& runs) {
  Check c;
  set_thread_limit(1);
  const SeedRun& ref = runs.front();
  ExperimentConfig cfg;
  cfg.seed = ref.seed;
  cfg.out_dir = scratch("repeat");
  run_experiment(cfg);
  for (const char* name : {"report.json", "fid.csv"}) {
    const std::string a = slurp(ref.dir / name), b = slurp(cfg.out_dir / name);
    c.require(!a.empty() && a == b, std::string(name) + " differs");
  }
  return report(8, c, "seed " + std::to_string(ref.seed) + " rerun in a second directory");
}

bool guarded(int n, const std::function<bool()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL exception: %s\n", n, e.what());
    std::fflush(stdout);
    return false;
  }
}

}  // namespace

int main() {
  std::vector<SeedRun> runs;
  bool ok = true;
  ok &= guarded(1, criterion_1);
  ok &= guarded(2, criterion_2);
  ok &= guarded(3, criterion_3);
  ok &= guarded(4, criterion_4);
  ok &= guarded(5, criterion_5);
  ok &= guarded(6, [&] { return criterion_6(runs); });
  ok &= guarded(7, criterion_7);
  ok &= guarded(8, [&] {
    if (runs.empty()) throw std::runtime_error("no reference run from criterion 6");
    return criterion_8(runs);
  });
  return ok ? 0 : 1;
}
