#include "galvae/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>

#include "galvae/error.hpp"
#include "galvae/hash.hpp"
#include "galvae/metrics.hpp"
#include "galvae/rng.hpp"

namespace galvae {

// ---------------------------------------------------------------- config

namespace {

enum class Kind { count, real, flag, seed, text };

struct Field {
  std::string key;
  Kind kind;
  std::string help;
  std::function<nlohmann::json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const nlohmann::json&)> set;
};

template <typename Ref>
Field count_field(std::string key, std::string help, Ref ref) {
  return {std::move(key), Kind::count, std::move(help),
          [ref](const ExperimentConfig& c) {
            return nlohmann::json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const nlohmann::json& v) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
              throw UsageError("expected a non-negative integer");
            ref(c) = v.get<std::size_t>();
          }};
}

template <typename Ref>
Field real_field(std::string key, std::string help, Ref ref) {
  return {std::move(key), Kind::real, std::move(help),
          [ref](const ExperimentConfig& c) {
            return nlohmann::json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const nlohmann::json& v) {
            if (!v.is_number()) throw UsageError("expected a number");
            ref(c) = v.get<double>();
          }};
}

template <typename Ref>
Field flag_field(std::string key, std::string help, Ref ref) {
  return {std::move(key), Kind::flag, std::move(help),
          [ref](const ExperimentConfig& c) {
            return nlohmann::json(ref(const_cast<ExperimentConfig&>(c)));
          },
          [ref](ExperimentConfig& c, const nlohmann::json& v) {
            if (!v.is_boolean()) throw UsageError("expected true or false");
            ref(c) = v.get<bool>();
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      count_field("side", "preprocessed image side (pixels)", [](C& c) -> auto& { return c.side; }),
      count_field("raw_side", "synthesized phantom side before preprocessing",
                  [](C& c) -> auto& { return c.raw_side; }),
      count_field("initial_real_count", "real cardiomegaly images seeding the loop",
                  [](C& c) -> auto& { return c.initial_real_count; }),
      count_field("target_size", "stop once the GAN training set reaches this size",
                  [](C& c) -> auto& { return c.target_size; }),
      count_field("normal_train_count", "normal images in every classifier session",
                  [](C& c) -> auto& { return c.normal_train_count; }),
      count_field("test_per_label", "held-out real test images per label",
                  [](C& c) -> auto& { return c.test_per_label; }),
      real_field("noise_sigma", "phantom pixel noise standard deviation",
                 [](C& c) -> auto& { return c.noise_sigma; }),
      real_field("annotate_frac", "fraction of phantoms carrying a green annotation",
                 [](C& c) -> auto& { return c.annotate_frac; }),
      real_field("hue_lo", "green mask lower hue (degrees)", [](C& c) -> auto& { return c.green.hue_lo; }),
      real_field("hue_hi", "green mask upper hue (degrees)", [](C& c) -> auto& { return c.green.hue_hi; }),
      real_field("s_min", "green mask minimum saturation", [](C& c) -> auto& { return c.green.s_min; }),
      real_field("v_min", "green mask minimum value", [](C& c) -> auto& { return c.green.v_min; }),
      count_field("gen_per_cycle", "images generated per cycle", [](C& c) -> auto& { return c.gen_per_cycle; }),
      real_field("keep_fraction", "fraction of generated images kept by the query",
                 [](C& c) -> auto& { return c.keep_fraction; }),
      {"aggregation", Kind::text, "query score aggregation over the real set: mean | max",
       [](const C& c) { return nlohmann::json(c.aggregation == Aggregation::mean ? "mean" : "max"); },
       [](C& c, const nlohmann::json& v) {
         if (!v.is_string()) throw UsageError("expected \"mean\" or \"max\"");
         const auto s = v.get<std::string>();
         if (s == "mean") c.aggregation = Aggregation::mean;
         else if (s == "max") c.aggregation = Aggregation::max;
         else throw UsageError("expected \"mean\" or \"max\"");
       }},
      flag_field("reinit_per_cycle", "re-initialize the GAN at the start of every cycle",
                 [](C& c) -> auto& { return c.reinit_per_cycle; }),
      count_field("epochs_per_cycle", "GAN epochs per cycle", [](C& c) -> auto& { return c.gan.epochs_per_cycle; }),
      count_field("eval_every", "epochs between FID evaluations", [](C& c) -> auto& { return c.gan.eval_every; }),
      count_field("eval_n", "images generated per FID evaluation (0 = reference size)",
                  [](C& c) -> auto& { return c.gan.eval_n; }),
      count_field("d_noise", "generator noise dimension", [](C& c) -> auto& { return c.gan.d_noise; }),
      count_field("gan_hidden_g", "generator hidden width", [](C& c) -> auto& { return c.gan.hidden_g; }),
      count_field("gan_hidden_d", "discriminator hidden width", [](C& c) -> auto& { return c.gan.hidden_d; }),
      count_field("gan_batch", "GAN mini-batch size", [](C& c) -> auto& { return c.gan.batch; }),
      real_field("lr_g", "generator Adam learning rate", [](C& c) -> auto& { return c.gan.lr_g; }),
      real_field("lr_d", "discriminator Adam learning rate", [](C& c) -> auto& { return c.gan.lr_d; }),
      real_field("gan_beta1", "GAN Adam beta1", [](C& c) -> auto& { return c.gan.beta1; }),
      {"feature_mode", Kind::text, "FID feature space: pixel | vae-latent",
       [](const C& c) {
         return nlohmann::json(c.feature_mode == FeatureMode::pixel ? "pixel" : "vae-latent");
       },
       [](C& c, const nlohmann::json& v) {
         if (!v.is_string()) throw UsageError("expected \"pixel\" or \"vae-latent\"");
         const auto s = v.get<std::string>();
         if (s == "pixel") c.feature_mode = FeatureMode::pixel;
         else if (s == "vae-latent") c.feature_mode = FeatureMode::vae_latent;
         else throw UsageError("expected \"pixel\" or \"vae-latent\"");
       }},
      count_field("feature_side", "pixel-feature downsample side", [](C& c) -> auto& { return c.feature_side; }),
      count_field("vae_latent_dim", "VAE latent dimension", [](C& c) -> auto& { return c.vae.latent_dim; }),
      count_field("vae_hidden", "VAE hidden width", [](C& c) -> auto& { return c.vae.hidden; }),
      count_field("vae_epochs", "VAE training epochs", [](C& c) -> auto& { return c.vae.epochs; }),
      count_field("vae_batch", "VAE mini-batch size", [](C& c) -> auto& { return c.vae.batch; }),
      real_field("vae_lr", "VAE Adam learning rate", [](C& c) -> auto& { return c.vae.lr; }),
      count_field("clf_hidden", "classifier hidden width", [](C& c) -> auto& { return c.clf.hidden; }),
      count_field("clf_epochs", "classifier training epochs", [](C& c) -> auto& { return c.clf.epochs; }),
      count_field("clf_batch", "classifier mini-batch size", [](C& c) -> auto& { return c.clf.batch; }),
      real_field("clf_lr", "classifier Adam learning rate", [](C& c) -> auto& { return c.clf.lr; }),
      {"seed", Kind::seed, "master seed",
       [](const C& c) { return nlohmann::json(c.seed); },
       [](C& c, const nlohmann::json& v) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           throw UsageError("expected a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"out_dir", Kind::text, "output directory",
       [](const C& c) { return nlohmann::json(c.out_dir.string()); },
       [](C& c, const nlohmann::json& v) {
         if (!v.is_string()) throw UsageError("expected a path string");
         c.out_dir = v.get<std::string>();
       }},
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw UsageError("unknown config key '" + key + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw UsageError("invalid value '" + s + "' for " + key);
  return v;
}

}  // namespace

std::size_t ExperimentConfig::keep_count() const { return galvae::keep_count(keep_fraction, gen_per_cycle); }

std::size_t ExperimentConfig::cycle_count() const {
  const std::size_t keep = keep_count();
  return target_size > initial_real_count ? (target_size - initial_real_count) / keep : 0;
}

void ExperimentConfig::validate() const {
  if (side < 4) throw UsageError("config: side must be >= 4");
  if (raw_side < 16) throw UsageError("config: raw_side must be >= 16");
  if (initial_real_count < 2) throw UsageError("config: initial_real_count must be >= 2");
  if (normal_train_count < 1 || test_per_label < 1)
    throw UsageError("config: normal_train_count and test_per_label must be >= 1");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw UsageError("config: keep_fraction must lie in (0, 1]");
  if (gen_per_cycle < 1) throw UsageError("config: gen_per_cycle must be >= 1");
  if (target_size < initial_real_count)
    throw UsageError("config: target_size must be >= initial_real_count");
  if ((target_size - initial_real_count) % keep_count() != 0)
    throw UsageError("config: target_size - initial_real_count must be divisible by keep count " +
                     std::to_string(keep_count()));
  if (!(annotate_frac >= 0.0 && annotate_frac <= 1.0))
    throw UsageError("config: annotate_frac must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw UsageError("config: noise_sigma must be >= 0");
  if (feature_side < 1) throw UsageError("config: feature_side must be >= 1");
  if (gan.eval_n == 1) throw UsageError("config: eval_n must be 0 or >= 2");
  if (green.hue_lo > green.hue_hi) throw UsageError("config: hue_lo > hue_hi");
  if (vae.latent_dim == 0 || vae.hidden == 0 || vae.epochs == 0 || vae.batch == 0 || !(vae.lr > 0.0))
    throw UsageError("config: VAE sizes and learning rate must be positive");
  if (clf.hidden == 0 || clf.epochs == 0 || clf.batch == 0 || !(clf.lr > 0.0))
    throw UsageError("config: classifier sizes and learning rate must be positive");
  try {
    GanCycleConfig g = gan;
    g.gen_count = gen_per_cycle;
    g.validate();
  } catch (const DataError& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
  if (!j.is_object()) throw UsageError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const Field& f = find_field(key);
    try {
      f.set(base, value);
    } catch (const UsageError& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
  return base;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : fields()) j[f.key] = f.get(cfg);
  return j;
}

void apply_config_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  nlohmann::json v;
  switch (f.kind) {
    case Kind::count:
    case Kind::seed:
      v = parse_number<std::uint64_t>(key, value);
      break;
    case Kind::real: {
      char* end = nullptr;
      const double d = std::strtod(value.c_str(), &end);
      if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(d))
        throw UsageError("invalid value '" + value + "' for " + key);
      v = d;
      break;
    }
    case Kind::flag:
      if (value == "true" || value == "1") v = true;
      else if (value == "false" || value == "0") v = false;
      else throw UsageError("invalid value '" + value + "' for " + key + " (true/false)");
      break;
    case Kind::text:
      v = value;
      break;
  }
  try {
    f.set(cfg, v);
  } catch (const UsageError& e) {
    throw UsageError("--" + key + ": " + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string config_key_help(const std::string& key) { return find_field(key).help; }

// ---------------------------------------------------------------- pipeline

std::pair<double, double> fid_bookkeeping(std::span<const FidRecord> history) {
  if (history.empty()) throw DataError("fid_bookkeeping: empty history");
  double lo = history.front().fid;
  double hi = history.front().fid;
  for (const auto& h : history) {
    lo = std::min(lo, h.fid);
    hi = std::max(hi, h.fid);
  }
  return {lo, hi};
}

RealData build_real_data(const ExperimentConfig& cfg) {
  DatasetOptions opts;
  opts.n_per_label = std::max(cfg.initial_real_count, cfg.normal_train_count) + cfg.test_per_label;
  opts.side = cfg.raw_side;
  opts.annotate_frac = cfg.annotate_frac;
  opts.noise_sigma = cfg.noise_sigma;
  opts.seed = derive_seed(cfg.seed, "data");
  const auto raw = make_dataset(opts);

  std::vector<Image> raw_images;
  raw_images.reserve(raw.size());
  RealData real;
  for (const auto& r : raw) {
    raw_images.push_back(r.image);
    real.input_hashes.push_back(image_hash(r.image));
  }
  const PreprocessConfig pcfg{cfg.side, cfg.green};
  const auto prepped = preprocess_dataset(raw_images, pcfg);

  const std::size_t n = opts.n_per_label;
  for (std::size_t i = 0; i < n; ++i) {
    const Image& disease = prepped[i];
    const Image& normal = prepped[n + i];
    if (i < cfg.initial_real_count) real.disease_train.push_back(disease);
    if (i < cfg.normal_train_count) real.normal_train.push_back(normal);
  }
  for (std::size_t i = n - cfg.test_per_label; i < n; ++i) {
    real.test_images.push_back(prepped[i]);
    real.test_labels.push_back(Label::cardiomegaly);
  }
  for (std::size_t i = n - cfg.test_per_label; i < n; ++i) {
    real.test_images.push_back(prepped[n + i]);
    real.test_labels.push_back(Label::normal);
  }
  return real;
}

std::vector<SessionSpec> build_sessions(const RealData& real,
                                        std::span<const std::vector<Image>> selections) {
  std::vector<SessionSpec> specs;
  std::vector<Image> disease = real.disease_train;
  for (std::size_t s = 0; s <= selections.size(); ++s) {
    if (s > 0) disease.insert(disease.end(), selections[s - 1].begin(), selections[s - 1].end());
    SessionSpec spec;
    spec.index = s;
    spec.disease_train = disease;
    spec.normal_train = real.normal_train;
    spec.test_images = real.test_images;
    spec.test_labels = real.test_labels;
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace {

std::string vae_digest(const VaeParams& p) { return sha1_hex(nn::encode_tensors('V', p.tensors())); }

std::string round_label(std::size_t r) { return r == 0 ? "original" : "cycle-" + std::to_string(r); }

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  ExperimentResult res;
  say("synthesizing and preprocessing real data");
  res.real = build_real_data(cfg);

  VaeConfig vcfg = cfg.vae;
  vcfg.seed = derive_seed(cfg.seed, "vae");
  say("training VAE on " + std::to_string(res.real.disease_train.size()) + " real images");
  VaeTrainResult vres = vae_train(vcfg, res.real.disease_train);
  res.vae = std::move(vres.params);
  res.vae_loss_history = std::move(vres.loss_history);
  res.vae_hash = vae_digest(res.vae);
  const auto frozen = std::make_shared<const VaeParams>(res.vae);

  const FeatureExtractor fx = cfg.feature_mode == FeatureMode::pixel
                                  ? FeatureExtractor::pixel(cfg.feature_side)
                                  : FeatureExtractor::vae_latent(frozen);
  // The FID reference is the original real set for every round.
  const FidEvaluator fid_eval(fx, res.real.disease_train);
  const auto real_latents = embed_all(*frozen, res.real.disease_train);

  GanCycleConfig gcfg = cfg.gan;
  gcfg.gen_count = cfg.gen_per_cycle;
  gcfg.eval_seed = derive_seed(cfg.seed, "eval");
  GanModel model = make_gan_model(gcfg, cfg.side, derive_seed(cfg.seed, "gan:init"));

  std::vector<Image> train_set = res.real.disease_train;
  std::vector<std::vector<Image>> selections;
  const std::size_t cycles = cfg.cycle_count();

  for (std::size_t r = 0; r <= cycles; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (cfg.reinit_per_cycle && r > 0)
        model = make_gan_model(gcfg, cfg.side, derive_seed(cfg.seed, "gan:init:" + std::to_string(r)));
      gcfg.seed = derive_seed(cfg.seed, "gan:" + std::to_string(r));
      say(round_label(r) + ": training GAN on " + std::to_string(train_set.size()) + " images");

      CycleArtifacts art;
      art.checkpoint = gan_train_cycle(model, train_set, fid_eval, gcfg);
      CycleReport rep;
      rep.cycle = r;
      rep.label = round_label(r);
      std::tie(rep.optimal_fid, rep.worst_fid) = fid_bookkeeping(art.checkpoint.history);
      rep.saved_epoch = art.checkpoint.saved_epoch;
      rep.history = art.checkpoint.history;
      rep.train_size = train_set.size();

      if (r < cycles) {
        const auto generated =
            generate(art.checkpoint.saved_params, cfg.gen_per_cycle, derive_seed(cfg.seed, "gen:" + std::to_string(r)));
        const auto gen_latents = embed_all(*frozen, generated);
        art.query = select_top_fraction(score_generated(real_latents, gen_latents, cfg.aggregation),
                                        cfg.keep_fraction);
        for (std::size_t idx : art.query.selected) art.selected_images.push_back(generated[idx]);
        train_set.insert(train_set.end(), art.selected_images.begin(), art.selected_images.end());
        selections.push_back(art.selected_images);
        rep.selected = art.query.selected;
        rep.threshold_score = art.query.threshold_score;
      }
      rep.dataset_size_after = train_set.size();
      if (vae_digest(*frozen) != res.vae_hash)
        throw NumericalError("frozen VAE parameters changed during the loop");
      rep.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      say(rep.label + ": optimal FID " + format_real(rep.optimal_fid) + ", worst " +
          format_real(rep.worst_fid));
      res.cycles.push_back(std::move(rep));
      res.artifacts.push_back(std::move(art));
    } catch (const Error& e) {
      throw Error(e.kind(), "cycle " + std::to_string(r) + ": " + e.what());
    }
  }

  say("running " + std::to_string(selections.size() + 1) + " classification sessions");
  ClassifierConfig ccfg = cfg.clf;
  ccfg.seed = derive_seed(cfg.seed, "clf");
  const auto s0 = std::chrono::steady_clock::now();
  res.sessions = run_sessions(build_sessions(res.real, selections), ccfg);
  res.session_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();

  if (!cfg.out_dir.empty()) write_report(cfg.out_dir, cfg, res);
  return res;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace galvae
