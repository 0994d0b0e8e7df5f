#include "galvae/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "galvae/error.hpp"
#include "galvae/kernels.hpp"
#include "galvae/pipeline.hpp"

namespace galvae {

namespace fs = std::filesystem;

namespace {

std::string kebab(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

struct Invocation {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  std::string input;
  std::size_t count = 50;
  std::map<std::string, std::string> overrides;  // config key -> raw value
  std::map<std::string, bool> flags;
};

struct App {
  std::unique_ptr<CLI::App> app;
  Invocation inv;
  CLI::Option* seed_opt = nullptr;
  std::map<std::string, CLI::Option*> key_opts;
  std::map<std::string, CLI::App*> subs;
};

std::unique_ptr<App> build_app() {
  auto a = std::make_unique<App>();
  a->app = std::make_unique<CLI::App>("Generative active learning with a GAN, a frozen VAE query and a classifier harness.",
                                      "galvae");
  CLI::App& app = *a->app;
  app.require_subcommand(1);
  app.get_formatter()->column_width(34);
  app.fallthrough();
  Invocation& inv = a->inv;

  app.add_option("--config", inv.config_path, "JSON config file with flat keys")->check(CLI::ExistingFile);
  a->seed_opt = app.add_option("--seed", inv.seed, "master seed");
  app.add_option("--out", inv.out_dir, "output directory (default: $GALVAE_OUT, else ./galvae_out)");
  app.add_option("--threads", inv.threads, "cap on worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--input", inv.input, "input file or directory (preprocess, train-vae, classify, report)");
  app.add_option("--count", inv.count, "phantoms per label (synth)")->check(CLI::PositiveNumber);

  const ExperimentConfig defaults;
  const auto def_json = config_to_json(defaults);
  for (const auto& key : config_keys()) {
    if (key == "seed" || key == "out_dir") continue;
    const std::string name = "--" + kebab(key);
    const std::string help = config_key_help(key);
    if (def_json.at(key).is_boolean()) {
      inv.flags[key] = false;
      a->key_opts[key] = app.add_flag(name, inv.flags[key], help);
    } else {
      const auto& dv = def_json.at(key);
      const char* type = dv.is_number_unsigned() ? "UINT" : dv.is_number() ? "FLOAT" : "TEXT";
      a->key_opts[key] = app.add_option(name, inv.overrides[key], help)
                             ->type_name(type)
                             ->default_str(dv.is_string() ? dv.get<std::string>() : dv.dump());
    }
  }

  a->subs["synth"] = app.add_subcommand("synth", "write synthetic phantoms and manifest.csv");
  a->subs["preprocess"] = app.add_subcommand("preprocess", "mask, inpaint, grayscale and resize PGM/PPM inputs");
  a->subs["train-vae"] = app.add_subcommand("train-vae", "train the VAE on a directory of images");
  a->subs["run"] = app.add_subcommand("run", "full experiment: cycles, query, classification, reports");
  a->subs["classify"] = app.add_subcommand("classify", "train and evaluate one classifier on a data/ split");
  a->subs["report"] = app.add_subcommand("report", "validate a report.json and print its tables");
  return a;
}

ExperimentConfig resolve_config(const App& a) {
  const Invocation& inv = a.inv;
  ExperimentConfig cfg;
  if (!inv.config_path.empty()) {
    std::ifstream in(inv.config_path);
    if (!in) throw DataError("cannot read config " + inv.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("config " + inv.config_path + ": " + e.what());
    }
    cfg = config_from_json(j);
  }
  for (const auto& [key, opt] : a.key_opts) {
    if (opt->count() == 0) continue;
    if (inv.flags.count(key))
      apply_config_override(cfg, key, inv.flags.at(key) ? "true" : "false");
    else
      apply_config_override(cfg, key, inv.overrides.at(key));
  }
  if (a.seed_opt->count() > 0) cfg.seed = inv.seed;
  if (!inv.out_dir.empty()) {
    cfg.out_dir = inv.out_dir;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv("GALVAE_OUT");
    cfg.out_dir = env && *env ? env : "galvae_out";
  }
  return cfg;
}

std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Image> load_images(const fs::path& dir, std::size_t side, const GreenWindow& window) {
  std::vector<Image> imgs;
  for (const auto& f : image_files(dir)) {
    Image img = read_pnm(f);
    if (img.channels() != 1 || img.width() != side || img.height() != side)
      img = preprocess_image(img, PreprocessConfig{side, window});
    imgs.push_back(std::move(img));
  }
  if (imgs.empty()) throw DataError("no .pgm/.ppm images in " + dir.string());
  return imgs;
}

const std::string& require_input(const Invocation& inv, const std::string& sub) {
  if (inv.input.empty()) throw UsageError(sub + " requires --input");
  return inv.input;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + path.string());
}

int cmd_synth(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  DatasetOptions opts;
  opts.n_per_label = inv.count;
  opts.side = cfg.raw_side;
  opts.annotate_frac = cfg.annotate_frac;
  opts.noise_sigma = cfg.noise_sigma;
  opts.seed = cfg.seed;
  const auto data = make_dataset(opts);
  fs::create_directories(cfg.out_dir);
  std::ostringstream manifest;
  manifest << "filename,label,heart_ratio,annotated,seed\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04zu.%s", i, data[i].image.channels() == 3 ? "ppm" : "pgm");
    write_pnm(data[i].image, cfg.out_dir / name);
    manifest << name << ',' << label_name(data[i].label) << ',' << format_real(data[i].spec.heart_ratio)
             << ',' << (data[i].spec.annotate ? 1 : 0) << ',' << data[i].spec.seed << '\n';
  }
  write_file(cfg.out_dir / "manifest.csv", manifest.str());
  out << "wrote " << data.size() << " phantoms to " << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_preprocess(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  const fs::path input = require_input(inv, "preprocess");
  std::vector<fs::path> files = fs::is_directory(input) ? image_files(input) : std::vector<fs::path>{input};
  if (files.empty()) throw DataError("no .pgm/.ppm images in " + input.string());
  std::vector<Image> raw;
  for (const auto& f : files) raw.push_back(read_pnm(f));
  const auto prepped = preprocess_dataset(raw, PreprocessConfig{cfg.side, cfg.green});
  fs::create_directories(cfg.out_dir);
  for (std::size_t i = 0; i < files.size(); ++i)
    write_pnm(prepped[i], cfg.out_dir / (files[i].stem().string() + ".pgm"));
  out << "preprocessed " << files.size() << " images into " << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_train_vae(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  const auto imgs = load_images(require_input(inv, "train-vae"), cfg.side, cfg.green);
  VaeConfig vcfg = cfg.vae;
  vcfg.seed = derive_seed(cfg.seed, "vae");
  const auto res = vae_train(vcfg, imgs);
  fs::create_directories(cfg.out_dir);
  save_vae(res.params, cfg.out_dir / "vae.bin");
  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < res.loss_history.size(); ++e)
    csv << e + 1 << ',' << format_real(res.loss_history[e]) << '\n';
  write_file(cfg.out_dir / "vae_loss.csv", csv.str());
  out << "trained VAE on " << imgs.size() << " images; final loss " << format_real(res.loss_history.back())
      << '\n';
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  const auto res = run_experiment(cfg, [&](const std::string& msg) { out << msg << '\n'; });
  out << render_tables(report_json(cfg, res));
  out << "reports written to " << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_classify(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  const fs::path dir = require_input(inv, "classify");
  SessionSpec spec;
  spec.disease_train = load_images(dir / "train_disease", cfg.side, cfg.green);
  spec.normal_train = load_images(dir / "train_normal", cfg.side, cfg.green);

  std::ifstream labels(dir / "test" / "labels.csv");
  if (!labels) throw DataError("missing " + (dir / "test" / "labels.csv").string());
  std::string line;
  std::getline(labels, line);  // header
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("labels.csv: malformed line '" + line + "'");
    Image img = read_pnm(dir / "test" / line.substr(0, comma));
    if (img.channels() != 1 || img.width() != cfg.side || img.height() != cfg.side)
      img = preprocess_image(img, PreprocessConfig{cfg.side, cfg.green});
    spec.test_images.push_back(std::move(img));
    spec.test_labels.push_back(parse_label(line.substr(comma + 1)));
  }
  ClassifierConfig ccfg = cfg.clf;
  ccfg.seed = derive_seed(cfg.seed, "clf");
  const auto results = run_sessions(std::span<const SessionSpec>(&spec, 1), ccfg);
  fs::create_directories(cfg.out_dir);
  write_file(cfg.out_dir / "classification_report.json", sessions_json(results).dump(2) + "\n");
  write_file(cfg.out_dir / "sessions.csv", sessions_csv(results));
  const auto& s = results.front();
  out << "accuracy " << format_real(s.scores.accuracy) << " precision " << format_real(s.scores.precision)
      << " recall " << format_real(s.scores.recall) << " f1 " << format_real(s.scores.f1) << '\n';
  return 0;
}

int cmd_report(const Invocation& inv, std::ostream& out) {
  fs::path path = require_input(inv, "report");
  if (fs::is_directory(path)) path /= "report.json";
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  out << render_tables(j);
  return 0;
}

void print_error(std::ostream& err, int code, const char* kind, const std::string& msg) {
  std::string flat = msg;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "error[" << kind << "] code=" << code << ": " << flat << '\n';
}

}  // namespace

std::string cli_help() { return build_app()->app->help(); }

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::unique_ptr<App> a;
  try {
    a = build_app();
    try {
      a->app->parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << a->app->help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << a->app->help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      print_error(err, 1, "usage", std::string(e.what()) + " (see --help)");
      return 1;
    }
    if (a->inv.threads > 0) set_thread_limit(a->inv.threads);
    const ExperimentConfig cfg = resolve_config(*a);
    cfg.validate();

    const Invocation& inv = a->inv;
    if (a->subs["synth"]->parsed()) return cmd_synth(cfg, inv, out);
    if (a->subs["preprocess"]->parsed()) return cmd_preprocess(cfg, inv, out);
    if (a->subs["train-vae"]->parsed()) return cmd_train_vae(cfg, inv, out);
    if (a->subs["run"]->parsed()) return cmd_run(cfg, out);
    if (a->subs["classify"]->parsed()) return cmd_classify(cfg, inv, out);
    if (a->subs["report"]->parsed()) return cmd_report(inv, out);
    throw UsageError("no subcommand given");
  } catch (const Error& e) {
    print_error(err, e.exit_code(), kind_name(e.kind()), e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    print_error(err, 2, "data", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error(err, 2, "data", e.what());
    return 2;
  }
}

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("galvae");
  for (const auto& s : args) argv.push_back(s.c_str());
  return parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace galvae
