#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "galvae/cli.hpp"

using namespace galvae;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "galvae_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough to finish in a few seconds.
fs::path tiny_config(const fs::path& dir) {
  const nlohmann::json cfg = {{"side", 8},           {"raw_side", 16},       {"initial_real_count", 10},
                              {"target_size", 14},   {"normal_train_count", 10}, {"test_per_label", 5},
                              {"gen_per_cycle", 20}, {"epochs_per_cycle", 2}, {"d_noise", 4},
                              {"gan_hidden_g", 8},   {"gan_hidden_d", 8},    {"feature_side", 4},
                              {"vae_latent_dim", 4}, {"vae_hidden", 8},      {"vae_epochs", 2},
                              {"clf_hidden", 8},     {"clf_epochs", 3}};
  const fs::path path = dir / "cfg.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

bool single_line(const std::string& s) { return !s.empty() && s.find('\n') == s.size() - 1; }

}  // namespace

TEST_CASE("help output matches the golden file") {
  const Outcome o = run({"--help"});
  CHECK(o.code == 0);
  CHECK(o.out == slurp(fs::path(GALVAE_TEST_DIR) / "golden" / "help.txt"));
  CHECK(o.out == cli_help());
  for (const char* sub : {"synth", "preprocess", "train-vae", "run", "classify", "report"})
    CHECK(o.out.find(sub) != std::string::npos);
  for (const char* flag : {"--config", "--seed", "--out", "--threads", "--reinit-per-cycle", "--keep-fraction"})
    CHECK(o.out.find(flag) != std::string::npos);
}

TEST_CASE("usage errors exit 1 with one stderr line") {
  Outcome o = run({"run", "--bogus"});
  CHECK(o.code == 1);
  CHECK(single_line(o.err));
  CHECK(o.err.rfind("error[usage] code=1:", 0) == 0);

  CHECK(run({}).code == 1);
  CHECK(run({"run", "--side", "abc"}).code == 1);
  CHECK(run({"run", "--target-size", "185"}).code == 1);
  CHECK(run({"report"}).code == 1);

  const fs::path dir = scratch("usage");
  std::ofstream(dir / "unknown.json") << R"({"side": 32, "colour": "green"})";
  o = run({"run", "--config", (dir / "unknown.json").string()});
  CHECK(o.code == 1);
  CHECK(o.err.find("colour") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  const fs::path dir = scratch("data");
  std::ofstream(dir / "broken.pgm", std::ios::binary) << "P5 4 4 255\n" << std::string(7, 'x');
  Outcome o = run({"preprocess", "--input", (dir / "broken.pgm").string(), "--out", (dir / "o").string()});
  CHECK(o.code == 2);
  CHECK(single_line(o.err));
  CHECK(o.err.rfind("error[data] code=2:", 0) == 0);

  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(run({"run", "--config", (dir / "bad.json").string()}).code == 2);
  std::ofstream(dir / "report.json") << R"({"config": {}})";
  CHECK(run({"report", "--input", dir.string()}).code == 2);
}

TEST_CASE("numerical failures exit 3") {
  const fs::path dir = scratch("numerical");
  const Outcome o = run({"run", "--config", tiny_config(dir).string(), "--lr-g", "1e300", "--lr-d", "1e300",
                         "--out", (dir / "o").string()});
  CHECK(o.code == 3);
  CHECK(single_line(o.err));
  CHECK(o.err.find("cycle 0") != std::string::npos);
}

TEST_CASE("synth and preprocess") {
  const fs::path dir = scratch("synth");
  Outcome o = run({"synth", "--count", "3", "--seed", "4", "--raw-side", "24", "--out", (dir / "raw").string()});
  REQUIRE(o.code == 0);
  const std::string manifest = slurp(dir / "raw" / "manifest.csv");
  CHECK(manifest.rfind("filename,label,heart_ratio,annotated,seed\n", 0) == 0);
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 7);
  CHECK(fs::exists(dir / "raw" / "img_0001.ppm"));  // annotate_frac 0.5 by default
  CHECK(fs::exists(dir / "raw" / "img_0000.pgm"));

  run({"synth", "--count", "3", "--seed", "4", "--raw-side", "24", "--out", (dir / "raw2").string()});
  CHECK(slurp(dir / "raw" / "img_0003.ppm") == slurp(dir / "raw2" / "img_0003.ppm"));

  o = run({"preprocess", "--input", (dir / "raw").string(), "--side", "12", "--out", (dir / "pre").string()});
  REQUIRE(o.code == 0);
  const std::string pre = slurp(dir / "pre" / "img_0000.pgm");
  CHECK(pre.rfind("P5\n12 12\n255\n", 0) == 0);
}

TEST_CASE("run, report, classify and train-vae") {
  const fs::path dir = scratch("run");
  const fs::path cfg = tiny_config(dir);
  Outcome o = run({"run", "--config", cfg.string(), "--seed", "7", "--out", (dir / "a").string()});
  REQUIRE(o.code == 0);
  CHECK(fs::exists(dir / "a" / "report.json"));
  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(report.at("config").at("seed") == 7);
  CHECK(report.at("cycles").size() == 3);

  // flags override the config file; the output directory can come from the environment
  ::setenv("GALVAE_OUT", (dir / "env").string().c_str(), 1);
  o = run({"run", "--config", cfg.string(), "--seed", "7", "--threads", "1"});
  ::unsetenv("GALVAE_OUT");
  REQUIRE(o.code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "env" / "report.json"));
  CHECK(slurp(dir / "a" / "fid.csv") == slurp(dir / "env" / "fid.csv"));

  o = run({"run", "--config", cfg.string(), "--seed", "7", "--aggregation", "max", "--out", (dir / "m").string()});
  REQUIRE(o.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "m" / "report.json")).at("config").at("aggregation") == "max");

  o = run({"report", "--input", (dir / "a").string()});
  CHECK(o.code == 0);
  CHECK(o.out.find("original") != std::string::npos);

  o = run({"classify", "--input", (dir / "a" / "data").string(), "--config", cfg.string(), "--out",
           (dir / "c").string()});
  CHECK(o.code == 0);
  const auto cls = nlohmann::json::parse(slurp(dir / "c" / "classification_report.json"));
  REQUIRE(cls.size() == 1);
  const auto& cm = cls[0].at("cm");
  CHECK(cm.at("tp").get<int>() + cm.at("fp").get<int>() + cm.at("fn").get<int>() + cm.at("tn").get<int>() == 10);

  o = run({"train-vae", "--input", (dir / "a" / "data" / "train_disease").string(), "--config", cfg.string(),
           "--out", (dir / "v").string()});
  CHECK(o.code == 0);
  CHECK(fs::exists(dir / "v" / "vae.bin"));
  CHECK(std::count(o.out.begin(), o.out.end(), '\n') == 1);
}
