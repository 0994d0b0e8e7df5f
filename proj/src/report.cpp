#include <cstdio>
#include <fstream>
#include <sstream>

#include "galvae/error.hpp"
#include "galvae/pipeline.hpp"

namespace galvae {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string padded(std::size_t i, int width = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", width, i);
  return buf;
}

void write_images(const fs::path& dir, std::span<const Image> imgs, const std::string& prefix) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < imgs.size(); ++i)
    write_pnm(imgs[i], dir / (prefix + padded(i) + ".pgm"));
}

ojson config_echo(const ExperimentConfig& cfg) {
  ojson j = config_to_json(cfg);
  j.erase("out_dir");  // the same run written to two places must report identically
  return j;
}

ojson history_json(std::span<const FidRecord> history) {
  ojson arr = ojson::array();
  for (const auto& h : history) arr.push_back({{"epoch", h.epoch}, {"fid", h.fid}});
  return arr;
}

}  // namespace

ojson sessions_json(std::span<const SessionResult> sessions) {
  ojson arr = ojson::array();
  for (const auto& s : sessions) {
    ojson undefined = ojson::array();
    if (s.scores.precision_undefined) undefined.push_back("precision");
    if (s.scores.recall_undefined) undefined.push_back("recall");
    if (s.scores.f1_undefined) undefined.push_back("f1");
    arr.push_back({{"session", s.session},
                   {"train_disease", s.train_disease},
                   {"train_normal", s.train_normal},
                   {"cm", {{"tp", s.cm.tp}, {"fp", s.cm.fp}, {"fn", s.cm.fn}, {"tn", s.cm.tn}}},
                   {"accuracy", s.scores.accuracy},
                   {"precision", s.scores.precision},
                   {"recall", s.scores.recall},
                   {"f1", s.scores.f1},
                   {"undefined", undefined},
                   {"train_accuracy", s.train_accuracy}});
  }
  return arr;
}

ojson report_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
  ojson cycles = ojson::array();
  for (const auto& c : result.cycles)
    cycles.push_back({{"cycle", c.cycle},
                      {"label", c.label},
                      {"optimal_fid", c.optimal_fid},
                      {"worst_fid", c.worst_fid},
                      {"size", c.train_size},
                      {"saved_epoch", c.saved_epoch},
                      {"selected_count", c.selected.size()},
                      {"size_after", c.dataset_size_after},
                      {"history", history_json(c.history)}});
  ojson j;
  j["config"] = config_echo(cfg);
  j["vae"] = {{"sha1", result.vae_hash}, {"loss_history", result.vae_loss_history}};
  j["cycles"] = cycles;
  j["sessions"] = sessions_json(result.sessions);
  return j;
}

std::string fid_csv(std::span<const CycleReport> cycles) {
  std::ostringstream os;
  os << "cycle,label,optimal_fid,worst_fid,size,saved_epoch\n";
  for (const auto& c : cycles)
    os << c.cycle << ',' << c.label << ',' << format_real(c.optimal_fid) << ','
       << format_real(c.worst_fid) << ',' << c.train_size << ',' << c.saved_epoch << '\n';
  return os.str();
}

std::string sessions_csv(std::span<const SessionResult> sessions) {
  std::ostringstream os;
  os << "session,train_disease,train_normal,tp,fp,fn,tn,accuracy,precision,recall,f1\n";
  for (const auto& s : sessions)
    os << s.session << ',' << s.train_disease << ',' << s.train_normal << ',' << s.cm.tp << ','
       << s.cm.fp << ',' << s.cm.fn << ',' << s.cm.tn << ',' << format_real(s.scores.accuracy) << ','
       << format_real(s.scores.precision) << ',' << format_real(s.scores.recall) << ','
       << format_real(s.scores.f1) << '\n';
  return os.str();
}

void write_report(const fs::path& dir, const ExperimentConfig& cfg, const ExperimentResult& result) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(cfg, result).dump(2) + "\n");
  write_text(dir / "fid.csv", fid_csv(result.cycles));
  write_text(dir / "sessions.csv", sessions_csv(result.sessions));
  write_text(dir / "classification_report.json", sessions_json(result.sessions).dump(2) + "\n");

  std::ostringstream hist;
  hist << "cycle,epoch,fid\n";
  for (const auto& c : result.cycles)
    for (const auto& h : c.history) hist << c.cycle << ',' << h.epoch << ',' << format_real(h.fid) << '\n';
  write_text(dir / "fid_history.csv", hist.str());

  std::ostringstream vae_loss;
  vae_loss << "epoch,loss\n";
  for (std::size_t e = 0; e < result.vae_loss_history.size(); ++e)
    vae_loss << e + 1 << ',' << format_real(result.vae_loss_history[e]) << '\n';
  write_text(dir / "vae_loss.csv", vae_loss.str());
  save_vae(result.vae, dir / "vae.bin");

  ojson timings = ojson::array();
  for (std::size_t i = 0; i < result.cycles.size(); ++i) {
    const auto& c = result.cycles[i];
    const auto& art = result.artifacts.at(i);
    const fs::path cdir = dir / ("cycle_" + std::to_string(c.cycle));
    fs::create_directories(cdir);
    save_checkpoint(art.checkpoint, cdir / "checkpoint");
    timings.push_back({{"cycle", c.cycle}, {"wall_seconds", c.wall_seconds}});
    if (art.query.scores.empty()) continue;

    std::ostringstream q;
    q << "index,score,selected\n";
    std::size_t next = 0;
    for (std::size_t j = 0; j < art.query.scores.size(); ++j) {
      const bool sel = next < art.query.selected.size() && art.query.selected[next] == j;
      if (sel) ++next;
      q << j << ',' << format_real(art.query.scores[j]) << ',' << (sel ? 1 : 0) << '\n';
    }
    write_text(dir / ("cycle_" + std::to_string(c.cycle) + "_query.csv"), q.str());
    write_images(cdir / "selected", art.selected_images, "sel_");

    const std::size_t tiles = std::min<std::size_t>(10, art.selected_images.size());
    std::vector<std::vector<Image>> rows(2);
    rows[0].assign(art.selected_images.begin(), art.selected_images.begin() + tiles);
    const auto& real = result.real.disease_train;
    rows[1].assign(real.begin(), real.begin() + std::min(tiles, real.size()));
    write_pnm(montage(rows), cdir / "montage.pgm");
  }
  ojson timing_doc = {{"cycles", timings}, {"classification_seconds", result.session_seconds}};
  write_text(dir / "timings.json", timing_doc.dump(2) + "\n");

  const auto& real = result.real;
  write_images(dir / "data" / "train_disease", real.disease_train, "img_");
  write_images(dir / "data" / "train_normal", real.normal_train, "img_");
  write_images(dir / "data" / "test", real.test_images, "img_");
  std::ostringstream labels;
  labels << "file,label\n";
  for (std::size_t i = 0; i < real.test_labels.size(); ++i)
    labels << "img_" << padded(i) << ".pgm," << label_name(real.test_labels[i]) << '\n';
  write_text(dir / "data" / "test" / "labels.csv", labels.str());

  ojson manifest;
  manifest["config"] = config_echo(cfg);
  manifest["input_hashes"] = real.input_hashes;
  manifest["vae_sha1"] = result.vae_hash;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- schema

namespace {

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw DataError("report.json: " + path + " " + what);
}

void require_count(const nlohmann::json& o, const std::string& key, const std::string& path) {
  require(o.contains(key), path + "." + key, "is missing");
  const auto& v = o.at(key);
  require(v.is_number_integer() && v.get<long long>() >= 0, path + "." + key, "must be a non-negative integer");
}

void require_number(const nlohmann::json& o, const std::string& key, const std::string& path) {
  require(o.contains(key), path + "." + key, "is missing");
  require(o.at(key).is_number(), path + "." + key, "must be a number");
}

}  // namespace

void validate_report_json(const nlohmann::json& r) {
  require(r.is_object(), "$", "must be an object");
  for (const char* key : {"config", "vae", "cycles", "sessions"}) require(r.contains(key), key, "is missing");
  require(r.at("config").is_object(), "config", "must be an object");
  for (const auto& [key, value] : r.at("config").items()) {
    (void)value;
    bool known = false;
    for (const auto& k : config_keys()) known = known || k == key;
    require(known, "config." + key, "is not a config key");
  }
  require(r.at("vae").is_object() && r.at("vae").contains("sha1") && r.at("vae").at("sha1").is_string(),
          "vae.sha1", "must be a string");

  const auto& cycles = r.at("cycles");
  require(cycles.is_array() && !cycles.empty(), "cycles", "must be a non-empty array");
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const auto& c = cycles[i];
    const std::string path = "cycles[" + std::to_string(i) + "]";
    require(c.is_object(), path, "must be an object");
    require_count(c, "cycle", path);
    require_count(c, "size", path);
    require_number(c, "optimal_fid", path);
    require_number(c, "worst_fid", path);
    require(c.at("cycle").get<std::size_t>() == i, path + ".cycle", "must equal its position");
    require(c.at("optimal_fid").get<double>() <= c.at("worst_fid").get<double>(), path,
            "has optimal_fid > worst_fid");
  }

  const auto& sessions = r.at("sessions");
  require(sessions.is_array(), "sessions", "must be an array");
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    const std::string path = "sessions[" + std::to_string(i) + "]";
    require(s.is_object(), path, "must be an object");
    require_count(s, "session", path);
    require(s.contains("cm") && s.at("cm").is_object(), path + ".cm", "must be an object");
    for (const char* k : {"tp", "fp", "fn", "tn"}) require_count(s.at("cm"), k, path + ".cm");
    for (const char* k : {"accuracy", "precision", "recall", "f1"}) {
      require_number(s, k, path);
      const double v = s.at(k).get<double>();
      require(v >= 0.0 && v <= 1.0, path + "." + k, "must lie in [0, 1]");
    }
  }
}

std::string render_tables(const nlohmann::json& r) {
  validate_report_json(r);
  std::ostringstream os;
  char line[160];
  os << "FID per round\n";
  std::snprintf(line, sizeof(line), "%-10s %6s %14s %14s\n", "round", "size", "optimal_fid", "worst_fid");
  os << line;
  for (const auto& c : r.at("cycles")) {
    const std::string label = c.contains("label") && c.at("label").is_string()
                                  ? c.at("label").get<std::string>()
                                  : std::to_string(c.at("cycle").get<std::size_t>());
    std::snprintf(line, sizeof(line), "%-10s %6zu %14.4f %14.4f\n", label.c_str(),
                  c.at("size").get<std::size_t>(), c.at("optimal_fid").get<double>(),
                  c.at("worst_fid").get<double>());
    os << line;
  }
  os << "\nClassification per session\n";
  std::snprintf(line, sizeof(line), "%-8s %5s %5s %5s %5s %9s %9s %9s %9s\n", "session", "tp", "fp", "fn",
                "tn", "accuracy", "precision", "recall", "f1");
  os << line;
  for (const auto& s : r.at("sessions")) {
    const auto& cm = s.at("cm");
    std::snprintf(line, sizeof(line), "%-8zu %5zu %5zu %5zu %5zu %9.4f %9.4f %9.4f %9.4f\n",
                  s.at("session").get<std::size_t>(), cm.at("tp").get<std::size_t>(),
                  cm.at("fp").get<std::size_t>(), cm.at("fn").get<std::size_t>(),
                  cm.at("tn").get<std::size_t>(), s.at("accuracy").get<double>(),
                  s.at("precision").get<double>(), s.at("recall").get<double>(),
                  s.at("f1").get<double>());
    os << line;
  }
  return os.str();
}

}  // namespace galvae
