#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "galvae/classifier.hpp"
#include "galvae/gan.hpp"
#include "galvae/imaging.hpp"
#include "galvae/query.hpp"
#include "galvae/synthdata.hpp"
#include "galvae/vae.hpp"

namespace galvae {

struct ExperimentConfig {
  // data
  std::size_t side = 32;
  std::size_t raw_side = 64;
  std::size_t initial_real_count = 100;
  std::size_t target_size = 180;
  std::size_t normal_train_count = 100;
  std::size_t test_per_label = 50;
  double noise_sigma = 0.02;
  double annotate_frac = 0.5;
  GreenWindow green;

  // generation loop
  std::size_t gen_per_cycle = 200;
  double keep_fraction = 0.10;
  Aggregation aggregation = Aggregation::mean;
  bool reinit_per_cycle = false;
  GanCycleConfig gan;

  // FID feature space
  FeatureMode feature_mode = FeatureMode::pixel;
  std::size_t feature_side = 16;

  VaeConfig vae;
  ClassifierConfig clf;

  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: keep results in memory only

  std::size_t keep_count() const;
  /// (target_size - initial_real_count) / keep_count.
  std::size_t cycle_count() const;
  void validate() const;
};

/// Flat JSON keys mirroring the config fields; unknown keys and type
/// mismatches raise UsageError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);
/// Applies one "key=value" style override given as strings (value parsed
/// by the key's type).
void apply_config_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Every accepted key, in echo order.
std::vector<std::string> config_keys();
std::string config_key_help(const std::string& key);

struct CycleReport {
  std::size_t cycle = 0;  // 0 is the original (real-only) round
  std::string label;      // "original", "cycle-1", ...
  double optimal_fid = 0.0;
  double worst_fid = 0.0;
  std::size_t saved_epoch = 0;
  std::vector<FidRecord> history;
  std::size_t train_size = 0;          // GAN training-set size this round
  std::size_t dataset_size_after = 0;  // after appending the selected images
  std::vector<std::size_t> selected;
  double threshold_score = 0.0;
  double wall_seconds = 0.0;
};

/// (min, max) of the FID history. Throws DataError when empty.
std::pair<double, double> fid_bookkeeping(std::span<const FidRecord> history);

/// Preprocessed real data split the way the experiment uses it.
struct RealData {
  std::vector<Image> disease_train;  // initial GAN/VAE set and classifier base
  std::vector<Image> normal_train;
  std::vector<Image> test_images;
  std::vector<Label> test_labels;
  std::vector<std::string> input_hashes;  // raw synthesized images, in generation order
};

RealData build_real_data(const ExperimentConfig& cfg);

struct CycleArtifacts {
  std::vector<Image> selected_images;
  QueryResult query;
  Checkpoint checkpoint;
};

struct ExperimentResult {
  std::vector<CycleReport> cycles;
  std::vector<SessionResult> sessions;
  std::vector<CycleArtifacts> artifacts;  // per round, same order as cycles
  std::vector<double> vae_loss_history;
  std::string vae_hash;
  double session_seconds = 0.0;  // wall time of the classification phase
  RealData real;
  VaeParams vae;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Preprocess, train and freeze the VAE, run the generation cycles, then
/// the classification sessions. Writes reports when cfg.out_dir is set.
/// Errors inside a round are rethrown with the round index attached.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// report.json, fid.csv, fid_history.csv, sessions.csv,
/// classification_report.json, per-cycle query CSVs, selected images,
/// montages, checkpoints, vae.bin, the data/ split, and manifest.json.
void write_report(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                  const ExperimentResult& result);

/// Deterministic report.json body.
nlohmann::ordered_json report_json(const ExperimentConfig& cfg, const ExperimentResult& result);
nlohmann::ordered_json sessions_json(std::span<const SessionResult> sessions);
std::string fid_csv(std::span<const CycleReport> cycles);
std::string sessions_csv(std::span<const SessionResult> sessions);

/// Checks report.json structure and field types; throws DataError naming
/// the first offending path.
void validate_report_json(const nlohmann::json& report);
/// Plain-text FID and classification tables from a report.json body.
std::string render_tables(const nlohmann::json& report);

/// Builds the session specs from the real split and the per-round
/// selections: session s adds the selections of rounds 0..s-1.
std::vector<SessionSpec> build_sessions(const RealData& real,
                                        std::span<const std::vector<Image>> selections);

/// Repeatable decimal rendering used by every CSV (%.17g).
std::string format_real(double v);

}  // namespace galvae
