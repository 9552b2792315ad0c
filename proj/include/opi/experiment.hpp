#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "opi/config.hpp"
#include "opi/engine.hpp"
#include "opi/metrics.hpp"
#include "opi/series.hpp"

namespace opi {

enum class Arm { Opi, Cpi, Naive, Frozen, OpiNoPer };

std::string to_string(Arm arm);
Arm parse_arm(const std::string& name);

struct ExperimentManifest {
  std::string name = "experiment";
  EngineConfig engine{};
  SeriesSpec series{};
  std::vector<Arm> arms{Arm::Opi, Arm::Cpi};
  std::vector<std::size_t> sweep;
  double train_fraction = 0.7;
  std::size_t ma_window = 1000;
  std::filesystem::path output_root;  // empty: $OPI_OUTPUT_ROOT, then ./runs

  void validate() const;

  /// Every key except experiment.output, which does not change results.
  std::string canonical_text() const;
  std::string hash() const { return fnv1a_hex(canonical_text()); }
};

/// Binds experiment.*, engine/predictor/per/agent.* and series.* keys.
FieldSet manifest_fields(ExperimentManifest& m);

ExperimentManifest parse_manifest(const std::string& text);
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Same engine with uniform replay and unit importance weights.
EngineConfig without_per(EngineConfig cfg);

Trace run_arm(Arm arm, std::span<const double> series, const EngineConfig& cfg, double train_fraction);

struct ScoreRow {
  std::string label;
  std::size_t n_actions = 0;
  ScoreReport report;
};

struct ExperimentResult {
  std::filesystem::path directory;
  std::map<std::string, Trace> traces;  // keyed by trace label
  std::vector<ScoreRow> scores;
};

/// Runs every arm (and every sweep size, when given) and writes traces,
/// scores.csv, ma_reward.csv and, when sweeping, sweep.csv.
ExperimentResult run_experiment(const ExperimentManifest& manifest);

/// PER and uniform-replay arms of the same engine, traces tagged opi and opi-no-per.
ExperimentResult run_ablation_no_per(ExperimentManifest manifest);

/// Continuing-online vs frozen-at-drift arms; adds drift.csv with post-drift scores.
ExperimentResult run_drift(ExperimentManifest manifest);

/// mean Winkler(b) - mean Winkler(a); a is the proposed method.
double report_relative_winkler(const Trace& a, const Trace& b);

/// Recomputes score rows from every *.trace.csv in a directory.
std::vector<ScoreRow> score_directory(const std::filesystem::path& dir);

void write_score_table(const std::filesystem::path& path, const std::vector<ScoreRow>& rows,
                       const std::string& manifest_hash);
void write_score_table(std::ostream& out, const std::vector<ScoreRow>& rows, const std::string& manifest_hash);

std::filesystem::path default_output_root();

}  // namespace opi
