// SPDX-License-Identifier: Apache-2.0
//
// File-mediated pipeline stages behind the `wsgully` command line:
//
//   synth  -> manifest.jsonl, label_matrix.csv, features.egf(+.ids), ground_truth.csv
//   label  -> label_matrix.csv            (runs every configured labeling function)
//   fit    -> label_model.json
//   infer  -> pseudo_labels.csv
//   vote   -> expert_ground_truth.csv     (expert annotations under a voting scheme)
//   train  -> student.json, student_loss.csv
//   eval   -> metrics.json + table on stdout
#ifndef WSGULLY_PIPELINE_HPP
#define WSGULLY_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsgully/label_model.hpp"
#include "wsgully/lf_client.hpp"
#include "wsgully/metrics.hpp"
#include "wsgully/student.hpp"
#include "wsgully/voting.hpp"

namespace wsgully {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInvalid = 2,
  kExitEndpoint = 3,
  kExitMisaligned = 4,
};

struct PathsConfig {
  fs::path manifest;
  fs::path features;
  fs::path annotations;
  fs::path ground_truth;
  /// Defaults to <output_dir>/label_matrix.csv.
  fs::path label_matrix;
  /// Base directory for relative image paths; defaults to the manifest's directory.
  fs::path image_root;
  /// Defaults to the directory of the config file.
  fs::path output_dir = ".";

  fs::path label_matrix_path() const;
  fs::path output(const char* name) const { return output_dir / name; }
};

struct StudentSection {
  /// Empty means the single linear layer [N * D, 2].
  std::vector<std::size_t> layer_dims;
  std::uint64_t seed = 0;
  TrainingConfig training;
  /// Trailing fraction of locations (manifest order) held out from student training.
  double holdout_fraction = 0.0;
};

struct EvalConfig {
  VotingScheme scheme = VotingScheme::StrictNegative;
  double threshold = 0.5;
  /// "pseudo", "majority", "student", "lf:<name>" or "csv:<path>".
  std::string source = "pseudo";
  /// "all", "train" or "holdout".
  std::string subset = "all";
};

struct PipelineConfig {
  std::map<std::string, VlmEndpointConfig> endpoints;
  std::vector<LfSpec> lfs;
  LabelModelConfig label_model;
  StudentSection student;
  BenchmarkParams synth;
  PathsConfig paths;
  EvalConfig eval;
};

/// Strict parse: unknown keys are rejected with ConfigError. Relative paths are resolved
/// against `base_dir`.
PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir);
PipelineConfig load_pipeline_config(const fs::path& path);

/// Number of leading locations used for training when `holdout_fraction` is held out.
std::size_t training_rows(std::size_t total, double holdout_fraction);

struct LabelRunOptions {
  bool resume = false;
  /// Stops (throws Error) after this many newly labeled cells; simulates an interruption.
  std::optional<std::size_t> stop_after;
};

void cmd_synth(const PipelineConfig& cfg, std::ostream& log);
void cmd_label(const PipelineConfig& cfg, const LabelRunOptions& options, std::ostream& log);
void cmd_fit(const PipelineConfig& cfg, std::ostream& out);
void cmd_infer(const PipelineConfig& cfg, std::ostream& out);
void cmd_vote(const PipelineConfig& cfg, std::ostream& out);
void cmd_train(const PipelineConfig& cfg, std::ostream& out);
/// Returns the metrics of the configured source against paths.ground_truth.
MetricsReport cmd_eval(const PipelineConfig& cfg, std::ostream& out);

/// Entry point of the `wsgully` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wsgully

#endif  // WSGULLY_PIPELINE_HPP
