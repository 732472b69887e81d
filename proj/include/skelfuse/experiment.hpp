#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "skelfuse/bilstm.hpp"
#include "skelfuse/combinations.hpp"
#include "skelfuse/technique.hpp"
#include "skelfuse/types.hpp"

namespace skelfuse {

struct ModelDimsConfig {
  int embedding_dim = 8;
  int hidden_dim = 32;
};

struct ReportSpec {
  std::vector<int> cardinalities = {3, 5, 7, 9};
  int top_m = 5;
};

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  std::filesystem::path body_model_path;
  std::filesystem::path output_dir;
  int downsample_factor = 1;
  std::uint64_t fold_seed = 0;
  int workers = 1;
  OrientationMode orientation = OrientationMode::PerPose;
  ModelDimsConfig model;
  TrainConfig train;
  std::vector<TechniqueSpec> techniques;
  ReportSpec report;
};

// Strict parse: unknown keys anywhere in the document are rejected.
ExperimentConfig config_from_json_file(const std::filesystem::path& path);

struct EpochLogRow {
  int epoch = 0;
  double mean_loss = 0.0;
  double test_accuracy = 0.0;
};

// One technique trained and evaluated within one fold run. Test accuracy is
// tracked per epoch; the reported accuracy and the cached outputs come from
// the best epoch (ties resolved toward the earlier epoch).
struct TechniqueRunResult {
  std::string technique_id;
  int train_fold = 0;
  int test_fold = 0;
  bool failed = false;
  std::string error;
  int best_epoch = 0;
  double best_test_accuracy = 0.0;
  double final_train_accuracy = 0.0;
  PartialOutputs outputs;  // predictions of the best-epoch parameters
  std::vector<EpochLogRow> epoch_log;
};

struct FoldRunResult {
  int train_fold = 0;
  int test_fold = 0;
  std::uint64_t total_test_actions = 0;
  std::vector<TechniqueRunResult> techniques;     // config order
  std::vector<CombinationResult> combinations;    // over fused technique set
};

struct StandaloneRow {
  std::string technique_id;
  bool failed = false;
  double run1_accuracy = 0.0;
  double run2_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double run1_train_accuracy = 0.0;
  double run2_train_accuracy = 0.0;
};

struct ExperimentReport {
  std::string dataset_hash;
  std::vector<std::string> class_labels;
  // technique ids entering the fusion stage (completed in both fold runs,
  // config order); combination masks index into this list
  std::vector<std::string> fused_technique_ids;
  std::vector<std::string> failed_technique_ids;
  FoldRunResult run1, run2;
  std::vector<StandaloneRow> standalone;
  std::vector<CombinationResult> mean_combinations;  // averaged over fold runs
  std::vector<CombinationResult> top;                // per report spec
};

// Full two-fold experiment: split, downsample, per technique train + evaluate
// + cache partial outputs, then evaluate every technique combination from the
// cached true-positive lists. Techniques that fail are skipped and flagged;
// the fusion stage runs over the ones that completed in both fold runs.
// Cache artifacts (fold file, per-run outputs, models, manifests, epoch logs)
// are persisted under config.output_dir.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Combination evaluation from cached outputs only (no dataset access).
// The manifest must agree with the cached CSVs; when expected_dataset_hash is
// non-empty it must match the manifest as well, otherwise a CacheError is
// raised rather than silently reusing stale results.
std::vector<CombinationResult> fuse_from_cache(
    const std::filesystem::path& run_dir, const std::string& expected_dataset_hash,
    std::vector<std::string>* technique_ids_out = nullptr,
    std::uint64_t* total_out = nullptr);

// Trains one technique of the config on one fold and persists its model and
// partial outputs under output_dir/run<fold>/ (no manifest; full runs own
// that). Exists for the `train` subcommand.
TechniqueRunResult train_single_technique(const ExperimentConfig& config,
                                          const std::string& technique_id,
                                          int train_fold);

// Rebuilds the report views from the files a finished run left behind, so
// reports can be re-emitted without retraining.
ExperimentReport reload_experiment_report(const ExperimentConfig& config);

struct AllInOneFoldResult {
  int train_fold = 0;
  int test_fold = 0;
  int best_epoch = 0;
  std::vector<double> variant_accuracy;    // per chosen technique, same order
  double fused_accuracy = 0.0;             // one model voting over variants
  double independent_fused_accuracy = 0.0; // k independent models, same subset
};

struct AllInOneReport {
  std::vector<std::string> technique_ids;
  AllInOneFoldResult run1, run2;
  std::vector<double> mean_variant_accuracy;
  double mean_fused_accuracy = 0.0;
  double mean_independent_fused_accuracy = 0.0;
};

// Trains a single model on the concatenation of every chosen technique's
// training variants, then evaluates it (i) per test-data variant and (ii) by
// strict-majority voting over the same model's outputs across variants,
// side by side with the fusion of independently trained classifiers for the
// same subset. Techniques that change the pose format (the body-model
// augmentation) are rejected, as their variants cannot be mixed into one
// training set.
AllInOneReport run_all_in_one(const ExperimentConfig& config,
                              const std::vector<std::string>& technique_ids);

}  // namespace skelfuse
