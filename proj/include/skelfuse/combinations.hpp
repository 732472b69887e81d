#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace skelfuse {

// One classifier's cached results over a complete test fold.
struct PartialOutputRow {
  std::string action_id;
  std::string true_class;
  std::string predicted_class;
};

struct PartialOutputs {
  std::string technique_id;
  std::vector<PartialOutputRow> rows;
};

// The ids a technique's classifier got right; the sufficient statistic for
// fused accuracy of any technique subset.
struct TruePositiveList {
  std::string technique_id;
  std::vector<std::string> ids;  // sorted
};

struct CombinationResult {
  std::uint32_t mask = 0;  // bit i selects technique i
  int cardinality = 0;
  double accuracy = 0.0;
};

// Classification counts for evaluating every one of the 2^n combinations:
// the naive route classifies each test action k times per k-subset, i.e.
// sum_k k * C(n, k) = n * 2^(n-1) classifications per action, while caching
// partial outputs needs only n per action.
struct NaiveCount {
  std::uint64_t closed_form = 0;  // n * 2^(n-1)
  std::uint64_t summation = 0;    // sum over k of k * C(n, k)
};

NaiveCount naive_combination_count(int n);
std::uint64_t naive_total_classifications(int n, std::uint64_t test_actions);
std::uint64_t cached_classification_count(int n, std::uint64_t test_actions);

// Filters each technique's outputs down to {id : predicted == true}. All
// outputs must cover the same action-id set.
std::vector<TruePositiveList> build_true_positive_lists(
    std::span<const PartialOutputs> outputs);

// Counts true-positive membership per action over the selected lists and
// retains actions with count > floor(k/2) (exactly the strict-majority
// condition). Ids are mapped to dense indices once; each evaluation touches
// a counter array only at selected-list entries.
class CombinationEvaluator {
 public:
  CombinationEvaluator(std::span<const TruePositiveList> tp_lists,
                       std::span<const std::string> test_ids);

  int technique_count() const { return static_cast<int>(dense_.size()); }
  std::uint64_t total() const { return total_; }

  CombinationResult evaluate(std::uint32_t mask);

 private:
  std::vector<std::vector<std::uint32_t>> dense_;  // per technique, dense tp ids
  std::uint64_t total_ = 0;
  std::vector<std::uint8_t> counts_;
  std::vector<std::uint32_t> touched_;
};

// Calls `sink` for every non-empty subset of techniques in ascending bitmask
// order. Guarded at n <= 24 unless allow_large is set.
void for_each_combination(CombinationEvaluator& evaluator,
                          const std::function<void(const CombinationResult&)>& sink,
                          bool allow_large = false);

std::vector<CombinationResult> evaluate_all_combinations(
    CombinationEvaluator& evaluator, bool allow_large = false);

// For each requested cardinality, the top_m results by accuracy with ties
// broken by ascending bitmask. Output is grouped by ascending cardinality.
std::vector<CombinationResult> top_combinations(
    std::span<const CombinationResult> results,
    const std::vector<int>& cardinalities, int top_m);

// Cross-check that counting true-positive lists reproduces the per-action
// strict-majority decision for the given subset: an action is fused-correct
// iff more than floor(k/2) of the selected classifiers predicted its true
// class.
bool fusion_accuracy_equivalence_check(std::span<const TruePositiveList> tp_lists,
                                       std::span<const PartialOutputs> outputs,
                                       std::uint32_t mask);

// Cache layer: one CSV per technique plus a manifest binding the cache to a
// dataset hash and fold so folds can never be silently mixed.
void write_partial_outputs_csv(const PartialOutputs& outputs,
                               const std::filesystem::path& path);
PartialOutputs read_partial_outputs_csv(const std::filesystem::path& path,
                                        const std::string& technique_id);

struct CacheManifest {
  std::string dataset_hash;
  int train_fold = 0;
  int test_fold = 0;
  std::uint64_t total_test_actions = 0;
  std::vector<std::string> technique_ids;
  std::vector<std::string> class_labels;
};

void write_cache_manifest(const CacheManifest& manifest,
                          const std::filesystem::path& path);
CacheManifest read_cache_manifest(const std::filesystem::path& path);

}  // namespace skelfuse
