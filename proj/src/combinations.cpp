#include "skelfuse/combinations.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "skelfuse/dataset_io.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/majority.hpp"

namespace skelfuse {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw DataError(std::string("overflow computing ") + what);
  }
  return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b, const char* what) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw DataError(std::string("overflow computing ") + what);
  }
  return out;
}

}  // namespace

NaiveCount naive_combination_count(int n) {
  if (n < 1) throw DataError("combination count needs n >= 1");
  if (n > 57) throw DataError("combination count overflows 64 bits beyond n = 57");
  NaiveCount count;
  count.closed_form =
      checked_mul(static_cast<std::uint64_t>(n), std::uint64_t{1} << (n - 1),
                  "n * 2^(n-1)");
  // Pascal-row walk: binom(n, k) from binom(n, k-1)
  std::uint64_t binom = 1;  // C(n, 0)
  for (int k = 1; k <= n; ++k) {
    binom = checked_mul(binom, static_cast<std::uint64_t>(n - k + 1), "binomial");
    binom /= static_cast<std::uint64_t>(k);
    count.summation = checked_add(
        count.summation, checked_mul(static_cast<std::uint64_t>(k), binom, "k * C(n,k)"),
        "summation");
  }
  return count;
}

std::uint64_t naive_total_classifications(int n, std::uint64_t test_actions) {
  return checked_mul(naive_combination_count(n).closed_form, test_actions,
                     "naive classification total");
}

std::uint64_t cached_classification_count(int n, std::uint64_t test_actions) {
  if (n < 1) throw DataError("cached count needs n >= 1");
  return checked_mul(static_cast<std::uint64_t>(n), test_actions, "cached count");
}

std::vector<TruePositiveList> build_true_positive_lists(
    std::span<const PartialOutputs> outputs) {
  if (outputs.empty()) throw DataError("no partial outputs");
  std::set<std::string> reference;
  for (const PartialOutputRow& row : outputs.front().rows) {
    if (!reference.insert(row.action_id).second) {
      throw DataError("technique '" + outputs.front().technique_id +
                      "' repeats action '" + row.action_id + "'");
    }
  }
  std::vector<TruePositiveList> lists;
  lists.reserve(outputs.size());
  for (const PartialOutputs& out : outputs) {
    std::set<std::string> seen;
    TruePositiveList tp;
    tp.technique_id = out.technique_id;
    for (const PartialOutputRow& row : out.rows) {
      if (!seen.insert(row.action_id).second) {
        throw DataError("technique '" + out.technique_id + "' repeats action '" +
                        row.action_id + "'");
      }
      if (reference.count(row.action_id) == 0) {
        throw DataError("technique '" + out.technique_id +
                        "' covers a different action set (unexpected '" +
                        row.action_id + "')");
      }
      if (row.predicted_class == row.true_class) tp.ids.push_back(row.action_id);
    }
    if (seen.size() != reference.size()) {
      throw DataError("technique '" + out.technique_id +
                      "' covers a different action set (missing ids)");
    }
    std::sort(tp.ids.begin(), tp.ids.end());
    lists.push_back(std::move(tp));
  }
  return lists;
}

CombinationEvaluator::CombinationEvaluator(std::span<const TruePositiveList> tp_lists,
                                           std::span<const std::string> test_ids) {
  if (tp_lists.empty()) throw DataError("no true-positive lists");
  if (tp_lists.size() > 32) throw DataError("more than 32 techniques not supported");
  std::map<std::string, std::uint32_t> index;
  for (const std::string& id : test_ids) {
    const auto next = static_cast<std::uint32_t>(index.size());
    if (!index.emplace(id, next).second) {
      throw DataError("duplicate test action id '" + id + "'");
    }
  }
  total_ = index.size();
  if (total_ == 0) throw DataError("empty test-action universe");
  dense_.reserve(tp_lists.size());
  for (const TruePositiveList& tp : tp_lists) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tp.ids.size());
    for (const std::string& id : tp.ids) {
      const auto it = index.find(id);
      if (it == index.end()) {
        throw DataError("true-positive id '" + id + "' of technique '" +
                        tp.technique_id + "' is not a test action");
      }
      ids.push_back(it->second);
    }
    dense_.push_back(std::move(ids));
  }
  counts_.assign(total_, 0);
  touched_.reserve(total_);
}

CombinationResult CombinationEvaluator::evaluate(std::uint32_t mask) {
  if (mask == 0) throw DataError("empty technique combination");
  const int n = technique_count();
  if (n < 32 && (mask >> n) != 0) {
    throw DataError("combination mask selects unknown techniques");
  }
  const int k = std::popcount(mask);
  const auto threshold = static_cast<std::uint8_t>(k / 2);

  touched_.clear();
  for (int t = 0; t < n; ++t) {
    if ((mask & (std::uint32_t{1} << t)) == 0) continue;
    for (std::uint32_t id : dense_[static_cast<std::size_t>(t)]) {
      if (counts_[id]++ == 0) touched_.push_back(id);
    }
  }
  std::uint64_t retained = 0;
  for (std::uint32_t id : touched_) {
    if (counts_[id] > threshold) ++retained;
    counts_[id] = 0;
  }
  return {mask, k, static_cast<double>(retained) / static_cast<double>(total_)};
}

void for_each_combination(CombinationEvaluator& evaluator,
                          const std::function<void(const CombinationResult&)>& sink,
                          bool allow_large) {
  const int n = evaluator.technique_count();
  if (n > 24 && !allow_large) {
    throw DataError("refusing to enumerate 2^" + std::to_string(n) +
                    " combinations without an explicit override");
  }
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t mask = 1; mask < end; ++mask) {
    sink(evaluator.evaluate(static_cast<std::uint32_t>(mask)));
  }
}

std::vector<CombinationResult> evaluate_all_combinations(
    CombinationEvaluator& evaluator, bool allow_large) {
  std::vector<CombinationResult> results;
  results.reserve((std::size_t{1} << evaluator.technique_count()) - 1);
  for_each_combination(
      evaluator, [&](const CombinationResult& r) { results.push_back(r); },
      allow_large);
  return results;
}

std::vector<CombinationResult> top_combinations(
    std::span<const CombinationResult> results,
    const std::vector<int>& cardinalities, int top_m) {
  if (top_m < 1) throw DataError("top_m must be >= 1");
  std::vector<int> ks = cardinalities;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  std::vector<CombinationResult> selected;
  for (int k : ks) {
    std::vector<CombinationResult> bucket;
    for (const CombinationResult& r : results) {
      if (r.cardinality == k) bucket.push_back(r);
    }
    std::sort(bucket.begin(), bucket.end(),
              [](const CombinationResult& a, const CombinationResult& b) {
                if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
                return a.mask < b.mask;
              });
    if (bucket.size() > static_cast<std::size_t>(top_m)) {
      bucket.resize(static_cast<std::size_t>(top_m));
    }
    selected.insert(selected.end(), bucket.begin(), bucket.end());
  }
  return selected;
}

bool fusion_accuracy_equivalence_check(std::span<const TruePositiveList> tp_lists,
                                       std::span<const PartialOutputs> outputs,
                                       std::uint32_t mask) {
  if (mask == 0) throw DataError("empty technique combination");
  if (tp_lists.size() != outputs.size()) {
    throw DataError("true-positive lists and outputs are not aligned");
  }
  const int n = static_cast<int>(outputs.size());
  const int k = std::popcount(mask);

  // label -> small int for the vote scan
  std::map<std::string, int> label_index;
  auto intern = [&](const std::string& label) {
    return label_index.emplace(label, static_cast<int>(label_index.size()))
        .first->second;
  };

  std::map<std::string, std::vector<int>> votes;       // action -> selected votes
  std::map<std::string, int> truth;
  std::map<std::string, int> tp_count;
  for (int t = 0; t < n; ++t) {
    const bool selected = (mask & (std::uint32_t{1} << t)) != 0;
    if (!selected) continue;
    for (const PartialOutputRow& row : outputs[static_cast<std::size_t>(t)].rows) {
      votes[row.action_id].push_back(intern(row.predicted_class));
      truth[row.action_id] = intern(row.true_class);
    }
    for (const std::string& id : tp_lists[static_cast<std::size_t>(t)].ids) {
      ++tp_count[id];
    }
  }

  for (const auto& [id, vote_list] : votes) {
    const VoteOutcome outcome = strict_majority(vote_list);
    const bool slow_correct = !outcome.unknown() && *outcome.winner == truth.at(id);
    const auto it = tp_count.find(id);
    const int count = it == tp_count.end() ? 0 : it->second;
    const bool fast_correct = count > k / 2;
    if (slow_correct != fast_correct) return false;
  }
  return true;
}

void write_partial_outputs_csv(const PartialOutputs& outputs,
                               const std::filesystem::path& path) {
  std::string text = "action_id,true_class,predicted_class\n";
  for (const PartialOutputRow& row : outputs.rows) {
    text += row.action_id;
    text += ',';
    text += row.true_class;
    text += ',';
    text += row.predicted_class;
    text += '\n';
  }
  atomic_write(path, text);
}

PartialOutputs read_partial_outputs_csv(const std::filesystem::path& path,
                                        const std::string& technique_id) {
  std::ifstream in(path);
  if (!in) throw CacheError("missing partial-output cache '" + path.string() + "'");
  PartialOutputs outputs;
  outputs.technique_id = technique_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == "action_id,true_class,predicted_class") continue;
    std::stringstream ss(line);
    PartialOutputRow row;
    if (!std::getline(ss, row.action_id, ',') ||
        !std::getline(ss, row.true_class, ',') ||
        !std::getline(ss, row.predicted_class)) {
      throw CacheError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed cache row");
    }
    outputs.rows.push_back(std::move(row));
  }
  if (outputs.rows.empty()) {
    throw CacheError("partial-output cache '" + path.string() + "' is empty");
  }
  return outputs;
}

void write_cache_manifest(const CacheManifest& manifest,
                          const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["dataset_hash"] = manifest.dataset_hash;
  doc["train_fold"] = manifest.train_fold;
  doc["test_fold"] = manifest.test_fold;
  doc["total_test_actions"] = manifest.total_test_actions;
  doc["technique_ids"] = manifest.technique_ids;
  doc["class_labels"] = manifest.class_labels;
  atomic_write(path, doc.dump(2) + "\n");
}

CacheManifest read_cache_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CacheError("missing cache manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw CacheError(path.string() + ": malformed manifest: " + e.what());
  }
  CacheManifest manifest;
  try {
    manifest.dataset_hash = doc.at("dataset_hash").get<std::string>();
    manifest.train_fold = doc.at("train_fold").get<int>();
    manifest.test_fold = doc.at("test_fold").get<int>();
    manifest.total_test_actions = doc.at("total_test_actions").get<std::uint64_t>();
    manifest.technique_ids = doc.at("technique_ids").get<std::vector<std::string>>();
    manifest.class_labels = doc.at("class_labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(path.string() + ": " + e.what());
  }
  return manifest;
}

}  // namespace skelfuse
