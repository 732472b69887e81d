#include "skelfuse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "skelfuse/core_ops.hpp"
#include "skelfuse/dataset_io.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/majority.hpp"
#include "skelfuse/report.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

namespace {

using nlohmann::json;

void expect_keys(const json& obj, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw DataError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

TrainConfig parse_train_config(const json& doc) {
  expect_keys(doc,
              {"epochs", "learning_rate", "optimizer", "beta1", "beta2", "epsilon",
               "batch_size", "seed", "init_scale"},
              "train");
  TrainConfig config;
  try {
    if (doc.contains("epochs")) config.epochs = doc["epochs"].get<int>();
    if (doc.contains("learning_rate")) config.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("optimizer")) {
      const std::string name = doc["optimizer"].get<std::string>();
      if (name == "sgd") {
        config.optimizer = TrainConfig::Optimizer::Sgd;
      } else if (name == "adam") {
        config.optimizer = TrainConfig::Optimizer::Adam;
      } else {
        throw DataError("train: optimizer must be sgd|adam");
      }
    }
    if (doc.contains("beta1")) config.adam_beta1 = doc["beta1"].get<double>();
    if (doc.contains("beta2")) config.adam_beta2 = doc["beta2"].get<double>();
    if (doc.contains("epsilon")) config.adam_epsilon = doc["epsilon"].get<double>();
    if (doc.contains("batch_size")) config.batch_size = doc["batch_size"].get<int>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("init_scale")) config.init_scale = doc["init_scale"].get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("train: ") + e.what());
  }
  if (config.epochs < 0) throw DataError("train: epochs must be >= 0");
  if (!(config.learning_rate > 0.0)) throw DataError("train: learning_rate must be positive");
  if (config.batch_size < 1) throw DataError("train: batch_size must be >= 1");
  if (!(config.init_scale > 0.0)) throw DataError("train: init_scale must be positive");
  return config;
}

struct FoldData {
  int train_fold = 0;
  int test_fold = 0;
  std::vector<const Action*> train_actions;
  std::vector<const Action*> test_actions;
};

FoldData make_fold_data(const std::vector<Action>& actions, const FoldSplit& split,
                        int train_fold) {
  FoldData data;
  data.train_fold = train_fold;
  data.test_fold = 3 - train_fold;
  for (const Action& action : actions) {
    const int fold = split.assignment.at(action.id);
    (fold == train_fold ? data.train_actions : data.test_actions).push_back(&action);
  }
  if (data.train_actions.empty() || data.test_actions.empty()) {
    throw DataError("fold " + std::to_string(train_fold) +
                    " leaves an empty train or test set");
  }
  return data;
}

struct JobOutput {
  TechniqueRunResult result;
  BiLstmParams best_params;
};

std::vector<LabeledAction> build_variants(const std::vector<const Action*>& actions,
                                          const BodyModelDef& model,
                                          const TechniqueSpec& technique,
                                          PipelineRole role, OrientationMode orientation,
                                          const std::map<std::string, int>& class_index) {
  std::vector<LabeledAction> variants;
  variants.reserve(actions.size());
  int joints = -1;
  for (const Action* action : actions) {
    auto [variant, variant_model] =
        apply_pipeline(*action, model, technique, role, orientation);
    if (joints < 0) {
      joints = variant_model.joint_count();
    } else if (joints != variant_model.joint_count()) {
      throw DataError("technique '" + technique.id + "' produced mixed joint counts");
    }
    variants.emplace_back(std::move(variant),
                          class_index.at(*action->class_label));
  }
  return variants;
}

JobOutput run_technique_job(const ExperimentConfig& config, const Dataset& dataset,
                            const FoldData& fold, const TechniqueSpec& technique,
                            const std::map<std::string, int>& class_index) {
  JobOutput out;
  TechniqueRunResult& result = out.result;
  result.technique_id = technique.id;
  result.train_fold = fold.train_fold;
  result.test_fold = fold.test_fold;
  try {
    const auto train_set =
        build_variants(fold.train_actions, dataset.body_model, technique,
                       PipelineRole::Train, config.orientation, class_index);
    const auto test_set =
        build_variants(fold.test_actions, dataset.body_model, technique,
                       PipelineRole::Test, config.orientation, class_index);
    Dims dims;
    dims.joints = static_cast<int>(train_set.front().first.joint_count());
    dims.embedding = config.model.embedding_dim;
    dims.hidden = config.model.hidden_dim;
    dims.classes = static_cast<int>(dataset.classes.size());

    TrainConfig train_config = config.train;
    train_config.seed = mix_seed(config.train.seed, technique.id,
                                 static_cast<std::uint64_t>(fold.train_fold));

    BiLstmParams best = BiLstmParams::zeros(dims);
    double best_accuracy = -1.0;
    int best_epoch = 0;
    const BiLstmParams final_params =
        train(train_set, train_config, dims,
              [&](int epoch, double mean_loss, const BiLstmParams& params) {
                const EvalResult eval = evaluate(params, test_set);
                result.epoch_log.push_back({epoch, mean_loss, eval.accuracy});
                if (eval.accuracy > best_accuracy) {
                  best_accuracy = eval.accuracy;
                  best_epoch = epoch;
                  best = params;
                }
              });
    if (best_accuracy < 0.0) {
      // zero-epoch run: fall back to the (deterministic) initial parameters
      best = final_params;
    }
    const EvalResult best_eval = evaluate(best, test_set);
    result.best_epoch = best_epoch;
    result.best_test_accuracy = best_eval.accuracy;
    result.final_train_accuracy = evaluate(final_params, train_set).accuracy;
    result.outputs.technique_id = technique.id;
    result.outputs.rows.reserve(best_eval.rows.size());
    for (const EvalRow& row : best_eval.rows) {
      result.outputs.rows.push_back(
          {row.action_id, dataset.classes[static_cast<std::size_t>(row.target)],
           dataset.classes[static_cast<std::size_t>(row.predicted)]});
    }
    out.best_params = std::move(best);
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
  }
  return out;
}

std::vector<std::string> test_ids_of(const FoldData& fold) {
  std::vector<std::string> ids;
  ids.reserve(fold.test_actions.size());
  for (const Action* action : fold.test_actions) ids.push_back(action->id);
  return ids;
}

}  // namespace

ExperimentConfig config_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed config: " + e.what());
  }
  if (!doc.is_object()) throw DataError("config must be an object");
  expect_keys(doc,
              {"dataset", "body_model", "output_dir", "downsample_factor",
               "fold_seed", "workers", "orientation", "model", "train", "techniques",
               "report"},
              "config");
  for (const char* key : {"dataset", "body_model", "output_dir", "techniques"}) {
    if (!doc.contains(key)) {
      throw DataError("config: missing '" + std::string(key) + "'");
    }
  }

  ExperimentConfig config;
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
  };
  try {
    config.dataset_path = resolve(doc["dataset"].get<std::string>());
    config.body_model_path = resolve(doc["body_model"].get<std::string>());
    config.output_dir = resolve(doc["output_dir"].get<std::string>());
    if (doc.contains("downsample_factor")) {
      config.downsample_factor = doc["downsample_factor"].get<int>();
    }
    if (doc.contains("fold_seed")) config.fold_seed = doc["fold_seed"].get<std::uint64_t>();
    if (doc.contains("workers")) config.workers = doc["workers"].get<int>();
    if (doc.contains("orientation")) {
      const std::string mode = doc["orientation"].get<std::string>();
      if (mode == "per_pose") {
        config.orientation = OrientationMode::PerPose;
      } else if (mode == "whole_action") {
        config.orientation = OrientationMode::WholeAction;
      } else {
        throw DataError("config: orientation must be per_pose|whole_action");
      }
    }
    if (doc.contains("model")) {
      expect_keys(doc["model"], {"embedding_dim", "hidden_dim"}, "model");
      if (doc["model"].contains("embedding_dim")) {
        config.model.embedding_dim = doc["model"]["embedding_dim"].get<int>();
      }
      if (doc["model"].contains("hidden_dim")) {
        config.model.hidden_dim = doc["model"]["hidden_dim"].get<int>();
      }
    }
    if (doc.contains("train")) config.train = parse_train_config(doc["train"]);
    for (const json& technique : doc["techniques"]) {
      config.techniques.push_back(technique_from_json(technique));
    }
    if (doc.contains("report")) {
      expect_keys(doc["report"], {"cardinalities", "top_m"}, "report");
      if (doc["report"].contains("cardinalities")) {
        config.report.cardinalities = doc["report"]["cardinalities"].get<std::vector<int>>();
      }
      if (doc["report"].contains("top_m")) {
        config.report.top_m = doc["report"]["top_m"].get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }

  if (config.downsample_factor < 1) throw DataError("config: downsample_factor must be >= 1");
  if (config.workers < 1) throw DataError("config: workers must be >= 1");
  if (config.model.embedding_dim < 1) throw DataError("config: embedding_dim must be >= 1");
  if (config.model.hidden_dim < 2 || config.model.hidden_dim % 2 != 0) {
    throw DataError("config: hidden_dim must be even and >= 2");
  }
  if (config.techniques.empty()) throw DataError("config: needs at least one technique");
  if (config.techniques.size() > 24) {
    throw DataError("config: more than 24 techniques would enumerate over 2^24 combinations");
  }
  std::set<std::string> ids;
  for (const TechniqueSpec& technique : config.techniques) {
    if (!ids.insert(technique.id).second) {
      throw DataError("config: duplicate technique id '" + technique.id + "'");
    }
  }
  if (config.report.top_m < 1) throw DataError("config: top_m must be >= 1");
  for (int k : config.report.cardinalities) {
    if (k < 1) throw DataError("config: cardinalities must be >= 1");
  }
  return config;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const BodyModelDef body_model = load_body_model(config.body_model_path);
  Dataset dataset = load_dataset(config.dataset_path, body_model);
  if (dataset.classes.empty()) throw DataError("dataset has no labeled actions");
  for (const Action& action : dataset.actions) {
    if (!action.class_label) {
      throw DataError("experiment dataset must be fully labeled ('" + action.id + "')");
    }
  }

  ExperimentReport report;
  report.dataset_hash = file_hash_hex(config.dataset_path);
  report.class_labels = dataset.classes;

  const FoldSplit split = balanced_two_fold_split(dataset, config.fold_seed);
  std::filesystem::create_directories(config.output_dir);
  save_fold_split(split, config.output_dir / "folds.csv");

  if (config.downsample_factor > 1) {
    for (Action& action : dataset.actions) {
      action = downsample(action, static_cast<std::size_t>(config.downsample_factor));
    }
  }

  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < dataset.classes.size(); ++i) {
    class_index[dataset.classes[i]] = static_cast<int>(i);
  }

  const FoldData folds[2] = {make_fold_data(dataset.actions, split, 1),
                             make_fold_data(dataset.actions, split, 2)};

  // Independent training jobs over (fold run, technique); seeds are derived
  // from (master seed, technique id, fold), so results do not depend on the
  // worker count or scheduling order.
  struct Job {
    int fold_index;
    std::size_t technique_index;
  };
  std::vector<Job> jobs;
  for (int f = 0; f < 2; ++f) {
    for (std::size_t t = 0; t < config.techniques.size(); ++t) {
      jobs.push_back({f, t});
    }
  }
  std::vector<JobOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      outputs[i] = run_technique_job(config, dataset, folds[job.fold_index],
                                     config.techniques[job.technique_index], class_index);
      const TechniqueRunResult& r = outputs[i].result;
      std::lock_guard<std::mutex> lock(log_mutex);
      if (r.failed) {
        std::cerr << "[run" << r.train_fold << "] " << r.technique_id
                  << " FAILED: " << r.error << "\n";
      } else {
        std::cerr << "[run" << r.train_fold << "] " << r.technique_id
                  << " best_test_acc=" << r.best_test_accuracy << " (epoch "
                  << r.best_epoch << ")\n";
      }
    }
  };
  const int worker_count = std::max(
      1, std::min<int>(config.workers, static_cast<int>(jobs.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  FoldRunResult* runs[2] = {&report.run1, &report.run2};
  for (int f = 0; f < 2; ++f) {
    runs[f]->train_fold = folds[f].train_fold;
    runs[f]->test_fold = folds[f].test_fold;
    runs[f]->total_test_actions = folds[f].test_actions.size();
    runs[f]->techniques.resize(config.techniques.size());
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    runs[jobs[i].fold_index]->techniques[jobs[i].technique_index] =
        std::move(outputs[i].result);
  }

  // Persist per-run cache artifacts: partial outputs, models, epoch logs and
  // the manifest binding them to this dataset and fold.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& job = jobs[i];
    const TechniqueRunResult& result = runs[job.fold_index]->techniques[job.technique_index];
    if (result.failed) continue;
    const std::filesystem::path run_dir =
        config.output_dir / ("run" + std::to_string(result.train_fold));
    write_partial_outputs_csv(result.outputs, run_dir / "outputs" / (result.technique_id + ".csv"));
    save_model(outputs[i].best_params, run_dir / "models" / (result.technique_id + ".bin"));
  }
  for (int f = 0; f < 2; ++f) {
    const FoldRunResult& run = *runs[f];
    const std::filesystem::path run_dir =
        config.output_dir / ("run" + std::to_string(run.train_fold));
    CacheManifest manifest;
    manifest.dataset_hash = report.dataset_hash;
    manifest.train_fold = run.train_fold;
    manifest.test_fold = run.test_fold;
    manifest.total_test_actions = run.total_test_actions;
    for (const TechniqueRunResult& r : run.techniques) {
      if (!r.failed) manifest.technique_ids.push_back(r.technique_id);
    }
    manifest.class_labels = dataset.classes;
    write_cache_manifest(manifest, run_dir / "manifest.json");
    write_epoch_log_csv(run, run_dir / "epoch_log.csv");
  }

  // Fusion stage over the techniques that completed in both fold runs.
  for (std::size_t t = 0; t < config.techniques.size(); ++t) {
    const bool ok = !report.run1.techniques[t].failed && !report.run2.techniques[t].failed;
    if (ok) {
      report.fused_technique_ids.push_back(config.techniques[t].id);
    } else {
      report.failed_technique_ids.push_back(config.techniques[t].id);
    }
  }
  if (!report.fused_technique_ids.empty()) {
    const std::set<std::string> fused(report.fused_technique_ids.begin(),
                                      report.fused_technique_ids.end());
    for (int f = 0; f < 2; ++f) {
      FoldRunResult& run = *runs[f];
      std::vector<PartialOutputs> fold_outputs;
      for (const TechniqueRunResult& r : run.techniques) {
        if (fused.count(r.technique_id) != 0) fold_outputs.push_back(r.outputs);
      }
      const auto tp = build_true_positive_lists(fold_outputs);
      const auto ids = test_ids_of(folds[f]);
      CombinationEvaluator evaluator(tp, ids);
      run.combinations = evaluate_all_combinations(evaluator);
      write_combinations_csv(run.combinations, report.fused_technique_ids,
                             config.output_dir /
                                 ("run" + std::to_string(run.train_fold)) /
                                 "combinations.csv");
    }
    report.mean_combinations.reserve(report.run1.combinations.size());
    for (std::size_t i = 0; i < report.run1.combinations.size(); ++i) {
      CombinationResult mean = report.run1.combinations[i];
      mean.accuracy = (mean.accuracy + report.run2.combinations[i].accuracy) / 2.0;
      report.mean_combinations.push_back(mean);
    }
    report.top = top_combinations(report.mean_combinations,
                                  config.report.cardinalities, config.report.top_m);
  }

  for (std::size_t t = 0; t < config.techniques.size(); ++t) {
    const TechniqueRunResult& r1 = report.run1.techniques[t];
    const TechniqueRunResult& r2 = report.run2.techniques[t];
    StandaloneRow row;
    row.technique_id = config.techniques[t].id;
    row.failed = r1.failed || r2.failed;
    row.run1_accuracy = r1.best_test_accuracy;
    row.run2_accuracy = r2.best_test_accuracy;
    row.mean_accuracy = (r1.best_test_accuracy + r2.best_test_accuracy) / 2.0;
    row.run1_train_accuracy = r1.final_train_accuracy;
    row.run2_train_accuracy = r2.final_train_accuracy;
    report.standalone.push_back(row);
  }
  return report;
}

std::vector<CombinationResult> fuse_from_cache(const std::filesystem::path& run_dir,
                                               const std::string& expected_dataset_hash,
                                               std::vector<std::string>* technique_ids_out,
                                               std::uint64_t* total_out) {
  const CacheManifest manifest = read_cache_manifest(run_dir / "manifest.json");
  if (!expected_dataset_hash.empty() && expected_dataset_hash != manifest.dataset_hash) {
    throw CacheError("dataset hash mismatch: cache was built from " +
                     manifest.dataset_hash + ", current data hashes to " +
                     expected_dataset_hash + "; rerun the experiment");
  }
  if (manifest.technique_ids.empty()) {
    throw CacheError("cache manifest lists no techniques");
  }
  std::vector<PartialOutputs> outputs;
  outputs.reserve(manifest.technique_ids.size());
  for (const std::string& id : manifest.technique_ids) {
    PartialOutputs out = read_partial_outputs_csv(run_dir / "outputs" / (id + ".csv"), id);
    if (out.rows.size() != manifest.total_test_actions) {
      throw CacheError("cache for '" + id + "' covers " +
                       std::to_string(out.rows.size()) + " actions, manifest says " +
                       std::to_string(manifest.total_test_actions) +
                       " (mixed folds?)");
    }
    outputs.push_back(std::move(out));
  }
  std::vector<std::string> ids;
  ids.reserve(outputs.front().rows.size());
  for (const PartialOutputRow& row : outputs.front().rows) ids.push_back(row.action_id);
  std::vector<TruePositiveList> tp;
  try {
    tp = build_true_positive_lists(outputs);
  } catch (const DataError& e) {
    throw CacheError(std::string("inconsistent cache: ") + e.what());
  }
  CombinationEvaluator evaluator(tp, ids);
  if (technique_ids_out) *technique_ids_out = manifest.technique_ids;
  if (total_out) *total_out = manifest.total_test_actions;
  return evaluate_all_combinations(evaluator);
}

TechniqueRunResult train_single_technique(const ExperimentConfig& config,
                                          const std::string& technique_id,
                                          int train_fold) {
  if (train_fold != 1 && train_fold != 2) {
    throw DataError("train fold must be 1 or 2");
  }
  const auto it = std::find_if(config.techniques.begin(), config.techniques.end(),
                               [&](const TechniqueSpec& t) { return t.id == technique_id; });
  if (it == config.techniques.end()) {
    throw DataError("technique '" + technique_id + "' is not in the config");
  }
  const BodyModelDef body_model = load_body_model(config.body_model_path);
  Dataset dataset = load_dataset(config.dataset_path, body_model);
  if (dataset.classes.empty()) throw DataError("dataset has no labeled actions");
  const FoldSplit split = balanced_two_fold_split(dataset, config.fold_seed);
  if (config.downsample_factor > 1) {
    for (Action& action : dataset.actions) {
      action = downsample(action, static_cast<std::size_t>(config.downsample_factor));
    }
  }
  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < dataset.classes.size(); ++i) {
    class_index[dataset.classes[i]] = static_cast<int>(i);
  }
  const FoldData fold = make_fold_data(dataset.actions, split, train_fold);
  JobOutput out = run_technique_job(config, dataset, fold, *it, class_index);
  if (!out.result.failed) {
    const std::filesystem::path run_dir =
        config.output_dir / ("run" + std::to_string(train_fold));
    write_partial_outputs_csv(out.result.outputs,
                              run_dir / "outputs" / (technique_id + ".csv"));
    save_model(out.best_params, run_dir / "models" / (technique_id + ".bin"));
  }
  return out.result;
}

ExperimentReport reload_experiment_report(const ExperimentConfig& config) {
  ExperimentReport report;
  const CacheManifest m1 = read_cache_manifest(config.output_dir / "run1" / "manifest.json");
  const CacheManifest m2 = read_cache_manifest(config.output_dir / "run2" / "manifest.json");
  if (m1.dataset_hash != m2.dataset_hash) {
    throw CacheError("fold-run caches were built from different datasets");
  }
  report.dataset_hash = m1.dataset_hash;
  report.class_labels = m1.class_labels;
  report.run1.train_fold = m1.train_fold;
  report.run1.test_fold = m1.test_fold;
  report.run1.total_test_actions = m1.total_test_actions;
  report.run2.train_fold = m2.train_fold;
  report.run2.test_fold = m2.test_fold;
  report.run2.total_test_actions = m2.total_test_actions;

  report.standalone = read_standalone_csv(config.output_dir / "standalone.csv");
  if (report.standalone.size() != config.techniques.size()) {
    throw CacheError("standalone.csv does not match the config's technique list");
  }
  for (std::size_t t = 0; t < config.techniques.size(); ++t) {
    if (report.standalone[t].technique_id != config.techniques[t].id) {
      throw CacheError("standalone.csv does not match the config's technique list");
    }
    if (report.standalone[t].failed) {
      report.failed_technique_ids.push_back(report.standalone[t].technique_id);
    } else {
      report.fused_technique_ids.push_back(report.standalone[t].technique_id);
    }
  }

  if (!std::filesystem::exists(config.output_dir / "run1" / "combinations.csv")) {
    return report;  // standalone-only run (every technique failed, or none fused)
  }
  std::vector<std::vector<std::string>> members;
  report.run1.combinations =
      read_combinations_csv(config.output_dir / "run1" / "combinations.csv", &members);
  report.run2.combinations =
      read_combinations_csv(config.output_dir / "run2" / "combinations.csv", nullptr);
  if (report.run1.combinations.size() != report.run2.combinations.size()) {
    throw CacheError("fold-run combination caches differ in size");
  }
  if (!report.run1.combinations.empty()) {
    report.fused_technique_ids = members.back();  // full mask lists every technique
    report.mean_combinations.reserve(report.run1.combinations.size());
    for (std::size_t i = 0; i < report.run1.combinations.size(); ++i) {
      if (report.run1.combinations[i].mask != report.run2.combinations[i].mask) {
        throw CacheError("fold-run combination caches disagree on masks");
      }
      CombinationResult mean = report.run1.combinations[i];
      mean.accuracy = (mean.accuracy + report.run2.combinations[i].accuracy) / 2.0;
      report.mean_combinations.push_back(mean);
    }
    report.top = top_combinations(report.mean_combinations, config.report.cardinalities,
                                  config.report.top_m);
  }
  return report;
}

AllInOneReport run_all_in_one(const ExperimentConfig& config,
                              const std::vector<std::string>& technique_ids) {
  if (technique_ids.empty()) throw DataError("all-in-one: no techniques chosen");
  std::vector<const TechniqueSpec*> chosen;
  for (const std::string& id : technique_ids) {
    const auto it = std::find_if(config.techniques.begin(), config.techniques.end(),
                                 [&](const TechniqueSpec& t) { return t.id == id; });
    if (it == config.techniques.end()) {
      throw DataError("all-in-one: technique '" + id + "' is not in the config");
    }
    chosen.push_back(&*it);
    if (it->train_augmentation.kind == AugmentationKind::BodyModel ||
        it->test_augmentation.kind == AugmentationKind::BodyModel) {
      throw DataError("all-in-one: technique '" + id +
                      "' changes the pose format (body-model augmentation); "
                      "its variants cannot be mixed into a single training set");
    }
  }
  {
    std::set<std::string> unique(technique_ids.begin(), technique_ids.end());
    if (unique.size() != technique_ids.size()) {
      throw DataError("all-in-one: duplicate technique ids");
    }
  }

  const BodyModelDef body_model = load_body_model(config.body_model_path);
  Dataset dataset = load_dataset(config.dataset_path, body_model);
  if (dataset.classes.empty()) throw DataError("dataset has no labeled actions");
  for (const Action& action : dataset.actions) {
    if (!action.class_label) {
      throw DataError("experiment dataset must be fully labeled ('" + action.id + "')");
    }
  }
  const FoldSplit split = balanced_two_fold_split(dataset, config.fold_seed);
  if (config.downsample_factor > 1) {
    for (Action& action : dataset.actions) {
      action = downsample(action, static_cast<std::size_t>(config.downsample_factor));
    }
  }
  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < dataset.classes.size(); ++i) {
    class_index[dataset.classes[i]] = static_cast<int>(i);
  }

  AllInOneReport report;
  report.technique_ids = technique_ids;
  AllInOneFoldResult* parts[2] = {&report.run1, &report.run2};

  for (int f = 0; f < 2; ++f) {
    const FoldData fold = make_fold_data(dataset.actions, split, f + 1);
    AllInOneFoldResult& part = *parts[f];
    part.train_fold = fold.train_fold;
    part.test_fold = fold.test_fold;

    // Concatenated training set over every chosen technique's train variants.
    std::vector<LabeledAction> train_set;
    std::vector<std::vector<LabeledAction>> test_variants;
    int joints = -1;
    for (const TechniqueSpec* technique : chosen) {
      auto train_part = build_variants(fold.train_actions, dataset.body_model,
                                       *technique, PipelineRole::Train,
                                       config.orientation, class_index);
      auto test_part = build_variants(fold.test_actions, dataset.body_model,
                                      *technique, PipelineRole::Test,
                                      config.orientation, class_index);
      const int j = static_cast<int>(train_part.front().first.joint_count());
      if (joints < 0) joints = j;
      if (j != joints ||
          static_cast<int>(test_part.front().first.joint_count()) != joints) {
        throw DataError("all-in-one: technique '" + technique->id +
                        "' yields an incompatible pose format");
      }
      train_set.insert(train_set.end(), std::make_move_iterator(train_part.begin()),
                       std::make_move_iterator(train_part.end()));
      test_variants.push_back(std::move(test_part));
    }

    std::vector<LabeledAction> combined_test;
    for (const auto& variants : test_variants) {
      combined_test.insert(combined_test.end(), variants.begin(), variants.end());
    }

    Dims dims;
    dims.joints = joints;
    dims.embedding = config.model.embedding_dim;
    dims.hidden = config.model.hidden_dim;
    dims.classes = static_cast<int>(dataset.classes.size());
    TrainConfig train_config = config.train;
    train_config.seed = mix_seed(config.train.seed, "all-in-one",
                                 static_cast<std::uint64_t>(fold.train_fold));

    BiLstmParams best = BiLstmParams::zeros(dims);
    double best_accuracy = -1.0;
    int best_epoch = 0;
    const BiLstmParams final_params =
        train(train_set, train_config, dims,
              [&](int epoch, double, const BiLstmParams& params) {
                const double acc = evaluate(params, combined_test).accuracy;
                if (acc > best_accuracy) {
                  best_accuracy = acc;
                  best_epoch = epoch;
                  best = params;
                }
              });
    if (best_accuracy < 0.0) best = final_params;
    part.best_epoch = best_epoch;
    save_model(best, config.output_dir / "allinone" / "models" /
                         ("allinone_run" + std::to_string(fold.train_fold) + ".bin"));

    // way (i): each test-data variant evaluated independently
    std::vector<std::vector<EvalRow>> variant_rows;
    for (const auto& variants : test_variants) {
      const EvalResult eval = evaluate(best, variants);
      part.variant_accuracy.push_back(eval.accuracy);
      variant_rows.push_back(eval.rows);
    }

    // way (ii): strict majority over the same model's outputs across variants
    std::size_t fused_correct = 0;
    const std::size_t n_test = fold.test_actions.size();
    for (std::size_t a = 0; a < n_test; ++a) {
      std::vector<int> votes;
      votes.reserve(chosen.size());
      for (const auto& rows : variant_rows) votes.push_back(rows[a].predicted);
      const VoteOutcome outcome = strict_majority(votes);
      if (!outcome.unknown() && *outcome.winner == variant_rows.front()[a].target) {
        ++fused_correct;
      }
    }
    part.fused_accuracy = static_cast<double>(fused_correct) / static_cast<double>(n_test);

    // Reference point: fusion of independently trained classifiers for the
    // same subset, trained with the same per-technique seeds as the full
    // experiment.
    std::vector<PartialOutputs> independent_outputs;
    for (const TechniqueSpec* technique : chosen) {
      const JobOutput job = run_technique_job(config, dataset, fold, *technique, class_index);
      if (job.result.failed) {
        throw TrainError("all-in-one: independent training of '" + technique->id +
                         "' failed: " + job.result.error);
      }
      independent_outputs.push_back(job.result.outputs);
    }
    const auto tp = build_true_positive_lists(independent_outputs);
    const auto ids = test_ids_of(fold);
    CombinationEvaluator evaluator(tp, ids);
    const std::uint32_t full_mask =
        chosen.size() == 32 ? 0xffffffffu
                            : ((std::uint32_t{1} << chosen.size()) - 1);
    part.independent_fused_accuracy = evaluator.evaluate(full_mask).accuracy;
  }

  report.mean_variant_accuracy.resize(chosen.size());
  for (std::size_t t = 0; t < chosen.size(); ++t) {
    report.mean_variant_accuracy[t] =
        (report.run1.variant_accuracy[t] + report.run2.variant_accuracy[t]) / 2.0;
  }
  report.mean_fused_accuracy =
      (report.run1.fused_accuracy + report.run2.fused_accuracy) / 2.0;
  report.mean_independent_fused_accuracy =
      (report.run1.independent_fused_accuracy + report.run2.independent_fused_accuracy) /
      2.0;
  return report;
}

}  // namespace skelfuse
