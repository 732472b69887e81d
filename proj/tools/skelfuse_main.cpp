#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "skelfuse/core_ops.hpp"
#include "skelfuse/dataset_io.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/experiment.hpp"
#include "skelfuse/report.hpp"
#include "skelfuse/synthetic.hpp"

namespace {

using namespace skelfuse;

nlohmann::json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(what + ": " + e.what());
  }
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path.string());
}

TechniqueSpec technique_from_cli(const std::string& inline_json,
                                 const std::string& file) {
  if (!file.empty()) return technique_from_json(load_json_file(file));
  if (!inline_json.empty()) {
    return technique_from_json(parse_json_text(inline_json, "--technique"));
  }
  throw DataError("a technique is required (--technique or --technique-file)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"skeleton action recognition: pre-processing techniques, Bi-LSTM "
               "classifiers swept over every technique combination via "
               "strict-majority fusion"};
  app.require_subcommand(1);
  std::function<void()> action;

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Generate a synthetic labeled dataset and its body model");
  struct {
    std::string out, model_out, spec_file;
    SyntheticSpec spec;
    int seed = 0;
  } gen;
  generate->add_option("--out", gen.out, "Dataset file to write")->required();
  generate->add_option("--model-out", gen.model_out, "Body model file to write")->required();
  generate->add_option("--spec", gen.spec_file, "Synthetic spec JSON file");
  generate->add_option("--classes", gen.spec.classes, "Number of classes");
  generate->add_option("--actions-per-class", gen.spec.actions_per_class, "Actions per class");
  generate->add_option("--joints", gen.spec.joints, "Joints per pose (>= 6)");
  generate->add_option("--length-min", gen.spec.length_min, "Minimum frames per action");
  generate->add_option("--length-max", gen.spec.length_max, "Maximum frames per action");
  generate->add_option("--noise", gen.spec.noise, "Coordinate noise bound");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->callback([&] {
    action = [&] {
      SyntheticSpec spec = gen.spec;
      spec.seed = static_cast<std::uint64_t>(gen.seed);
      if (!gen.spec_file.empty()) spec = synthetic_spec_from_json(load_json_file(gen.spec_file));
      const Dataset dataset = generate_synthetic(spec);
      save_dataset(dataset, gen.out);
      save_body_model(dataset.body_model, gen.model_out);
      std::cout << "wrote " << dataset.actions.size() << " actions ("
                << dataset.classes.size() << " classes) to " << gen.out << "\n";
    };
  });

  // split
  auto* split = app.add_subcommand("split", "Balanced two-fold split of a dataset");
  struct {
    std::string dataset, body_model, out;
    int seed = 0;
  } sp;
  split->add_option("--dataset", sp.dataset, "Dataset file")->required();
  split->add_option("--body-model", sp.body_model, "Body model file")->required();
  split->add_option("--out", sp.out, "Fold CSV to write")->required();
  split->add_option("--seed", sp.seed, "Split seed");
  split->callback([&] {
    action = [&] {
      const BodyModelDef model = load_body_model(sp.body_model);
      const Dataset dataset = load_dataset(sp.dataset, model);
      const FoldSplit folds =
          balanced_two_fold_split(dataset, static_cast<std::uint64_t>(sp.seed));
      save_fold_split(folds, sp.out);
      std::cout << "wrote " << folds.assignment.size() << " assignments to " << sp.out
                << "\n";
    };
  });

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "Apply one technique's pipeline to a dataset (for inspection)");
  struct {
    std::string dataset, body_model, technique, technique_file, role = "test";
    std::string out, model_out, orientation = "per_pose";
  } pre;
  preprocess->add_option("--dataset", pre.dataset, "Dataset file")->required();
  preprocess->add_option("--body-model", pre.body_model, "Body model file")->required();
  preprocess->add_option("--technique", pre.technique, "Technique JSON (inline)");
  preprocess->add_option("--technique-file", pre.technique_file, "Technique JSON file");
  preprocess->add_option("--role", pre.role, "train|test")
      ->check(CLI::IsMember({"train", "test"}));
  preprocess->add_option("--out", pre.out, "Transformed dataset file")->required();
  preprocess->add_option("--model-out", pre.model_out,
                         "Induced body model file (when the format changes)");
  preprocess->add_option("--orientation", pre.orientation, "per_pose|whole_action")
      ->check(CLI::IsMember({"per_pose", "whole_action"}));
  preprocess->callback([&] {
    action = [&] {
      const BodyModelDef model = load_body_model(pre.body_model);
      Dataset dataset = load_dataset(pre.dataset, model);
      const TechniqueSpec spec = technique_from_cli(pre.technique, pre.technique_file);
      const PipelineRole role =
          pre.role == "train" ? PipelineRole::Train : PipelineRole::Test;
      const OrientationMode orientation = pre.orientation == "whole_action"
                                              ? OrientationMode::WholeAction
                                              : OrientationMode::PerPose;
      Dataset out;
      out.classes = dataset.classes;
      BodyModelDef out_model = model;
      for (const Action& a : dataset.actions) {
        auto [variant, variant_model] = apply_pipeline(a, model, spec, role, orientation);
        out.actions.push_back(std::move(variant));
        out_model = std::move(variant_model);
      }
      out.body_model = out_model;
      save_dataset(out, pre.out);
      if (!pre.model_out.empty()) save_body_model(out_model, pre.model_out);
      std::cout << "wrote " << out.actions.size() << " transformed actions to "
                << pre.out << "\n";
    };
  });

  // train
  auto* train_cmd = app.add_subcommand(
      "train", "Train one technique's classifier on one fold of the config");
  struct {
    std::string config, technique_id;
    int fold = 1;
  } tr;
  train_cmd->add_option("--config", tr.config, "Experiment config file")->required();
  train_cmd->add_option("--technique", tr.technique_id, "Technique id from the config")
      ->required();
  train_cmd->add_option("--fold", tr.fold, "Training fold (1 or 2)")
      ->check(CLI::Range(1, 2));
  train_cmd->callback([&] {
    action = [&] {
      const ExperimentConfig config = config_from_json_file(tr.config);
      const TechniqueRunResult result =
          train_single_technique(config, tr.technique_id, tr.fold);
      if (result.failed) throw TrainError(result.error);
      std::cout << "technique " << result.technique_id << " fold " << result.train_fold
                << ": best test accuracy " << format_double(result.best_test_accuracy)
                << " (epoch " << result.best_epoch << "), final train accuracy "
                << format_double(result.final_train_accuracy) << "\n";
    };
  });

  // classify
  auto* classify_cmd = app.add_subcommand(
      "classify", "Classify actions from a file with a trained model");
  struct {
    std::string actions, body_model, model_file, technique, technique_file, labels;
    bool probabilities = false;
  } cl;
  classify_cmd->add_option("--actions", cl.actions, "Action file")->required();
  classify_cmd->add_option("--body-model", cl.body_model, "Body model file")->required();
  classify_cmd->add_option("--model-file", cl.model_file, "Trained model")->required();
  classify_cmd->add_option("--technique", cl.technique, "Technique JSON (inline)");
  classify_cmd->add_option("--technique-file", cl.technique_file, "Technique JSON file");
  classify_cmd->add_option("--labels", cl.labels, "Comma-separated class labels");
  classify_cmd->add_flag("--probabilities", cl.probabilities, "Print the full softmax row");
  classify_cmd->callback([&] {
    action = [&] {
      const BodyModelDef model = load_body_model(cl.body_model);
      const Dataset dataset = load_dataset(cl.actions, model);
      const TechniqueSpec spec = technique_from_cli(cl.technique, cl.technique_file);
      const BiLstmParams params = load_model(cl.model_file);
      const std::vector<std::string> labels = split_list(cl.labels);
      for (const Action& a : dataset.actions) {
        auto [variant, variant_model] = apply_pipeline(a, model, spec, PipelineRole::Test);
        (void)variant_model;
        const Prediction pred = classify(params, variant);
        std::cout << a.id << ",";
        if (static_cast<std::size_t>(pred.predicted_class) < labels.size()) {
          std::cout << labels[static_cast<std::size_t>(pred.predicted_class)];
        } else {
          std::cout << pred.predicted_class;
        }
        std::cout << "," << format_double(pred.probabilities(pred.predicted_class));
        if (cl.probabilities) {
          for (Eigen::Index i = 0; i < pred.probabilities.size(); ++i) {
            std::cout << "," << format_double(pred.probabilities(i));
          }
        }
        std::cout << "\n";
      }
    };
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "Run the full two-fold experiment");
  struct {
    std::string config;
  } rn;
  run_cmd->add_option("--config", rn.config, "Experiment config file")->required();
  run_cmd->callback([&] {
    action = [&] {
      const ExperimentConfig config = config_from_json_file(rn.config);
      const ExperimentReport report = run_experiment(config);
      write_experiment_report(report, config, config.output_dir);
      std::cout << render_report_table(report, config);
    };
  });

  // fuse
  auto* fuse_cmd = app.add_subcommand(
      "fuse", "Evaluate every technique combination from cached outputs only");
  struct {
    std::string run_dir, dataset, out;
    std::vector<int> cardinalities;
    int top_m = 5;
  } fu;
  fuse_cmd->add_option("--run-dir", fu.run_dir, "Cache directory (outputs + manifest)")
      ->required();
  fuse_cmd->add_option("--dataset", fu.dataset,
                       "Dataset file to verify against the cache manifest");
  fuse_cmd->add_option("--out", fu.out, "Combinations CSV to write");
  fuse_cmd->add_option("--cardinalities", fu.cardinalities, "Cardinalities to report");
  fuse_cmd->add_option("--top-m", fu.top_m, "Combinations per cardinality");
  fuse_cmd->callback([&] {
    action = [&] {
      std::string expected_hash;
      if (!fu.dataset.empty()) expected_hash = file_hash_hex(fu.dataset);
      std::vector<std::string> technique_ids;
      std::uint64_t total = 0;
      const std::vector<CombinationResult> results =
          fuse_from_cache(fu.run_dir, expected_hash, &technique_ids, &total);
      const std::filesystem::path out_path =
          fu.out.empty() ? std::filesystem::path(fu.run_dir) / "fused_combinations.csv"
                         : std::filesystem::path(fu.out);
      write_combinations_csv(results, technique_ids, out_path);
      std::vector<int> ks = fu.cardinalities;
      if (ks.empty()) {
        for (int k = 1; k <= static_cast<int>(technique_ids.size()); ++k) ks.push_back(k);
      }
      std::cout << "evaluated " << results.size() << " combinations of "
                << technique_ids.size() << " techniques over " << total
                << " test actions\n";
      for (const CombinationResult& r : top_combinations(results, ks, fu.top_m)) {
        std::cout << "k=" << r.cardinality << " mask=" << r.mask << " accuracy="
                  << format_double(r.accuracy) << "\n";
      }
    };
  });

  // allinone
  auto* allinone = app.add_subcommand(
      "allinone", "Train one model on all chosen technique variants and compare "
                  "against fusing independent classifiers");
  struct {
    std::string config, techniques;
  } ai;
  allinone->add_option("--config", ai.config, "Experiment config file")->required();
  allinone->add_option("--techniques", ai.techniques,
                       "Comma-separated technique ids (format-compatible subset)")
      ->required();
  allinone->callback([&] {
    action = [&] {
      const ExperimentConfig config = config_from_json_file(ai.config);
      const std::vector<std::string> ids = split_list(ai.techniques);
      const AllInOneReport report = run_all_in_one(config, ids);
      write_all_in_one_report(report, config, config.output_dir / "allinone");
      std::cout << render_all_in_one_table(report, config);
    };
  });

  // report
  auto* report_cmd = app.add_subcommand(
      "report", "Re-emit report files from a completed experiment directory");
  struct {
    std::string config;
  } rp;
  report_cmd->add_option("--config", rp.config, "Experiment config file")->required();
  report_cmd->callback([&] {
    action = [&] {
      const ExperimentConfig config = config_from_json_file(rp.config);
      const ExperimentReport report = reload_experiment_report(config);
      write_experiment_report(report, config, config.output_dir);
      std::cout << render_report_table(report, config);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  action();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const CacheError& e) {
    std::cerr << "cache error: " << e.what() << "\n";
    return 4;
  } catch (const TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
