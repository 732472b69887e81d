#include "skelfuse/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "skelfuse/dataset_io.hpp"
#include "skelfuse/error.hpp"

namespace skelfuse {

namespace {

std::string join(std::span<const std::string> parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> member_ids(std::uint32_t mask,
                                    std::span<const std::string> technique_ids) {
  std::vector<std::string> members;
  for (std::size_t t = 0; t < technique_ids.size(); ++t) {
    if (mask & (std::uint32_t{1} << t)) members.push_back(technique_ids[t]);
  }
  return members;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError(where + ": bad number '" + text + "'");
  }
  return value;
}

std::string pct(double value) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", value * 100.0);
  return std::string(buf);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw DataError("cannot format double");
  return std::string(buf, ptr);
}

void write_epoch_log_csv(const FoldRunResult& run, const std::filesystem::path& path) {
  std::string text = "technique_id,epoch,mean_loss,test_accuracy\n";
  for (const TechniqueRunResult& technique : run.techniques) {
    for (const EpochLogRow& row : technique.epoch_log) {
      text += technique.technique_id;
      text += ',';
      text += std::to_string(row.epoch);
      text += ',';
      text += format_double(row.mean_loss);
      text += ',';
      text += format_double(row.test_accuracy);
      text += '\n';
    }
  }
  atomic_write(path, text);
}

void write_combinations_csv(std::span<const CombinationResult> results,
                            std::span<const std::string> technique_ids,
                            const std::filesystem::path& path) {
  std::string text = "mask,k,member_ids,accuracy\n";
  for (const CombinationResult& r : results) {
    text += std::to_string(r.mask);
    text += ',';
    text += std::to_string(r.cardinality);
    text += ',';
    const auto members = member_ids(r.mask, technique_ids);
    text += join(members, ';');
    text += ',';
    text += format_double(r.accuracy);
    text += '\n';
  }
  atomic_write(path, text);
}

std::vector<CombinationResult> read_combinations_csv(
    const std::filesystem::path& path,
    std::vector<std::vector<std::string>>* members_out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<CombinationResult> results;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("mask,", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw DataError(where + ": expected 4 columns");
    CombinationResult r;
    r.mask = static_cast<std::uint32_t>(std::stoul(fields[0]));
    r.cardinality = std::stoi(fields[1]);
    r.accuracy = parse_double(fields[3], where);
    results.push_back(r);
    if (members_out) {
      std::vector<std::string> members;
      std::stringstream ss(fields[2]);
      std::string member;
      while (std::getline(ss, member, ';')) members.push_back(member);
      members_out->push_back(std::move(members));
    }
  }
  return results;
}

void write_standalone_csv(std::span<const StandaloneRow> rows,
                          const std::filesystem::path& path) {
  std::string text =
      "technique_id,status,run1_test_accuracy,run2_test_accuracy,mean_test_accuracy,"
      "run1_train_accuracy,run2_train_accuracy\n";
  for (const StandaloneRow& row : rows) {
    text += row.technique_id;
    text += row.failed ? ",failed," : ",ok,";
    text += format_double(row.run1_accuracy);
    text += ',';
    text += format_double(row.run2_accuracy);
    text += ',';
    text += format_double(row.mean_accuracy);
    text += ',';
    text += format_double(row.run1_train_accuracy);
    text += ',';
    text += format_double(row.run2_train_accuracy);
    text += '\n';
  }
  atomic_write(path, text);
}

std::vector<StandaloneRow> read_standalone_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<StandaloneRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("technique_id,", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) throw DataError(where + ": expected 7 columns");
    StandaloneRow row;
    row.technique_id = fields[0];
    row.failed = fields[1] == "failed";
    row.run1_accuracy = parse_double(fields[2], where);
    row.run2_accuracy = parse_double(fields[3], where);
    row.mean_accuracy = parse_double(fields[4], where);
    row.run1_train_accuracy = parse_double(fields[5], where);
    row.run2_train_accuracy = parse_double(fields[6], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_report_table(const ExperimentReport& report,
                                const ExperimentConfig& config) {
  std::ostringstream out;
  out << "two-fold fusion experiment\n";
  out << "==========================\n";
  out << "dataset hash : " << report.dataset_hash << "\n";
  out << "classes      : " << report.class_labels.size() << "\n";
  out << "techniques   : " << config.techniques.size();
  if (!report.failed_technique_ids.empty()) {
    out << "  (failed, excluded from fusion: " << join(report.failed_technique_ids, ' ')
        << ")";
  }
  out << "\n\n";

  std::size_t id_width = 9;
  for (const TechniqueSpec& t : config.techniques) {
    id_width = std::max(id_width, t.id.size());
  }
  std::size_t aug_width = 9;
  for (const TechniqueSpec& t : config.techniques) {
    aug_width = std::max({aug_width, describe(t.train_augmentation).size(),
                          describe(t.test_augmentation).size()});
  }

  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(s.size() < w ? w - s.size() : 0, ' ');
  };

  out << "standalone classifiers (best-epoch test accuracy per fold run, % )\n";
  out << " # " << pad("technique", id_width) << "  norm   " << pad("train aug", aug_width)
      << "  " << pad("test aug", aug_width) << "  " << "  run1    run2    mean\n";
  for (std::size_t t = 0; t < config.techniques.size(); ++t) {
    const TechniqueSpec& spec = config.techniques[t];
    const StandaloneRow& row = report.standalone[t];
    char index[24];
    std::snprintf(index, sizeof index, "%2u", static_cast<unsigned>(t + 1));
    out << index << " " << pad(spec.id, id_width) << "  "
        << pad(describe(spec.normalization), 5) << "  "
        << pad(describe(spec.train_augmentation), aug_width) << "  "
        << pad(describe(spec.test_augmentation), aug_width) << "  ";
    if (row.failed) {
      out << "  failed\n";
      continue;
    }
    out << pct(row.run1_accuracy) << "  " << pct(row.run2_accuracy) << "  "
        << pct(row.mean_accuracy) << "\n";
  }
  out << "\n";

  if (report.top.empty()) {
    out << "no combinations evaluated\n";
    return out.str();
  }

  const std::size_t n = report.fused_technique_ids.size();
  out << "best combinations per cardinality (strict-majority fusion, mean of both "
         "fold runs)\n";

  // membership matrix: techniques in rows, selected combinations in columns,
  // grouped by cardinality; the bottom row carries the fused accuracies
  const std::string accuracy_label = "fused accuracy (%)";
  const std::size_t label_width = std::max(id_width, accuracy_label.size());
  std::vector<int> ks;
  for (const CombinationResult& r : report.top) {
    if (ks.empty() || ks.back() != r.cardinality) ks.push_back(r.cardinality);
  }
  out << "   " << pad("technique", label_width);
  for (int k : ks) {
    std::size_t count = 0;
    for (const CombinationResult& r : report.top) {
      if (r.cardinality == k) ++count;
    }
    const std::string label = " | " + std::to_string(k) + "/" + std::to_string(n);
    out << pad(label, 3 + count * 7);
  }
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    char index[24];
    std::snprintf(index, sizeof index, "%2u ", static_cast<unsigned>(i + 1));
    out << index << pad(report.fused_technique_ids[i], label_width);
    int current_k = -1;
    for (const CombinationResult& r : report.top) {
      if (r.cardinality != current_k) {
        current_k = r.cardinality;
        out << " | ";
      }
      out << (r.mask & (std::uint32_t{1} << i) ? "   x   " : "   .   ");
    }
    out << "\n";
  }
  out << "   " << pad(accuracy_label, label_width);
  {
    int current_k = -1;
    for (const CombinationResult& r : report.top) {
      if (r.cardinality != current_k) {
        current_k = r.cardinality;
        out << " | ";
      }
      out << " " << pct(r.accuracy);
    }
  }
  out << "\n";
  return out.str();
}

void write_experiment_report(const ExperimentReport& report,
                             const ExperimentConfig& config,
                             const std::filesystem::path& out_dir) {
  write_standalone_csv(report.standalone, out_dir / "standalone.csv");
  write_combinations_csv(report.mean_combinations, report.fused_technique_ids,
                         out_dir / "combinations_mean.csv");

  std::string top_text = "k,rank,mask,member_ids,accuracy\n";
  std::string plot_text = "k,rank,accuracy\n";
  int rank = 0;
  int current_k = -1;
  for (const CombinationResult& r : report.top) {
    if (r.cardinality != current_k) {
      current_k = r.cardinality;
      rank = 0;
    }
    ++rank;
    top_text += std::to_string(r.cardinality);
    top_text += ',';
    top_text += std::to_string(rank);
    top_text += ',';
    top_text += std::to_string(r.mask);
    top_text += ',';
    const auto members = member_ids(r.mask, report.fused_technique_ids);
    top_text += join(members, ';');
    top_text += ',';
    top_text += format_double(r.accuracy);
    top_text += '\n';

    plot_text += std::to_string(r.cardinality);
    plot_text += ',';
    plot_text += std::to_string(rank);
    plot_text += ',';
    plot_text += format_double(r.accuracy);
    plot_text += '\n';
  }
  atomic_write(out_dir / "top_combinations.csv", top_text);
  atomic_write(out_dir / "plot_data.csv", plot_text);
  atomic_write(out_dir / "report.txt", render_report_table(report, config));
}

std::string render_all_in_one_table(const AllInOneReport& report,
                                    const ExperimentConfig& config) {
  std::ostringstream out;
  out << "all-in-one model vs fusion of independent classifiers\n";
  out << "======================================================\n";
  std::size_t id_width = 9;
  for (const std::string& id : report.technique_ids) {
    id_width = std::max(id_width, id.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(s.size() < w ? w - s.size() : 0, ' ');
  };
  std::map<std::string, const TechniqueSpec*> by_id;
  for (const TechniqueSpec& t : config.techniques) by_id[t.id] = &t;

  out << "per test-data variant accuracy of the single all-in-one model (%)\n";
  out << pad("technique", id_width) << "  norm   test aug            run1    run2    mean\n";
  for (std::size_t t = 0; t < report.technique_ids.size(); ++t) {
    const TechniqueSpec* spec = by_id.at(report.technique_ids[t]);
    out << pad(spec->id, id_width) << "  " << pad(describe(spec->normalization), 5)
        << "  " << pad(describe(spec->test_augmentation), 18) << "  "
        << pct(report.run1.variant_accuracy[t]) << "  "
        << pct(report.run2.variant_accuracy[t]) << "  "
        << pct(report.mean_variant_accuracy[t]) << "\n";
  }
  out << "\n";
  out << "strict-majority fusion of the all-in-one outputs : "
      << pct(report.mean_fused_accuracy) << " %\n";
  out << "fusion of independent classifiers (same subset)  : "
      << pct(report.mean_independent_fused_accuracy) << " %\n";
  return out.str();
}

void write_all_in_one_report(const AllInOneReport& report,
                             const ExperimentConfig& config,
                             const std::filesystem::path& out_dir) {
  std::string text =
      "technique_id,run1_variant_accuracy,run2_variant_accuracy,mean_variant_accuracy\n";
  for (std::size_t t = 0; t < report.technique_ids.size(); ++t) {
    text += report.technique_ids[t];
    text += ',';
    text += format_double(report.run1.variant_accuracy[t]);
    text += ',';
    text += format_double(report.run2.variant_accuracy[t]);
    text += ',';
    text += format_double(report.mean_variant_accuracy[t]);
    text += '\n';
  }
  text += "fused,";
  text += format_double(report.run1.fused_accuracy);
  text += ',';
  text += format_double(report.run2.fused_accuracy);
  text += ',';
  text += format_double(report.mean_fused_accuracy);
  text += '\n';
  text += "independent_fused,";
  text += format_double(report.run1.independent_fused_accuracy);
  text += ',';
  text += format_double(report.run2.independent_fused_accuracy);
  text += ',';
  text += format_double(report.mean_independent_fused_accuracy);
  text += '\n';
  atomic_write(out_dir / "allinone.csv", text);
  atomic_write(out_dir / "allinone.txt", render_all_in_one_table(report, config));
}

}  // namespace skelfuse
