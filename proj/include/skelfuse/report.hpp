#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skelfuse/combinations.hpp"
#include "skelfuse/experiment.hpp"

namespace skelfuse {

// Shortest decimal form that parses back to the same double; keeps every
// emitted file byte-stable across runs.
std::string format_double(double value);

void write_epoch_log_csv(const FoldRunResult& run, const std::filesystem::path& path);

// CSV columns: mask,k,member_ids,accuracy (member ids joined with ';').
void write_combinations_csv(std::span<const CombinationResult> results,
                            std::span<const std::string> technique_ids,
                            const std::filesystem::path& path);
std::vector<CombinationResult> read_combinations_csv(
    const std::filesystem::path& path,
    std::vector<std::vector<std::string>>* members_out = nullptr);

void write_standalone_csv(std::span<const StandaloneRow> rows,
                          const std::filesystem::path& path);
std::vector<StandaloneRow> read_standalone_csv(const std::filesystem::path& path);

// Emits the top-level report files under out_dir: standalone.csv,
// combinations_mean.csv, top_combinations.csv, plot_data.csv and report.txt
// (the human-readable technique/combination table).
void write_experiment_report(const ExperimentReport& report,
                             const ExperimentConfig& config,
                             const std::filesystem::path& out_dir);

std::string render_report_table(const ExperimentReport& report,
                                const ExperimentConfig& config);

void write_all_in_one_report(const AllInOneReport& report,
                             const ExperimentConfig& config,
                             const std::filesystem::path& out_dir);

std::string render_all_in_one_table(const AllInOneReport& report,
                                    const ExperimentConfig& config);

}  // namespace skelfuse
