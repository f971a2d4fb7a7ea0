#pragma once

#include "seqdesign/config.hpp"
#include "seqdesign/simharness.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace seqdesign {

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart with axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series);

using TrueModelResult = std::pair<int, ReplicationSummary>;

/// Writes summary.tsv, trials.tsv, efficiency_by_n.tsv, accuracy.tsv,
/// cost.tsv, misselect.tsv and one efficiency chart per true model. Returns
/// the file names written (relative to dir).
std::vector<std::string> write_replication_outputs(const std::filesystem::path& dir,
                                                   const ExperimentConfig& config,
                                                   const std::vector<TrueModelResult>& results);

// Human-readable headline table.
std::string summary_text(const ExperimentConfig& config, const std::vector<TrueModelResult>& results);

struct Manifest {
    std::string command;
    std::string config_text;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
    std::vector<std::string> arguments;
};

std::string utc_timestamp();
void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& file);

/// Rebuilds the charts of an output directory from its efficiency_by_n.tsv
/// and returns summary.tsv as an aligned table.
std::string regenerate_report(const std::filesystem::path& dir, std::vector<std::string>& written);

void write_text_file(const std::filesystem::path& file, const std::string& text);
std::string read_text_file(const std::filesystem::path& file);

}  // namespace seqdesign
