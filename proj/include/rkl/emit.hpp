#pragma once

// Output writers: CSV tables, JSON run manifests and SVG line plots.

#include "rkl/experiments.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rkl {

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr int kManifestSchema = 1;

/// RFC 4180 style: fields with commas, quotes or newlines are quoted.
std::string csv_escape(std::string_view field);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Columns: N, replicate, prior_label, estimator, sigma2_hat, rel_error, status, runtime_ms.
std::string to_csv(const ResultTable& table);
ResultTable result_table_from_csv(std::string_view text);

std::string to_csv(const InvarianceTable& table);
std::string to_csv(const TailMassTable& table);
std::string to_csv(const std::vector<SummaryRow>& rows);
std::string to_csv(const std::vector<SpreadRow>& rows);

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
    std::string title;
    std::string x_label = "N";
    std::string y_label;
    bool log_x = true;
    /// Horizontal reference line.
    std::optional<double> hline;
    std::string hline_label;
};

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec);

/// Median sigma2_hat against N, one line per (prior, estimator).
std::string svg_consistency_plot(const std::vector<SummaryRow>& summary, double true_sigma2,
                                 const std::string& title);

nlohmann::json manifest(const ExperimentSpec& spec, const std::string& run_name,
                        const std::vector<std::string>& files, const nlohmann::json& summary);

/// Writes text, creating parent directories; IoError names the path.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

} // namespace rkl
