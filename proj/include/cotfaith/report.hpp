#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cotfaith/analysis.hpp"
#include "cotfaith/csv.hpp"
#include "cotfaith/harness.hpp"
#include "cotfaith/metrics.hpp"

namespace cotfaith {

/// Column order of the summary CSV. Metric cells are percentages with two
/// decimals; a metric that could not be computed leaves its cell empty.
const std::vector<std::string>& summary_header();
std::vector<std::string> summary_row(const MetricSummary& s);
std::string summary_csv(std::span<const MetricSummary> summaries);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

/// One circle per point, the fitted line, axes. Point data is repeated in
/// an XML comment so the file can be read back without a parser.
std::string scatter_svg(std::span<const ScatterPoint> points, const RegressionFit<double>& fit,
                        const std::string& x_label, const std::string& y_label);

/// Mean per size against log10(parameters), with one-stddev bars.
std::string scaling_svg(std::span<const ScalingSeries> series, const std::string& y_label);

/// Fits y on x over two named columns of a summary-style CSV. Rows with an
/// empty cell in either column are left out. Weighted fits use n_examples.
RegressionFit<double> regress_columns(const CsvTable& table, const std::string& x,
                                      const std::string& y, bool weighted);

struct ScoredRun {
  RunManifest manifest;
  std::vector<MetricSummary> summaries;
};

struct ReportOptions {
  bool allow_mixed_conditions = false;
  bool weighted = false;
};

/// Writes summary.csv, scatter.csv, scatter.svg, scaling.csv, scaling_*.svg
/// and report.txt into `out_dir`. Returns the paths written.
std::vector<std::filesystem::path> write_report(std::span<const ScoredRun> runs,
                                                const std::filesystem::path& out_dir,
                                                const ReportOptions& options = {});

}  // namespace cotfaith
