#pragma once

#include <string>
#include <vector>

#include "textgan/metrics.hpp"

namespace textgan {

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

// Names of the tracked metric columns, in CSV order.
const std::vector<std::string>& tracked_metrics();

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal static line chart.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series);

// Renders one SVG per tracked metric from <run_dir>/metrics.csv into
// <run_dir>/svg/, and collates any per-phase sample tables into samples.txt.
// Missing metrics file -> ContractError.
void emit_report(const std::string& run_dir);

// Decoded sample table, one sentence per line; empty outputs appear as the
// literal placeholder <empty>.
void write_sample_table(const std::string& path, const std::vector<std::string>& decoded);

}  // namespace textgan
