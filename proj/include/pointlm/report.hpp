#pragma once
// Report artifacts: CSV tables for the numbers and small self-contained SVG
// line charts for the curves. Everything is plain text so a run directory
// can be inspected with nothing but a browser and a pager.

#include <map>
#include <string>
#include <vector>

#include "pointlm/eval.hpp"

namespace pointlm {

// RFC-4180 style: fields with commas, quotes, or newlines get quoted, inner
// quotes doubled.
std::string csv_escape(const std::string& s);

void write_text_file(const std::string& path, const std::string& content);

void write_eval_csv(const std::string& path, const EvalReport& rep);
void write_kv_csv(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& rows);
void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& pts);

// Columns of a numeric CSV keyed by header name; blank cells come back NaN.
std::map<std::string, std::vector<double>> read_numeric_csv(
    const std::string& path);

struct ChartSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN breaks the line
};

// Fixed-size chart with axes, ticks, grid, and a legend. Non-finite points
// split a series into separate line segments.
std::string svg_line_chart(const std::string& title,
                           const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<ChartSeries>& series);

}  // namespace pointlm
