#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmpc/search.hpp"

namespace mmpc {

// Whitespace-separated "efficiency rate label" lines for gnuplot.
void write_plot_data(const std::filesystem::path& path, std::span<const ResultRow> rows);

struct ReportFiles {
  std::filesystem::path markdown;
  std::vector<std::filesystem::path> data;
};

// Markdown summary (method table, uniform bit-width table, headline gains)
// plus plot data files and a gnuplot script. Baselines may be empty.
ReportFiles write_report(std::span<const ResultRow> results, std::span<const BaselineRow> baselines,
                         const std::filesystem::path& out_dir);

}  // namespace mmpc
