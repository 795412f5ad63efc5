#include "mmpc/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "mmpc/error.hpp"

namespace mmpc {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(',', start);
    out.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) return out;
    start = end + 1;
  }
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw FormatError("schema mismatch: bad number '" + s + "'");
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string bits_label(const QuantConfig& q) { return "[" + q.to_string(',') + "]"; }

std::string row_label(const ResultRow& r) {
  return "c" + std::to_string(r.c_out) + "_d" + std::to_string(r.d_fcl) + "_q" + r.quant.to_string('-');
}

}  // namespace

// ---- CSV ----------------------------------------------------------------------

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.c_out << ',' << r.d_fcl << ',' << r.quant.to_string('-') << ',' << r.seed_count << ','
        << exact(r.mean_rate) << ',' << exact(r.std_error) << ',' << exact(r.e_c_uj) << ',' << exact(r.e_w_uj)
        << ',' << exact(r.e_a_uj) << ',' << exact(r.e_total_uj) << ',' << exact(r.efficiency) << ','
        << (r.pareto ? 1 : 0) << '\n';
  }
}

void write_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ostringstream s;
  write_results_csv(s, rows);
  detail::write_file_atomic(path, s.str());
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != kResultsHeader) throw FormatError("schema mismatch in " + path.string());
  std::vector<ResultRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 12) throw FormatError("schema mismatch in " + path.string());
    ResultRow r;
    r.c_out = parse_number<int>(f[0]);
    r.d_fcl = parse_number<int>(f[1]);
    auto bits = f[2];
    std::replace(bits.begin(), bits.end(), '-', ',');
    try {
      r.quant = QuantConfig::parse(bits);
    } catch (const Error&) {
      throw FormatError("schema mismatch: bad bits '" + f[2] + "'");
    }
    r.seed_count = parse_number<std::size_t>(f[3]);
    r.mean_rate = parse_number<double>(f[4]);
    r.std_error = parse_number<double>(f[5]);
    r.e_c_uj = parse_number<double>(f[6]);
    r.e_w_uj = parse_number<double>(f[7]);
    r.e_a_uj = parse_number<double>(f[8]);
    r.e_total_uj = parse_number<double>(f[9]);
    r.efficiency = parse_number<double>(f[10]);
    r.pareto = parse_number<int>(f[11]) != 0;
    rows.push_back(r);
  }
  return rows;
}

void append_baseline_csv(const std::filesystem::path& path, const BaselineRow& row) {
  const bool fresh = !std::filesystem::exists(path);
  if (!fresh) {
    const auto lines = read_lines(path);
    if (!lines.empty() && lines.front() != kBaselineHeader) throw FormatError("schema mismatch in " + path.string());
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) out << kBaselineHeader << '\n';
  out << row.method << ',' << exact(row.epsilon) << ',' << row.scenarios << ',' << exact(row.mean_rate) << ','
      << exact(row.std_error) << ',' << exact(row.mean_iterations) << ',' << exact(row.energy_uj) << ','
      << exact(row.efficiency) << '\n';
}

std::vector<BaselineRow> read_baseline_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != kBaselineHeader) throw FormatError("schema mismatch in " + path.string());
  std::vector<BaselineRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 8) throw FormatError("schema mismatch in " + path.string());
    BaselineRow r;
    r.method = f[0];
    r.epsilon = parse_number<double>(f[1]);
    r.scenarios = parse_number<std::size_t>(f[2]);
    r.mean_rate = parse_number<double>(f[3]);
    r.std_error = parse_number<double>(f[4]);
    r.mean_iterations = parse_number<double>(f[5]);
    r.energy_uj = parse_number<double>(f[6]);
    r.efficiency = parse_number<double>(f[7]);
    rows.push_back(r);
  }
  return rows;
}

// ---- frontier -----------------------------------------------------------------

FrontierReport frontier_report(std::span<const ResultRow> results, std::span<const BaselineRow> baselines) {
  FrontierReport report;
  std::vector<ParetoPoint> all;
  for (const auto& r : results) all.push_back({r.efficiency, r.mean_rate});
  const auto front_idx = pareto_front(std::span<const ParetoPoint>(all));
  std::vector<ParetoPoint> front;
  for (auto i : front_idx) front.push_back(all[i]);

  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const bool on = std::find(front_idx.begin(), front_idx.end(), i) != front_idx.end();
    report.points.push_back({"dnn", row_label(r), r.mean_rate, r.e_total_uj, r.efficiency, on});
  }
  std::vector<ParetoPoint> wmmse;
  for (const auto& b : baselines) {
    const std::string label = b.method == "wmmse" ? "eps=" + fmt("%g", b.epsilon) : b.method;
    report.points.push_back({b.method, label, b.mean_rate, b.energy_uj, b.efficiency, false});
    if (b.method == "wmmse") wmmse.push_back({b.efficiency, b.mean_rate});
  }
  report.design_space = tradeoff_gains(front, all);
  if (!wmmse.empty()) report.versus_wmmse = tradeoff_gains(front, wmmse);
  return report;
}

// ---- report files -------------------------------------------------------------

void write_plot_data(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ostringstream s;
  s << "# efficiency_bit_s_hz_uj sum_rate_bit_s_hz label\n";
  for (const auto& r : rows) s << exact(r.efficiency) << ' ' << exact(r.mean_rate) << ' ' << row_label(r) << '\n';
  detail::write_file_atomic(path, s.str());
}

ReportFiles write_report(std::span<const ResultRow> results, std::span<const BaselineRow> baselines,
                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportFiles files;
  const auto frontier = frontier_report(results, baselines);

  std::ostringstream md;
  md << "# Energy efficiency vs. sum rate\n\n";
  md << results.size() << " DNN configurations, " << baselines.size() << " baseline rows.\n\n";

  md << "## Methods\n\n| Method | Energy (uJ) | Sum rate (bit/s/Hz) | Efficiency (bit/s/Hz/uJ) |\n|---|---|---|---|\n";
  for (const auto& b : baselines) {
    std::string name = b.method == "zf" ? "ZF" : b.method == "wmmse" ? "WMMSE" : b.method;
    if (b.method == "wmmse") name += " (eps " + fmt("%g", b.epsilon) + ", I = " + fmt("%.1f", b.mean_iterations) + ")";
    md << "| " << name << " | " << fmt("%.4f", b.energy_uj) << " | " << fmt("%.3f", b.mean_rate) << " ± "
       << fmt("%.3f", b.std_error) << " | " << fmt("%.4g", b.efficiency) << " |\n";
  }
  for (const auto& r : results) {
    if (!(r.quant.is_uniform() && r.quant.bits[0] == 16)) continue;
    md << "| DNN c" << r.c_out << " d" << r.d_fcl << " " << bits_label(r.quant) << " | " << fmt("%.4f", r.e_total_uj)
       << " | " << fmt("%.3f", r.mean_rate) << " ± " << fmt("%.3f", r.std_error) << " | "
       << fmt("%.4g", r.efficiency) << " |\n";
  }

  // Uniform bit widths, widest first, with retention against 16 bits.
  std::vector<const ResultRow*> uniform;
  std::map<std::pair<int, int>, double> fp_rate;
  for (const auto& r : results) {
    if (!r.quant.is_uniform()) continue;
    uniform.push_back(&r);
    if (r.quant.bits[0] == 16) fp_rate[{r.c_out, r.d_fcl}] = r.mean_rate;
  }
  std::stable_sort(uniform.begin(), uniform.end(), [](const ResultRow* a, const ResultRow* b) {
    if (a->quant.bits[0] != b->quant.bits[0]) return a->quant.bits[0] > b->quant.bits[0];
    return std::pair{a->c_out, a->d_fcl} < std::pair{b->c_out, b->d_fcl};
  });
  md << "\n## Uniform bit widths\n\n| Architecture | Bits | Energy (uJ) | Sum rate | Retention vs 16 bit |\n"
        "|---|---|---|---|---|\n";
  for (const auto* r : uniform) {
    const auto it = fp_rate.find({r->c_out, r->d_fcl});
    const std::string retention = it == fp_rate.end() || it->second == 0.0
                                      ? "n/a"
                                      : fmt("%.1f%%", 100.0 * r->mean_rate / it->second);
    md << "| c" << r->c_out << " d" << r->d_fcl << " | " << bits_label(r->quant) << " | " << fmt("%.4f", r->e_total_uj)
       << " | " << fmt("%.3f", r->mean_rate) << " ± " << fmt("%.3f", r->std_error) << " | " << retention << " |\n";
  }

  md << "\n## Pareto front\n\n| Configuration | Energy (uJ) | Sum rate | Efficiency |\n|---|---|---|---|\n";
  std::vector<const FrontierPoint*> front;
  for (const auto& p : frontier.points) {
    if (p.on_front) front.push_back(&p);
  }
  std::stable_sort(front.begin(), front.end(), [](const auto* a, const auto* b) { return a->rate < b->rate; });
  for (const auto* q : front) {
    const auto& p = *q;
    md << "| " << p.label << " | " << fmt("%.4f", p.energy_uj) << " | " << fmt("%.3f", p.rate) << " | "
       << fmt("%.4g", p.efficiency) << " |\n";
  }

  md << "\n## Headline gains\n\n";
  if (!results.empty()) {
    md << "- Front vs. all DNN configurations: " << fmt("%.2f", frontier.design_space.efficiency_gain_at_rate)
       << "x efficiency at equal or higher rate, " << fmt("%.2f", frontier.design_space.rate_gain_at_efficiency)
       << "x rate at equal or higher efficiency.\n";
  }
  if (frontier.versus_wmmse) {
    md << "- Front vs. WMMSE: " << fmt("%.2f", frontier.versus_wmmse->efficiency_gain_at_rate)
       << "x efficiency at equal or higher rate, " << fmt("%.2f", frontier.versus_wmmse->rate_gain_at_efficiency)
       << "x rate at equal or higher efficiency.\n";
  }
  if (results.empty()) md << "No DNN results.\n";

  files.markdown = out_dir / "report.md";
  detail::write_file_atomic(files.markdown, md.str());

  const auto fig2 = out_dir / "fig2.dat";
  write_plot_data(fig2, results);
  const auto fig2_front = out_dir / "fig2_front.dat";
  const auto per_arch = pareto_rows(results, true);
  write_plot_data(fig2_front, per_arch);

  std::ostringstream fig3;
  fig3 << "# efficiency_bit_s_hz_uj sum_rate_bit_s_hz label\n";
  for (const auto& p : frontier.points) {
    if (p.method == "dnn" && !p.on_front) continue;
    fig3 << exact(p.efficiency) << ' ' << exact(p.rate) << ' ' << p.method << ':' << p.label << '\n';
  }
  const auto fig3_path = out_dir / "fig3.dat";
  detail::write_file_atomic(fig3_path, fig3.str());

  const auto script = out_dir / "plot.gp";
  detail::write_file_atomic(script,
                            "set terminal pngcairo size 900,600\n"
                            "set xlabel 'Energy efficiency (bit/s/Hz/uJ)'\n"
                            "set ylabel 'Sum rate (bit/s/Hz)'\n"
                            "set logscale x\n"
                            "set output 'fig2.png'\n"
                            "plot 'fig2.dat' using 1:2 with points title 'configurations', \\\n"
                            "     'fig2_front.dat' using 1:2 with linespoints title 'per-architecture fronts'\n"
                            "set output 'fig3.png'\n"
                            "plot 'fig3.dat' using 1:2:3 with labels point pt 7 offset 1,0 notitle\n");
  files.data = {fig2, fig2_front, fig3_path, script};
  return files;
}

}  // namespace mmpc
