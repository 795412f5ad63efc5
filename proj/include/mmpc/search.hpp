#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpc/channel.hpp"
#include "mmpc/energy.hpp"
#include "mmpc/net.hpp"
#include "mmpc/precoder.hpp"
#include "mmpc/quant.hpp"

namespace mmpc {

struct SearchSpace {
  std::vector<ArchConfig> archs;
  std::vector<QuantConfig> quants;
  std::vector<std::uint64_t> seeds;

  void validate() const;
  std::size_t candidate_count() const { return archs.size() * quants.size(); }

  // 8 architectures x 256 bit-width vectors x 4 seeds.
  static SearchSpace full(int n_t = 64, int n_u = 4);
  // 2 architectures x 16 bit-width vectors ({2,16}^4) x 2 seeds.
  static SearchSpace smoke(int n_t = 64, int n_u = 4);
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double val_rate = 0.0;
  double test_rate = 0.0;
};

enum class CandidateStatus { kComplete, kFailed };

struct CandidateResult {
  ArchConfig arch;
  QuantConfig quant;
  std::vector<SeedOutcome> seeds;
  double mean_rate = 0.0;
  double std_error = 0.0;
  EnergyBreakdown energy;
  double efficiency = 0.0;
  CandidateStatus status = CandidateStatus::kComplete;
  std::string error;
};

struct SearchOptions {
  TrainConfig pretrain;
  TrainConfig finetune;
  std::filesystem::path checkpoint_dir;
  std::size_t jobs = 1;
  HardwareModel hardware;
  // Stop after this many newly computed candidates (simulates an
  // interrupted sweep); 0 = run to completion.
  std::size_t stop_after = 0;
  std::function<void(const std::string&)> log;
};

struct SearchOutcome {
  std::vector<CandidateResult> results;  // sorted by (arch, quant)
  std::size_t computed = 0;              // per-seed candidates trained in this call
  std::size_t reused = 0;                // per-seed candidates loaded from checkpoints
  bool complete = true;
};

// Exhaustive sweep. For every (arch, seed) one FP model is pretrained; every
// quant config is then LSQ fine-tuned from it and scored on the test split.
// Finished work is persisted as it completes and reused on the next call.
SearchOutcome run_search(const SearchSpace& space, const Dataset& dataset,
                         const SearchOptions& options);

// Mean and standard error over seeds.
RateStats aggregate_seeds(std::span<const double> per_seed_rates);

// ---- Pareto -----------------------------------------------------------------

struct ParetoPoint {
  double x = 0.0;  // maximized (efficiency)
  double y = 0.0;  // maximized (rate)
};

bool dominates(const ParetoPoint& a, const ParetoPoint& b);

// Indices of non-dominated points, ascending in y. Duplicates are all kept.
std::vector<std::size_t> pareto_front(std::span<const ParetoPoint> points);

std::vector<std::size_t> pareto_front(std::span<const CandidateResult> results);

// ---- results CSV ------------------------------------------------------------

// One aggregated row of results.csv.
struct ResultRow {
  int c_out = 0;
  int d_fcl = 0;
  QuantConfig quant;
  std::size_t seed_count = 0;
  double mean_rate = 0.0;
  double std_error = 0.0;
  double e_c_uj = 0.0;
  double e_w_uj = 0.0;
  double e_a_uj = 0.0;
  double e_total_uj = 0.0;
  double efficiency = 0.0;
  bool pareto = false;
};

inline constexpr const char* kResultsHeader =
    "c_out,d_fcl,bits,seed_count,mean_rate,stderr,e_c_uj,e_w_uj,e_a_uj,e_total_uj,efficiency,"
    "pareto_flag";

// Completed candidates only; pareto flag marks the global front.
std::vector<ResultRow> to_rows(std::span<const CandidateResult> results);
void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);
void write_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

// Front of the rows on (efficiency, mean_rate), optionally per architecture.
std::vector<ResultRow> pareto_rows(std::span<const ResultRow> rows, bool per_arch);

// ---- baseline summaries and frontier report ---------------------------------

struct BaselineRow {
  std::string method;  // "zf" or "wmmse"
  double epsilon = 0.0;
  std::size_t scenarios = 0;
  double mean_rate = 0.0;
  double std_error = 0.0;
  double mean_iterations = 0.0;
  double energy_uj = 0.0;
  double efficiency = 0.0;
};

inline constexpr const char* kBaselineHeader =
    "method,epsilon,scenarios,mean_rate,stderr,mean_iterations,energy_uj,efficiency";

void append_baseline_csv(const std::filesystem::path& path, const BaselineRow& row);
std::vector<BaselineRow> read_baseline_csv(const std::filesystem::path& path);

struct FrontierPoint {
  std::string method;
  std::string label;
  double rate = 0.0;
  double energy_uj = 0.0;
  double efficiency = 0.0;
  bool on_front = false;
};

// Headline gains of `front` over `reference`: the largest efficiency ratio
// among front points with at least the reference rate, and the largest rate
// ratio among front points with at least the reference efficiency.
struct TradeoffGains {
  double efficiency_gain_at_rate = 1.0;
  double rate_gain_at_efficiency = 1.0;
};

TradeoffGains tradeoff_gains(std::span<const ParetoPoint> front,
                             std::span<const ParetoPoint> reference);

struct FrontierReport {
  std::vector<FrontierPoint> points;
  // Front against every evaluated DNN configuration.
  TradeoffGains design_space;
  // Front against the WMMSE operating points (absent without WMMSE rows).
  std::optional<TradeoffGains> versus_wmmse;
};

FrontierReport frontier_report(std::span<const ResultRow> results,
                               std::span<const BaselineRow> baselines);

}  // namespace mmpc
