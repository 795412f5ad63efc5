#include "mmpc/search.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "binary_io.hpp"
#include "json_io.hpp"
#include "mmpc/error.hpp"

namespace mmpc {

void SearchSpace::validate() const {
  if (archs.empty() || quants.empty() || seeds.empty()) throw Error("search space lists must be non-empty");
  for (const auto& a : archs) a.validate();
  for (const auto& q : quants) q.validate();
}

SearchSpace SearchSpace::full(int n_t, int n_u) {
  return {nas_architectures(n_t, n_u), enumerate_quant_configs(kBitChoices), {0, 1, 2, 3}};
}

SearchSpace SearchSpace::smoke(int n_t, int n_u) {
  constexpr std::array<int, 2> kSmokeBits = {2, 16};
  return {{ArchConfig{8, 512, n_t, n_u}, ArchConfig{16, 512, n_t, n_u}},
          enumerate_quant_configs(kSmokeBits),
          {0, 1}};
}

RateStats aggregate_seeds(std::span<const double> per_seed_rates) {
  if (per_seed_rates.empty()) throw Error("no seeds to aggregate");
  return mean_and_stderr(per_seed_rates);
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string dataset_fingerprint(const Dataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& m : d.scenarios) h = fnv1a(h, m.data(), static_cast<std::size_t>(m.size()) * sizeof(cdouble));
  h = fnv1a(h, d.splits.data(), d.splits.size());
  h = fnv1a(h, &d.sigma2, sizeof d.sigma2);
  h = fnv1a(h, &d.p_max, sizeof d.p_max);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path fp_path(const std::filesystem::path& dir, const ArchConfig& a, std::uint64_t seed) {
  return dir / ("fp_" + a.tag() + "_s" + std::to_string(seed) + ".mmpn");
}

std::filesystem::path candidate_path(const std::filesystem::path& dir, const ArchConfig& a, const QuantConfig& q,
                                     std::uint64_t seed) {
  return dir / ("cand_" + a.tag() + "_q" + q.to_string('-') + "_s" + std::to_string(seed) + ".json");
}

struct SeedRecord {
  SeedOutcome outcome;
  bool ok = true;
  std::string error;
};

void write_record(const std::filesystem::path& path, const ArchConfig& a, const QuantConfig& q,
                  const SeedRecord& r) {
  nlohmann::json j = {{"arch", a},
                      {"bits", q},
                      {"seed", r.outcome.seed},
                      {"status", r.ok ? "complete" : "failed"},
                      {"val_rate", r.outcome.val_rate},
                      {"test_rate", r.outcome.test_rate},
                      {"error", r.error}};
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

std::optional<SeedRecord> read_record(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in);
    SeedRecord r;
    r.outcome.seed = j.at("seed").get<std::uint64_t>();
    r.outcome.val_rate = j.at("val_rate").get<double>();
    r.outcome.test_rate = j.at("test_rate").get<double>();
    r.ok = j.at("status").get<std::string>() == "complete";
    r.error = j.at("error").get<std::string>();
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable record: recompute
  }
}

// Records the configuration a checkpoint directory belongs to; refuses to
// mix results from different settings.
void claim_directory(const std::filesystem::path& dir, const Dataset& dataset, const SearchOptions& options) {
  const nlohmann::json key = {{"dataset", dataset_fingerprint(dataset)},
                              {"pretrain", options.pretrain},
                              {"finetune", options.finetune}};
  const auto path = dir / "search.json";
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    nlohmann::json existing;
    try {
      existing = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      throw Error("unreadable " + path.string());
    }
    if (existing != key) throw Error("checkpoint directory " + dir.string() + " holds a different search");
    return;
  }
  detail::write_file_atomic(path, key.dump(2) + "\n");
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; stops handing out
// work once `stop` is set.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, const std::atomic<bool>& stop, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SearchOutcome run_search(const SearchSpace& space, const Dataset& dataset, const SearchOptions& options) {
  space.validate();
  options.pretrain.validate();
  options.finetune.validate();
  options.hardware.validate();
  if (!dataset.is_split()) throw Error("dataset has no train/val/test split");
  const auto test_set = dataset.subset(Split::kTest);
  if (test_set.empty()) throw Error("empty split");
  if (options.checkpoint_dir.empty()) throw Error("checkpoint directory not set");
  std::filesystem::create_directories(options.checkpoint_dir);
  claim_directory(options.checkpoint_dir, dataset, options);

  const auto& dir = options.checkpoint_dir;
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(msg);
  };

  struct Task {
    std::size_t arch;
    std::size_t quant;
    std::size_t seed;
  };
  // Results keyed by (arch, quant, seed) index; filled from disk or training.
  std::vector<std::optional<SeedRecord>> records(space.archs.size() * space.quants.size() * space.seeds.size());
  auto slot = [&](const Task& t) { return (t.arch * space.quants.size() + t.quant) * space.seeds.size() + t.seed; };

  SearchOutcome outcome;
  std::vector<Task> pending;
  for (std::size_t a = 0; a < space.archs.size(); ++a) {
    for (std::size_t q = 0; q < space.quants.size(); ++q) {
      for (std::size_t s = 0; s < space.seeds.size(); ++s) {
        const Task t{a, q, s};
        auto rec = read_record(candidate_path(dir, space.archs[a], space.quants[q], space.seeds[s]));
        if (rec && rec->outcome.seed == space.seeds[s]) {
          records[slot(t)] = std::move(rec);
          ++outcome.reused;
        } else {
          pending.push_back(t);
        }
      }
    }
  }

  // Phase 1: one FP model per (arch, seed) that still has pending work.
  std::vector<std::pair<std::size_t, std::size_t>> pretrain;
  for (const auto& t : pending) {
    if (std::find(pretrain.begin(), pretrain.end(), std::pair{t.arch, t.seed}) == pretrain.end()) {
      pretrain.emplace_back(t.arch, t.seed);
    }
  }
  std::sort(pretrain.begin(), pretrain.end());
  std::map<std::pair<std::size_t, std::size_t>, std::string> pretrain_errors;
  std::mutex pretrain_mutex;
  std::atomic<bool> stop{false};
  parallel_for(pretrain.size(), options.jobs, stop, [&](std::size_t i) {
    const auto [a, s] = pretrain[i];
    const auto path = fp_path(dir, space.archs[a], space.seeds[s]);
    if (std::filesystem::exists(path)) return;
    try {
      auto cfg = options.pretrain;
      cfg.seed = space.seeds[s];
      log("pretrain " + space.archs[a].tag() + " seed " + std::to_string(cfg.seed));
      const auto result = train(dataset, space.archs[a], std::nullopt, cfg);
      save_checkpoint(path, {result.params, std::nullopt});
    } catch (const Error& e) {
      std::lock_guard lock(pretrain_mutex);
      pretrain_errors[{a, s}] = e.what();
    }
  });

  // Phase 2: LSQ fine-tuning per candidate.
  std::atomic<std::size_t> computed{0};
  parallel_for(pending.size(), options.jobs, stop, [&](std::size_t i) {
    const Task t = pending[i];
    const auto& arch = space.archs[t.arch];
    const auto& quant = space.quants[t.quant];
    const std::uint64_t seed = space.seeds[t.seed];
    SeedRecord rec;
    rec.outcome.seed = seed;
    if (auto it = pretrain_errors.find({t.arch, t.seed}); it != pretrain_errors.end()) {
      rec.ok = false;
      rec.error = "pretraining failed: " + it->second;
    } else {
      try {
        const auto fp = load_checkpoint(fp_path(dir, arch, seed));
        auto cfg = options.finetune;
        cfg.seed = seed;
        const auto result = train(dataset, arch, quant, cfg, &fp.params);
        rec.outcome.val_rate = result.best_val_rate;
        rec.outcome.test_rate =
            evaluate(result.params, &*result.quant, test_set, dataset.sigma2, dataset.p_max).mean;
      } catch (const Error& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
    write_record(candidate_path(dir, arch, quant, seed), arch, quant, rec);
    log("candidate " + arch.tag() + " [" + quant.to_string() + "] seed " + std::to_string(seed) + ": " +
        (rec.ok ? std::to_string(rec.outcome.test_rate) : "failed (" + rec.error + ")"));
    records[slot(t)] = std::move(rec);
    const std::size_t done = ++computed;
    if (options.stop_after > 0 && done >= options.stop_after) stop = true;
  });
  outcome.computed = computed;
  outcome.complete = outcome.reused + outcome.computed == records.size();

  // Aggregate in (arch, quant) order; seeds in space order.
  for (std::size_t a = 0; a < space.archs.size(); ++a) {
    const auto resources = count_resources(space.archs[a]);
    for (std::size_t q = 0; q < space.quants.size(); ++q) {
      CandidateResult c;
      c.arch = space.archs[a];
      c.quant = space.quants[q];
      std::vector<double> rates;
      bool missing = false;
      for (std::size_t s = 0; s < space.seeds.size(); ++s) {
        const auto& rec = records[slot({a, q, s})];
        if (!rec) {
          missing = true;
          continue;
        }
        c.seeds.push_back(rec->outcome);
        if (!rec->ok) {
          c.status = CandidateStatus::kFailed;
          if (c.error.empty()) c.error = rec->error;
        }
        rates.push_back(rec->outcome.test_rate);
      }
      if (missing) continue;
      c.energy = dnn_energy(resources, c.quant, options.hardware);
      if (c.status == CandidateStatus::kComplete) {
        const auto stats = aggregate_seeds(rates);
        c.mean_rate = stats.mean;
        c.std_error = stats.std_error;
        c.efficiency = energy_efficiency(c.mean_rate, c.energy.total);
      }
      outcome.results.push_back(std::move(c));
    }
  }
  std::sort(outcome.results.begin(), outcome.results.end(), [](const auto& x, const auto& y) {
    if (x.arch != y.arch) return x.arch < y.arch;
    return x.quant < y.quant;
  });
  return outcome;
}

std::vector<ResultRow> to_rows(std::span<const CandidateResult> results) {
  std::vector<ResultRow> rows;
  std::vector<const CandidateResult*> kept;
  for (const auto& c : results) {
    if (c.status == CandidateStatus::kComplete) kept.push_back(&c);
  }
  std::vector<ParetoPoint> pts;
  for (const auto* c : kept) pts.push_back({c->efficiency, c->mean_rate});
  const auto front = pareto_front(std::span<const ParetoPoint>(pts));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& c = *kept[i];
    ResultRow r;
    r.c_out = c.arch.c_out;
    r.d_fcl = c.arch.d_fcl;
    r.quant = c.quant;
    r.seed_count = c.seeds.size();
    r.mean_rate = c.mean_rate;
    r.std_error = c.std_error;
    r.e_c_uj = c.energy.e_c;
    r.e_w_uj = c.energy.e_w;
    r.e_a_uj = c.energy.e_a;
    r.e_total_uj = c.energy.total;
    r.efficiency = c.efficiency;
    r.pareto = std::find(front.begin(), front.end(), i) != front.end();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace mmpc
