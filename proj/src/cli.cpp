#include "mmpc/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "binary_io.hpp"
#include "json_io.hpp"
#include "mmpc/channel.hpp"
#include "mmpc/energy.hpp"
#include "mmpc/error.hpp"
#include "mmpc/net.hpp"
#include "mmpc/precoder.hpp"
#include "mmpc/report.hpp"
#include "mmpc/search.hpp"

namespace mmpc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool verbose = false;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest per artifact-producing command, next to its main output.
class Manifest {
 public:
  Manifest(std::string command, json config) : command_(std::move(command)), config_(std::move(config)) {
    started_ = std::chrono::steady_clock::now();
    started_at_ = utc_now();
  }

  void dataset(const fs::path& path) { dataset_hash_ = hex64(file_hash(path)); }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const fs::path& path) const {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    json j = {{"command", command_},     {"config", config_},       {"tool_version", kToolVersion},
              {"started_at", started_at_}, {"wall_clock_s", elapsed}, {"outputs", outputs_}};
    j["dataset_hash"] = dataset_hash_ ? json(*dataset_hash_) : json(nullptr);
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    detail::write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  json config_;
  std::chrono::steady_clock::time_point started_;
  std::string started_at_;
  std::optional<std::string> dataset_hash_;
  std::vector<std::string> outputs_;
  json extra_ = json::object();
};

fs::path manifest_for(const fs::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

std::string rate_text(const RateStats& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f (n=%zu)", s.mean, s.std_error, s.count);
  return buf;
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return Split::kUnassigned;  // "all"
}

std::vector<std::size_t> split_indices(const Dataset& d, const std::string& which) {
  if (which == "all" || !d.is_split()) {
    std::vector<std::size_t> all(d.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  return d.indices(parse_split(which));
}

void apply_hw_overrides(HardwareModel& hw, const std::vector<std::string>& overrides) {
  json j = hw;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--hw", "expected key=value, got '" + o + "'");
    const auto key = o.substr(0, eq);
    if (!j.contains(key)) throw CLI::ValidationError("--hw", "unknown hardware constant '" + key + "'");
    try {
      j[key] = std::stod(o.substr(eq + 1));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--hw", "bad value in '" + o + "'");
    }
  }
  hw = j.get<HardwareModel>();
  if (j["activation_bits"].get<double>() != hw.activation_bits) {
    throw CLI::ValidationError("--hw", "activation_bits must be an integer");
  }
  hw.validate();
}

json breakdown_json(const ArchConfig& arch, const QuantConfig& q, const LayerResources& res,
                    const EnergyBreakdown& e, const HardwareModel& hw) {
  json layers = json::array();
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    layers.push_back({{"layer", kLayerNames[l]},
                      {"bits", q.bits[l]},
                      {"n_c", res.layers[l].n_c},
                      {"n_w", res.layers[l].n_w},
                      {"n_a", res.layers[l].n_a},
                      {"e_c_uj", e.per_layer[l].e_c},
                      {"e_w_uj", e.per_layer[l].e_w},
                      {"e_a_uj", e.per_layer[l].e_a}});
  }
  return {{"arch", arch}, {"bits", q}, {"hardware", hw}, {"layers", layers}, {"e_c_uj", e.e_c},
          {"e_w_uj", e.e_w},   {"e_a_uj", e.e_a}, {"total_uj", e.total}};
}

struct SearchPreset {
  SearchSpace space;
  TrainConfig pretrain;
  TrainConfig finetune;
};

SearchPreset search_preset(const std::string& name, int n_t, int n_u) {
  SearchPreset p;
  if (name == "full") {
    p.space = SearchSpace::full(n_t, n_u);
    p.pretrain.max_epochs = 200;
    p.pretrain.patience = 20;
    p.finetune.max_epochs = 50;
    p.finetune.patience = 10;
  } else {
    p.space = SearchSpace::smoke(n_t, n_u);
    p.pretrain.max_epochs = 12;
    p.pretrain.patience = 4;
    p.finetune.max_epochs = 3;
    p.finetune.patience = 2;
  }
  p.pretrain.batch_size = 100;
  p.finetune.batch_size = 100;
  p.pretrain.resampled_scenarios = 2000;
  p.finetune.resampled_scenarios = 1000;
  return p;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-aware DNN precoder workbench for multi-user massive MIMO", "mmpc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads for search")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--verbose", g.verbose, "Progress on stderr");
  auto log = [&](const std::string& msg) {
    if (g.verbose) err << msg << std::endl;
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic channel dataset");
  std::string gen_preset = "nlos";
  std::size_t gen_scenarios = 1000;
  double gen_snr = 15.0;
  double gen_pmax = 1.0;
  std::size_t gen_users = 4;
  fs::path gen_out;
  gen->add_option("--preset", gen_preset, "Propagation preset")->check(CLI::IsMember({"los", "nlos"}))->capture_default_str();
  gen->add_option("--scenarios", gen_scenarios, "Number of scenarios")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--snr-db", gen_snr, "Target SNR for the noise calibration")->capture_default_str();
  gen->add_option("--p-max", gen_pmax, "Transmit power budget (W)")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--users", gen_users, "Users per scenario")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a DNN precoder (FP, or QAT with --bits and --init)");
  fs::path tr_dataset, tr_init, tr_out;
  int tr_c_out = 64, tr_d_fcl = 1024;
  std::string tr_bits;
  TrainConfig tr_cfg;
  bool tr_off_grid = false;
  tr->add_option("--dataset", tr_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  tr->add_option("--c-out", tr_c_out, "Conv output channels")->capture_default_str();
  tr->add_option("--d-fcl", tr_d_fcl, "Hidden layer width")->capture_default_str();
  tr->add_option("--bits", tr_bits, "Per-layer bit widths a,b,c,d");
  tr->add_option("--init", tr_init, "Pretrained checkpoint to fine-tune")->check(CLI::ExistingFile);
  tr->add_option("--out", tr_out, "Output checkpoint")->required();
  tr->add_option("--epochs", tr_cfg.max_epochs, "Maximum epochs")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--patience", tr_cfg.patience, "Early-stopping patience (0 = off)")->capture_default_str();
  tr->add_option("--batch-size", tr_cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate")->capture_default_str();
  tr->add_option("--dropout", tr_cfg.dropout_rate, "Dropout rate")->capture_default_str();
  tr->add_option("--resample", tr_cfg.resampled_scenarios,
                 "Scenarios per epoch recombined from train users (0 = plain epochs)")
      ->capture_default_str();
  tr->add_flag("--allow-off-grid", tr_off_grid, "Accept architectures outside the NAS grid");

  // baseline-eval
  auto* be = app.add_subcommand("baseline-eval", "Evaluate ZF or WMMSE on a dataset");
  fs::path be_dataset, be_report, be_summary;
  std::string be_method, be_split = "test";
  WmmseOptions be_opts;
  be->add_option("--dataset", be_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  be->add_option("--method", be_method, "Baseline")->required()->check(CLI::IsMember({"zf", "wmmse"}));
  be->add_option("--epsilon", be_opts.epsilon, "WMMSE stopping tolerance on the sum rate")->capture_default_str();
  be->add_option("--max-iter", be_opts.max_iter, "WMMSE iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--split", be_split, "Scenarios to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  be->add_option("--report", be_report, "Per-scenario CSV output");
  be->add_option("--summary", be_summary, "Append the aggregate row to this baselines CSV");

  // energy
  auto* en = app.add_subcommand("energy", "Inference energy of a DNN configuration or a baseline");
  int en_c_out = 64, en_d_fcl = 1024, en_nt = 64, en_nu = 4;
  std::string en_bits = "16,16,16,16", en_baseline;
  std::optional<double> en_iters;
  std::vector<std::string> en_hw;
  en->add_option("--c-out", en_c_out, "Conv output channels")->capture_default_str();
  en->add_option("--d-fcl", en_d_fcl, "Hidden layer width")->capture_default_str();
  en->add_option("--bits", en_bits, "Per-layer bit widths a,b,c,d")->capture_default_str();
  en->add_option("--nt", en_nt, "Antennas")->check(CLI::PositiveNumber)->capture_default_str();
  en->add_option("--nu", en_nu, "Users")->check(CLI::PositiveNumber)->capture_default_str();
  en->add_option("--baseline", en_baseline, "Baseline instead of a DNN")->check(CLI::IsMember({"zf", "wmmse"}));
  en->add_option("--iters", en_iters, "WMMSE iterations (may be fractional)")->check(CLI::NonNegativeNumber);
  en->add_option("--hw", en_hw, "Hardware constant override key=value (repeatable)");

  // search
  auto* se = app.add_subcommand("search", "Exhaustive architecture / bit-width search");
  fs::path se_dataset, se_out, se_ckpt;
  std::string se_preset = "smoke";
  std::optional<std::size_t> se_seeds, se_stop_after, se_pre_epochs, se_ft_epochs;
  std::vector<std::string> se_hw;
  se->add_option("--dataset", se_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  se->add_option("--preset", se_preset, "Search space")->check(CLI::IsMember({"smoke", "full"}))->capture_default_str();
  se->add_option("--seeds", se_seeds, "Number of seeds (first seed = --seed)")->check(CLI::PositiveNumber);
  se->add_option("--out", se_out, "Output directory")->required();
  se->add_option("--checkpoint-dir", se_ckpt, "Checkpoint directory (default OUT/checkpoints)");
  se->add_option("--pretrain-epochs", se_pre_epochs, "Override pretraining epochs")->check(CLI::PositiveNumber);
  se->add_option("--finetune-epochs", se_ft_epochs, "Override fine-tuning epochs")->check(CLI::PositiveNumber);
  se->add_option("--stop-after", se_stop_after, "Stop after N newly computed candidates")->check(CLI::PositiveNumber);
  se->add_option("--hw", se_hw, "Hardware constant override key=value (repeatable)");

  // pareto
  auto* pa = app.add_subcommand("pareto", "Extract the Pareto front of a results CSV");
  fs::path pa_in, pa_out;
  bool pa_per_arch = false;
  pa->add_option("--in", pa_in, "results.csv")->required();
  pa->add_option("--out", pa_out, "Front CSV (default: stdout)");
  pa->add_flag("--per-arch", pa_per_arch, "One front per architecture");

  // plot-data
  auto* pd = app.add_subcommand("plot-data", "Write gnuplot data from a results CSV");
  fs::path pd_in, pd_out;
  pd->add_option("--in", pd_in, "results.csv")->required();
  pd->add_option("--out", pd_out, "Data file")->required();

  // report
  auto* rp = app.add_subcommand("report", "Markdown report and plot data");
  fs::path rp_results, rp_baselines, rp_out;
  rp->add_option("--results", rp_results, "results.csv")->required();
  rp->add_option("--baselines", rp_baselines, "Baselines CSV");
  rp->add_option("--out", rp_out, "Output directory")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  if (args.empty()) {
    out << app.help();
    return 1;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  const json echo = [&] {
    json j = json::object();
    for (const auto* opt : app.get_options()) {
      if (opt->count() > 0) j[opt->get_name()] = opt->results();
    }
    for (const auto* sub : app.get_subcommands()) {
      for (const auto* opt : sub->get_options()) {
        if (opt->count() > 0) j[opt->get_name()] = opt->results();
      }
    }
    return j;
  }();

  try {
    if (gen->parsed()) {
      Manifest m("gen-data", echo);
      auto cfg = gen_preset == "los" ? los_preset() : nlos_preset();
      cfg.n_scenarios = gen_scenarios;
      cfg.n_users = gen_users;
      cfg.rng_seed = g.seed;
      auto ds = generate_channels(cfg);
      calibrate_noise(ds, gen_snr, gen_pmax);
      split_dataset(ds, SplitFractions{}, g.seed);
      save_dataset(gen_out, ds);
      m.output(gen_out);
      m.dataset(gen_out);
      m.extra("sigma2", ds.sigma2);
      m.write(manifest_for(gen_out));
      out << "wrote " << ds.size() << " scenarios (" << ds.n_users() << " users, " << ds.n_antennas()
          << " antennas, sigma2 " << ds.sigma2 << ") to " << gen_out.string() << "\n";
      return 0;
    }

    if (tr->parsed()) {
      Manifest m("train", echo);
      const auto ds = load_dataset(tr_dataset);
      m.dataset(tr_dataset);
      ArchConfig arch{tr_c_out, tr_d_fcl, static_cast<int>(ds.n_antennas()), static_cast<int>(ds.n_users())};
      try {
        arch.validate(!tr_off_grid);
      } catch (const Error& e) {
        err << e.what() << "\n";
        return 1;
      }
      std::optional<QuantConfig> quant;
      if (!tr_bits.empty()) {
        try {
          quant = QuantConfig::parse(tr_bits);
        } catch (const Error& e) {
          err << e.what() << "\n";
          return 1;
        }
        if (tr_init.empty()) {
          err << "--bits requires --init (a pretrained FP checkpoint)\n";
          return 1;
        }
      }
      std::optional<Checkpoint> init;
      if (!tr_init.empty()) init = load_checkpoint(tr_init);
      tr_cfg.seed = g.seed;
      tr_cfg.on_epoch = [&](const EpochRecord& r) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "epoch %zu: train loss %.4f, val rate %.4f", r.epoch, r.train_loss, r.val_rate);
        log(buf);
      };
      log("training " + arch.tag() + (quant ? " bits " + quant->to_string() : std::string(" FP")));
      const auto result = train(ds, arch, quant, tr_cfg, init ? &init->params : nullptr);
      save_checkpoint(tr_out, {result.params, result.quant});
      const auto test = ds.subset(Split::kTest);
      const auto stats = evaluate(result.params, result.quant ? &*result.quant : nullptr, test, ds.sigma2, ds.p_max);
      json history = json::array();
      for (const auto& h : result.history) {
        history.push_back({{"epoch", h.epoch},
                           {"train_loss", std::isnan(h.train_loss) ? json(nullptr) : json(h.train_loss)},
                           {"val_rate", h.val_rate}});
      }
      m.output(tr_out);
      m.extra("history", history);
      m.extra("best_epoch", result.best_epoch);
      m.extra("test_rate", {{"mean", stats.mean}, {"stderr", stats.std_error}, {"count", stats.count}});
      m.write(manifest_for(tr_out));
      out << "best epoch " << result.best_epoch << ", val rate " << result.best_val_rate << ", test rate "
          << rate_text(stats) << "\n";
      return 0;
    }

    if (be->parsed()) {
      Manifest m("baseline-eval", echo);
      const auto ds = load_dataset(be_dataset);
      m.dataset(be_dataset);
      if (!ds.has_noise()) throw Error("dataset noise level is not calibrated");
      const auto idx = split_indices(ds, be_split);
      if (idx.empty()) throw Error("empty split");
      std::vector<double> rates, iters;
      std::ostringstream csv;
      csv << "scenario,rate,iterations\n";
      for (auto i : idx) {
        const auto& h = ds.scenarios[i];
        double rate;
        double it = 0.0;
        if (be_method == "zf") {
          rate = sum_rate(h, zf_precoder(h, ds.p_max), ds.sigma2);
        } else {
          const auto rep = wmmse_precoder(h, ds.p_max, ds.sigma2, be_opts);
          rate = sum_rate(h, rep.precoder, ds.sigma2);
          it = static_cast<double>(rep.iterations);
        }
        rates.push_back(rate);
        iters.push_back(it);
        csv << i << ',' << std::setprecision(17) << rate << ',' << it << '\n';
      }
      const auto stats = mean_and_stderr(rates);
      const auto it_stats = mean_and_stderr(iters);
      const double n_t = static_cast<double>(ds.n_antennas());
      const double n_u = static_cast<double>(ds.n_users());
      BaselineRow row;
      row.method = be_method;
      row.epsilon = be_method == "wmmse" ? be_opts.epsilon : 0.0;
      row.scenarios = idx.size();
      row.mean_rate = stats.mean;
      row.std_error = stats.std_error;
      row.mean_iterations = it_stats.mean;
      row.energy_uj = baseline_energy(
          be_method == "zf" ? zf_mult_count(n_t, n_u) : wmmse_mult_count(n_t, n_u, it_stats.mean));
      row.efficiency = energy_efficiency(row.mean_rate, row.energy_uj);
      if (!be_report.empty()) {
        detail::write_file_atomic(be_report, csv.str());
        m.output(be_report);
      }
      if (!be_summary.empty()) {
        append_baseline_csv(be_summary, row);
        m.output(be_summary);
      }
      m.extra("mean_rate", stats.mean);
      m.extra("stderr", stats.std_error);
      m.extra("mean_iterations", it_stats.mean);
      if (!be_report.empty()) m.write(manifest_for(be_report));
      else if (!be_summary.empty()) m.write(manifest_for(be_summary));
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: rate %s, mean iterations %.2f, energy %.4f μJ\n", be_method.c_str(),
                    rate_text(stats).c_str(), it_stats.mean, row.energy_uj);
      out << buf;
      return 0;
    }

    if (en->parsed()) {
      HardwareModel hw;
      apply_hw_overrides(hw, en_hw);
      if (!en_baseline.empty()) {
        double count;
        if (en_baseline == "zf") {
          count = zf_mult_count(en_nt, en_nu);
        } else {
          if (!en_iters) {
            err << "--baseline wmmse requires --iters\n";
            return 1;
          }
          count = wmmse_mult_count(en_nt, en_nu, *en_iters);
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f μJ\n", baseline_energy(count, hw));
        out << buf;
        return 0;
      }
      QuantConfig q;
      ArchConfig arch{en_c_out, en_d_fcl, en_nt, en_nu};
      try {
        q = QuantConfig::parse(en_bits);
        arch.validate();
      } catch (const Error& e) {
        err << e.what() << "\n";
        return 1;
      }
      const auto res = count_resources(arch);
      out << breakdown_json(arch, q, res, dnn_energy(res, q, hw), hw).dump(2) << "\n";
      return 0;
    }

    if (se->parsed()) {
      Manifest m("search", echo);
      const auto ds = load_dataset(se_dataset);
      m.dataset(se_dataset);
      auto preset = search_preset(se_preset, static_cast<int>(ds.n_antennas()), static_cast<int>(ds.n_users()));
      if (se_seeds) {
        preset.space.seeds.clear();
        for (std::size_t s = 0; s < *se_seeds; ++s) preset.space.seeds.push_back(g.seed + s);
      } else {
        for (auto& s : preset.space.seeds) s += g.seed;
      }
      if (se_pre_epochs) preset.pretrain.max_epochs = *se_pre_epochs;
      if (se_ft_epochs) preset.finetune.max_epochs = *se_ft_epochs;
      SearchOptions opts;
      opts.pretrain = preset.pretrain;
      opts.finetune = preset.finetune;
      opts.jobs = g.jobs;
      apply_hw_overrides(opts.hardware, se_hw);
      if (const char* env = std::getenv("MMPC_CHECKPOINT_DIR"); env && *env) {
        opts.checkpoint_dir = env;
      } else {
        opts.checkpoint_dir = se_ckpt.empty() ? se_out / "checkpoints" : se_ckpt;
      }
      opts.stop_after = se_stop_after.value_or(0);
      opts.log = log;
      fs::create_directories(se_out);
      const auto outcome = run_search(preset.space, ds, opts);
      out << "computed " << outcome.computed << ", reused " << outcome.reused << " per-seed candidates\n";
      if (!outcome.complete) {
        out << "search interrupted; rerun the same command to resume\n";
        return 0;
      }
      const auto rows = to_rows(outcome.results);
      const auto results_path = se_out / "results.csv";
      const auto front_path = se_out / "front.csv";
      write_results_csv(results_path, rows);
      write_results_csv(front_path, pareto_rows(rows, false));
      std::size_t failed = 0;
      for (const auto& c : outcome.results) failed += c.status == CandidateStatus::kFailed;
      m.output(results_path);
      m.output(front_path);
      m.extra("checkpoint_dir", opts.checkpoint_dir.string());
      m.extra("candidates", outcome.results.size());
      m.extra("failed", failed);
      m.write(se_out / "manifest.json");
      out << rows.size() << " candidates (" << failed << " failed) written to " << results_path.string() << "\n";
      return 0;
    }

    if (pa->parsed()) {
      const auto rows = read_results_csv(pa_in);
      const auto front = pareto_rows(rows, pa_per_arch);
      if (pa_out.empty()) {
        write_results_csv(out, front);
        return 0;
      }
      Manifest m("pareto", echo);
      write_results_csv(pa_out, front);
      m.output(pa_out);
      m.write(manifest_for(pa_out));
      out << front.size() << " front points written to " << pa_out.string() << "\n";
      return 0;
    }

    if (pd->parsed()) {
      Manifest m("plot-data", echo);
      write_plot_data(pd_out, read_results_csv(pd_in));
      m.output(pd_out);
      m.write(manifest_for(pd_out));
      return 0;
    }

    if (rp->parsed()) {
      Manifest m("report", echo);
      const auto rows = read_results_csv(rp_results);
      std::vector<BaselineRow> baselines;
      if (!rp_baselines.empty()) baselines = read_baseline_csv(rp_baselines);
      const auto files = write_report(rows, baselines, rp_out);
      m.output(files.markdown);
      for (const auto& f : files.data) m.output(f);
      m.write(rp_out / "manifest.json");
      out << "report written to " << files.markdown.string() << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace mmpc
