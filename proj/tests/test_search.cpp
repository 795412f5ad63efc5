#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mmpc/channel.hpp"
#include "mmpc/error.hpp"
#include "mmpc/search.hpp"

using namespace mmpc;
namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> brute_force_front(const std::vector<ParetoPoint>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].x >= pts[i].x && pts[j].y >= pts[i].y && (pts[j].x > pts[i].x || pts[j].y > pts[i].y);
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<ParetoPoint> xy(std::initializer_list<std::pair<double, double>> v) {
  std::vector<ParetoPoint> out;
  for (auto [x, y] : v) out.push_back({x, y});
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset tiny_dataset() {
  auto cfg = nlos_preset();
  cfg.geometry.rows = 4;
  cfg.geometry.cols = 4;
  cfg.n_users = 2;
  cfg.n_scenarios = 100;
  auto d = generate_channels(cfg);
  calibrate_noise(d, 15.0, 1.0);
  split_dataset(d, {}, 1);
  return d;
}

SearchSpace tiny_space() {
  SearchSpace s;
  s.archs = {ArchConfig{8, 32, 16, 2}};
  s.quants = {QuantConfig::uniform(2), QuantConfig::uniform(4), QuantConfig{{16, 2, 8, 4}}, QuantConfig::uniform(16)};
  s.seeds = {0, 1};
  return s;
}

SearchOptions tiny_options(const fs::path& dir, std::size_t jobs = 1) {
  SearchOptions o;
  o.pretrain.max_epochs = 3;
  o.pretrain.batch_size = 20;
  o.pretrain.patience = 0;
  o.finetune = o.pretrain;
  o.finetune.max_epochs = 2;
  o.checkpoint_dir = dir;
  o.jobs = jobs;
  return o;
}

std::string csv_of(const SearchOutcome& out) {
  std::ostringstream s;
  const auto rows = to_rows(out.results);
  write_results_csv(s, rows);
  return s.str();
}

}  // namespace

TEST_CASE("pareto front hand examples") {
  const auto a = xy({{1, 2}, {2, 1}, {1.5, 1.5}});
  CHECK(pareto_front(std::span<const ParetoPoint>(a)) == std::vector<std::size_t>{1, 2, 0});
  const auto b = xy({{1, 1}, {2, 2}});
  CHECK(pareto_front(std::span<const ParetoPoint>(b)) == std::vector<std::size_t>{1});
  const auto ties = xy({{1, 1}, {1, 1}, {0.5, 1}});
  CHECK(pareto_front(std::span<const ParetoPoint>(ties)) == std::vector<std::size_t>{0, 1});
  CHECK(pareto_front(std::span<const ParetoPoint>{}).empty());
  CHECK(dominates({1, 2}, {1, 1}));
  CHECK_FALSE(dominates({1, 1}, {1, 1}));
}

TEST_CASE("pareto front equals the brute-force oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ParetoPoint> pts(200);
    // Coarse values force ties on both axes.
    std::uniform_int_distribution<int> coarse(0, 30);
    std::uniform_real_distribution<double> fine(0.0, 1.0);
    for (auto& p : pts) {
      if (trial % 2 == 0) {
        p = {static_cast<double>(coarse(rng)), static_cast<double>(coarse(rng))};
      } else {
        p = {fine(rng), fine(rng)};
      }
    }
    auto got = pareto_front(std::span<const ParetoPoint>(pts));
    auto want = brute_force_front(pts);
    for (std::size_t k = 1; k < got.size(); ++k) {
      CHECK(pts[got[k - 1]].y <= pts[got[k]].y);
      // Distinct rates come with strictly lower efficiency.
      if (pts[got[k - 1]].y < pts[got[k]].y) CHECK(pts[got[k - 1]].x > pts[got[k]].x);
    }
    std::sort(got.begin(), got.end());
    CHECK(got == want);
  }
}

TEST_CASE("seed aggregation examples") {
  const double one[] = {18.9};
  CHECK(aggregate_seeds(one).mean == 18.9);
  CHECK(aggregate_seeds(one).std_error == 0.0);
  const double flat[] = {1, 1, 1, 1};
  CHECK(aggregate_seeds(flat).mean == 1.0);
  CHECK(aggregate_seeds(flat).std_error == 0.0);
  const double four[] = {18.8, 18.9, 19.0, 18.9};
  CHECK(aggregate_seeds(four).mean == doctest::Approx(18.9).epsilon(1e-14));
  CHECK(aggregate_seeds(four).std_error == doctest::Approx(0.0408).epsilon(1e-3));
  CHECK_THROWS_AS(aggregate_seeds(std::span<const double>{}), Error);
}

TEST_CASE("search space presets") {
  const auto full = SearchSpace::full();
  CHECK(full.candidate_count() == 2048);
  CHECK(full.seeds.size() == 4);
  const auto smoke = SearchSpace::smoke();
  CHECK(smoke.candidate_count() == 32);
  CHECK(smoke.seeds.size() == 2);
  SearchSpace empty;
  CHECK_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("trade-off gains") {
  const auto single = xy({{3, 5}});
  const auto g = tradeoff_gains(single, single);
  CHECK(g.efficiency_gain_at_rate == 1.0);
  CHECK(g.rate_gain_at_efficiency == 1.0);

  const auto front = xy({{10, 5}, {4, 6}, {1, 8}});
  const auto ref = xy({{2, 6}});
  const auto r = tradeoff_gains(front, ref);
  CHECK(r.efficiency_gain_at_rate == doctest::Approx(2.0));
  CHECK(r.rate_gain_at_efficiency == doctest::Approx(1.0));
  const auto low = xy({{0.5, 4}});
  const auto r2 = tradeoff_gains(front, low);
  CHECK(r2.efficiency_gain_at_rate == doctest::Approx(20.0));
  CHECK(r2.rate_gain_at_efficiency == doctest::Approx(2.0));
}

TEST_CASE("results CSV round trip and schema checks") {
  const auto dir = fresh_dir("mmpc_test_csv");
  ResultRow r;
  r.c_out = 8;
  r.d_fcl = 512;
  r.quant = QuantConfig{{16, 2, 8, 4}};
  r.seed_count = 2;
  r.mean_rate = 1.0 / 3.0;
  r.std_error = 1e-17;
  r.e_c_uj = 0.1;
  r.e_w_uj = 0.2;
  r.e_a_uj = 0.30000000000000004;
  r.e_total_uj = 0.6;
  r.efficiency = r.mean_rate / r.e_total_uj;
  r.pareto = true;
  const std::vector<ResultRow> rows = {r, r};
  write_results_csv(dir / "r.csv", rows);
  const auto back = read_results_csv(dir / "r.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].quant == r.quant);
  CHECK(back[0].mean_rate == r.mean_rate);
  CHECK(back[0].e_a_uj == r.e_a_uj);
  CHECK(back[0].efficiency == r.efficiency);
  CHECK(back[0].pareto);

  std::ofstream(dir / "bad.csv") << "c_out,d_fcl\n1,2\n";
  CHECK_THROWS_AS(read_results_csv(dir / "bad.csv"), Error);
  CHECK_THROWS_AS(read_results_csv(dir / "missing.csv"), Error);
}

TEST_CASE("per-architecture fronts") {
  std::vector<ResultRow> rows(4);
  rows[0] = {8, 512, {}, 1, 2.0, 0, 0, 0, 0, 1, 2.0, false};
  rows[1] = {8, 512, {}, 1, 1.0, 0, 0, 0, 0, 1, 1.0, false};
  rows[2] = {16, 512, {}, 1, 1.5, 0, 0, 0, 0, 1, 1.5, false};
  rows[3] = {16, 512, {}, 1, 0.5, 0, 0, 0, 0, 1, 0.5, false};
  CHECK(pareto_rows(rows, false).size() == 1);
  const auto per = pareto_rows(rows, true);
  REQUIRE(per.size() == 2);
  CHECK(per[0].c_out == 8);
  CHECK(per[1].c_out == 16);
  CHECK(per[1].mean_rate == 1.5);
}

TEST_CASE("reduced search: bookkeeping, resume and parallelism") {
  const auto d = tiny_dataset();
  const auto space = tiny_space();

  const auto dir_a = fresh_dir("mmpc_test_search_a");
  const auto full = run_search(space, d, tiny_options(dir_a));
  CHECK(full.complete);
  CHECK(full.computed == 8);
  REQUIRE(full.results.size() == 4);
  for (const auto& c : full.results) {
    CHECK(c.seeds.size() == 2);
    CHECK(c.status == CandidateStatus::kComplete);
    CHECK(c.std_error >= 0.0);
    CHECK(c.efficiency == c.mean_rate / c.energy.total);
    // Energy agrees with an independent recomputation.
    CHECK(c.energy.total == dnn_energy(count_resources(c.arch), c.quant).total);
  }
  const std::string reference = csv_of(full);

  // A second call reuses everything.
  const auto again = run_search(space, d, tiny_options(dir_a));
  CHECK(again.computed == 0);
  CHECK(again.reused == 8);
  CHECK(csv_of(again) == reference);

  // Interrupted after three candidates, then resumed.
  const auto dir_b = fresh_dir("mmpc_test_search_b");
  auto opt = tiny_options(dir_b);
  opt.stop_after = 3;
  const auto partial = run_search(space, d, opt);
  CHECK_FALSE(partial.complete);
  CHECK(partial.computed == 3);
  opt.stop_after = 0;
  const auto resumed = run_search(space, d, opt);
  CHECK(resumed.complete);
  CHECK(resumed.reused == 3);
  CHECK(csv_of(resumed) == reference);

  // Two workers give the same results.
  const auto dir_c = fresh_dir("mmpc_test_search_c");
  CHECK(csv_of(run_search(space, d, tiny_options(dir_c, 2))) == reference);

  // A directory from a different configuration is refused.
  auto other = tiny_options(dir_a);
  other.finetune.max_epochs = 5;
  CHECK_THROWS_AS(run_search(space, d, other), Error);
}

TEST_CASE("a corrupt candidate record is recomputed") {
  const auto d = tiny_dataset();
  auto space = tiny_space();
  space.quants.resize(1);
  space.seeds = {0};
  const auto dir = fresh_dir("mmpc_test_search_corrupt");
  const auto first = run_search(space, d, tiny_options(dir));
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("cand_", 0) == 0) std::ofstream(e.path()) << "{";
  }
  const auto second = run_search(space, d, tiny_options(dir));
  CHECK(second.computed == 1);
  CHECK(csv_of(second) == csv_of(first));
}

TEST_CASE("search rejects unusable inputs") {
  auto d = tiny_dataset();
  const auto space = tiny_space();
  auto opt = tiny_options(fs::path{});
  CHECK_THROWS_AS(run_search(space, d, opt), Error);
  d.splits.clear();
  CHECK_THROWS_AS(run_search(space, d, tiny_options(fresh_dir("mmpc_test_search_e"))), Error);
}
