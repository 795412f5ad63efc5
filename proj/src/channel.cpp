#include "mmpc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mmpc/error.hpp"

namespace mmpc {

namespace {

constexpr std::uint64_t kSiteStream = 0;
constexpr std::uint64_t kPositionStream = 1;
constexpr std::uint64_t kScenarioStream = 2;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Scatterer {
  double x;
  double y;
  double height;
  double azimuth;
  double elevation;
};

std::vector<Scatterer> site_scatterers(const ScenarioConfig& config) {
  auto rng = substream(config.rng_seed, kSiteStream, 0);
  std::uniform_real_distribution<double> radius(0.8 * config.min_distance_m,
                                                1.15 * config.max_distance_m);
  std::uniform_real_distribution<double> azimuth(-deg2rad(config.sector_deg) / 2,
                                                 deg2rad(config.sector_deg) / 2);
  std::uniform_real_distribution<double> height(0.0, config.max_scatterer_height_m);
  std::vector<Scatterer> out;
  out.reserve(config.n_scatterers);
  for (std::size_t i = 0; i < config.n_scatterers; ++i) {
    const double r = radius(rng);
    const double az = azimuth(rng);
    const double h = height(rng);
    out.push_back({r * std::cos(az), r * std::sin(az), h, az,
                   std::atan2(h - config.bs_height_m, r)});
  }
  return out;
}

struct Position {
  double distance;
  double azimuth;
};

std::vector<Position> site_positions(const ScenarioConfig& config) {
  std::vector<Position> out;
  const double half = config.sector_deg / 2;
  for (double r = config.min_distance_m; r <= config.max_distance_m + 1e-9; r += config.ring_step_m) {
    for (double a = -half; a <= half + 1e-9; a += config.azimuth_step_deg) {
      out.push_back({r, deg2rad(a)});
    }
  }
  return out;
}

}  // namespace

void ArrayGeometry::validate() const {
  if (rows == 0 || cols == 0) throw Error("array geometry needs at least one row and column");
  if (!(spacing > 0.0)) throw Error("array spacing must be positive");
}

void ScenarioConfig::validate() const {
  geometry.validate();
  if (n_users == 0) throw Error("n_users must be >= 1");
  if (min_paths == 0 || max_paths < min_paths) throw Error("invalid paths_per_user range");
  if (n_scatterers < max_paths) throw Error("n_scatterers must cover max_paths");
  if (!(los_power_fraction > 0.0 && los_power_fraction < 1.0)) {
    throw Error("los_power_fraction must lie in (0, 1)");
  }
  if (angle_spread_deg < 0.0) throw Error("angle spread must be non-negative");
  if (!(sector_deg > 0.0 && azimuth_step_deg > 0.0 && ring_step_m > 0.0)) {
    throw Error("invalid site layout");
  }
  if (!(min_distance_m > 0.0 && max_distance_m >= min_distance_m)) {
    throw Error("invalid distance range");
  }
  if (n_positions() < n_users) throw Error("site has fewer positions than users per scenario");
}

std::size_t ScenarioConfig::n_positions() const { return site_positions(*this).size(); }

ScenarioConfig nlos_preset() { return ScenarioConfig{}; }

ScenarioConfig los_preset() {
  ScenarioConfig config;
  config.los = true;
  return config;
}

std::size_t Dataset::n_users() const {
  return scenarios.empty() ? 0 : static_cast<std::size_t>(scenarios.front().rows());
}

std::size_t Dataset::n_antennas() const {
  return scenarios.empty() ? 0 : static_cast<std::size_t>(scenarios.front().cols());
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (splits.empty() || splits[i] == split) out.push_back(i);
  }
  return out;
}

std::vector<ChannelMatrix> Dataset::subset(Split split) const {
  std::vector<ChannelMatrix> out;
  for (auto i : indices(split)) out.push_back(scenarios[i]);
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  if (sigma2 != other.sigma2 || p_max != other.p_max || splits != other.splits) return false;
  if (config != other.config) return false;
  if (scenarios.size() != other.scenarios.size()) return false;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& a = scenarios[i];
    const auto& b = other.scenarios[i];
    if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
  }
  return true;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXcd upa_steering(const ArrayGeometry& geometry, double azimuth, double elevation) {
  const auto rows = geometry.rows;
  Eigen::VectorXcd a(static_cast<Eigen::Index>(geometry.n_elements()));
  const double k = 2.0 * std::numbers::pi * geometry.spacing;
  const double vertical = std::sin(elevation);
  const double horizontal = std::cos(elevation) * std::sin(azimuth);
  for (std::size_t n = 0; n < geometry.cols; ++n) {
    for (std::size_t m = 0; m < rows; ++m) {
      const double phase = k * (static_cast<double>(m) * vertical + static_cast<double>(n) * horizontal);
      a(static_cast<Eigen::Index>(n * rows + m)) = std::polar(1.0, phase);
    }
  }
  return a;
}

std::vector<Eigen::VectorXcd> site_catalog(const ScenarioConfig& config) {
  config.validate();
  const auto scatterers = site_scatterers(config);
  const auto positions = site_positions(config);
  const double spread = deg2rad(config.angle_spread_deg);

  std::vector<Eigen::VectorXcd> catalog;
  catalog.reserve(positions.size());
  double total_power = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& pos = positions[i];
    auto rng = substream(config.rng_seed, kPositionStream, i);
    std::uniform_int_distribution<std::size_t> n_paths(config.min_paths, config.max_paths);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t paths = n_paths(rng);

    std::vector<double> power(paths);
    for (std::size_t p = 0; p < paths; ++p) {
      power[p] = std::pow(10.0, -config.path_gain_decay_db * static_cast<double>(p) / 10.0);
    }
    const double scattered_share = config.los ? 1.0 - config.los_power_fraction : 1.0;
    const double norm = std::accumulate(power.begin(), power.end(), 0.0);
    for (auto& p : power) p *= scattered_share / norm;

    // Scattered paths leave toward the scatterers nearest to the user.
    const double ux = pos.distance * std::cos(pos.azimuth);
    const double uy = pos.distance * std::sin(pos.azimuth);
    std::vector<std::size_t> order(scatterers.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::hypot(scatterers[a].x - ux, scatterers[a].y - uy) <
             std::hypot(scatterers[b].x - ux, scatterers[b].y - uy);
    });

    auto complex_gain = [&](double p) {
      const double re = normal(rng);
      const double im = normal(rng);
      return std::sqrt(p / 2.0) * cdouble(re, im);
    };

    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(config.geometry.n_elements()));
    if (config.los) {
      const double el = -std::atan2(config.bs_height_m, pos.distance);
      h += complex_gain(config.los_power_fraction) * upa_steering(config.geometry, pos.azimuth, el);
    }
    for (std::size_t p = 0; p < paths; ++p) {
      const auto& s = scatterers[order[p]];
      const double az = s.azimuth + spread * normal(rng);
      const double el = s.elevation + spread / 3.0 * normal(rng);
      h += complex_gain(power[p]) * upa_steering(config.geometry, az, el);
    }
    total_power += h.squaredNorm();
    catalog.push_back(std::move(h));
  }

  // Site-level normalization: a uniformly drawn user has E||h||^2 = N_T.
  const double mean_power = total_power / static_cast<double>(catalog.size());
  const double scale = std::sqrt(static_cast<double>(config.geometry.n_elements()) / mean_power);
  for (auto& h : catalog) h *= scale;
  return catalog;
}

Dataset generate_channels(const ScenarioConfig& config) {
  const auto catalog = site_catalog(config);
  const auto n_t = static_cast<Eigen::Index>(config.geometry.n_elements());
  const auto n_u = static_cast<Eigen::Index>(config.n_users);

  Dataset dataset;
  dataset.config = config;
  dataset.scenarios.reserve(config.n_scenarios);
  std::vector<std::size_t> pool(catalog.size());
  for (std::size_t s = 0; s < config.n_scenarios; ++s) {
    auto rng = substream(config.rng_seed, kScenarioStream, s);
    std::iota(pool.begin(), pool.end(), 0);
    ChannelMatrix h(n_u, n_t);
    for (Eigen::Index u = 0; u < n_u; ++u) {
      // Partial Fisher-Yates: distinct positions per scenario.
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(u), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(u)], pool[pick(rng)]);
      const auto& g = catalog[pool[static_cast<std::size_t>(u)]];
      for (Eigen::Index n = 0; n < n_t; ++n) {
        const auto v = std::conj(g(n));
        h(u, n) = cdouble(static_cast<float>(v.real()), static_cast<float>(v.imag()));
      }
    }
    dataset.scenarios.push_back(std::move(h));
  }
  return dataset;
}

double calibrate_noise(Dataset& dataset, double target_snr_db, double p_max) {
  if (dataset.scenarios.empty()) throw Error("empty dataset");
  if (!(p_max > 0.0)) throw Error("p_max must be positive");
  double power = 0.0;
  std::size_t users = 0;
  for (const auto& h : dataset.scenarios) {
    power += h.squaredNorm();
    users += static_cast<std::size_t>(h.rows());
  }
  const double mean_power = power / static_cast<double>(users);
  dataset.p_max = p_max;
  dataset.sigma2 = p_max * mean_power / std::pow(10.0, target_snr_db / 10.0);
  return dataset.sigma2;
}

void split_dataset(Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0)) {
    throw Error("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw Error("split fractions must sum to 1");
  }
  const std::size_t n = dataset.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions.val * static_cast<double>(n)));
  if (n_train + n_val > n) throw Error("split fractions leave no test scenarios");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  dataset.splits.assign(n, Split::kTest);
  for (std::size_t i = 0; i < n_train; ++i) dataset.splits[order[i]] = Split::kTrain;
  for (std::size_t i = n_train; i < n_train + n_val; ++i) dataset.splits[order[i]] = Split::kVal;
}

}  // namespace mmpc
