#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmpc {

using cdouble = std::complex<double>;

// Row u holds h_u^H, so (H * W)(u, j) = h_u^H w_j.
using ChannelMatrix = Eigen::MatrixXcd;

// Uniform planar array. Element (m, n) is in row m (elevation axis) and
// column n (azimuth axis); it maps to vector index n * rows + m.
struct ArrayGeometry {
  std::size_t rows = 8;
  std::size_t cols = 8;
  double spacing = 0.5;          // wavelengths
  double carrier_freq_hz = 2e9;  // metadata only

  std::size_t n_elements() const { return rows * cols; }
  void validate() const;

  bool operator==(const ArrayGeometry&) const = default;
};

// Site-specific multipath model. A site is a fixed set of scatterers plus a
// catalog of user positions on rings around the base station; each catalog
// position has a deterministic channel. Scenarios draw n_users distinct
// positions from the catalog.
struct ScenarioConfig {
  ArrayGeometry geometry;
  std::size_t n_users = 4;
  std::size_t n_scenarios = 1000;
  std::size_t min_paths = 3;  // scattered paths per user
  std::size_t max_paths = 6;
  bool los = false;
  double angle_spread_deg = 3.0;
  double path_gain_decay_db = 3.0;
  double los_power_fraction = 0.8;
  std::uint64_t rng_seed = 1;

  // Site layout.
  std::size_t n_scatterers = 6;
  double sector_deg = 120.0;
  double azimuth_step_deg = 20.0;
  double min_distance_m = 50.0;
  double max_distance_m = 350.0;
  double ring_step_m = 50.0;
  double bs_height_m = 20.0;
  double max_scatterer_height_m = 30.0;

  void validate() const;
  std::size_t n_positions() const;

  bool operator==(const ScenarioConfig&) const = default;
};

ScenarioConfig los_preset();
ScenarioConfig nlos_preset();

enum class Split : std::uint8_t { kUnassigned = 0, kTrain = 1, kVal = 2, kTest = 3 };

struct Dataset {
  std::vector<ChannelMatrix> scenarios;
  double sigma2 = 0.0;  // 0 until calibrate_noise
  double p_max = 1.0;
  std::optional<ScenarioConfig> config;
  std::vector<Split> splits;  // empty, or one tag per scenario

  std::size_t size() const { return scenarios.size(); }
  std::size_t n_users() const;
  std::size_t n_antennas() const;
  bool is_split() const { return !splits.empty(); }
  bool has_noise() const { return sigma2 > 0.0; }

  // Indices tagged with `split`; an unsplit dataset returns every index.
  std::vector<std::size_t> indices(Split split) const;
  std::vector<ChannelMatrix> subset(Split split) const;

  bool operator==(const Dataset&) const;
};

// Independent generator for (seed, stream, index); used so that scenario i
// never depends on how many scenarios were drawn before it.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

Eigen::VectorXcd upa_steering(const ArrayGeometry& geometry, double azimuth, double elevation);

// Per-position channels of the site (the catalog scenarios draw from).
std::vector<Eigen::VectorXcd> site_catalog(const ScenarioConfig& config);

// Dataset with sigma2 unset and no split. Entries are rounded to float
// precision so the on-disk format round-trips exactly.
Dataset generate_channels(const ScenarioConfig& config);

// sigma2 = p_max * mean ||h_u||^2 / 10^(snr/10); stores sigma2 and p_max.
double calibrate_noise(Dataset& dataset, double target_snr_db, double p_max);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

void split_dataset(Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

// 64-bit FNV-1a over the file bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace mmpc
