#pragma once

// JSON mappings for the configuration structs stored in file headers,
// checkpoints and manifests.

#include <json.hpp>

#include "mmpc/channel.hpp"
#include "mmpc/energy.hpp"
#include "mmpc/net.hpp"
#include "mmpc/quant.hpp"

namespace mmpc {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ArrayGeometry, rows, cols, spacing, carrier_freq_hz)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, geometry, n_users, n_scenarios, min_paths,
                                                max_paths, los, angle_spread_deg, path_gain_decay_db,
                                                los_power_fraction, rng_seed, n_scatterers, sector_deg,
                                                azimuth_step_deg, min_distance_m, max_distance_m,
                                                ring_step_m, bs_height_m, max_scatterer_height_m)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ArchConfig, c_out, d_fcl, n_t, n_u)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, batch_size, max_epochs, patience,
                                                dropout_rate, seed, resampled_scenarios)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HardwareModel, alpha, beta, p_base, mem_ratio, buf_ratio,
                                                activation_bits)

inline void to_json(nlohmann::json& j, const QuantConfig& q) { j = q.bits; }
inline void from_json(const nlohmann::json& j, QuantConfig& q) { j.get_to(q.bits); }

}  // namespace mmpc
