#pragma once

#include <array>
#include <cstdint>

#include "mmpc/quant.hpp"

namespace mmpc {

// Exact per-layer operation counts of one inference.
struct LayerCount {
  std::int64_t n_c = 0;  // MACs of the linear part
  std::int64_t n_w = 0;  // weights
  std::int64_t n_a = 0;  // activation outputs
};

struct LayerResources {
  std::array<LayerCount, kNumLayers> layers{};

  LayerCount total() const;
};

// Accelerator constants. Energies are in pJ; reports are in uJ.
struct HardwareModel {
  double alpha = 0.86;     // E_MAC at 16 bits, pJ
  double beta = 1.9;       // bit-width exponent
  double p_base = 64.0;    // parallel units at 16 bits
  double mem_ratio = 2.0;  // E_M / E_MAC
  double buf_ratio = 1.0;  // E_L / E_MAC
  int activation_bits = 16;

  void validate() const;
};

struct EnergyBreakdown {
  struct Part {
    double e_c = 0.0;
    double e_w = 0.0;
    double e_a = 0.0;
  };
  std::array<Part, kNumLayers> per_layer{};
  double e_c = 0.0;  // uJ
  double e_w = 0.0;
  double e_a = 0.0;
  double total = 0.0;
};

inline constexpr double kPicoToMicro = 1e-6;

double e_mac(double q_bits, const HardwareModel& hw = {});
double e_mem(double q_bits, const HardwareModel& hw = {});
double e_buf(double q_bits, const HardwareModel& hw = {});
double parallel_units(double q_bits, const HardwareModel& hw = {});

// Compute, weight-transfer and activation-transfer energy applied layer by
// layer with that layer's weight width; activation terms use
// hw.activation_bits.
EnergyBreakdown dnn_energy(const LayerResources& resources, const QuantConfig& quant,
                           const HardwareModel& hw = {});

// Real multiplications of `iterations` WMMSE iterations (fractional allowed).
double wmmse_mult_count(double n_t, double n_u, double iterations);
double zf_mult_count(double n_t, double n_u);

// Multiplications plus local-buffer operand traffic, in uJ.
double baseline_energy(double n_c, const HardwareModel& hw = {}, double q_bits = 16.0);

// bit/s/Hz per uJ. Throws on energy <= 0.
double energy_efficiency(double rate, double energy_uj);

}  // namespace mmpc
