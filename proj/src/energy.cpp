#include "mmpc/energy.hpp"

#include <cmath>

#include "mmpc/error.hpp"

namespace mmpc {

LayerCount LayerResources::total() const {
  LayerCount t;
  for (const auto& l : layers) {
    t.n_c += l.n_c;
    t.n_w += l.n_w;
    t.n_a += l.n_a;
  }
  return t;
}

void HardwareModel::validate() const {
  if (!(alpha > 0.0 && beta > 0.0 && p_base > 0.0 && mem_ratio > 0.0 && buf_ratio > 0.0 &&
        activation_bits > 0)) {
    throw Error("hardware model constants must be positive");
  }
}

double e_mac(double q_bits, const HardwareModel& hw) {
  if (!(q_bits > 0.0)) throw Error("bit width must be positive");
  return hw.alpha * std::pow(q_bits / 16.0, hw.beta);
}

double e_mem(double q_bits, const HardwareModel& hw) { return hw.mem_ratio * e_mac(q_bits, hw); }

double e_buf(double q_bits, const HardwareModel& hw) { return hw.buf_ratio * e_mac(q_bits, hw); }

double parallel_units(double q_bits, const HardwareModel& hw) { return hw.p_base * q_bits / 16.0; }

EnergyBreakdown dnn_energy(const LayerResources& resources, const QuantConfig& quant,
                           const HardwareModel& hw) {
  hw.validate();
  const double act = hw.activation_bits;
  const double mac_a = e_mac(act, hw);
  const double mem_a = e_mem(act, hw);
  const double buf_a = e_buf(act, hw);
  const double sqrt_p_a = std::sqrt(parallel_units(act, hw));

  EnergyBreakdown out;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& r = resources.layers[l];
    const double q = quant.bits[l];
    const double n_c = static_cast<double>(r.n_c);
    const double n_w = static_cast<double>(r.n_w);
    const double n_a = static_cast<double>(r.n_a);
    const double sqrt_p = std::sqrt(parallel_units(q, hw));

    auto& part = out.per_layer[l];
    // One bias, one normalization and one activation per activation output.
    part.e_c = (e_mac(q, hw) * n_c + mac_a * 3.0 * n_a) * kPicoToMicro;
    part.e_w = (e_mem(q, hw) * n_w + e_buf(q, hw) * n_c / sqrt_p) * kPicoToMicro;
    part.e_a = (2.0 * mem_a * n_a + buf_a * n_c / sqrt_p_a) * kPicoToMicro;
    out.e_c += part.e_c;
    out.e_w += part.e_w;
    out.e_a += part.e_a;
  }
  out.total = out.e_c + out.e_w + out.e_a;
  return out;
}

double wmmse_mult_count(double n_t, double n_u, double iterations) {
  return iterations * (8.0 / 3.0 * n_t * n_t * n_t * n_u + 4.0 * n_t * n_t * n_u +
                       4.0 * n_t * (4.0 * n_u * n_u + 2.0 * n_u) + 4.0 * n_u * n_u + 56.0 / 3.0 * n_u);
}

double zf_mult_count(double n_t, double n_u) { return 8.0 * n_u * n_u * n_t + 8.0 / 3.0 * n_u * n_u * n_u; }

double baseline_energy(double n_c, const HardwareModel& hw, double q_bits) {
  if (n_c < 0.0) throw Error("operation count must be non-negative");
  const double pj = e_mac(q_bits, hw) * n_c + e_buf(q_bits, hw) * n_c / std::sqrt(parallel_units(q_bits, hw));
  return pj * kPicoToMicro;
}

double energy_efficiency(double rate, double energy_uj) {
  if (!(energy_uj > 0.0)) throw Error("energy must be positive");
  return rate / energy_uj;
}

}  // namespace mmpc
