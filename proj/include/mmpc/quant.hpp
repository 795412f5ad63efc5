#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmpc {

// Layer order used everywhere a per-layer vector appears.
inline constexpr std::size_t kNumLayers = 4;
inline constexpr std::array<const char*, kNumLayers> kLayerNames = {"conv", "fcl1", "fcl2", "fcl3"};

inline constexpr std::array<int, 4> kBitChoices = {2, 4, 8, 16};

// Per-layer weight bit widths [CONV, FCL1, FCL2, FCL3].
struct QuantConfig {
  std::array<int, kNumLayers> bits{16, 16, 16, 16};

  static QuantConfig uniform(int b) { return QuantConfig{{b, b, b, b}}; }
  // "a,b,c,d"
  static QuantConfig parse(std::string_view text);
  std::string to_string(char sep = ',') const;
  void validate() const;
  bool is_uniform() const;

  auto operator<=>(const QuantConfig&) const = default;
};

// Learned step sizes, one per quantized layer.
struct LsqState {
  QuantConfig config;
  std::array<double, kNumLayers> step{};

  void validate() const;
};

// Signed symmetric grid: Q_N = -2^(b-1), Q_P = 2^(b-1) - 1.
constexpr double grid_min(int bits) { return -static_cast<double>(1LL << (bits - 1)); }
constexpr double grid_max(int bits) { return static_cast<double>((1LL << (bits - 1)) - 1); }

inline constexpr double kMinStep = 1e-8;

// 2 * mean|w| / sqrt(Q_P), floored at kMinStep.
double init_step_size(std::span<const double> weights, int bits);

// Round-half-to-even of v, clamped to [Q_N, Q_P].
double quantize_level(double v, int bits);

// out[i] = clamp(round(w[i] / step), Q_N, Q_P) * step
void lsq_fake_quantize(std::span<const double> w, double step, int bits, std::span<double> out);

// Straight-through backward pass of lsq_fake_quantize. Writes dL/dw into
// grad_w (pass-through strictly inside the grid, zero when clamped) and
// returns dL/dstep scaled by 1/sqrt(n * Q_P).
double lsq_backward(std::span<const double> w, double step, int bits,
                    std::span<const double> grad_wq, std::span<double> grad_w);

// Symmetric min-max quantization: step = max|w| / Q_P. Returns the step.
double ptq_quantize(std::span<const double> w, int bits, std::span<double> out);

// All choices^n_layers vectors in lexicographic order.
std::vector<std::vector<int>> enumerate_bit_vectors(std::span<const int> choices, std::size_t n_layers);
std::vector<QuantConfig> enumerate_quant_configs(std::span<const int> choices = kBitChoices);

}  // namespace mmpc
