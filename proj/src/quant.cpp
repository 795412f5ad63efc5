#include "mmpc/quant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "mmpc/error.hpp"

namespace mmpc {

namespace {

bool allowed_bits(int b) { return std::find(kBitChoices.begin(), kBitChoices.end(), b) != kBitChoices.end(); }

void check_bits(int bits) {
  if (bits < 2 || bits > 32) throw Error("bit width out of range: " + std::to_string(bits));
}

}  // namespace

QuantConfig QuantConfig::parse(std::string_view text) {
  QuantConfig q;
  std::size_t layer = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto field = text.substr(start, end - start);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || layer >= kNumLayers) {
      throw Error("bad quant config '" + std::string(text) + "' (expected a,b,c,d)");
    }
    q.bits[layer++] = value;
    start = end + 1;
  }
  if (layer != kNumLayers) throw Error("bad quant config '" + std::string(text) + "' (expected a,b,c,d)");
  q.validate();
  return q;
}

std::string QuantConfig::to_string(char sep) const {
  std::string out;
  for (std::size_t i = 0; i < kNumLayers; ++i) {
    if (i) out.push_back(sep);
    out += std::to_string(bits[i]);
  }
  return out;
}

void QuantConfig::validate() const {
  for (int b : bits) {
    if (!allowed_bits(b)) throw Error("bit width must be one of 2, 4, 8, 16 (got " + std::to_string(b) + ")");
  }
}

bool QuantConfig::is_uniform() const {
  return std::all_of(bits.begin(), bits.end(), [&](int b) { return b == bits[0]; });
}

void LsqState::validate() const {
  config.validate();
  for (double s : step) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("LSQ step sizes must be positive");
  }
}

double init_step_size(std::span<const double> weights, int bits) {
  check_bits(bits);
  if (weights.empty()) throw Error("cannot initialize a step size from no weights");
  double sum = 0.0;
  for (double w : weights) sum += std::abs(w);
  const double step = 2.0 * (sum / static_cast<double>(weights.size())) / std::sqrt(grid_max(bits));
  return std::max(step, kMinStep);
}

double quantize_level(double v, int bits) {
  // nearbyint uses the current rounding mode, round-half-to-even by default.
  return std::clamp(std::nearbyint(v), grid_min(bits), grid_max(bits));
}

void lsq_fake_quantize(std::span<const double> w, double step, int bits, std::span<double> out) {
  check_bits(bits);
  if (!(step > 0.0)) throw Error("step must be positive");
  if (out.size() != w.size()) throw Error("size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_level(w[i] / step, bits) * step;
}

double lsq_backward(std::span<const double> w, double step, int bits, std::span<const double> grad_wq,
                    std::span<double> grad_w) {
  if (grad_wq.size() != w.size() || grad_w.size() != w.size()) throw Error("size mismatch");
  const double q_n = grid_min(bits);
  const double q_p = grid_max(bits);
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.size()) * q_p);
  double grad_step = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w[i] / step;
    const double g = grad_wq[i];
    if (v <= q_n) {
      grad_w[i] = 0.0;
      grad_step += g * q_n;
    } else if (v >= q_p) {
      grad_w[i] = 0.0;
      grad_step += g * q_p;
    } else {
      grad_w[i] = g;
      grad_step += g * (std::nearbyint(v) - v);
    }
  }
  return grad_step * scale;
}

double ptq_quantize(std::span<const double> w, int bits, std::span<double> out) {
  check_bits(bits);
  if (out.size() != w.size()) throw Error("size mismatch");
  double max_abs = 0.0;
  for (double v : w) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return kMinStep;
  }
  const double step = max_abs / grid_max(bits);
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_level(w[i] / step, bits) * step;
  return step;
}

std::vector<std::vector<int>> enumerate_bit_vectors(std::span<const int> choice_set, std::size_t n_layers) {
  std::vector<std::vector<int>> out;
  if (choice_set.empty()) return out;
  std::vector<int> choices(choice_set.begin(), choice_set.end());
  std::sort(choices.begin(), choices.end());
  std::vector<std::size_t> digit(n_layers, 0);
  while (true) {
    std::vector<int> v(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) v[i] = choices[digit[i]];
    out.push_back(std::move(v));
    // Odometer increment, last layer fastest.
    std::size_t i = n_layers;
    while (i > 0) {
      --i;
      if (++digit[i] < choices.size()) break;
      digit[i] = 0;
      if (i == 0) return out;
    }
    if (n_layers == 0) return out;
  }
}

std::vector<QuantConfig> enumerate_quant_configs(std::span<const int> choices) {
  std::vector<QuantConfig> out;
  for (const auto& v : enumerate_bit_vectors(choices, kNumLayers)) {
    QuantConfig q;
    std::copy(v.begin(), v.end(), q.bits.begin());
    q.validate();
    out.push_back(q);
  }
  return out;
}

}  // namespace mmpc
