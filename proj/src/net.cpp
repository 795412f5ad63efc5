#include "mmpc/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmpc/error.hpp"

namespace mmpc {

// ---- architecture -------------------------------------------------------------

bool ArchConfig::on_nas_grid() const {
  return std::find(kNasChannels.begin(), kNasChannels.end(), c_out) != kNasChannels.end() &&
         std::find(kNasWidths.begin(), kNasWidths.end(), d_fcl) != kNasWidths.end();
}

void ArchConfig::validate(bool require_nas_grid) const {
  if (c_out <= 0 || d_fcl <= 0 || n_t <= 0 || n_u <= 0) throw Error("architecture sizes must be positive");
  if (require_nas_grid && !on_nas_grid()) {
    throw Error("architecture " + tag() + " is outside the NAS grid");
  }
}

std::string ArchConfig::tag() const { return "c" + std::to_string(c_out) + "_d" + std::to_string(d_fcl); }

std::vector<ArchConfig> nas_architectures(int n_t, int n_u) {
  std::vector<ArchConfig> out;
  for (int c : kNasChannels) {
    for (int d : kNasWidths) out.push_back(ArchConfig{c, d, n_t, n_u});
  }
  return out;
}

LayerResources count_resources(const ArchConfig& arch) {
  arch.validate();
  const std::int64_t c = arch.c_out;
  const std::int64_t d = arch.d_fcl;
  const std::int64_t pos = arch.positions();
  const std::int64_t kernel = ArchConfig::kInChannels * ArchConfig::kKernel * ArchConfig::kKernel;
  const std::int64_t out = arch.outputs();
  LayerResources r;
  r.layers[0] = {kernel * c * pos, kernel * c, c * pos};
  r.layers[1] = {c * pos * d, c * pos * d, d};
  r.layers[2] = {d * d, d * d, d};
  r.layers[3] = {d * out, d * out, out};
  return r;
}

// ---- parameters ---------------------------------------------------------------

BatchNormParams::BatchNormParams(int n)
    : gamma(Eigen::VectorXd::Ones(n)),
      beta(Eigen::VectorXd::Zero(n)),
      running_mean(Eigen::VectorXd::Zero(n)),
      running_var(Eigen::VectorXd::Ones(n)) {}

namespace {

constexpr int kPatch = ArchConfig::kInChannels * ArchConfig::kKernel * ArchConfig::kKernel;

bool bn_equal(const BatchNormParams& a, const BatchNormParams& b) {
  return a.gamma == b.gamma && a.beta == b.beta && a.running_mean == b.running_mean &&
         a.running_var == b.running_var;
}

template <typename Derived>
void fill_uniform(Eigen::DenseBase<Derived>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

}  // namespace

NetworkParams NetworkParams::zeros(const ArchConfig& arch) {
  arch.validate();
  NetworkParams p;
  p.arch = arch;
  p.conv_w = Eigen::MatrixXd::Zero(arch.c_out, kPatch);
  p.conv_b = Eigen::VectorXd::Zero(arch.c_out);
  p.bn_conv = BatchNormParams(arch.c_out);
  p.fc1_w = Eigen::MatrixXd::Zero(arch.d_fcl, arch.flat_features());
  p.fc1_b = Eigen::VectorXd::Zero(arch.d_fcl);
  p.bn1 = BatchNormParams(arch.d_fcl);
  p.fc2_w = Eigen::MatrixXd::Zero(arch.d_fcl, arch.d_fcl);
  p.fc2_b = Eigen::VectorXd::Zero(arch.d_fcl);
  p.bn2 = BatchNormParams(arch.d_fcl);
  p.fc3_w = Eigen::MatrixXd::Zero(arch.outputs(), arch.d_fcl);
  p.fc3_b = Eigen::VectorXd::Zero(arch.outputs());
  return p;
}

NetworkParams NetworkParams::random(const ArchConfig& arch, std::uint64_t seed) {
  NetworkParams p = zeros(arch);
  auto init_layer = [&](Eigen::MatrixXd& w, Eigen::VectorXd& b, std::uint64_t layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    auto rng = substream(seed, 100 + layer, 0);
    fill_uniform(w, bound, rng);
    fill_uniform(b, bound, rng);
  };
  init_layer(p.conv_w, p.conv_b, 0);
  init_layer(p.fc1_w, p.fc1_b, 1);
  init_layer(p.fc2_w, p.fc2_b, 2);
  init_layer(p.fc3_w, p.fc3_b, 3);
  return p;
}

std::array<Eigen::MatrixXd*, kNumLayers> NetworkParams::layer_weights() {
  return {&conv_w, &fc1_w, &fc2_w, &fc3_w};
}

std::array<const Eigen::MatrixXd*, kNumLayers> NetworkParams::layer_weights() const {
  return {&conv_w, &fc1_w, &fc2_w, &fc3_w};
}

bool NetworkParams::operator==(const NetworkParams& o) const {
  return arch == o.arch && input_scale == o.input_scale && conv_w == o.conv_w && conv_b == o.conv_b &&
         bn_equal(bn_conv, o.bn_conv) && fc1_w == o.fc1_w && fc1_b == o.fc1_b && bn_equal(bn1, o.bn1) &&
         fc2_w == o.fc2_w && fc2_b == o.fc2_b && bn_equal(bn2, o.bn2) && fc3_w == o.fc3_w &&
         fc3_b == o.fc3_b;
}

std::vector<ParamView> trainable_views(NetworkParams& p) {
  auto view = [](const char* name, auto& m) {
    return ParamView{name, std::span<double>(m.data(), static_cast<std::size_t>(m.size()))};
  };
  return {view("conv.weight", p.conv_w), view("conv.bias", p.conv_b),
          view("bn_conv.gamma", p.bn_conv.gamma), view("bn_conv.beta", p.bn_conv.beta),
          view("fcl1.weight", p.fc1_w), view("fcl1.bias", p.fc1_b),
          view("bn1.gamma", p.bn1.gamma), view("bn1.beta", p.bn1.beta),
          view("fcl2.weight", p.fc2_w), view("fcl2.bias", p.fc2_b),
          view("bn2.gamma", p.bn2.gamma), view("bn2.beta", p.bn2.beta),
          view("fcl3.weight", p.fc3_w), view("fcl3.bias", p.fc3_b)};
}

std::size_t trainable_count(const ArchConfig& arch) {
  auto p = NetworkParams::zeros(arch);
  std::size_t n = 0;
  for (const auto& v : trainable_views(p)) n += v.values.size();
  return n;
}

// ---- forward / backward -----------------------------------------------------

namespace {

// Batchnorm over channels made of `group` consecutive rows (group = P for
// the conv feature map, 1 for dense layers).
struct BnCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_std;
};

void bn_forward(const Eigen::MatrixXd& z, Eigen::Index group, const BatchNormParams& bn, Mode mode,
                Eigen::MatrixXd& y, BnCache& cache, Eigen::VectorXd* mean_out, Eigen::VectorXd* var_out) {
  const Eigen::Index channels = bn.gamma.size();
  const double count = static_cast<double>(group * z.cols());
  cache.xhat.resize(z.rows(), z.cols());
  cache.inv_std.resize(channels);
  y.resize(z.rows(), z.cols());
  if (mean_out) mean_out->resize(channels);
  if (var_out) var_out->resize(channels);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto block = z.middleRows(c * group, group);
    double mean;
    double var;
    if (mode == Mode::kTrain) {
      mean = block.mean();
      var = (block.array() - mean).square().sum() / count;
      if (mean_out) (*mean_out)(c) = mean;
      if (var_out) (*var_out)(c) = count > 1.0 ? var * count / (count - 1.0) : var;
    } else {
      mean = bn.running_mean(c);
      var = bn.running_var(c);
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEps);
    cache.inv_std(c) = inv_std;
    cache.xhat.middleRows(c * group, group) = (block.array() - mean) * inv_std;
    y.middleRows(c * group, group) = (cache.xhat.middleRows(c * group, group).array() * bn.gamma(c) + bn.beta(c));
  }
}

void bn_backward(const Eigen::MatrixXd& dy, Eigen::Index group, const BatchNormParams& bn, Mode mode,
                 const BnCache& cache, Eigen::MatrixXd& dz, Eigen::VectorXd& dgamma, Eigen::VectorXd& dbeta) {
  const Eigen::Index channels = bn.gamma.size();
  const double count = static_cast<double>(group * dy.cols());
  dz.resize(dy.rows(), dy.cols());
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto g = dy.middleRows(c * group, group).array();
    const auto xhat = cache.xhat.middleRows(c * group, group).array();
    const double sum_g = g.sum();
    const double sum_gx = (g * xhat).sum();
    dgamma(c) += sum_gx;
    dbeta(c) += sum_g;
    const double scale = bn.gamma(c) * cache.inv_std(c);
    if (mode == Mode::kTrain) {
      dz.middleRows(c * group, group) = scale * (g - sum_g / count - xhat * (sum_gx / count));
    } else {
      dz.middleRows(c * group, group) = scale * g;
    }
  }
}

// ReLU followed by inverted dropout; `gate` holds the combined derivative.
void relu_dropout(const Eigen::MatrixXd& y, const ForwardOptions& opt, Eigen::MatrixXd& a, Eigen::MatrixXd& gate) {
  gate = (y.array() > 0.0).cast<double>();
  if (opt.mode == Mode::kTrain && opt.dropout_rate > 0.0) {
    if (!opt.rng) throw Error("dropout needs a random generator in training mode");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - opt.dropout_rate);
    double* g = gate.data();
    for (Eigen::Index i = 0; i < gate.size(); ++i) {
      g[i] = u(*opt.rng) < opt.dropout_rate ? 0.0 : g[i] * keep_scale;
    }
  }
  a = y.cwiseProduct(gate);
}

// Patch matrix of one sample: P x 18, rows are output positions i*n_t + j,
// columns (in_channel, kh, kw) with zero padding 1.
void im2col(const ChannelMatrix& h, double scale, Eigen::MatrixXd& cols) {
  const Eigen::Index n_u = h.rows();
  const Eigen::Index n_t = h.cols();
  cols.setZero(n_u * n_t, kPatch);
  for (Eigen::Index i = 0; i < n_u; ++i) {
    for (Eigen::Index j = 0; j < n_t; ++j) {
      const Eigen::Index row = i * n_t + j;
      for (int kh = 0; kh < 3; ++kh) {
        const Eigen::Index si = i + kh - 1;
        if (si < 0 || si >= n_u) continue;
        for (int kw = 0; kw < 3; ++kw) {
          const Eigen::Index sj = j + kw - 1;
          if (sj < 0 || sj >= n_t) continue;
          const cdouble v = h(si, sj) * scale;
          cols(row, kh * 3 + kw) = v.real();
          cols(row, 9 + kh * 3 + kw) = v.imag();
        }
      }
    }
  }
}

// Weights as the layers see them: the raw tensors, or their fake-quantized
// copies. Pointers are rebuilt on access so the struct stays movable.
struct Weights {
  std::array<const Eigen::MatrixXd*, kNumLayers> raw{};
  std::array<Eigen::MatrixXd, kNumLayers> quantized;
  bool is_quantized = false;

  std::array<const Eigen::MatrixXd*, kNumLayers> use() const {
    auto out = raw;
    if (is_quantized) {
      for (std::size_t l = 0; l < kNumLayers; ++l) out[l] = &quantized[l];
    }
    return out;
  }
};

Weights effective_weights(const NetworkParams& params, const LsqState* quant) {
  Weights w;
  w.raw = params.layer_weights();
  if (!quant) return w;
  w.is_quantized = true;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& raw = *w.raw[l];
    w.quantized[l].resize(raw.rows(), raw.cols());
    lsq_fake_quantize({raw.data(), static_cast<std::size_t>(raw.size())}, quant->step[l], quant->config.bits[l],
                      {w.quantized[l].data(), static_cast<std::size_t>(w.quantized[l].size())});
  }
  return w;
}

// Zeroed gradient accumulators. Weight gradients are written in full by the
// backward pass, so those are only allocated.
NetworkParams gradient_buffer(const ArchConfig& arch) {
  NetworkParams g;
  g.arch = arch;
  g.input_scale = 0.0;
  g.conv_w.resize(arch.c_out, kPatch);
  g.fc1_w.resize(arch.d_fcl, arch.flat_features());
  g.fc2_w.resize(arch.d_fcl, arch.d_fcl);
  g.fc3_w.resize(arch.outputs(), arch.d_fcl);
  g.conv_b = Eigen::VectorXd::Zero(arch.c_out);
  g.fc1_b = Eigen::VectorXd::Zero(arch.d_fcl);
  g.fc2_b = Eigen::VectorXd::Zero(arch.d_fcl);
  g.fc3_b = Eigen::VectorXd::Zero(arch.outputs());
  for (auto [bn, n] : {std::pair{&g.bn_conv, arch.c_out}, {&g.bn1, arch.d_fcl}, {&g.bn2, arch.d_fcl}}) {
    *bn = BatchNormParams(n);
    bn->gamma.setZero();
    bn->running_var.setZero();
  }
  return g;
}

struct Activations {
  Weights weights;
  std::vector<Eigen::MatrixXd> cols;
  BnCache bn0, bn1, bn2;
  Eigen::MatrixXd gate0, gate1, gate2;
  Eigen::MatrixXd a0, a1, a2;
  Eigen::MatrixXd out;  // FCL3 output
  std::vector<Eigen::MatrixXcd> raw;  // unprojected complex precoders
  std::vector<double> norms;
  std::vector<PrecodingMatrix> precoders;
  std::optional<BatchMoments> moments;
};

void check_batch(const NetworkParams& params, std::span<const ChannelMatrix> batch) {
  if (batch.empty()) throw Error("empty batch");
  for (const auto& h : batch) {
    if (h.rows() != params.arch.n_u || h.cols() != params.arch.n_t) {
      throw Error("channel shape does not match the architecture");
    }
  }
}

Activations run_forward(const NetworkParams& params, const LsqState* quant, std::span<const ChannelMatrix> batch,
                        const ForwardOptions& opt) {
  check_batch(params, batch);
  if (quant) quant->validate();
  const auto& arch = params.arch;
  const Eigen::Index batch_size = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index pos = arch.positions();
  const Eigen::Index c_out = arch.c_out;

  Activations act;
  act.weights = effective_weights(params, quant);
  const auto w = act.weights.use();
  const bool train = opt.mode == Mode::kTrain;
  if (train) act.moments.emplace();
  auto mean_slot = [&](int i) { return train ? &act.moments->mean[i] : nullptr; };
  auto var_slot = [&](int i) { return train ? &act.moments->var_unbiased[i] : nullptr; };

  // Conv: feature map stored flattened per sample as (c * P + position).
  Eigen::MatrixXd z(c_out * pos, batch_size);
  const Eigen::MatrixXd conv_wt = w[0]->transpose();
  act.cols.resize(batch.size());
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    im2col(batch[static_cast<std::size_t>(b)], params.input_scale, act.cols[static_cast<std::size_t>(b)]);
    Eigen::Map<Eigen::MatrixXd> zb(z.col(b).data(), pos, c_out);
    zb.noalias() = act.cols[static_cast<std::size_t>(b)] * conv_wt;
    zb.rowwise() += params.conv_b.transpose();
  }
  Eigen::MatrixXd y;
  bn_forward(z, pos, params.bn_conv, opt.mode, y, act.bn0, mean_slot(0), var_slot(0));
  relu_dropout(y, opt, act.a0, act.gate0);

  z.noalias() = *w[1] * act.a0;
  z.colwise() += params.fc1_b;
  bn_forward(z, 1, params.bn1, opt.mode, y, act.bn1, mean_slot(1), var_slot(1));
  relu_dropout(y, opt, act.a1, act.gate1);

  z.noalias() = *w[2] * act.a1;
  z.colwise() += params.fc2_b;
  bn_forward(z, 1, params.bn2, opt.mode, y, act.bn2, mean_slot(2), var_slot(2));
  relu_dropout(y, opt, act.a2, act.gate2);

  act.out.noalias() = *w[3] * act.a2;
  act.out.colwise() += params.fc3_b;

  // Output layout: first P reals, then P imaginary parts; index n * n_u + u.
  const double amplitude = std::sqrt(opt.p_max);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    Eigen::MatrixXcd v(arch.n_t, arch.n_u);
    for (Eigen::Index n = 0; n < arch.n_t; ++n) {
      for (Eigen::Index u = 0; u < arch.n_u; ++u) {
        const Eigen::Index k = n * arch.n_u + u;
        v(n, u) = cdouble(act.out(k, b), act.out(pos + k, b));
      }
    }
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw Error("network produced a degenerate precoder");
    act.norms.push_back(norm);
    act.precoders.push_back(v * (amplitude / norm));
    act.raw.push_back(std::move(v));
  }
  return act;
}

}  // namespace

ForwardResult forward(const NetworkParams& params, const LsqState* quant, std::span<const ChannelMatrix> batch,
                      const ForwardOptions& options) {
  auto act = run_forward(params, quant, batch, options);
  ForwardResult result;
  result.precoders = std::move(act.precoders);
  result.raw_output = std::move(act.out);
  result.moments = std::move(act.moments);
  return result;
}

LossAndGrad loss_and_grad(const NetworkParams& params, const LsqState* quant, std::span<const ChannelMatrix> batch,
                          double sigma2, const ForwardOptions& options) {
  if (!(sigma2 > 0.0)) throw Error("sigma2 must be positive");
  auto act = run_forward(params, quant, batch, options);
  const auto& arch = params.arch;
  const Eigen::Index batch_size = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index pos = arch.positions();
  const Eigen::Index c_out = arch.c_out;
  const double inv_batch = 1.0 / static_cast<double>(batch_size);
  const double amplitude = std::sqrt(options.p_max);

  LossAndGrad result;
  result.grad = gradient_buffer(arch);
  auto& g = result.grad;

  // Sum rate -> projected precoder -> raw network output.
  Eigen::MatrixXd d_out(arch.outputs(), batch_size);
  double rate_total = 0.0;
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const auto& h = batch[static_cast<std::size_t>(b)];
    const auto& w = act.precoders[static_cast<std::size_t>(b)];
    const Eigen::MatrixXcd gains = h * w;
    Eigen::MatrixXcd d_gains(gains.rows(), gains.cols());
    for (Eigen::Index u = 0; u < gains.rows(); ++u) {
      const double total = gains.row(u).cwiseAbs2().sum() + sigma2;
      const double interference = total - std::norm(gains(u, u));
      rate_total += std::log2(total / interference);
      // d(-rate/B)/d|g_uj|^2, times 2 g_uj for the (re, im) gradient.
      const double c_total = -inv_batch / std::numbers::ln2 / total;
      const double c_interf = inv_batch / std::numbers::ln2 / interference;
      for (Eigen::Index j = 0; j < gains.cols(); ++j) {
        const double dp = c_total + (j == u ? 0.0 : c_interf);
        d_gains(u, j) = 2.0 * dp * gains(u, j);
      }
    }
    const Eigen::MatrixXcd d_w = h.adjoint() * d_gains;
    const auto& v = act.raw[static_cast<std::size_t>(b)];
    const double norm = act.norms[static_cast<std::size_t>(b)];
    const Eigen::MatrixXcd unit = v / norm;
    const double radial = (unit.conjugate().cwiseProduct(d_w)).sum().real();
    const Eigen::MatrixXcd d_v = (amplitude / norm) * (d_w - radial * unit);
    for (Eigen::Index n = 0; n < arch.n_t; ++n) {
      for (Eigen::Index u = 0; u < arch.n_u; ++u) {
        const Eigen::Index k = n * arch.n_u + u;
        d_out(k, b) = d_v(n, u).real();
        d_out(pos + k, b) = d_v(n, u).imag();
      }
    }
  }
  result.loss = -rate_total * inv_batch;

  const auto w = act.weights.use();
  std::array<Eigen::MatrixXd, kNumLayers> d_wq;

  // FCL3
  d_wq[3].noalias() = d_out * act.a2.transpose();
  g.fc3_b = d_out.rowwise().sum();
  Eigen::MatrixXd d_a = w[3]->transpose() * d_out;

  // FCL2
  Eigen::MatrixXd d_y = d_a.cwiseProduct(act.gate2);
  Eigen::MatrixXd d_z;
  bn_backward(d_y, 1, params.bn2, options.mode, act.bn2, d_z, g.bn2.gamma, g.bn2.beta);
  d_wq[2].noalias() = d_z * act.a1.transpose();
  g.fc2_b = d_z.rowwise().sum();
  d_a.noalias() = w[2]->transpose() * d_z;

  // FCL1
  d_y = d_a.cwiseProduct(act.gate1);
  bn_backward(d_y, 1, params.bn1, options.mode, act.bn1, d_z, g.bn1.gamma, g.bn1.beta);
  d_wq[1].noalias() = d_z * act.a0.transpose();
  g.fc1_b = d_z.rowwise().sum();
  d_a.noalias() = w[1]->transpose() * d_z;

  // Conv
  d_y = d_a.cwiseProduct(act.gate0);
  bn_backward(d_y, pos, params.bn_conv, options.mode, act.bn0, d_z, g.bn_conv.gamma, g.bn_conv.beta);
  Eigen::MatrixXd d_conv_wt = Eigen::MatrixXd::Zero(kPatch, c_out);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    Eigen::Map<const Eigen::MatrixXd> dzb(d_z.col(b).data(), pos, c_out);
    d_conv_wt.noalias() += act.cols[static_cast<std::size_t>(b)].transpose() * dzb;
    g.conv_b += dzb.colwise().sum().transpose();
  }
  d_wq[0] = d_conv_wt.transpose();

  // Straight-through estimator back to the stored weights.
  const auto raw = params.layer_weights();
  auto grads = g.layer_weights();
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    if (!quant) {
      *grads[l] = std::move(d_wq[l]);
      continue;
    }
    const auto n = static_cast<std::size_t>(raw[l]->size());
    result.step_grad[l] = lsq_backward({raw[l]->data(), n}, quant->step[l], quant->config.bits[l],
                                       {d_wq[l].data(), n}, {grads[l]->data(), n});
  }
  result.moments = std::move(act.moments);
  return result;
}

void update_running_stats(NetworkParams& params, const BatchMoments& moments, double momentum) {
  std::array<BatchNormParams*, 3> bns = {&params.bn_conv, &params.bn1, &params.bn2};
  for (std::size_t i = 0; i < bns.size(); ++i) {
    bns[i]->running_mean = (1.0 - momentum) * bns[i]->running_mean + momentum * moments.mean[i];
    bns[i]->running_var = (1.0 - momentum) * bns[i]->running_var + momentum * moments.var_unbiased[i];
  }
}

// ---- quantized variants ---------------------------------------------------------

NetworkParams ptq_quantize(const NetworkParams& params, const QuantConfig& quant) {
  quant.validate();
  NetworkParams out = params;
  const auto src = params.layer_weights();
  auto dst = out.layer_weights();
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto n = static_cast<std::size_t>(src[l]->size());
    ptq_quantize({src[l]->data(), n}, quant.bits[l], {dst[l]->data(), n});
  }
  return out;
}

LsqState init_lsq_state(const NetworkParams& params, const QuantConfig& quant) {
  quant.validate();
  LsqState state;
  state.config = quant;
  const auto weights = params.layer_weights();
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    state.step[l] = init_step_size({weights[l]->data(), static_cast<std::size_t>(weights[l]->size())},
                                   quant.bits[l]);
  }
  return state;
}

NetworkParams apply_fake_quant(const NetworkParams& params, const LsqState& quant) {
  NetworkParams out = params;
  auto w = effective_weights(params, &quant);
  auto dst = out.layer_weights();
  for (std::size_t l = 0; l < kNumLayers; ++l) *dst[l] = std::move(w.quantized[l]);
  return out;
}

}  // namespace mmpc
