#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmpc/channel.hpp"
#include "mmpc/energy.hpp"
#include "mmpc/precoder.hpp"
#include "mmpc/quant.hpp"

namespace mmpc {

inline constexpr std::array<int, 4> kNasChannels = {8, 16, 32, 64};
inline constexpr std::array<int, 2> kNasWidths = {512, 1024};

// Conv(3x3, C_out) -> FCL1(D) -> FCL2(D) -> FCL3(2 N_T N_U) template.
struct ArchConfig {
  static constexpr int kKernel = 3;
  static constexpr int kInChannels = 2;  // re, im

  int c_out = 64;
  int d_fcl = 1024;
  int n_t = 64;
  int n_u = 4;

  int positions() const { return n_t * n_u; }
  int flat_features() const { return c_out * positions(); }
  int outputs() const { return 2 * positions(); }
  bool on_nas_grid() const;
  // Throws unless dimensions are positive (and on the NAS grid when required).
  void validate(bool require_nas_grid = false) const;
  std::string tag() const;  // "c64_d1024"

  auto operator<=>(const ArchConfig&) const = default;
};

// The 4 x 2 NAS grid in (c_out, d_fcl) order.
std::vector<ArchConfig> nas_architectures(int n_t = 64, int n_u = 4);

LayerResources count_resources(const ArchConfig& arch);

struct BatchNormParams {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;

  explicit BatchNormParams(int n = 0);
};

struct NetworkParams {
  ArchConfig arch;
  // Applied to channel entries before the first layer.
  double input_scale = 1.0;

  Eigen::MatrixXd conv_w;  // c_out x (2*3*3), patch order (in_channel, kh, kw)
  Eigen::VectorXd conv_b;
  BatchNormParams bn_conv;
  Eigen::MatrixXd fc1_w;  // d_fcl x c_out*n_u*n_t, input index c*P + (i*n_t + j)
  Eigen::VectorXd fc1_b;
  BatchNormParams bn1;
  Eigen::MatrixXd fc2_w;
  Eigen::VectorXd fc2_b;
  BatchNormParams bn2;
  Eigen::MatrixXd fc3_w;  // 2*n_t*n_u x d_fcl; first half real parts, row n*n_u + u
  Eigen::VectorXd fc3_b;

  // Zero-filled tensors of the right shapes, batchnorm at identity.
  static NetworkParams zeros(const ArchConfig& arch);
  // Uniform fan-in init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static NetworkParams random(const ArchConfig& arch, std::uint64_t seed);

  // The four quantizable weight matrices in layer order.
  std::array<Eigen::MatrixXd*, kNumLayers> layer_weights();
  std::array<const Eigen::MatrixXd*, kNumLayers> layer_weights() const;

  bool operator==(const NetworkParams&) const;
};

// Named view of one trainable tensor.
struct ParamView {
  const char* name;
  std::span<double> values;
};

// Every trainable tensor, in declaration order. Running stats excluded.
std::vector<ParamView> trainable_views(NetworkParams& params);
std::size_t trainable_count(const ArchConfig& arch);

enum class Mode { kTrain, kEval };

struct ForwardOptions {
  Mode mode = Mode::kEval;
  double dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
  double p_max = 1.0;
};

// Layer-wise batch moments from a training-mode pass.
struct BatchMoments {
  std::array<Eigen::VectorXd, 3> mean;
  std::array<Eigen::VectorXd, 3> var_unbiased;
};

struct ForwardResult {
  std::vector<PrecodingMatrix> precoders;
  // FCL3 outputs before power projection, one column per sample.
  Eigen::MatrixXd raw_output;
  std::optional<BatchMoments> moments;
};

struct LossAndGrad {
  double loss = 0.0;  // -mean sum rate
  NetworkParams grad;
  std::array<double, kNumLayers> step_grad{};
  std::optional<BatchMoments> moments;
};

ForwardResult forward(const NetworkParams& params, const LsqState* quant,
                      std::span<const ChannelMatrix> batch, const ForwardOptions& options);

LossAndGrad loss_and_grad(const NetworkParams& params, const LsqState* quant,
                          std::span<const ChannelMatrix> batch, double sigma2,
                          const ForwardOptions& options);

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEps = 1e-5;

void update_running_stats(NetworkParams& params, const BatchMoments& moments,
                          double momentum = kBatchNormMomentum);

// Weights replaced by their min-max quantized values; no retraining.
NetworkParams ptq_quantize(const NetworkParams& params, const QuantConfig& quant);

// Step sizes initialized from the current weights.
LsqState init_lsq_state(const NetworkParams& params, const QuantConfig& quant);

// Weights as the quantized network uses them.
NetworkParams apply_fake_quant(const NetworkParams& params, const LsqState& quant);

// ---- training ---------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double val_rate = 0.0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 1000;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double dropout_rate = 0.05;
  std::uint64_t seed = 0;
  // Each epoch draws this many scenarios by recombining users of the train
  // split (0 = iterate the train split as stored).
  std::size_t resampled_scenarios = 0;
  // Called after every epoch (including epoch 0); not part of the config key.
  std::function<void(const EpochRecord&)> on_epoch;

  void validate() const;
};

struct TrainResult {
  NetworkParams params;
  std::optional<LsqState> quant;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_rate = 0.0;
};

// Adam on -sum rate with early stopping on the validation rate. With a
// quant config, `init` (a trained FP model) is fine-tuned under LSQ.
TrainResult train(const Dataset& dataset, const ArchConfig& arch,
                  const std::optional<QuantConfig>& quant, const TrainConfig& config,
                  const NetworkParams* init = nullptr);

// 1 / sqrt(mean ||h||^2 / N_T) over the given scenarios.
double input_scale_for(std::span<const ChannelMatrix> scenarios);

// Eval-mode per-scenario sum rates.
std::vector<double> scenario_rates(const NetworkParams& params, const LsqState* quant,
                                   std::span<const ChannelMatrix> scenarios, double sigma2,
                                   double p_max);

RateStats evaluate(const NetworkParams& params, const LsqState* quant,
                   std::span<const ChannelMatrix> scenarios, double sigma2, double p_max);

// ---- checkpoints ------------------------------------------------------------

struct Checkpoint {
  NetworkParams params;
  std::optional<LsqState> quant;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmpc
