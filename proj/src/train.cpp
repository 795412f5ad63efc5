#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmpc/error.hpp"
#include "mmpc/net.hpp"

namespace mmpc {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout_rate must be in [0, 1)");
  if (batch_size == 0) throw Error("batch_size must be positive");
  if (max_epochs == 0) throw Error("max_epochs must be positive");
}

double input_scale_for(std::span<const ChannelMatrix> scenarios) {
  if (scenarios.empty()) throw Error("empty split");
  double total = 0.0;
  std::size_t users = 0;
  Eigen::Index n_t = scenarios.front().cols();
  for (const auto& h : scenarios) {
    total += h.squaredNorm();
    users += static_cast<std::size_t>(h.rows());
  }
  const double mean = total / static_cast<double>(users) / static_cast<double>(n_t);
  if (!(mean > 0.0)) throw Error("all-zero channels");
  return 1.0 / std::sqrt(mean);
}

std::vector<double> scenario_rates(const NetworkParams& params, const LsqState* quant,
                                   std::span<const ChannelMatrix> scenarios, double sigma2, double p_max) {
  if (scenarios.empty()) throw Error("empty split");
  constexpr std::size_t kChunk = 256;
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  opt.p_max = p_max;
  std::vector<double> rates;
  rates.reserve(scenarios.size());
  for (std::size_t start = 0; start < scenarios.size(); start += kChunk) {
    const auto chunk = scenarios.subspan(start, std::min(kChunk, scenarios.size() - start));
    const auto out = forward(params, quant, chunk, opt);
    for (std::size_t b = 0; b < chunk.size(); ++b) rates.push_back(sum_rate(chunk[b], out.precoders[b], sigma2));
  }
  return rates;
}

RateStats evaluate(const NetworkParams& params, const LsqState* quant, std::span<const ChannelMatrix> scenarios,
                   double sigma2, double p_max) {
  const auto rates = scenario_rates(params, quant, scenarios, sigma2, p_max);
  return mean_and_stderr(rates);
}

namespace {

class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  void begin_step() { ++t_; }

  // Updates `values` in place; `slot` identifies the moment buffers.
  void update(std::size_t slot, std::span<double> values, std::span<const double> grad) {
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    auto& m = m_[slot];
    auto& v = v_[slot];
    if (m.empty()) {
      m.assign(values.size(), 0.0);
      v.assign(values.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const auto n = static_cast<Eigen::Index>(values.size());
    Eigen::Map<Eigen::ArrayXd> x(values.data(), n), mm(m.data(), n), vv(v.data(), n);
    Eigen::Map<const Eigen::ArrayXd> g(grad.data(), n);
    mm = kBeta1 * mm + (1.0 - kBeta1) * g;
    vv = kBeta2 * vv + (1.0 - kBeta2) * g.square();
    x -= (lr_ / c1) * mm / ((vv / c2).sqrt() + kEps);
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scenarios for one epoch: the train split in shuffled order, or fresh
// scenarios assembled from users of distinct train scenarios.
std::vector<ChannelMatrix> epoch_scenarios(const std::vector<ChannelMatrix>& train, const TrainConfig& config,
                                           std::mt19937_64& rng) {
  if (config.resampled_scenarios == 0) {
    std::vector<ChannelMatrix> out = train;
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  }
  const Eigen::Index n_u = train.front().rows();
  const std::size_t pool = train.size() * static_cast<std::size_t>(n_u);
  std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
  std::vector<ChannelMatrix> out(config.resampled_scenarios, ChannelMatrix(n_u, train.front().cols()));
  for (auto& h : out) {
    for (Eigen::Index u = 0; u < n_u; ++u) {
      const std::size_t k = pick(rng);
      h.row(u) = train[k / static_cast<std::size_t>(n_u)].row(static_cast<Eigen::Index>(k % static_cast<std::size_t>(n_u)));
    }
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& dataset, const ArchConfig& arch, const std::optional<QuantConfig>& quant,
                  const TrainConfig& config, const NetworkParams* init) {
  config.validate();
  arch.validate();
  if (!dataset.is_split()) throw Error("dataset has no train/val split");
  if (!dataset.has_noise()) throw Error("dataset noise level is not calibrated");
  const auto train_set = dataset.subset(Split::kTrain);
  const auto val_set = dataset.subset(Split::kVal);
  if (train_set.empty() || val_set.empty()) throw Error("empty split");
  if (quant && !init) throw Error("quantization-aware training needs a pretrained model");

  TrainResult result;
  if (init) {
    if (!(init->arch == arch)) throw Error("initial model architecture does not match");
    result.params = *init;
  } else {
    result.params = NetworkParams::random(arch, config.seed);
    result.params.input_scale = input_scale_for(train_set);
  }
  if (quant) result.quant = init_lsq_state(result.params, *quant);

  NetworkParams params = result.params;
  std::optional<LsqState> lsq = result.quant;
  // Step sizes are optimized in log space, which keeps them positive.
  std::array<double, kNumLayers> log_step{};
  if (lsq) {
    for (std::size_t l = 0; l < kNumLayers; ++l) log_step[l] = std::log(lsq->step[l]);
  }

  auto validation_rate = [&]() {
    return evaluate(params, lsq ? &*lsq : nullptr, val_set, dataset.sigma2, dataset.p_max).mean;
  };

  result.best_val_rate = validation_rate();
  result.best_epoch = 0;
  result.history.push_back({0, std::numeric_limits<double>::quiet_NaN(), result.best_val_rate});
  if (config.on_epoch) config.on_epoch(result.history.back());

  auto rng = substream(config.seed, 3, quant ? 1 : 0);
  Adam adam(config.learning_rate);
  std::size_t stale = 0;
  ForwardOptions opt;
  opt.mode = Mode::kTrain;
  opt.dropout_rate = config.dropout_rate;
  opt.rng = &rng;
  opt.p_max = dataset.p_max;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto data = epoch_scenarios(train_set, config, rng);
    const std::size_t batch = std::min(config.batch_size, data.size());
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + batch <= data.size(); start += batch) {
      const std::span<const ChannelMatrix> chunk(data.data() + start, batch);
      auto lg = loss_and_grad(params, lsq ? &*lsq : nullptr, chunk, dataset.sigma2, opt);
      loss_sum += lg.loss;
      ++steps;

      adam.begin_step();
      auto values = trainable_views(params);
      auto grads = trainable_views(lg.grad);
      for (std::size_t i = 0; i < values.size(); ++i) adam.update(i, values[i].values, grads[i].values);
      if (lsq) {
        for (std::size_t l = 0; l < kNumLayers; ++l) {
          double g = lg.step_grad[l] * lsq->step[l];
          adam.update(values.size() + l, {&log_step[l], 1}, {&g, 1});
          lsq->step[l] = std::max(std::exp(log_step[l]), kMinStep);
        }
      }
      update_running_stats(params, *lg.moments);
    }

    const double val = validation_rate();
    result.history.push_back({epoch, loss_sum / static_cast<double>(steps), val});
    if (config.on_epoch) config.on_epoch(result.history.back());
    if (val > result.best_val_rate) {
      result.best_val_rate = val;
      result.best_epoch = epoch;
      result.params = params;
      result.quant = lsq;
      stale = 0;
    } else if (++stale >= config.patience && config.patience > 0) {
      break;
    }
  }
  return result;
}

}  // namespace mmpc
