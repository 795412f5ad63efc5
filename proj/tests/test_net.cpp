#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mmpc/error.hpp"
#include "mmpc/net.hpp"

using namespace mmpc;

namespace {

const ArchConfig kTiny{4, 16, 8, 2};

std::vector<ChannelMatrix> random_batch(std::size_t n, int n_u, int n_t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, std::sqrt(0.5));
  std::vector<ChannelMatrix> out;
  for (std::size_t b = 0; b < n; ++b) {
    ChannelMatrix h(n_u, n_t);
    for (int i = 0; i < n_u; ++i) {
      for (int j = 0; j < n_t; ++j) h(i, j) = cdouble(d(rng), d(rng));
    }
    out.push_back(h);
  }
  return out;
}

// Random parameters with non-trivial batchnorm state.
NetworkParams tiny_params(std::uint64_t seed) {
  auto p = NetworkParams::random(kTiny, seed);
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto* bn : {&p.bn_conv, &p.bn1, &p.bn2}) {
    for (Eigen::Index i = 0; i < bn->gamma.size(); ++i) {
      bn->gamma(i) = u(rng);
      bn->beta(i) = n(rng);
      bn->running_mean(i) = n(rng);
      bn->running_var(i) = u(rng);
    }
  }
  p.input_scale = 0.9;
  return p;
}

double eval_loss(const NetworkParams& p, const LsqState* q, std::span<const ChannelMatrix> batch, double sigma2,
                 Mode mode = Mode::kEval) {
  ForwardOptions opt;
  opt.mode = mode;
  const auto out = forward(p, q, batch, opt);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) total += sum_rate(batch[b], out.precoders[b], sigma2);
  return -total / static_cast<double>(batch.size());
}

double norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

// Group-wise relative error. The floor sits well above finite-difference
// noise (about 1e-11 here) so that groups with a vanishing true gradient,
// such as biases feeding batch-statistics normalization, compare absolutely.
double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-6});
}

// Brute-force resource count: walks the convolution and matmul index spaces.
LayerResources loop_count(const ArchConfig& a) {
  LayerResources r;
  std::int64_t macs = 0, outs = 0;
  for (int c = 0; c < a.c_out; ++c) {
    for (int i = 0; i < a.n_u; ++i) {
      for (int j = 0; j < a.n_t; ++j) {
        ++outs;
        for (int ic = 0; ic < 2; ++ic) {
          for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) ++macs;
          }
        }
      }
    }
  }
  std::int64_t weights = 0;
  for (int c = 0; c < a.c_out; ++c) {
    for (int k = 0; k < 18; ++k) ++weights;
  }
  r.layers[0] = {macs, weights, outs};
  auto dense = [](std::int64_t in, std::int64_t out) {
    LayerCount l;
    for (std::int64_t o = 0; o < out; ++o) {
      ++l.n_a;
      for (std::int64_t k = 0; k < in; ++k) {
        ++l.n_c;
        ++l.n_w;
      }
    }
    return l;
  };
  const std::int64_t flat = static_cast<std::int64_t>(a.c_out) * a.n_u * a.n_t;
  r.layers[1] = dense(flat, a.d_fcl);
  r.layers[2] = dense(a.d_fcl, a.d_fcl);
  r.layers[3] = dense(a.d_fcl, 2LL * a.n_t * a.n_u);
  return r;
}

}  // namespace

TEST_CASE("resource counts match a brute-force enumeration") {
  for (const auto& a : nas_architectures()) {
    const auto r = count_resources(a);
    const auto o = loop_count(a);
    for (int l = 0; l < 4; ++l) {
      CHECK(r.layers[l].n_c == o.layers[l].n_c);
      CHECK(r.layers[l].n_w == o.layers[l].n_w);
      CHECK(r.layers[l].n_a == o.layers[l].n_a);
    }
  }
  const auto def = count_resources(ArchConfig{});
  CHECK(def.total().n_c == 18644992);
  CHECK(def.total().n_w == 18351232);
  CHECK(def.total().n_a == 18944);
  CHECK(count_resources(ArchConfig{8, 512, 64, 4}).layers[0].n_w == 144);
}

TEST_CASE("architecture grid") {
  CHECK(nas_architectures().size() == 8);
  CHECK(ArchConfig{}.on_nas_grid());
  CHECK_FALSE(kTiny.on_nas_grid());
  CHECK_NOTHROW(kTiny.validate());
  CHECK_THROWS_AS(kTiny.validate(true), Error);
  CHECK(ArchConfig{}.tag() == "c64_d1024");
  const auto p = NetworkParams::zeros(kTiny);
  CHECK(p.fc1_w.cols() == 4 * 8 * 2);
  CHECK(p.fc3_w.rows() == 32);
  CHECK(trainable_count(kTiny) ==
        static_cast<std::size_t>(4 * 18 + 4 + 8 + 16 * 64 + 16 + 32 + 16 * 16 + 16 + 32 + 32 * 16 + 32));
}

TEST_CASE("forward is deterministic in eval mode and meets the power budget exactly") {
  const auto p = tiny_params(1);
  const auto batch = random_batch(6, 2, 8, 2);
  ForwardOptions opt;
  opt.p_max = 2.5;
  const auto a = forward(p, nullptr, batch, opt);
  const auto b = forward(p, nullptr, batch, opt);
  REQUIRE(a.precoders.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.precoders[i] == b.precoders[i]);
    CHECK(a.precoders[i].rows() == 8);
    CHECK(a.precoders[i].cols() == 2);
    CHECK(std::abs(total_power(a.precoders[i]) - 2.5) <= 1e-9 * 2.5);
  }
  CHECK(a.raw_output.rows() == 32);
  CHECK(a.raw_output.cols() == 6);
}

TEST_CASE("forward rejects mismatched shapes and missing dropout generator") {
  const auto p = tiny_params(1);
  const auto wrong = random_batch(2, 3, 8, 1);
  CHECK_THROWS_AS(forward(p, nullptr, wrong, {}), Error);
  CHECK_THROWS_AS(forward(p, nullptr, std::span<const ChannelMatrix>{}, {}), Error);
  ForwardOptions train;
  train.mode = Mode::kTrain;
  train.dropout_rate = 0.1;
  CHECK_THROWS_AS(forward(p, nullptr, random_batch(2, 2, 8, 1), train), Error);
}

TEST_CASE("zero weights propagate batchnorm shifts only") {
  auto p = NetworkParams::zeros(kTiny);
  // Conv path: y = beta after zero pre-activation and zero running mean.
  p.bn_conv.beta.setConstant(0.7);
  p.bn1.beta.setConstant(-0.3);  // ReLU blocks this path
  p.bn2.running_mean.setConstant(-0.4);
  p.bn2.running_var.setConstant(3.0);
  p.bn2.gamma.setConstant(2.0);
  p.bn2.beta.setConstant(0.1);
  // One output unit reads the FCL2 activations.
  p.fc3_w.row(5).setConstant(0.25);
  const auto batch = random_batch(1, 2, 8, 3);
  const auto out = forward(p, nullptr, batch, {});

  // a2 = relu(2 * (0 - (-0.4)) / sqrt(3 + eps) + 0.1) for each of 16 units.
  const double a2 = std::max(0.0, 2.0 * 0.4 / std::sqrt(3.0 + 1e-5) + 0.1);
  const double unit = 16 * 0.25 * a2;
  for (Eigen::Index k = 0; k < 32; ++k) CHECK(out.raw_output(k, 0) == doctest::Approx(k == 5 ? unit : 0.0).epsilon(1e-14));
  // Unit 5 is the real part of antenna n = 2, user u = 1.
  CHECK(std::abs(out.precoders[0](2, 1) - cdouble(1.0, 0.0)) < 1e-14);
}

TEST_CASE("loss equals the negative mean sum rate of the forward outputs") {
  const auto p = tiny_params(4);
  const auto batch = random_batch(5, 2, 8, 5);
  ForwardOptions opt;
  const auto lg = loss_and_grad(p, nullptr, batch, 0.3, opt);
  CHECK(lg.loss == doctest::Approx(eval_loss(p, nullptr, batch, 0.3)).epsilon(1e-12));
  CHECK(std::abs(lg.loss - eval_loss(p, nullptr, batch, 0.3)) < 1e-12);
  CHECK_THROWS_AS(loss_and_grad(p, nullptr, batch, 0.0, opt), Error);
}

TEST_CASE("loss grows with the noise level") {
  const auto p = tiny_params(4);
  const auto batch = random_batch(5, 2, 8, 5);
  CHECK(eval_loss(p, nullptr, batch, 0.31) > eval_loss(p, nullptr, batch, 0.3));
}

TEST_CASE("analytic gradients match central finite differences (eval batchnorm)") {
  auto p = tiny_params(7);
  const auto batch = random_batch(4, 2, 8, 8);
  const double sigma2 = 0.4;
  const auto lg = loss_and_grad(p, nullptr, batch, sigma2, {});
  auto grad = lg.grad;
  auto values = trainable_views(p);
  auto grads = trainable_views(grad);
  const double h = 1e-4;
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<double> numeric, analytic;
    for (std::size_t i = 0; i < values[v].values.size(); ++i) {
      const double keep = values[v].values[i];
      values[v].values[i] = keep + h;
      const double up = eval_loss(p, nullptr, batch, sigma2);
      values[v].values[i] = keep - h;
      const double down = eval_loss(p, nullptr, batch, sigma2);
      values[v].values[i] = keep;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(grads[v].values[i]);
    }
    INFO(std::string(values[v].name) << " analytic " << norm(analytic) << " numeric " << norm(numeric));
    CHECK(relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("analytic gradients match finite differences with batch statistics") {
  auto p = tiny_params(9);
  const auto batch = random_batch(6, 2, 8, 10);
  const double sigma2 = 0.4;
  ForwardOptions opt;
  opt.mode = Mode::kTrain;
  const auto lg = loss_and_grad(p, nullptr, batch, sigma2, opt);
  auto grad = lg.grad;
  auto values = trainable_views(p);
  auto grads = trainable_views(grad);
  const double h = 1e-4;
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<double> numeric, analytic;
    for (std::size_t i = 0; i < values[v].values.size(); ++i) {
      const double keep = values[v].values[i];
      values[v].values[i] = keep + h;
      const double up = eval_loss(p, nullptr, batch, sigma2, Mode::kTrain);
      values[v].values[i] = keep - h;
      const double down = eval_loss(p, nullptr, batch, sigma2, Mode::kTrain);
      values[v].values[i] = keep;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(grads[v].values[i]);
    }
    INFO(std::string(values[v].name) << " analytic " << norm(analytic) << " numeric " << norm(numeric));
    CHECK(relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("quantized gradients match finite differences of the STE surrogate") {
  auto p = tiny_params(11);
  const auto batch = random_batch(4, 2, 8, 12);
  const double sigma2 = 0.4;
  LsqState q = init_lsq_state(p, QuantConfig{{4, 8, 2, 16}});
  const auto lg = loss_and_grad(p, &q, batch, sigma2, {});

  // Surrogate weights: s * (clamp(w / s) + r) with the rounding residual r
  // frozen at the base point (zero where the weight saturates).
  const auto base = p;
  std::array<std::vector<double>, kNumLayers> residual;
  std::array<std::vector<bool>, kNumLayers> saturated;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& w = *base.layer_weights()[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double v = w.data()[i] / q.step[l];
      const int bits = q.config.bits[l];
      const bool sat = v <= grid_min(bits) || v >= grid_max(bits);
      saturated[l].push_back(sat);
      residual[l].push_back(sat ? 0.0 : std::nearbyint(v) - v);
    }
  }
  auto surrogate_loss = [&](const NetworkParams& params, const std::array<double, kNumLayers>& step) {
    auto s = params;
    auto dst = s.layer_weights();
    for (std::size_t l = 0; l < kNumLayers; ++l) {
      const int bits = q.config.bits[l];
      for (Eigen::Index i = 0; i < dst[l]->size(); ++i) {
        const double v = std::clamp((*params.layer_weights()[l]).data()[i] / step[l], grid_min(bits), grid_max(bits));
        dst[l]->data()[i] = step[l] * (v + residual[l][static_cast<std::size_t>(i)]);
      }
    }
    return eval_loss(s, nullptr, batch, sigma2);
  };

  // The surrogate reproduces the quantized forward pass at the base point.
  CHECK(surrogate_loss(p, q.step) == doctest::Approx(lg.loss).epsilon(1e-12));

  const double h = 1e-6;
  auto grad = lg.grad;
  auto values = trainable_views(p);
  auto grads = trainable_views(grad);
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<double> numeric, analytic;
    for (std::size_t i = 0; i < values[v].values.size(); ++i) {
      const double keep = values[v].values[i];
      values[v].values[i] = keep + h;
      const double up = surrogate_loss(p, q.step);
      values[v].values[i] = keep - h;
      const double down = surrogate_loss(p, q.step);
      values[v].values[i] = keep;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(grads[v].values[i]);
    }
    INFO(std::string(values[v].name) << " analytic " << norm(analytic) << " numeric " << norm(numeric));
    CHECK(relative_error(analytic, numeric) < 1e-4);
  }

  std::size_t gated = 0;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& g = *grad.layer_weights()[l];
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (saturated[l][static_cast<std::size_t>(i)]) {
        CHECK(g.data()[i] == 0.0);
        ++gated;
      }
    }
  }
  CHECK(gated > 0);

  for (std::size_t l = 0; l < kNumLayers; ++l) {
    auto up = q.step, down = q.step;
    const double hs = 1e-6 * q.step[l];
    up[l] += hs;
    down[l] -= hs;
    const double fd = (surrogate_loss(p, up) - surrogate_loss(p, down)) / (2 * hs);
    const double n = static_cast<double>(base.layer_weights()[l]->size());
    const double scale = 1.0 / std::sqrt(n * grid_max(q.config.bits[l]));
    INFO("layer " << l);
    CHECK(lg.step_grad[l] == doctest::Approx(scale * fd).epsilon(1e-4));
  }
}

TEST_CASE("batch order does not change evaluation") {
  const auto p = tiny_params(13);
  auto batch = random_batch(9, 2, 8, 14);
  const auto a = evaluate(p, nullptr, batch, 0.2, 1.0);
  std::reverse(batch.begin(), batch.end());
  const auto b = evaluate(p, nullptr, batch, 0.2, 1.0);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-13));
  CHECK(a.std_error == doctest::Approx(b.std_error).epsilon(1e-12));
  const auto one = evaluate(p, nullptr, std::span<const ChannelMatrix>(batch.data(), 1), 0.2, 1.0);
  CHECK(one.std_error == 0.0);
  CHECK_THROWS_AS(evaluate(p, nullptr, std::span<const ChannelMatrix>{}, 0.2, 1.0), Error);
}

TEST_CASE("running statistics follow the momentum rule") {
  auto p = tiny_params(15);
  const auto before = p.bn1.running_mean;
  BatchMoments m;
  for (int i = 0; i < 3; ++i) {
    const auto n = (i == 0 ? p.bn_conv : i == 1 ? p.bn1 : p.bn2).gamma.size();
    m.mean[i] = Eigen::VectorXd::Constant(n, 2.0);
    m.var_unbiased[i] = Eigen::VectorXd::Constant(n, 4.0);
  }
  const auto var_before = p.bn1.running_var;
  update_running_stats(p, m);
  for (Eigen::Index i = 0; i < before.size(); ++i) {
    CHECK(p.bn1.running_mean(i) == doctest::Approx(0.9 * before(i) + 0.2));
    CHECK(p.bn1.running_var(i) == doctest::Approx(0.9 * var_before(i) + 0.4));
  }
}

TEST_CASE("batch moments use the unbiased variance") {
  const auto p = tiny_params(16);
  const auto batch = random_batch(5, 2, 8, 17);
  ForwardOptions opt;
  opt.mode = Mode::kTrain;
  const auto out = forward(p, nullptr, batch, opt);
  REQUIRE(out.moments);
  // Recompute FCL3's input statistics is out of reach here; check shape and positivity.
  for (int i = 0; i < 3; ++i) CHECK((out.moments->var_unbiased[i].array() >= 0).all());
  CHECK(out.moments->mean[0].size() == 4);
  CHECK(out.moments->mean[1].size() == 16);
}

TEST_CASE("post-training quantization and fake-quantized export") {
  const auto p = tiny_params(18);
  const auto q16 = ptq_quantize(p, QuantConfig{{16, 16, 16, 16}});
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto& w = *p.layer_weights()[l];
    const double bound = w.cwiseAbs().maxCoeff() / 32767.0 / 2.0;
    CHECK((*q16.layer_weights()[l] - w).cwiseAbs().maxCoeff() <= bound * (1 + 1e-12));
  }
  CHECK(q16.bn1.gamma == p.bn1.gamma);
  CHECK(q16.fc1_b == p.fc1_b);

  const auto state = init_lsq_state(p, QuantConfig{{2, 4, 8, 16}});
  const auto exported = apply_fake_quant(p, state);
  const auto batch = random_batch(3, 2, 8, 19);
  const auto a = forward(p, &state, batch, {});
  const auto b = forward(exported, nullptr, batch, {});
  for (std::size_t i = 0; i < 3; ++i) CHECK((a.precoders[i] - b.precoders[i]).norm() < 1e-12);
}

TEST_CASE("checkpoints round-trip exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "mmpc_test_net";
  std::filesystem::create_directories(dir);
  const auto p = tiny_params(20);
  save_checkpoint(dir / "fp.mmpn", {p, std::nullopt});
  const auto back = load_checkpoint(dir / "fp.mmpn");
  CHECK(back.params == p);
  CHECK_FALSE(back.quant.has_value());

  auto q = init_lsq_state(p, QuantConfig{{2, 4, 8, 16}});
  q.step[1] = 0.1234567890123;
  save_checkpoint(dir / "q.mmpn", {p, q});
  const auto qb = load_checkpoint(dir / "q.mmpn");
  REQUIRE(qb.quant.has_value());
  CHECK(qb.quant->config == q.config);
  CHECK(qb.quant->step == q.step);

  std::ifstream in(dir / "q.mmpn", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  std::ofstream(dir / "bad.mmpn", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.mmpn"), FormatError);
  bytes[0] = 'Z';
  std::ofstream(dir / "bad2.mmpn", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad2.mmpn"), "unsupported format", FormatError);
}
