#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mmpc/error.hpp"
#include "mmpc/precoder.hpp"

using namespace mmpc;

namespace {

ChannelMatrix random_channel(std::mt19937_64& rng, Eigen::Index n_u, Eigen::Index n_t) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  ChannelMatrix h(n_u, n_t);
  for (Eigen::Index i = 0; i < n_u; ++i) {
    for (Eigen::Index j = 0; j < n_t; ++j) h(i, j) = cdouble(n(rng), n(rng));
  }
  return h;
}

Eigen::MatrixXcd random_unitary(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_channel(rng, n, n));
  return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

// sigma^2 for 15 dB with E||h||^2 = N_T and p_max = 1.
double sigma2_15db(Eigen::Index n_t) { return static_cast<double>(n_t) / std::pow(10.0, 1.5); }

}  // namespace

TEST_CASE("sinr hand examples") {
  ChannelMatrix h(1, 2);
  h << 1.0, 0.0;
  PrecodingMatrix w(2, 1);
  w << 1.0, 0.0;
  CHECK(sinr(h, w, 1.0, 0) == doctest::Approx(1.0));
  CHECK(sinr(h, PrecodingMatrix::Zero(2, 1), 1.0, 0) == 0.0);

  ChannelMatrix eye = ChannelMatrix::Identity(2, 2);
  PrecodingMatrix w2 = PrecodingMatrix::Constant(2, 2, cdouble(1.0 / std::sqrt(2.0), 0.0));
  CHECK(sinr(eye, w2, 0.5, 0) == doctest::Approx(0.5));
  CHECK(sinr(eye, w2, 0.5, 1) == doctest::Approx(0.5));
  CHECK(sum_rate(eye, w2, 0.5) == doctest::Approx(2.0 * std::log2(1.5)).epsilon(1e-12));
  CHECK(sum_rate(eye, w2, 0.5) == doctest::Approx(1.1699).epsilon(1e-4));

  CHECK_THROWS_AS(sinr(eye, w2, 0.5, 2), Error);
  CHECK_THROWS_AS(sinr(eye, PrecodingMatrix::Zero(3, 2), 0.5, 0), Error);
}

TEST_CASE("sum rate of unit SINRs and of a zero precoder") {
  ChannelMatrix h = ChannelMatrix::Identity(4, 4);
  PrecodingMatrix w = PrecodingMatrix::Identity(4, 4);
  CHECK(sum_rate(h, w, 1.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(sum_rate(h, PrecodingMatrix::Zero(4, 4), 1.0) == 0.0);
}

TEST_CASE("rate is invariant to a common unitary rotation and to user relabeling") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = random_channel(rng, 4, 16);
    const auto w = zf_precoder(random_channel(rng, 4, 16), 1.0);
    const double r = sum_rate(h, w, 0.3);
    const auto q = random_unitary(rng, 16);
    CHECK(sum_rate(h * q, q.adjoint() * w, 0.3) == doctest::Approx(r).epsilon(1e-12));

    Eigen::PermutationMatrix<Eigen::Dynamic> p(4);
    p.setIdentity();
    std::shuffle(p.indices().data(), p.indices().data() + 4, rng);
    CHECK(sum_rate(p * h, w * p.transpose(), 0.3) == doctest::Approx(r).epsilon(1e-12));
  }
}

TEST_CASE("ZF nulls interference with equal per-user power") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = random_channel(rng, 4, 64);
    const auto w = zf_precoder(h, 2.0);
    CHECK(total_power(w) == doctest::Approx(2.0).epsilon(1e-12));
    for (Eigen::Index u = 0; u < 4; ++u) {
      CHECK(w.col(u).squaredNorm() == doctest::Approx(0.5).epsilon(1e-12));
      for (Eigen::Index j = 0; j < 4; ++j) {
        if (j == u) continue;
        const double g = std::abs((h.row(u) * w.col(j))(0));
        CHECK(g < 1e-8 * h.row(u).norm() * w.col(j).norm());
      }
    }
  }
}

TEST_CASE("ZF on orthonormal rows points along each user's channel") {
  std::mt19937_64 rng(9);
  const auto q = random_unitary(rng, 8);
  const ChannelMatrix h = q.topRows(3);
  const auto w = zf_precoder(h, 3.0);
  for (Eigen::Index u = 0; u < 3; ++u) {
    const Eigen::VectorXcd dir = h.row(u).adjoint();
    const double align = std::abs(dir.dot(w.col(u))) / (dir.norm() * w.col(u).norm());
    CHECK(align == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.col(u).squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ZF rejects rank-deficient channels") {
  std::mt19937_64 rng(3);
  auto h = random_channel(rng, 4, 64);
  h.row(2) = h.row(1);
  CHECK_THROWS_WITH_AS(zf_precoder(h, 1.0), "singular channel", SingularChannelError);
  CHECK_THROWS_AS(zf_precoder(random_channel(rng, 5, 4), 1.0), SingularChannelError);
  CHECK_FALSE(has_full_row_rank(h));
}

TEST_CASE("single-user ZF equals MRT") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_channel(rng, 1, 64);
    const double zf = sum_rate(h, zf_precoder(h, 1.0), 0.7);
    const double mrt = sum_rate(h, mrt_precoder(h, 1.0), 0.7);
    CHECK(std::abs(zf - mrt) < 1e-10);
  }
}

TEST_CASE("single-user WMMSE converges to the matched filter") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = random_channel(rng, 1, 64);
    const double sigma2 = 0.4;
    const auto rep = wmmse_precoder(h, 2.0, sigma2, WmmseOptions{}, PrecodingMatrix::Constant(64, 1, cdouble(0.1, 0.0)));
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);
    CHECK(sum_rate(h, rep.precoder, sigma2) ==
          doctest::Approx(std::log2(1.0 + 2.0 * h.squaredNorm() / sigma2)).epsilon(1e-10));
  }
}

TEST_CASE("WMMSE is monotone, feasible and usually beats ZF") {
  std::mt19937_64 rng(21);
  const double sigma2 = sigma2_15db(64);
  int wins = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = random_channel(rng, 4, 64);
    const auto rep = wmmse_precoder(h, 1.0, sigma2);
    for (std::size_t t = 1; t < rep.rate_history.size(); ++t) {
      CHECK(rep.rate_history[t] >= rep.rate_history[t - 1] - 1e-9);
    }
    CHECK(total_power(rep.precoder) <= 1.0 * (1.0 + 1e-9));
    CHECK(total_power(rep.precoder) == doctest::Approx(1.0).epsilon(1e-8));
    wins += sum_rate(h, rep.precoder, sigma2) >= sum_rate(h, zf_precoder(h, 1.0), sigma2);
  }
  CHECK(wins >= 190);
}

TEST_CASE("WMMSE input validation and iteration cap") {
  std::mt19937_64 rng(2);
  const auto h = random_channel(rng, 4, 16);
  CHECK_THROWS_AS(wmmse_precoder(h, 1.0, 0.0), Error);
  CHECK_THROWS_AS(wmmse_precoder(h, 1.0, 0.1, {}, PrecodingMatrix::Constant(16, 4, cdouble(1.0, 0.0))), Error);
  const auto capped = wmmse_precoder(h, 1.0, 0.01, WmmseOptions{0.0, 3});
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 3);
  CHECK(capped.rate_history.size() == 4);
}

TEST_CASE("average_iterations") {
  std::mt19937_64 rng(8);
  Dataset d;
  d.scenarios = {random_channel(rng, 4, 16)};
  d.sigma2 = 0.5;
  const auto single = wmmse_precoder(d.scenarios[0], 1.0, 0.5);
  CHECK(average_iterations(d, WmmseOptions{}) == static_cast<double>(single.iterations));

  d.scenarios.push_back(random_channel(rng, 4, 16));
  WmmseOptions loose;
  loose.epsilon = std::numeric_limits<double>::infinity();
  CHECK(average_iterations(d, loose) == 1.0);

  Dataset empty;
  CHECK_THROWS_AS(average_iterations(empty, WmmseOptions{}), Error);
}

TEST_CASE("mean and standard error") {
  const double one[] = {18.9};
  CHECK(mean_and_stderr(one).std_error == 0.0);
  const double four[] = {18.8, 18.9, 19.0, 18.9};
  const auto s = mean_and_stderr(four);
  CHECK(s.mean == doctest::Approx(18.9));
  CHECK(s.std_error == doctest::Approx(0.0408).epsilon(1e-3));
}
