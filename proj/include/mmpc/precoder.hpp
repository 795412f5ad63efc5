#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mmpc/channel.hpp"

namespace mmpc {

// N_T x N_U, column u = w_u.
using PrecodingMatrix = Eigen::MatrixXcd;

double sinr(const ChannelMatrix& h, const PrecodingMatrix& w, double sigma2, std::size_t user);

// Sum over users of log2(1 + SINR_u), in bit/s/Hz.
double sum_rate(const ChannelMatrix& h, const PrecodingMatrix& w, double sigma2);

double total_power(const PrecodingMatrix& w);

// Conjugate-transpose pseudo-inverse directions with equal per-user power
// p_max / N_U. Throws SingularChannelError when H lacks full row rank.
PrecodingMatrix zf_precoder(const ChannelMatrix& h, double p_max);

// Matched filter columns h_u scaled to total power p_max.
PrecodingMatrix mrt_precoder(const ChannelMatrix& h, double p_max);

bool has_full_row_rank(const ChannelMatrix& h);

struct WmmseOptions {
  double epsilon = 1e-5;  // absolute sum-rate change that stops the iteration
  std::size_t max_iter = 1000;
};

struct WmmseReport {
  PrecodingMatrix precoder;
  std::size_t iterations = 0;
  // Entry 0 is the rate of the initial point, entry t the rate after t updates.
  std::vector<double> rate_history;
  bool converged = false;
};

// Block coordinate descent on the weighted MSE reformulation. Without an
// explicit init the ZF solution is used (MRT when H is rank deficient).
WmmseReport wmmse_precoder(const ChannelMatrix& h, double p_max, double sigma2,
                           const WmmseOptions& options = {},
                           const std::optional<PrecodingMatrix>& init = std::nullopt);

struct RateStats {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

// Mean and standard error of the mean (sample std / sqrt(n); 0 when n == 1).
RateStats mean_and_stderr(std::span<const double> values);

// Mean WMMSE iteration count over the test split (whole dataset if unsplit).
double average_iterations(const Dataset& dataset, const WmmseOptions& options);

}  // namespace mmpc
