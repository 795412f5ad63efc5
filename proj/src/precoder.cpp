#include "mmpc/precoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmpc/error.hpp"

namespace mmpc {

namespace {

void check_shapes(const ChannelMatrix& h, const PrecodingMatrix& w) {
  if (h.cols() != w.rows() || h.rows() != w.cols()) {
    throw Error("channel and precoder dimensions disagree");
  }
}

// Sum rate of the cross-gain matrix G = H W.
double rate_of_gains(const Eigen::MatrixXcd& g, double sigma2) {
  double rate = 0.0;
  for (Eigen::Index u = 0; u < g.rows(); ++u) {
    const double total = g.row(u).cwiseAbs2().sum();
    const double signal = std::norm(g(u, u));
    rate += std::log2(1.0 + signal / (total - signal + sigma2));
  }
  return rate;
}

constexpr double kRankTolerance = 1e-10;

}  // namespace

double sinr(const ChannelMatrix& h, const PrecodingMatrix& w, double sigma2, std::size_t user) {
  check_shapes(h, w);
  if (user >= static_cast<std::size_t>(h.rows())) throw Error("user index out of range");
  if (!(sigma2 > 0.0)) throw Error("sigma2 must be positive");
  const auto u = static_cast<Eigen::Index>(user);
  const Eigen::RowVectorXcd g = h.row(u) * w;
  const double signal = std::norm(g(u));
  return signal / (g.cwiseAbs2().sum() - signal + sigma2);
}

double sum_rate(const ChannelMatrix& h, const PrecodingMatrix& w, double sigma2) {
  check_shapes(h, w);
  if (!(sigma2 > 0.0)) throw Error("sigma2 must be positive");
  return rate_of_gains(h * w, sigma2);
}

double total_power(const PrecodingMatrix& w) { return w.squaredNorm(); }

bool has_full_row_rank(const ChannelMatrix& h) {
  if (h.rows() > h.cols()) return false;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h);
  const auto& s = svd.singularValues();
  return s.size() > 0 && s(0) > 0.0 && s(s.size() - 1) > kRankTolerance * s(0);
}

PrecodingMatrix zf_precoder(const ChannelMatrix& h, double p_max) {
  if (h.rows() > h.cols()) throw SingularChannelError();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0) || s(s.size() - 1) <= kRankTolerance * s(0)) {
    throw SingularChannelError();
  }
  // Pseudo-inverse V S^-1 U^H, so that H * pinv = I.
  PrecodingMatrix w = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
  const double per_user = std::sqrt(p_max / static_cast<double>(h.rows()));
  for (Eigen::Index u = 0; u < w.cols(); ++u) w.col(u) *= per_user / w.col(u).norm();
  return w;
}

PrecodingMatrix mrt_precoder(const ChannelMatrix& h, double p_max) {
  PrecodingMatrix w = h.adjoint();
  const double norm = w.norm();
  if (norm == 0.0) throw Error("all-zero channel");
  return w * (std::sqrt(p_max) / norm);
}

namespace {

// Precoder step of WMMSE: W(mu) = (A + mu I)^-1 B with A Hermitian PSD of
// rank <= N_U. Works in A's eigenbasis so the power is cheap to evaluate
// for any mu and the mu = 0 case is the pseudo-inverse solution.
class PrecoderSolve {
 public:
  PrecoderSolve(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) : eig_(a) {
    d_ = eig_.eigenvalues().cwiseMax(0.0);
    c_ = eig_.eigenvectors().adjoint() * b;
    const double tol = d_.maxCoeff() * 1e-12;
    for (Eigen::Index i = 0; i < d_.size(); ++i) {
      if (d_(i) <= tol) c_.row(i).setZero();
    }
    row_energy_ = c_.rowwise().squaredNorm();
  }

  double power(double mu) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < d_.size(); ++i) {
      if (row_energy_(i) == 0.0) continue;
      const double den = d_(i) + mu;
      p += row_energy_(i) / (den * den);
    }
    return p;
  }

  Eigen::MatrixXcd solve(double mu) const {
    Eigen::VectorXd inv(d_.size());
    for (Eigen::Index i = 0; i < d_.size(); ++i) {
      inv(i) = row_energy_(i) == 0.0 ? 0.0 : 1.0 / (d_(i) + mu);
    }
    return eig_.eigenvectors() * (inv.asDiagonal() * c_);
  }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig_;
  Eigen::VectorXd d_;
  Eigen::MatrixXcd c_;
  Eigen::VectorXd row_energy_;
};

PrecodingMatrix wmmse_step(const ChannelMatrix& h, const PrecodingMatrix& w, double p_max,
                           double sigma2) {
  const Eigen::Index n_u = h.rows();
  const Eigen::Index n_t = h.cols();
  const Eigen::MatrixXcd g = h * w;  // g(k, j) = h_k^H w_j

  Eigen::VectorXcd recv(n_u);
  Eigen::VectorXd weight(n_u);
  for (Eigen::Index k = 0; k < n_u; ++k) {
    const double total = g.row(k).cwiseAbs2().sum() + sigma2;
    recv(k) = g(k, k) / total;
    const double mse = 1.0 - (std::conj(recv(k)) * g(k, k)).real();
    weight(k) = 1.0 / mse;
  }

  // A = sum_j weight_j |recv_j|^2 h_j h_j^H, where h_j = conj(row j)^T.
  const Eigen::VectorXd coef = weight.cwiseProduct(recv.cwiseAbs2());
  Eigen::MatrixXcd a = h.adjoint() * coef.asDiagonal() * h;
  a = (a + a.adjoint().eval()) / 2.0;
  Eigen::MatrixXcd b(n_t, n_u);
  for (Eigen::Index k = 0; k < n_u; ++k) {
    b.col(k) = (weight(k) * recv(k)) * h.row(k).adjoint();
  }

  const PrecoderSolve solve(a, b);
  const double unconstrained = solve.power(0.0);
  if (unconstrained <= p_max) {
    // Scaling every column up raises every SINR, so use the full budget.
    PrecodingMatrix next = solve.solve(0.0);
    const double power = next.squaredNorm();
    if (power > 0.0) next *= std::sqrt(p_max / power);
    return next;
  }

  double lo = 0.0;
  double hi = std::max(1e-12, a.diagonal().real().maxCoeff() * 1e-6);
  while (solve.power(hi) >= p_max) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double p = solve.power(mid);
    if (std::abs(p - p_max) < 1e-13 * p_max) {
      hi = mid;
      break;
    }
    (p > p_max ? lo : hi) = mid;
  }
  PrecodingMatrix next = solve.solve(hi);
  next *= std::sqrt(p_max / next.squaredNorm());
  return next;
}

}  // namespace

WmmseReport wmmse_precoder(const ChannelMatrix& h, double p_max, double sigma2,
                           const WmmseOptions& options, const std::optional<PrecodingMatrix>& init) {
  if (!(sigma2 > 0.0)) throw Error("sigma2 must be positive");
  if (!(p_max > 0.0)) throw Error("p_max must be positive");
  if (options.max_iter == 0) throw Error("max_iter must be positive");

  PrecodingMatrix w;
  if (init) {
    check_shapes(h, *init);
    if (total_power(*init) > p_max * (1.0 + 1e-9)) throw Error("initial precoder exceeds p_max");
    w = *init;
  } else {
    w = has_full_row_rank(h) ? zf_precoder(h, p_max) : mrt_precoder(h, p_max);
  }

  WmmseReport report;
  double previous = sum_rate(h, w, sigma2);
  report.rate_history.push_back(previous);
  PrecodingMatrix best = w;
  double best_rate = previous;

  for (std::size_t t = 1; t <= options.max_iter; ++t) {
    w = wmmse_step(h, w, p_max, sigma2);
    const double rate = sum_rate(h, w, sigma2);
    report.rate_history.push_back(rate);
    report.iterations = t;
    if (rate > best_rate) {
      best_rate = rate;
      best = w;
    }
    if (std::abs(rate - previous) < options.epsilon) {
      report.converged = true;
      break;
    }
    previous = rate;
  }
  report.precoder = report.converged ? w : best;
  return report;
}

RateStats mean_and_stderr(std::span<const double> values) {
  RateStats stats;
  stats.count = values.size();
  if (values.empty()) return stats;
  const double n = static_cast<double>(values.size());
  stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
    stats.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return stats;
}

double average_iterations(const Dataset& dataset, const WmmseOptions& options) {
  const auto idx = dataset.indices(Split::kTest);
  if (idx.empty()) throw Error("empty dataset");
  if (!dataset.has_noise()) throw Error("dataset noise level is not calibrated");
  double total = 0.0;
  for (auto i : idx) {
    total += static_cast<double>(
        wmmse_precoder(dataset.scenarios[i], dataset.p_max, dataset.sigma2, options).iterations);
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace mmpc
