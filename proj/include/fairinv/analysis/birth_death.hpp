#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fairinv::analysis {

/// Lazy birth-death chain on {0..M} with a mean-reverting tilt of size delta.
///
/// Below M/2 the chain steps up with probability p + delta/2 and down with
/// p - delta/2; above M/2 the roles swap; at M/2 both moves have probability
/// p - delta/2. The boundary states only move inward. With delta = 0 this is
/// the symmetric chain and M may be odd.
struct BirthDeathChain {
  int states_max = 0;  // M
  double p = 0.25;
  double delta = 0.0;

  void validate() const {
    if (states_max < 1) throw std::invalid_argument("birth-death: M must be >= 1");
    if (!(p > 0.0 && p <= 0.5)) throw std::invalid_argument("birth-death: p must lie in (0, 1/2]");
    if (!(delta >= 0.0 && delta < 2.0 * p)) throw std::invalid_argument("birth-death: delta must lie in [0, 2p)");
    if (delta > 0.0 && states_max % 2 != 0) throw std::invalid_argument("birth-death: M must be even when delta > 0");
  }

  /// (2p + delta) / (2p - delta).
  [[nodiscard]] double rho() const { return (2.0 * p + delta) / (2.0 * p - delta); }

  /// Dense row-stochastic transition matrix.
  [[nodiscard]] Eigen::MatrixXd transition_matrix() const {
    validate();
    const int m = states_max;
    const int n = m + 1;
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    const double toward = p + delta / 2.0;
    const double away = p - delta / 2.0;
    for (int i = 0; i < n; ++i) {
      double up = 0.0;
      double down = 0.0;
      if (delta == 0.0) {
        up = i < m ? p : 0.0;
        down = i > 0 ? p : 0.0;
      } else if (2 * i < m) {
        up = toward;
        down = i > 0 ? away : 0.0;
      } else if (2 * i == m) {
        up = away;
        down = away;
      } else {
        up = i < m ? away : 0.0;
        down = toward;
      }
      if (i < m) P(i, i + 1) = up;
      if (i > 0) P(i, i - 1) = down;
      P(i, i) = 1.0 - up - down;
    }
    return P;
  }
};

/// Stationary law from the product-form expression.
///
/// pi[0] = pi[M] = (2 (rho^{M/2} - 1)/(rho - 1) + rho^{M/2})^{-1},
/// pi[i] = rho^i pi[0] up to M/2 and rho^{M-i} pi[0] above it. Evaluated in
/// log space so large rho^{M/2} does not overflow. delta = 0 gives the
/// uniform law for any M.
inline std::vector<double> birth_death_stationary_closed_form(double p, double delta, int m) {
  BirthDeathChain{m, p, delta}.validate();
  std::vector<double> pi(static_cast<std::size_t>(m) + 1);
  if (delta == 0.0) {
    for (auto& x : pi) x = 1.0 / static_cast<double>(m + 1);
    return pi;
  }
  const double rho = (2.0 * p + delta) / (2.0 * p - delta);
  const double log_rho = std::log(rho);
  const int half = m / 2;
  // log of the normalizer: 2 (rho^h - 1)/(rho - 1) + rho^h
  //   = rho^h * (1 + 2 (1 - rho^{-h}) / (rho - 1))
  const double log_norm = half * log_rho + std::log1p(-2.0 * std::expm1(-half * log_rho) / (rho - 1.0));
  for (int i = 0; i <= m; ++i) {
    const int e = i <= half ? i : m - i;
    pi[static_cast<std::size_t>(i)] = std::exp(e * log_rho - log_norm);
  }
  return pi;
}

/// Stationary law by a direct linear solve of pi P = pi, sum pi = 1.
///
/// One balance equation is replaced by the normalization row; the system is
/// solved with full-pivot LU. If the residual exceeds 1e-12 the result is
/// refined by power iteration (at most 10^6 sweeps). Throws when neither
/// route reaches the tolerance.
inline std::vector<double> birth_death_stationary_solve(const BirthDeathChain& chain) {
  const Eigen::MatrixXd P = chain.transition_matrix();
  const auto n = P.rows();
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);

  auto residual = [&](const Eigen::VectorXd& v) {
    return std::max((P.transpose() * v - v).cwiseAbs().maxCoeff(), std::abs(v.sum() - 1.0));
  };
  if (!pi.allFinite() || residual(pi) > 1e-12) {
    pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd Pt = P.transpose();
    for (int it = 0; it < 1'000'000 && residual(pi) > 1e-12; ++it) {
      pi = Pt * pi;
      pi /= pi.sum();
    }
    if (residual(pi) > 1e-12) throw std::runtime_error("birth-death: stationary solve did not converge");
  }
  return {pi.data(), pi.data() + n};
}

}  // namespace fairinv::analysis
