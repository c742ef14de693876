#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairinv/inventory.hpp"
#include "fairinv/metrics.hpp"

namespace fairinv {

/// Fluid fair-division instance: per-type weights, type populations and
/// per-resource supplies (all strictly positive).
struct EgInstance {
  WeightTable weights;
  std::vector<double> type_means;    // mu_{N, theta}
  std::vector<double> supply_means;  // mu_{B, k}

  [[nodiscard]] std::size_t types() const noexcept { return weights.types; }
  [[nodiscard]] std::size_t resources() const noexcept { return weights.resources; }

  void validate() const {
    if (types() == 0 || resources() == 0) throw std::invalid_argument("eg: empty instance");
    if (type_means.size() != types()) throw std::invalid_argument("eg: type_means length must equal the type count");
    if (supply_means.size() != resources())
      throw std::invalid_argument("eg: supply_means length must equal the resource count");
    for (double x : weights.w)
      if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("eg: weights must be finite and positive");
    for (double x : type_means)
      if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("eg: type means must be positive");
    for (double x : supply_means)
      if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("eg: supply means must be positive");
  }

  /// sum_theta mu_{N,theta} log(w_theta . a_theta)
  [[nodiscard]] double objective(const AllocationMatrix& a) const {
    double f = 0.0;
    for (std::size_t th = 0; th < types(); ++th) f += type_means[th] * std::log(weights.utility(th, a.row(th)));
    return f;
  }
};

struct EgSolution {
  AllocationMatrix allocations;
  std::vector<double> dual_prices;
  double kkt_residual = 0.0;
  int newton_steps = 0;
};

/// Largest violation of the optimality conditions, split by kind.
struct KktReport {
  double stationarity = 0.0;   // max |a (price - w/u)|, a budget share
  double dual = 0.0;           // max (w/u - price)^+ / price, and negative prices
  double primal = 0.0;         // max (sum_theta n a - mu_B)^+ / mu_B, and negative entries
  double complementary = 0.0;  // max price * slack / (sum_k price mu_B)
  [[nodiscard]] double max() const { return std::max({stationarity, dual, primal, complementary}); }
};

/// Checks a candidate against the optimality conditions of the fluid program.
///
/// With u_theta = w_theta . a_theta, optimality means w_{theta,k}/u_theta <= price_k
/// everywhere with equality where a_{theta,k} > 0, feasible budgets, and a
/// zero price on any resource with slack. Violations are scaled to be unitless.
inline KktReport check_kkt(const EgInstance& inst, const AllocationMatrix& a, const std::vector<double>& prices) {
  const std::size_t T = inst.types(), K = inst.resources();
  if (a.types != T || a.resources != K || prices.size() != K) throw std::invalid_argument("check_kkt: dimension mismatch");
  KktReport r;
  double pb = 0.0;
  for (std::size_t k = 0; k < K; ++k) pb += std::max(prices[k], 0.0) * inst.supply_means[k];
  for (std::size_t k = 0; k < K; ++k) {
    if (prices[k] < 0.0) r.dual = std::max(r.dual, -prices[k]);
    double used = 0.0;
    for (std::size_t th = 0; th < T; ++th) {
      const double x = a(th, k);
      if (x < 0.0) r.primal = std::max(r.primal, -x);
      used += inst.type_means[th] * x;
    }
    const double slack = inst.supply_means[k] - used;
    r.primal = std::max(r.primal, std::max(-slack, 0.0) / inst.supply_means[k]);
    if (pb > 0.0) r.complementary = std::max(r.complementary, std::abs(prices[k] * slack) / pb);
  }
  for (std::size_t th = 0; th < T; ++th) {
    const double u = inst.weights.utility(th, a.row(th));
    if (!(u > 0.0)) {
      r.stationarity = std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double g = inst.weights(th, k) / u;
      const double p = prices[k] > 0.0 ? prices[k] : 1.0;
      r.dual = std::max(r.dual, std::max(g - prices[k], 0.0) / p);
      r.stationarity = std::max(r.stationarity, std::abs(a(th, k) * (prices[k] - g)));
    }
  }
  return r;
}

/// Smallest dual-feasible prices for an allocation: price_k = max_theta w_{theta,k}/u_theta.
inline std::vector<double> implied_prices(const EgInstance& inst, const AllocationMatrix& a) {
  std::vector<double> p(inst.resources(), 0.0);
  for (std::size_t th = 0; th < inst.types(); ++th) {
    const double u = inst.weights.utility(th, a.row(th));
    for (std::size_t k = 0; k < inst.resources(); ++k) p[k] = std::max(p[k], inst.weights(th, k) / u);
  }
  return p;
}

struct EgOptions {
  double tolerance = 1e-8;  // required KKT residual
  int max_newton_steps = 5000;
};

namespace detail {

// Primal barrier method: Newton steps on
//   -t sum n_theta log u_theta - sum n_theta log a_{theta,k} - sum log slack_k
// with t growing tenfold per stage, then budgets scaled to be tight.
inline EgSolution solve_barrier(const EgInstance& inst, const EgOptions& opt) {
  const std::size_t T = inst.types(), K = inst.resources();
  const auto n = static_cast<Eigen::Index>(T * K);
  const auto idx = [K](std::size_t th, std::size_t k) { return static_cast<Eigen::Index>(th * K + k); };
  double pop = 0.0;
  for (double x : inst.type_means) pop += x;

  Eigen::VectorXd a(n);
  for (std::size_t th = 0; th < T; ++th)
    for (std::size_t k = 0; k < K; ++k) a(idx(th, k)) = inst.supply_means[k] / (2.0 * pop);

  auto slack = [&](const Eigen::VectorXd& v, std::size_t k) {
    double used = 0.0;
    for (std::size_t th = 0; th < T; ++th) used += inst.type_means[th] * v(idx(th, k));
    return inst.supply_means[k] - used;
  };
  auto utility = [&](const Eigen::VectorXd& v, std::size_t th) {
    double u = 0.0;
    for (std::size_t k = 0; k < K; ++k) u += inst.weights(th, k) * v(idx(th, k));
    return u;
  };
  // change of the barrier along a + step d, accumulated from log1p terms so
  // small decreases stay visible when t is large; +inf leaves the domain
  auto barrier_change = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& d, double step, double t) {
    double df = 0.0;
    for (std::size_t th = 0; th < T; ++th) {
      const double u = utility(v, th);
      const double du = utility(d, th);
      const double ru = step * du / u;
      if (!(ru > -1.0)) return std::numeric_limits<double>::infinity();
      df -= t * inst.type_means[th] * std::log1p(ru);
      for (std::size_t k = 0; k < K; ++k) {
        const double r = step * d(idx(th, k)) / v(idx(th, k));
        if (!(r > -1.0)) return std::numeric_limits<double>::infinity();
        df -= inst.type_means[th] * std::log1p(r);
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      double dused = 0.0;
      for (std::size_t th = 0; th < T; ++th) dused += inst.type_means[th] * d(idx(th, k));
      const double r = -step * dused / slack(v, k);
      if (!(r > -1.0)) return std::numeric_limits<double>::infinity();
      df -= std::log1p(r);
    }
    return df;
  };

  // barrier weight: the duality gap of a central point is at most m / t
  const double m = pop * static_cast<double>(K) + static_cast<double>(K);
  const double gap_target = 1e-3 * opt.tolerance * pop;
  double t = 1.0;
  int steps = 0;
  bool breakdown = false;
  Eigen::VectorXd g(n);
  Eigen::MatrixXd H(n, n);
  while (true) {
    // centering
    for (int inner = 0; inner < 200; ++inner) {
      if (++steps > opt.max_newton_steps) break;
      g.setZero();
      H.setZero();
      for (std::size_t th = 0; th < T; ++th) {
        const double u = utility(a, th);
        const double nt = inst.type_means[th];
        for (std::size_t k = 0; k < K; ++k) {
          const auto i = idx(th, k);
          const double x = a(i);
          g(i) += -t * nt * inst.weights(th, k) / u - nt / x;
          H(i, i) += nt / (x * x);
          for (std::size_t j = 0; j < K; ++j)
            H(i, idx(th, j)) += t * nt * inst.weights(th, k) * inst.weights(th, j) / (u * u);
        }
      }
      for (std::size_t k = 0; k < K; ++k) {
        const double s = slack(a, k);
        for (std::size_t th = 0; th < T; ++th) {
          g(idx(th, k)) += inst.type_means[th] / s;
          for (std::size_t th2 = 0; th2 < T; ++th2)
            H(idx(th, k), idx(th2, k)) += inst.type_means[th] * inst.type_means[th2] / (s * s);
        }
      }
      // solve in coordinates scaled by a, which keeps the system well conditioned near the boundary
      const Eigen::VectorXd D = a;
      const Eigen::MatrixXd Hs = D.asDiagonal() * H * D.asDiagonal();
      const Eigen::VectorXd gs = D.cwiseProduct(g);
      const Eigen::VectorXd ys = Hs.ldlt().solve(-gs);
      const Eigen::VectorXd d = D.cwiseProduct(ys);
      const double decrement = -g.dot(d);
      if (decrement < 0.0) breakdown = true;  // the solve has lost descent; finish by crossover
      if (!(decrement > 1e-14)) break;
      double step = 1.0;
      while (step > 1e-20) {
        const double df = barrier_change(a, d, step, t);
        if (std::isfinite(df) && df <= -0.25 * step * decrement) {
          a += step * d;
          break;
        }
        step *= 0.5;
      }
      if (step <= 1e-20 || decrement < 1e-12) break;
    }
    if (m / t < gap_target || steps > opt.max_newton_steps || breakdown) break;
    t *= 10.0;
  }

  EgSolution sol;
  sol.newton_steps = steps;
  sol.allocations = AllocationMatrix(T, K);
  for (std::size_t th = 0; th < T; ++th)
    for (std::size_t k = 0; k < K; ++k) sol.allocations(th, k) = a(idx(th, k));
  // utilities are increasing in every resource, so the optimum spends all supply
  for (std::size_t k = 0; k < K; ++k) {
    double used = 0.0;
    for (std::size_t th = 0; th < T; ++th) used += inst.type_means[th] * sol.allocations(th, k);
    const double scale = inst.supply_means[k] / used;
    for (std::size_t th = 0; th < T; ++th) sol.allocations(th, k) *= scale;
  }
  return sol;
}

// Exact finish from an approximate optimum.
//
// On a fixed support the optimality conditions w_{theta,k} beta_theta = price_k
// (beta = 1/u) are linear in log space, and on each connected piece of the
// support the prices satisfy sum_k price_k mu_{B,k} = sum_theta mu_{N,theta}, which
// fixes their scale. With the utilities known, the allocation is the point
// on the support nearest `a0` meeting every utility and budget exactly.
// Returns nullopt when the support guess is inconsistent.
inline std::optional<AllocationMatrix> crossover(const EgInstance& inst, const AllocationMatrix& a0, double gap_tol) {
  const std::size_t T = inst.types(), K = inst.resources();
  const std::vector<double> p0 = implied_prices(inst, a0);
  std::vector<std::pair<std::size_t, std::size_t>> support;
  for (std::size_t th = 0; th < T; ++th) {
    const double u = inst.weights.utility(th, a0.row(th));
    for (std::size_t k = 0; k < K; ++k)
      if (inst.weights(th, k) / u >= p0[k] * (1.0 - gap_tol)) support.emplace_back(th, k);
  }
  const auto E = static_cast<Eigen::Index>(support.size());
  const auto nodes = static_cast<Eigen::Index>(T + K);

  // log prices y_k and log betas x_theta: y_k - x_theta = log w_{theta,k} on the support
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(E, nodes);
  Eigen::VectorXd rhs(E);
  for (Eigen::Index e = 0; e < E; ++e) {
    const auto [th, k] = support[static_cast<std::size_t>(e)];
    G(e, static_cast<Eigen::Index>(T + k)) = 1.0;
    G(e, static_cast<Eigen::Index>(th)) = -1.0;
    rhs(e) = std::log(inst.weights(th, k));
  }
  const Eigen::VectorXd z = G.completeOrthogonalDecomposition().solve(rhs);
  if ((G * z - rhs).cwiseAbs().maxCoeff() > 1e-9) return std::nullopt;

  // connected pieces of the support graph
  std::vector<std::size_t> parent(T + K);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& [th, k] : support) parent[find(th)] = find(T + k);
  std::vector<double> pop(T + K, 0.0), spend(T + K, 0.0);
  for (std::size_t th = 0; th < T; ++th) pop[find(th)] += inst.type_means[th];
  for (std::size_t k = 0; k < K; ++k)
    spend[find(T + k)] += std::exp(z(static_cast<Eigen::Index>(T + k))) * inst.supply_means[k];
  std::vector<double> u(T);
  for (std::size_t th = 0; th < T; ++th) {
    const std::size_t c = find(th);
    if (!(spend[c] > 0.0)) return std::nullopt;
    u[th] = 1.0 / (std::exp(z(static_cast<Eigen::Index>(th))) * pop[c] / spend[c]);
  }

  // nearest point to a0 with the exact utilities and tight budgets; entries
  // pushed below zero are pinned at zero and the projection is redone
  std::vector<bool> free(support.size(), true);
  for (std::size_t round = 0; round <= support.size(); ++round) {
    std::vector<std::size_t> cols;
    for (std::size_t e = 0; e < support.size(); ++e)
      if (free[e]) cols.push_back(e);
    const auto F = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nodes, F);
    Eigen::VectorXd x0(F), target(nodes);
    for (Eigen::Index c = 0; c < F; ++c) {
      const auto [th, k] = support[cols[static_cast<std::size_t>(c)]];
      A(static_cast<Eigen::Index>(th), c) = inst.weights(th, k);
      A(static_cast<Eigen::Index>(T + k), c) = inst.type_means[th];
      x0(c) = std::max(a0(th, k), 0.0);
    }
    for (std::size_t th = 0; th < T; ++th) target(static_cast<Eigen::Index>(th)) = u[th];
    for (std::size_t k = 0; k < K; ++k) target(static_cast<Eigen::Index>(T + k)) = inst.supply_means[k];
    const Eigen::MatrixXd AAt = A * A.transpose();
    const Eigen::VectorXd nu = AAt.completeOrthogonalDecomposition().solve(target - A * x0);
    const Eigen::VectorXd x = x0 + A.transpose() * nu;
    if (((A * x - target).array().abs() / target.array()).maxCoeff() > 1e-10) return std::nullopt;

    bool pinned = false;
    for (Eigen::Index c = 0; c < F; ++c)
      if (x(c) < 0.0) {
        free[cols[static_cast<std::size_t>(c)]] = false;
        pinned = true;
      }
    if (pinned) continue;
    AllocationMatrix out(T, K);
    for (Eigen::Index c = 0; c < F; ++c) {
      const auto [th, k] = support[cols[static_cast<std::size_t>(c)]];
      out(th, k) = x(c);
    }
    return out;
  }
  return std::nullopt;
}

// Types whose weight vectors are positive multiples of each other.
inline std::vector<std::size_t> proportional_groups(const WeightTable& w) {
  std::vector<std::size_t> group(w.types);
  std::vector<std::size_t> reps;
  for (std::size_t th = 0; th < w.types; ++th) {
    group[th] = reps.size();
    for (std::size_t g = 0; g < reps.size(); ++g) {
      const std::size_t r = reps[g];
      const double ratio = w.row_sum(th) / w.row_sum(r);
      bool same = true;
      for (std::size_t k = 0; k < w.resources && same; ++k)
        same = std::abs(w(th, k) - ratio * w(r, k)) <= 1e-12 * w(th, k);
      if (same) {
        group[th] = g;
        break;
      }
    }
    if (group[th] == reps.size()) reps.push_back(th);
  }
  return group;
}

}  // namespace detail

/// Maximizes sum_theta mu_{N,theta} log(w_theta . a_theta) subject to
/// sum_theta mu_{N,theta} a_{theta,k} <= mu_{B,k}, a >= 0.
///
/// Types with proportional weight vectors are pooled into one type with the
/// summed population and all receive the pooled allocation, so identical
/// preferences get identical bundles. The pooled program is solved by a
/// log-barrier Newton method whose nonnegativity barrier is weighted by the
/// populations. Budgets are made exactly tight at the end and prices are read
/// off as the smallest dual-feasible ones. Throws if the residual is still
/// above `tolerance` when the step budget runs out.
inline EgSolution solve_fluid_eg(const EgInstance& inst, const EgOptions& opt = {}) {
  inst.validate();
  const std::size_t T = inst.types(), K = inst.resources();
  const std::vector<std::size_t> group = detail::proportional_groups(inst.weights);
  const std::size_t G = *std::max_element(group.begin(), group.end()) + 1;

  EgInstance pooled;
  pooled.supply_means = inst.supply_means;
  pooled.type_means.assign(G, 0.0);
  std::vector<double> w(G * K, 0.0);
  std::vector<bool> seen(G, false);
  for (std::size_t th = 0; th < T; ++th) {
    const std::size_t g = group[th];
    pooled.type_means[g] += inst.type_means[th];
    if (!seen[g]) {
      // rows scaled to unit sum: the argmax does not depend on each type's weight scale
      const double rs = inst.weights.row_sum(th);
      for (std::size_t k = 0; k < K; ++k) w[g * K + k] = inst.weights(th, k) / rs;
      seen[g] = true;
    }
  }
  pooled.weights = WeightTable(G, K, std::move(w));

  EgSolution red = detail::solve_barrier(pooled, opt);
  double best = check_kkt(pooled, red.allocations, implied_prices(pooled, red.allocations)).max();
  for (double gap_tol : {1e-4, 1e-6, 1e-3, 1e-8}) {
    if (best <= 1e-3 * opt.tolerance) break;
    const auto exact = detail::crossover(pooled, red.allocations, gap_tol);
    if (!exact) continue;
    const double r = check_kkt(pooled, *exact, implied_prices(pooled, *exact)).max();
    if (r < best) {
      best = r;
      red.allocations = *exact;
    }
  }
  EgSolution sol;
  sol.newton_steps = red.newton_steps;
  sol.allocations = AllocationMatrix(T, K);
  for (std::size_t th = 0; th < T; ++th)
    for (std::size_t k = 0; k < K; ++k) sol.allocations(th, k) = red.allocations(group[th], k);
  sol.dual_prices = implied_prices(inst, sol.allocations);
  sol.kkt_residual = check_kkt(inst, sol.allocations, sol.dual_prices).max();
  if (!(sol.kkt_residual <= opt.tolerance))
    throw std::runtime_error("solve_fluid_eg: KKT residual " + std::to_string(sol.kkt_residual) +
                             " above tolerance after " + std::to_string(sol.newton_steps) + " Newton steps");
  return sol;
}

/// Food-bank instance over (cereal, pasta, prepared meals, rice, meat) with
/// omnivore, vegetarian and prepared-only households.
inline EgInstance food_bank_instance() {
  return EgInstance{WeightTable(3, 5,
                                {3.9, 3.0, 2.8, 2.7, 1.9,    // omnivore
                                 3.9, 3.0, 0.1, 2.7, 0.1,    // vegetarian
                                 3.9, 3.0, 2.8, 2.7, 0.1}),  // prepared-only
                    {1.25, 1.5, 2.25},
                    {5.0, 5.0, 5.0, 5.0, 5.0}};
}

}  // namespace fairinv
