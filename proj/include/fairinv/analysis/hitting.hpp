#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "fairinv/distributions.hpp"
#include "fairinv/inventory.hpp"
#include "fairinv/policies.hpp"
#include "fairinv/rng.hpp"

namespace fairinv::analysis {

/// Sample statistics of exit time and exit side from one starting level.
struct ExitStats {
  double start = 0.0;
  std::uint64_t replications = 0;
  double mean_time = 0.0;    // E[tau]
  double se_time = 0.0;
  double p_upper = 0.0;      // P(Q_tau >= upper)
  double p_lower = 0.0;      // P(Q_tau <= lower)
  double se_p = 0.0;         // standard error of either side's frequency
  double cov_time_upper = 0.0;  // sample covariance of tau and 1{Q_tau >= upper}
};

struct HittingOptions {
  std::uint64_t replications = 100'000;
  std::uint64_t root_seed = 1;
  std::uint32_t lane = 0;
  std::uint64_t max_steps = 100'000'000;  // per excursion
};

/// Outcome of one excursion of the unreflected walk.
struct Excursion {
  std::uint64_t steps = 0;
  double exit_level = 0.0;
};

/// Runs Q_t = Q_{t-1} + B_t - N_t A_t from `start` until Q leaves (lower, upper).
///
/// The policy sees Q as if it were the store level of a capacity-`capacity`
/// store, which it equals until the exit. At least one step is taken, so a
/// start on a boundary gives the one-step convention: Q_1 >= upper counts as
/// a return to the top. Throws when max_steps is reached.
inline Excursion run_excursion(const PolicySpec& policy, const Environment& env, double capacity, double lower,
                               double upper, double start, const RngStream& rng, std::uint64_t max_steps) {
  double q = start;
  for (std::uint64_t t = 1; t <= max_steps; ++t) {
    const double b = sample_supply(env.supply, rng, t);
    const double n = sample_demand(env.demand, rng, t);
    const InventoryState view{q, capacity, t - 1};
    const double a = decide(policy, view, b, n).allocation;
    q = step_unreflected(q, b - n * a);
    if (q >= upper || q <= lower) return {t, q};
  }
  throw std::runtime_error("run_excursion: no exit within " + std::to_string(max_steps) +
                           " steps; the configuration may be infeasible");
}

/// Exit statistics from (lower, upper) for `start`, one stream per replication.
inline ExitStats estimate_exit(const PolicySpec& policy, const Environment& env, double capacity, double lower,
                               double upper, double start, const HittingOptions& opt) {
  if (opt.replications < 2) throw std::invalid_argument("estimate_exit: need at least 2 replications");
  if (!(lower < upper)) throw std::invalid_argument("estimate_exit: empty interval");
  // Welford updates for the mean of tau, the upper indicator, and their co-moment.
  double mt = 0.0, mu = 0.0, m2t = 0.0, cty = 0.0;
  std::uint64_t lower_hits = 0;
  for (std::uint64_t i = 0; i < opt.replications; ++i) {
    const RngStream rng(opt.root_seed, i, opt.lane);
    const Excursion ex = run_excursion(policy, env, capacity, lower, upper, start, rng, opt.max_steps);
    const double tau = static_cast<double>(ex.steps);
    const double up = ex.exit_level >= upper ? 1.0 : 0.0;
    lower_hits += ex.exit_level <= lower ? 1 : 0;
    const double k = static_cast<double>(i + 1);
    const double dt = tau - mt;
    mt += dt / k;
    mu += (up - mu) / k;
    m2t += dt * (tau - mt);
    cty += dt * (up - mu);
  }
  const double n = static_cast<double>(opt.replications);
  ExitStats s;
  s.start = start;
  s.replications = opt.replications;
  s.mean_time = mt;
  s.se_time = std::sqrt(m2t / (n - 1.0) / n);
  s.p_upper = mu;
  s.p_lower = static_cast<double>(lower_hits) / n;
  s.se_p = std::sqrt(mu * (1.0 - mu) / n);
  s.cov_time_upper = cty / (n - 1.0);
  return s;
}

/// Boundary statistics E(M), E(0), p_M, p_0 of the unreflected walk.
struct HittingStats {
  ExitStats from_top;     // start at M; p_M = from_top.p_upper
  ExitStats from_bottom;  // start at 0; p_0 = from_bottom.p_lower

  [[nodiscard]] double e_m() const noexcept { return from_top.mean_time; }
  [[nodiscard]] double e_0() const noexcept { return from_bottom.mean_time; }
  [[nodiscard]] double p_m() const noexcept { return from_top.p_upper; }
  [[nodiscard]] double p_0() const noexcept { return from_bottom.p_lower; }
};

/// Exit statistics from M and from 0 on (0, M).
///
/// The two starts use lanes opt.lane and opt.lane + 1, so they never share draws.
inline HittingStats estimate_hitting(const PolicySpec& policy, const Environment& env, double M,
                                     const HittingOptions& opt) {
  HittingOptions bottom = opt;
  bottom.lane = opt.lane + 1;
  return {estimate_exit(policy, env, M, 0.0, M, M, opt), estimate_exit(policy, env, M, 0.0, M, 0.0, bottom)};
}

/// Exit statistics on (0, M) from an interior start.
inline ExitStats estimate_hitting_from(const PolicySpec& policy, const Environment& env, double M, double start,
                                       const HittingOptions& opt) {
  if (!(start > 0.0 && start < M)) throw std::invalid_argument("estimate_hitting_from: start must lie in (0, M)");
  return estimate_exit(policy, env, M, 0.0, M, start, opt);
}

struct Occupancy {
  double h_m = 0.0;
  double h_0 = 0.0;
};

/// Long-run boundary occupancy from excursion statistics:
/// H_M = 1 / (E_M + E_0 (1 - p_M)/(1 - p_0)), H_0 = 1 / (E_M (1 - p_0)/(1 - p_M) + E_0).
inline Occupancy renewal_identity(double e_m, double e_0, double p_m, double p_0) {
  if (!(e_m > 0.0 && e_0 > 0.0) || !std::isfinite(e_m) || !std::isfinite(e_0))
    throw std::invalid_argument("renewal_identity: expected exit times must be finite and positive");
  if (!(p_m >= 0.0 && p_m < 1.0 && p_0 >= 0.0 && p_0 < 1.0))
    throw std::invalid_argument("renewal_identity: return probabilities must lie in [0, 1)");
  return {1.0 / (e_m + e_0 * (1.0 - p_m) / (1.0 - p_0)), 1.0 / (e_m * (1.0 - p_0) / (1.0 - p_m) + e_0)};
}

struct OccupancyEstimate {
  Occupancy value;
  double se_h_m = 0.0;
  double se_h_0 = 0.0;
};

/// renewal_identity applied to estimates, with delta-method standard errors.
///
/// The two starts are independent samples; within one start the covariance
/// of exit time and exit side is kept.
inline OccupancyEstimate renewal_identity(const HittingStats& hs) {
  const double em = hs.e_m(), e0 = hs.e_0();
  const double qm = 1.0 - hs.p_m(), q0 = 1.0 - hs.p_0();
  OccupancyEstimate out{renewal_identity(em, e0, hs.p_m(), hs.p_0()), 0.0, 0.0};

  const double nm = static_cast<double>(hs.from_top.replications);
  const double n0 = static_cast<double>(hs.from_bottom.replications);
  const double var_em = hs.from_top.se_time * hs.from_top.se_time;
  const double var_e0 = hs.from_bottom.se_time * hs.from_bottom.se_time;
  const double var_pm = hs.from_top.se_p * hs.from_top.se_p;
  const double var_p0 = hs.from_bottom.se_p * hs.from_bottom.se_p;
  // cov(mean tau, mean 1{top}) per start; at 0 the exit side of interest is the bottom
  const double cov_m = hs.from_top.cov_time_upper / nm;
  const double cov_0 = -hs.from_bottom.cov_time_upper / n0;

  // H = 1 / D with D = E_M + E_0 qm / q0  (H_M); dH = -dD / D^2
  {
    const double d = em + e0 * qm / q0;
    const double g_em = 1.0, g_e0 = qm / q0, g_pm = -e0 / q0, g_p0 = e0 * qm / (q0 * q0);
    const double var_d = g_em * g_em * var_em + g_pm * g_pm * var_pm + 2.0 * g_em * g_pm * cov_m +
                         g_e0 * g_e0 * var_e0 + g_p0 * g_p0 * var_p0 + 2.0 * g_e0 * g_p0 * cov_0;
    out.se_h_m = std::sqrt(std::max(var_d, 0.0)) / (d * d);
  }
  {
    const double d = em * q0 / qm + e0;
    const double g_em = q0 / qm, g_e0 = 1.0, g_pm = em * q0 / (qm * qm), g_p0 = -em / qm;
    const double var_d = g_em * g_em * var_em + g_pm * g_pm * var_pm + 2.0 * g_em * g_pm * cov_m +
                         g_e0 * g_e0 * var_e0 + g_p0 * g_p0 * var_p0 + 2.0 * g_e0 * g_p0 * cov_0;
    out.se_h_0 = std::sqrt(std::max(var_d, 0.0)) / (d * d);
  }
  return out;
}

}  // namespace fairinv::analysis
