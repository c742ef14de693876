#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fairinv/distributions.hpp"
#include "fairinv/rng.hpp"

namespace fairinv::analysis {

/// Joint law of one (B, N) draw: exact atoms or equally weighted samples.
struct JointLaw {
  struct Point {
    double b;
    double n;
    double w;
  };
  std::vector<Point> points;
  bool exact = false;
  std::uint64_t samples = 0;  // 0 when exact
};

struct LawOptions {
  std::uint64_t mc_samples = 1'000'000;
  std::uint64_t root_seed = 0x5eed;
  bool allow_monte_carlo = true;
  double wilson_z = 1.959963984540054;  // two-sided 95%
};

/// Exact product of atoms when both specs have finite support, otherwise
/// `mc_samples` independent draws (or an error when sampling is disallowed).
inline JointLaw joint_law(const DistributionSpec& supply, const DistributionSpec& demand, const LawOptions& opt) {
  JointLaw law;
  const auto sb = supply.finite_support();
  const auto sn = demand.finite_support();
  if (sb && sn) {
    law.exact = true;
    for (const auto& x : *sb)
      for (const auto& y : *sn)
        if (x.prob * y.prob > 0.0) law.points.push_back({x.value, y.value, x.prob * y.prob});
    return law;
  }
  if (!opt.allow_monte_carlo) throw std::invalid_argument("joint_law: unbounded support needs Monte Carlo");
  if (opt.mc_samples == 0) throw std::invalid_argument("joint_law: mc_samples must be positive");
  law.samples = opt.mc_samples;
  law.points.reserve(opt.mc_samples);
  const RngStream rng(opt.root_seed, 0);
  const double w = 1.0 / static_cast<double>(opt.mc_samples);
  for (std::uint64_t i = 0; i < opt.mc_samples; ++i)
    law.points.push_back({sample_supply(supply, rng, i), sample_demand(demand, rng, i), w});
  return law;
}

/// Lower end of the Wilson score interval for k successes out of n.
inline double wilson_lower(double k, double n, double z) {
  if (n <= 0.0) return 0.0;
  const double p = k / n;
  const double z2 = z * z;
  const double center = p + z2 / (2.0 * n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return std::max(0.0, (center - half) / (1.0 + z2 / n));
}

struct FeasibilityPoint {
  double epsilon = 0.0;
  double p_up = 0.0;     // P(B - N (a* + D/2) >= eps)
  double p_down = 0.0;   // P(B - N (a* - D/2) <= -eps)
  double delta = 0.0;    // min of the two; Wilson lower ends under sampling
};

/// Sufficient range from the four-tail argument with spread c.
struct SufficientDelta {
  double c = 0.0;
  double tail_min = 0.0;  // min of the four tail probabilities
  double delta_max = 0.0; // c (mu_B + mu_N) / (mu_N (mu_N + c/2)); 0 when tail_min = 0
  bool applies = false;   // tail_min > 0 and 0 < delta <= delta_max
};

struct FeasibilityReport {
  bool feasible = false;
  bool exact = false;
  double alpha_star = 0.0;
  double epsilon = 0.0;   // grid point maximizing eps * delta
  double delta = 0.0;
  std::vector<FeasibilityPoint> grid;
  std::optional<SufficientDelta> sufficient;
};

namespace detail {

inline double cmp_tol(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

inline std::vector<double> default_eps_grid(const JointLaw& law, double alpha) {
  double m2 = 0.0;
  for (const auto& p : law.points) {
    const double z = p.b - p.n * alpha;
    m2 += p.w * z * z;
  }
  const double s = std::sqrt(m2);
  std::vector<double> g;
  if (!(s > 0.0)) return {1e-6};
  for (double f : {0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0}) g.push_back(f * s);
  return g;
}

}  // namespace detail

/// Evaluates the four-tail sufficient condition for a given spread c.
inline SufficientDelta sufficient_delta_bound(const JointLaw& law, double mu_b, double mu_n, double c, double delta) {
  if (!(c > 0.0)) throw std::invalid_argument("sufficient_delta_bound: c must be positive");
  double b_hi = 0.0, b_lo = 0.0, n_hi = 0.0, n_lo = 0.0;
  // B and N are independent, so the marginals are recovered from the joint law
  for (const auto& p : law.points) {
    if (p.b >= mu_b + c - detail::cmp_tol(mu_b + c)) b_hi += p.w;
    if (p.b <= mu_b - c + detail::cmp_tol(mu_b - c)) b_lo += p.w;
    if (p.n >= mu_n + c / 2.0 - detail::cmp_tol(mu_n + c)) n_hi += p.w;
    if (p.n <= mu_n - c / 2.0 + detail::cmp_tol(mu_n + c)) n_lo += p.w;
  }
  SufficientDelta s;
  s.c = c;
  s.tail_min = std::min({b_hi, b_lo, n_hi, n_lo});
  if (s.tail_min > 0.0) s.delta_max = c * (mu_b + mu_n) / (mu_n * (mu_n + c / 2.0));
  s.applies = s.tail_min > 0.0 && delta > 0.0 && delta <= s.delta_max;
  return s;
}

/// Searches the epsilon grid for the two-sided drift condition under
/// allocations a* +- delta/2, a* = nominal mean ratio.
///
/// An empty grid uses multiples of the drift's root mean square. Never throws
/// on infeasibility; `feasible` is false when no grid point has delta > 0.
inline FeasibilityReport check_delta_feasible(const DistributionSpec& supply, const DistributionSpec& demand,
                                              double delta, std::vector<double> eps_grid,
                                              std::optional<double> sufficient_c = std::nullopt,
                                              const LawOptions& opt = {}) {
  const JointLaw law = joint_law(supply, demand, opt);
  const double mu_b = supply.nominal_mean();
  const double mu_n = demand.nominal_mean();
  FeasibilityReport rep;
  rep.exact = law.exact;
  rep.alpha_star = mu_n > 0.0 ? mu_b / mu_n : 0.0;
  const double a_hi = rep.alpha_star + delta / 2.0;
  const double a_lo = rep.alpha_star - delta / 2.0;
  if (eps_grid.empty()) eps_grid = detail::default_eps_grid(law, rep.alpha_star);

  // sorted drifts under each branch; tails by binary search
  std::vector<std::pair<double, double>> hi, lo;
  hi.reserve(law.points.size());
  lo.reserve(law.points.size());
  for (const auto& p : law.points) {
    hi.emplace_back(p.b - p.n * a_hi, p.w);
    lo.emplace_back(p.b - p.n * a_lo, p.w);
  }
  std::sort(hi.begin(), hi.end());
  std::sort(lo.begin(), lo.end());
  auto upper_tail = [](const std::vector<std::pair<double, double>>& v, double x) {
    double s = 0.0;
    auto it = std::lower_bound(v.begin(), v.end(), std::pair{x, -1.0});
    for (; it != v.end(); ++it) s += it->second;
    return s;
  };
  auto lower_tail = [](const std::vector<std::pair<double, double>>& v, double x) {
    double s = 0.0;
    for (auto it = v.begin(); it != v.end() && it->first <= x; ++it) s += it->second;
    return s;
  };

  for (double eps : eps_grid) {
    if (!(eps > 0.0)) continue;
    FeasibilityPoint fp;
    fp.epsilon = eps;
    fp.p_up = upper_tail(hi, eps - detail::cmp_tol(eps));
    fp.p_down = lower_tail(lo, -eps + detail::cmp_tol(eps));
    if (law.exact) {
      fp.delta = std::min(fp.p_up, fp.p_down);
    } else {
      const double n = static_cast<double>(law.samples);
      fp.delta = std::min(wilson_lower(std::round(fp.p_up * n), n, opt.wilson_z),
                          wilson_lower(std::round(fp.p_down * n), n, opt.wilson_z));
    }
    if (fp.delta > 0.0 && fp.epsilon * fp.delta > rep.epsilon * rep.delta) {
      rep.feasible = true;
      rep.epsilon = fp.epsilon;
      rep.delta = fp.delta;
    }
    rep.grid.push_back(fp);
  }
  if (sufficient_c) rep.sufficient = sufficient_delta_bound(law, mu_b, mu_n, *sufficient_c, delta);
  return rep;
}

struct MgfCheck {
  double expectation = 0.0;  // E[exp(-C D (B - (a* - D) N))]
  bool holds = false;        // expectation <= 1
  double c_sufficient = 0.0; // 8 mu_N / (B_max + a* N_max)^2; 0 for unbounded support
  bool exact = false;
};

/// Whether exp(-C D Q_t) is a supermartingale while the walk sits on the
/// under-allocation branch a* - D.
inline MgfCheck supermartingale_mgf_check(const DistributionSpec& supply, const DistributionSpec& demand,
                                          double delta, double C, const LawOptions& opt = {}) {
  if (C < 0.0) throw std::invalid_argument("supermartingale_mgf_check: C must be >= 0");
  const JointLaw law = joint_law(supply, demand, opt);
  const double mu_b = supply.nominal_mean();
  const double mu_n = demand.nominal_mean();
  const double alpha = mu_b / mu_n;
  MgfCheck out;
  out.exact = law.exact;
  long double e = 0.0L;
  for (const auto& p : law.points)
    e += static_cast<long double>(p.w) * std::exp(static_cast<long double>(-C * delta * (p.b - (alpha - delta) * p.n)));
  out.expectation = static_cast<double>(e);
  out.holds = out.expectation <= 1.0 + 1e-15;
  const double bmax = supply.support_max();
  const double nmax = demand.support_max();
  if (std::isfinite(bmax) && std::isfinite(nmax)) {
    const double d = bmax + alpha * nmax;
    out.c_sufficient = d > 0.0 ? 8.0 * mu_n / (d * d) : 0.0;
  }
  return out;
}

struct Moments {
  double mean = 0.0;
  double second = 0.0;  // E[X^2]
};

/// E[max(0, X)] and E[max(0, X)^2] for X ~ Normal(mu, sigma).
inline Moments clamped_normal_moments(double mu, double sigma) {
  if (sigma == 0.0) {
    const double v = std::max(mu, 0.0);
    return {v, v * v};
  }
  const double z = mu / sigma;
  const double Phi = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return {mu * Phi + sigma * phi, (mu * mu + sigma * sigma) * Phi + mu * sigma * phi};
}

/// Exact first two moments of a spec, averaged over its schedule cycle.
inline Moments spec_moments(const DistributionSpec& d) {
  auto at = [&](double loc) -> Moments {
    switch (d.family()) {
      case Family::Deterministic: return {loc, loc * loc};
      case Family::Bernoulli: return {loc, loc};
      case Family::TruncatedNormal: return clamped_normal_moments(loc, d.sigma());
      case Family::Poisson: return {loc, loc + loc * loc};
      case Family::Exponential: return {loc, 2.0 * loc * loc};
      case Family::BoundedDiscrete: {
        Moments m;
        for (std::size_t i = 0; i < d.values().size(); ++i) {
          m.mean += d.probs()[i] * d.values()[i];
          m.second += d.probs()[i] * d.values()[i] * d.values()[i];
        }
        return m;
      }
    }
    return {};
  };
  if (!d.has_schedule()) return at(d.mean_at(0));
  Moments acc;
  for (double loc : d.schedule()) {
    const Moments m = at(loc);
    acc.mean += m.mean;
    acc.second += m.second;
  }
  const double c = static_cast<double>(d.schedule().size());
  return {acc.mean / c, acc.second / c};
}

/// E[Z^2] for Z = B - N a with independent B, N.
inline double drift_second_moment(const DistributionSpec& supply, const DistributionSpec& demand, double a) {
  const Moments b = spec_moments(supply);
  const Moments n = spec_moments(demand);
  return b.second - 2.0 * a * b.mean * n.mean + a * a * n.second;
}

/// E[(B - N a)^+] and E[(B - N a)^-] over a joint law.
struct DriftParts {
  double positive = 0.0;
  double negative = 0.0;
  double se_positive = 0.0;  // 0 when exact
  double se_negative = 0.0;
};

inline DriftParts drift_parts(const JointLaw& law, double a) {
  DriftParts out;
  double sp2 = 0.0, sn2 = 0.0;
  for (const auto& p : law.points) {
    const double z = p.b - p.n * a;
    const double zp = std::max(z, 0.0), zn = std::max(-z, 0.0);
    out.positive += p.w * zp;
    out.negative += p.w * zn;
    sp2 += p.w * zp * zp;
    sn2 += p.w * zn * zn;
  }
  if (!law.exact && law.samples > 1) {
    const double n = static_cast<double>(law.samples);
    out.se_positive = std::sqrt(std::max(sp2 - out.positive * out.positive, 0.0) / n);
    out.se_negative = std::sqrt(std::max(sn2 - out.negative * out.negative, 0.0) / n);
  }
  return out;
}

}  // namespace fairinv::analysis
