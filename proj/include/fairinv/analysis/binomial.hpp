#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairinv::analysis {

namespace detail {

// Recursive halving keeps the rounding error at O(log n) ulps.
inline long double pairwise_sum(std::span<const long double> xs) {
  if (xs.size() <= 8) {
    long double s = 0.0L;
    for (long double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// ceil that forgives representation noise such as 55.000000000000007.
inline std::int64_t tolerant_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(x));
}

}  // namespace detail

/// Pr(Binomial(n, 1/2) >= k), summed in log space with extended precision.
///
/// Terms are exp(lgamma-based log C(n, j) - n log 2) relative to the largest
/// term, so tails far below DBL_MIN are still returned as the nearest double
/// (possibly a subnormal or zero).
inline double binomial_half_upper_tail(std::int64_t n, std::int64_t k) {
  if (n < 0) throw std::invalid_argument("binomial tail: n must be >= 0");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  const long double ln2 = std::numbers::ln2_v<long double>;
  const long double lg_n1 = std::lgamma(static_cast<long double>(n) + 1.0L);
  std::vector<long double> logs;
  logs.reserve(static_cast<std::size_t>(n - k + 1));
  for (std::int64_t j = k; j <= n; ++j) {
    logs.push_back(lg_n1 - std::lgamma(static_cast<long double>(j) + 1.0L) -
                   std::lgamma(static_cast<long double>(n - j) + 1.0L) - static_cast<long double>(n) * ln2);
  }
  long double peak = logs.front();
  for (long double l : logs) peak = std::max(peak, l);
  std::vector<long double> scaled(logs.size());
  // smallest first, so the pairwise tree adds like magnitudes
  for (std::size_t i = 0; i < logs.size(); ++i) scaled[logs.size() - 1 - i] = std::exp(logs[i] - peak);
  const long double s = detail::pairwise_sum(scaled);
  return static_cast<double>(std::exp(peak + std::log(s)));
}

struct BinomialTailCheck {
  double exact_tail = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// Compares Pr(Bin(L, 1/2) >= L/2 + t) with (1/15) exp(-16 t^2 / L).
///
/// Requires L even and an integer t with 0 < t <= L/8.
inline BinomialTailCheck binomial_tail_bound(std::int64_t L, std::int64_t t) {
  if (L <= 0 || L % 2 != 0) throw std::invalid_argument("binomial_tail_bound: L must be a positive even integer");
  if (t <= 0 || 8 * t > L) throw std::invalid_argument("binomial_tail_bound: t must lie in (0, L/8]");
  BinomialTailCheck out;
  out.exact_tail = binomial_half_upper_tail(L, L / 2 + t);
  out.bound = std::exp(-16.0 * static_cast<double>(t) * static_cast<double>(t) / static_cast<double>(L)) / 15.0;
  out.holds = out.exact_tail >= out.bound;
  return out;
}

/// Which regime of the Bernoulli(1/2)-supply, unit-demand construction applied.
enum class EpochCase { UnderAllocate = 1, OverAllocate = 2, Balanced = 3 };

struct EpochLowerBound {
  EpochCase which = EpochCase::Balanced;
  double w_lb = 0.0;          // lower bound on long-run waste
  double v_lb = 0.0;          // lower bound on long-run stockout
  std::int64_t L = 0;         // epoch length
  std::int64_t t = 0;         // tail offset (balanced case only)
  double tail_bound = 0.0;    // (1/15) exp(-16 t^2 / L), balanced case only
};

/// Lower bounds on inefficiency for a policy whose allocations stay within
/// [a, a + delta], supply Bernoulli(1/2) and one agent per round.
///
/// a < 1/2 - delta: the store overflows half the time over epochs of length
///   L = ceil((M+1) / (1/2 - a - delta)), so W >= 1/2.
/// a > 1/2: the mirror argument gives V >= 1/2.
/// otherwise: epochs of even length L = ceil(8M/delta) and
///   V >= Pr(Bin(L, 1/2) >= L/2 + ceil(L delta) + 1), which needs delta <= 1/9.
inline EpochLowerBound epoch_lower_bound(double a, double delta, double M) {
  if (!(delta > 0.0)) throw std::invalid_argument("epoch_lower_bound: delta must be positive");
  if (!(M > 0.0)) throw std::invalid_argument("epoch_lower_bound: M must be positive");
  if (!std::isfinite(a)) throw std::invalid_argument("epoch_lower_bound: a must be finite");
  EpochLowerBound out;
  if (a < 0.5 - delta) {
    out.which = EpochCase::UnderAllocate;
    out.w_lb = 0.5;
    out.L = detail::tolerant_ceil((M + 1.0) / (0.5 - a - delta));
    return out;
  }
  if (a > 0.5) {
    out.which = EpochCase::OverAllocate;
    out.v_lb = 0.5;
    out.L = detail::tolerant_ceil((M + 1.0) / (a - 0.5));
    return out;
  }
  if (delta > 1.0 / 9.0 + 1e-15)
    throw std::invalid_argument("epoch_lower_bound: balanced case needs delta <= 1/9, got " + std::to_string(delta));
  out.which = EpochCase::Balanced;
  std::int64_t L = detail::tolerant_ceil(8.0 * M / delta);
  if (L % 2 != 0) ++L;
  out.L = L;
  out.t = detail::tolerant_ceil(static_cast<double>(L) * delta) + 1;
  out.v_lb = binomial_half_upper_tail(L, L / 2 + out.t);
  out.tail_bound =
      std::exp(-16.0 * static_cast<double>(out.t) * static_cast<double>(out.t) / static_cast<double>(L)) / 15.0;
  return out;
}

}  // namespace fairinv::analysis
