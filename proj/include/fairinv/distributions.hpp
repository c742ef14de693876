#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fairinv/rng.hpp"

namespace fairinv {

enum class Family { Deterministic, Bernoulli, TruncatedNormal, Poisson, Exponential, BoundedDiscrete };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Deterministic: return "deterministic";
    case Family::Bernoulli: return "bernoulli";
    case Family::TruncatedNormal: return "truncated_normal";
    case Family::Poisson: return "poisson";
    case Family::Exponential: return "exponential";
    case Family::BoundedDiscrete: return "bounded_discrete";
  }
  return "unknown";
}

inline Family family_from_string(std::string_view s) {
  for (auto f : {Family::Deterministic, Family::Bernoulli, Family::TruncatedNormal, Family::Poisson,
                 Family::Exponential, Family::BoundedDiscrete}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown distribution family '" + std::string(s) + "'");
}

/// One atom of a finite-support distribution.
struct Atom {
  double value;
  double prob;
};

/// Parametric supply or demand process.
///
/// The location parameter is `mean` for every family (the point value for
/// Deterministic, the success probability for Bernoulli, the pre-clamping
/// normal mean for TruncatedNormal). A non-empty `mean_schedule` replaces it
/// periodically: round t uses schedule[t mod C]. Construct through the named
/// factories, which validate parameters.
class DistributionSpec {
 public:
  static DistributionSpec deterministic(double value) {
    require(value >= 0.0 && std::isfinite(value), "deterministic value must be finite and >= 0");
    return DistributionSpec(Family::Deterministic, value, 0.0);
  }
  static DistributionSpec bernoulli(double p) {
    require(p >= 0.0 && p <= 1.0, "bernoulli p must lie in [0, 1]");
    return DistributionSpec(Family::Bernoulli, p, 0.0);
  }
  static DistributionSpec truncated_normal(double mean, double sigma) {
    require(std::isfinite(mean), "truncated_normal mean must be finite");
    require(sigma >= 0.0 && std::isfinite(sigma), "truncated_normal sigma must be finite and >= 0");
    return DistributionSpec(Family::TruncatedNormal, mean, sigma);
  }
  static DistributionSpec poisson(double mean) {
    require(mean >= 0.0 && std::isfinite(mean), "poisson mean must be finite and >= 0");
    return DistributionSpec(Family::Poisson, mean, 0.0);
  }
  /// Exponential parameterized by its mean (rate 1/mean).
  static DistributionSpec exponential(double mean) {
    require(mean > 0.0 && std::isfinite(mean), "exponential mean must be positive");
    return DistributionSpec(Family::Exponential, mean, 0.0);
  }
  static DistributionSpec bounded_discrete(std::vector<double> values, std::vector<double> probs) {
    require(!values.empty() && values.size() == probs.size(),
            "bounded_discrete needs matching non-empty values and probs");
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(values[i] >= 0.0 && std::isfinite(values[i]), "bounded_discrete values must be >= 0");
      require(probs[i] >= 0.0, "bounded_discrete probs must be >= 0");
      total += probs[i];
    }
    require(std::abs(total - 1.0) <= 1e-9, "bounded_discrete probs must sum to 1");
    DistributionSpec d(Family::BoundedDiscrete, 0.0, 0.0);
    d.values_ = std::move(values);
    d.cdf_.resize(probs.size());
    std::partial_sum(probs.begin(), probs.end(), d.cdf_.begin());
    d.cdf_.back() = 1.0;
    d.probs_ = std::move(probs);
    d.mean_ = 0.0;
    for (std::size_t i = 0; i < d.values_.size(); ++i) d.mean_ += d.values_[i] * d.probs_[i];
    return d;
  }

  /// Returns a copy whose location parameter follows `schedule` periodically.
  [[nodiscard]] DistributionSpec with_schedule(std::vector<double> schedule) const {
    require(!schedule.empty(), "mean schedule must be non-empty");
    require(family_ != Family::BoundedDiscrete, "bounded_discrete does not accept a mean schedule");
    for (double m : schedule) {
      switch (family_) {
        case Family::Bernoulli: require(m >= 0.0 && m <= 1.0, "bernoulli schedule entries in [0,1]"); break;
        case Family::Exponential: require(m > 0.0, "exponential schedule entries must be positive"); break;
        case Family::TruncatedNormal: require(std::isfinite(m), "schedule entries must be finite"); break;
        default: require(m >= 0.0 && std::isfinite(m), "schedule entries must be finite and >= 0");
      }
    }
    DistributionSpec d = *this;
    d.schedule_ = std::move(schedule);
    return d;
  }

  [[nodiscard]] Family family() const noexcept { return family_; }
  [[nodiscard]] double sigma() const noexcept { return sigma_; }
  [[nodiscard]] bool has_schedule() const noexcept { return !schedule_.empty(); }
  [[nodiscard]] std::span<const double> schedule() const noexcept { return schedule_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }

  /// Location parameter in effect at round t.
  [[nodiscard]] double mean_at(std::uint64_t t) const noexcept {
    if (schedule_.empty()) return mean_;
    return schedule_[t % schedule_.size()];
  }

  /// Nominal mean: the location parameter, or its cycle average with a schedule.
  ///
  /// For TruncatedNormal this is the pre-clamping mean, which is what the
  /// allocation policies use as their reference level.
  [[nodiscard]] double nominal_mean() const noexcept {
    if (schedule_.empty()) return mean_;
    return std::accumulate(schedule_.begin(), schedule_.end(), 0.0) /
           static_cast<double>(schedule_.size());
  }

  /// Largest value in the support; +inf for unbounded families.
  [[nodiscard]] double support_max() const noexcept {
    const double loc = schedule_.empty() ? mean_ : *std::max_element(schedule_.begin(), schedule_.end());
    switch (family_) {
      case Family::Deterministic: return loc;
      case Family::Bernoulli: return loc > 0.0 ? 1.0 : 0.0;
      case Family::TruncatedNormal:
        return sigma_ == 0.0 ? std::max(loc, 0.0) : std::numeric_limits<double>::infinity();
      case Family::Poisson:
      case Family::Exponential: return loc == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      case Family::BoundedDiscrete: return *std::max_element(values_.begin(), values_.end());
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Atoms for finite-support specs without a schedule; nullopt otherwise.
  [[nodiscard]] std::optional<std::vector<Atom>> finite_support() const {
    if (!schedule_.empty()) return std::nullopt;
    switch (family_) {
      case Family::Deterministic: return std::vector<Atom>{{mean_, 1.0}};
      case Family::Bernoulli: return std::vector<Atom>{{0.0, 1.0 - mean_}, {1.0, mean_}};
      case Family::TruncatedNormal:
        if (sigma_ == 0.0) return std::vector<Atom>{{std::max(mean_, 0.0), 1.0}};
        return std::nullopt;
      case Family::Poisson:
        if (mean_ == 0.0) return std::vector<Atom>{{0.0, 1.0}};
        return std::nullopt;
      case Family::BoundedDiscrete: {
        std::vector<Atom> atoms;
        for (std::size_t i = 0; i < values_.size(); ++i) atoms.push_back({values_[i], probs_[i]});
        return atoms;
      }
      default: return std::nullopt;
    }
  }

  /// Whether draws are always integers.
  [[nodiscard]] bool integer_valued() const noexcept {
    switch (family_) {
      case Family::Bernoulli:
      case Family::Poisson: return true;
      case Family::Deterministic: {
        if (schedule_.empty()) return mean_ == std::floor(mean_);
        return std::all_of(schedule_.begin(), schedule_.end(), [](double v) { return v == std::floor(v); });
      }
      case Family::BoundedDiscrete:
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == std::floor(v); });
      default: return false;
    }
  }

  /// One draw using the engine for round t.
  double sample(CounterEngine& eng, std::uint64_t t) const {
    const double loc = mean_at(t);
    switch (family_) {
      case Family::Deterministic: return loc;
      case Family::Bernoulli: return eng.uniform() < loc ? 1.0 : 0.0;
      case Family::TruncatedNormal: {
        if (sigma_ == 0.0) return std::max(loc, 0.0);
        return std::max(0.0, loc + sigma_ * standard_normal(eng));
      }
      case Family::Poisson: return poisson(eng, loc);
      case Family::Exponential: return -loc * std::log1p(-eng.uniform());
      case Family::BoundedDiscrete: {
        const double u = eng.uniform();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return values_[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
            it - cdf_.begin(), static_cast<std::ptrdiff_t>(values_.size()) - 1))];
      }
    }
    return 0.0;
  }

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;

 private:
  DistributionSpec(Family f, double mean, double sigma) : family_(f), mean_(mean), sigma_(sigma) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  }

  // Box-Muller on one uniform pair; always consumes exactly two uniforms.
  static double standard_normal(CounterEngine& eng) {
    const double u1 = 1.0 - eng.uniform();
    const double u2 = eng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static double poisson(CounterEngine& eng, double mean) {
    if (mean == 0.0) return 0.0;
    if (mean < 30.0) {
      // inversion by sequential search
      const double u = eng.uniform();
      double p = std::exp(-mean);
      double cdf = p;
      long k = 0;
      while (u >= cdf && k < 1000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
      }
      return static_cast<double>(k);
    }
    std::poisson_distribution<long> dist(mean);
    return static_cast<double>(dist(eng));
  }

  Family family_;
  double mean_;
  double sigma_;
  std::vector<double> values_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
  std::vector<double> schedule_;
};

// Demand draws use the lane with the top bit set, so supply and demand taken
// from one stream never share counter blocks.
inline constexpr std::uint32_t kDemandLaneBit = 0x80000000u;

/// Budget B_t for round t.
inline double sample_supply(const DistributionSpec& spec, const RngStream& rng, std::uint64_t t) {
  auto eng = rng.lane(rng.lane_id() & ~kDemandLaneBit).at_round(t);
  return spec.sample(eng, t);
}

/// Agent count N_t for round t (integer-valued for integer families).
inline double sample_demand(const DistributionSpec& spec, const RngStream& rng, std::uint64_t t) {
  auto eng = rng.lane(rng.lane_id() | kDemandLaneBit).at_round(t);
  return spec.sample(eng, t);
}

/// Cumulative supply over cumulative demand across one cycle.
inline double cycle_reference(std::span<const double> supply_schedule,
                              std::span<const double> demand_schedule) {
  if (supply_schedule.empty() || demand_schedule.empty())
    throw std::invalid_argument("cycle_reference: schedules must be non-empty");
  if (supply_schedule.size() != demand_schedule.size())
    throw std::invalid_argument("cycle_reference: schedules must share one cycle length");
  const double supply = std::accumulate(supply_schedule.begin(), supply_schedule.end(), 0.0);
  const double demand = std::accumulate(demand_schedule.begin(), demand_schedule.end(), 0.0);
  if (!(demand > 0.0)) throw std::invalid_argument("cycle_reference: demand sum must be positive");
  return supply / demand;
}

/// Supply and demand processes for the single-resource model.
struct Environment {
  DistributionSpec supply;
  DistributionSpec demand;
};

/// Per-resource supply and per-type demand for the multi-resource model.
struct MultiEnvironment {
  std::vector<DistributionSpec> supply;  // one per resource k
  std::vector<DistributionSpec> demand;  // one per agent type theta
};

}  // namespace fairinv
