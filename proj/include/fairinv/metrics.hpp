#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fairinv/inventory.hpp"

namespace fairinv {

/// Running extrema of per-agent allocations over rounds with positive demand.
class EnvyTracker {
 public:
  void update(double allocation, double demand) noexcept {
    if (!(demand > 0.0)) return;
    min_ = std::min(min_, allocation);
    max_ = std::max(max_, allocation);
  }
  [[nodiscard]] bool empty() const noexcept { return min_ > max_; }
  [[nodiscard]] double delta_fair() const noexcept { return empty() ? 0.0 : max_ - min_; }
  [[nodiscard]] double min_allocation() const noexcept { return min_; }
  [[nodiscard]] double max_allocation() const noexcept { return max_; }

 private:
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

/// Row-major type x resource table of positive utility weights.
struct WeightTable {
  std::size_t types = 0;
  std::size_t resources = 0;
  std::vector<double> w;

  WeightTable() = default;
  WeightTable(std::size_t t, std::size_t k, std::vector<double> values) : types(t), resources(k), w(std::move(values)) {
    if (w.size() != t * k) throw std::invalid_argument("weight table size mismatch");
    for (double x : w)
      if (!(x > 0.0)) throw std::invalid_argument("weights must be strictly positive");
  }
  static WeightTable uniform(std::size_t t, std::size_t k) { return {t, k, std::vector<double>(t * k, 1.0)}; }

  double operator()(std::size_t theta, std::size_t k) const { return w[theta * resources + k]; }
  [[nodiscard]] double utility(std::size_t theta, std::span<const double> bundle) const {
    double u = 0.0;
    for (std::size_t k = 0; k < resources; ++k) u += w[theta * resources + k] * bundle[k];
    return u;
  }
  [[nodiscard]] double row_sum(std::size_t theta) const {
    double s = 0.0;
    for (std::size_t k = 0; k < resources; ++k) s += w[theta * resources + k];
    return s;
  }
};

/// Envy under linear utilities, tracked through per-viewer utility extrema.
///
/// For every viewer type theta it keeps the range of w_theta . A over all
/// bundles A handed to any type with positive demand; the envy is the widest
/// such range.
class MultiEnvyTracker {
 public:
  explicit MultiEnvyTracker(WeightTable weights)
      : weights_(std::move(weights)),
        lo_(weights_.types, std::numeric_limits<double>::infinity()),
        hi_(weights_.types, -std::numeric_limits<double>::infinity()) {}

  void update(const AllocationMatrix& bundles, std::span<const double> demand_by_type) {
    if (bundles.types != demand_by_type.size() || bundles.resources != weights_.resources)
      throw std::invalid_argument("MultiEnvyTracker: dimension mismatch");
    for (std::size_t src = 0; src < bundles.types; ++src) {
      if (!(demand_by_type[src] > 0.0)) continue;
      const auto bundle = bundles.row(src);
      for (std::size_t viewer = 0; viewer < weights_.types; ++viewer) {
        const double u = weights_.utility(viewer, bundle);
        lo_[viewer] = std::min(lo_[viewer], u);
        hi_[viewer] = std::max(hi_[viewer], u);
      }
    }
  }

  [[nodiscard]] double delta_fair() const noexcept {
    double best = 0.0;
    for (std::size_t v = 0; v < lo_.size(); ++v)
      if (hi_[v] >= lo_[v]) best = std::max(best, hi_[v] - lo_[v]);
    return best;
  }

  /// max_theta sum_k w_{theta,k} * delta: the envy ceiling of the multi-resource threshold rule.
  [[nodiscard]] double envy_ceiling(double delta) const {
    double best = 0.0;
    for (std::size_t th = 0; th < weights_.types; ++th) best = std::max(best, weights_.row_sum(th) * delta);
    return best;
  }

  [[nodiscard]] const WeightTable& weights() const noexcept { return weights_; }

 private:
  WeightTable weights_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Batch envy over a stored allocation history (streaming-free reference).
inline double multi_envy(const WeightTable& weights, std::span<const AllocationMatrix> allocations,
                         std::span<const std::vector<double>> demands) {
  if (allocations.size() != demands.size()) throw std::invalid_argument("multi_envy: history length mismatch");
  MultiEnvyTracker tracker(weights);
  for (std::size_t t = 0; t < allocations.size(); ++t) tracker.update(allocations[t], demands[t]);
  return tracker.delta_fair();
}

/// Aggregates of one replication.
struct RunSummary {
  std::uint64_t horizon = 0;
  double w_bar = 0.0;
  double v_bar = 0.0;
  double delta_eff = 0.0;
  double delta_fair = 0.0;
  double h_m = 0.0;
  double h_0 = 0.0;
  std::uint64_t clamp_warnings = 0;
  // Sandwich audit fields, filled by SandwichAudit when auditing is on.
  std::uint64_t pathwise_violations = 0;
  double h_m_prev = 0.0;     // fraction of rounds starting at the cap
  double h_0_prev = 0.0;     // fraction of rounds starting empty
  double max_budget = 0.0;   // largest realized B_t
  double max_drawdown = 0.0; // largest realized N_t * A_t

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

/// Streaming sums behind RunSummary.
///
/// Multi-resource runs feed one record per store per round; waste and
/// stockout are summed over stores, occupancy fractions averaged.
class RunAccumulator {
 public:
  void accumulate(const StepRecord& r) {
    ++rounds_;
    add_store(r);
    envy_.update(r.allocation, r.demand);
  }

  void accumulate_multi(std::span<const StepRecord> per_store) {
    ++rounds_;
    for (const auto& r : per_store) add_store(r);
  }

  void add_clamp_warnings(std::uint64_t n) noexcept { clamps_ += n; }

  [[nodiscard]] std::uint64_t rounds() const noexcept { return rounds_; }
  [[nodiscard]] const EnvyTracker& envy() const noexcept { return envy_; }

  /// Finite-horizon averages. delta_fair is the scalar tracker's value; multi-resource
  /// runs overwrite it with their own tracker.
  [[nodiscard]] RunSummary finalize(double h, double b) const {
    if (rounds_ == 0) throw std::invalid_argument("finalize: no rounds accumulated");
    const double t = static_cast<double>(rounds_);
    const double store_rounds = static_cast<double>(store_records_);
    RunSummary s;
    s.horizon = rounds_;
    s.w_bar = waste_ / t;
    s.v_bar = stockout_ / t;
    s.delta_eff = h * s.w_bar + b * s.v_bar;
    s.delta_fair = envy_.delta_fair();
    s.h_m = static_cast<double>(upper_) / store_rounds;
    s.h_0 = static_cast<double>(lower_) / store_rounds;
    s.clamp_warnings = clamps_;
    return s;
  }

 private:
  void add_store(const StepRecord& r) {
    ++store_records_;
    waste_ += r.waste;
    stockout_ += r.stockout;
    upper_ += r.at_upper ? 1 : 0;
    lower_ += r.at_lower ? 1 : 0;
  }

  std::uint64_t rounds_ = 0;
  std::uint64_t store_records_ = 0;
  double waste_ = 0.0;
  double stockout_ = 0.0;
  std::uint64_t upper_ = 0;
  std::uint64_t lower_ = 0;
  std::uint64_t clamps_ = 0;
  EnvyTracker envy_;
};

/// Per-round overflow/stockout sandwich checks on a single store.
///
///   (Z_t)^+ 1{S_{t-1} = M} <= W_t <= Z_max 1{S_t = M}
///   (Z_t)^- 1{S_{t-1} = 0} <= V_t <= Z_min 1{S_t = 0}
///
/// Each inequality uses its own indicator. When a bound is infinite (an
/// unbounded family) the realized B_t, resp. N_t A_t, of that round is used,
/// which is the tighter statement. Comparisons allow a few ulps of slack.
class SandwichAudit {
 public:
  SandwichAudit(double capacity, double z_max, double z_min)
      : capacity_(capacity), z_max_(z_max), z_min_(z_min) {}

  void observe(const StepRecord& r) {
    ++rounds_;
    const double drawdown = r.budget - r.drift;
    max_budget_ = std::max(max_budget_, r.budget);
    max_drawdown_ = std::max(max_drawdown_, drawdown);
    const double zmax = std::isfinite(z_max_) ? z_max_ : r.budget;
    const double zmin = std::isfinite(z_min_) ? z_min_ : drawdown;
    const double tol = 1e-12 * (1.0 + capacity_ + std::abs(r.drift));
    const bool prev_full = r.prev_level == capacity_;
    const bool prev_empty = r.prev_level == 0.0;

    const double w_hi = r.at_upper ? zmax : 0.0;
    const double w_lo = prev_full ? std::max(r.drift, 0.0) : 0.0;
    const double v_hi = r.at_lower ? zmin : 0.0;
    const double v_lo = prev_empty ? std::max(-r.drift, 0.0) : 0.0;
    if (r.waste > w_hi + tol || r.waste < w_lo - tol) ++violations_;
    if (r.stockout > v_hi + tol || r.stockout < v_lo - tol) ++violations_;
    if (r.waste > 0.0 && r.stockout > 0.0) ++violations_;
    prev_full_ += prev_full ? 1 : 0;
    prev_empty_ += prev_empty ? 1 : 0;
  }

  void write_to(RunSummary& s) const {
    s.pathwise_violations = violations_;
    s.max_budget = max_budget_;
    s.max_drawdown = max_drawdown_;
    const double t = rounds_ == 0 ? 1.0 : static_cast<double>(rounds_);
    s.h_m_prev = static_cast<double>(prev_full_) / t;
    s.h_0_prev = static_cast<double>(prev_empty_) / t;
  }

  [[nodiscard]] std::uint64_t violations() const noexcept { return violations_; }

 private:
  double capacity_;
  double z_max_;
  double z_min_;
  std::uint64_t rounds_ = 0;
  std::uint64_t violations_ = 0;
  std::uint64_t prev_full_ = 0;
  std::uint64_t prev_empty_ = 0;
  double max_budget_ = 0.0;
  double max_drawdown_ = 0.0;
};

}  // namespace fairinv
