#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fairinv {

/// Single-resource store: level in [0, capacity] after `round` rounds.
struct InventoryState {
  double level = 0.0;
  double capacity = 0.0;
  std::uint64_t round = 0;

  static InventoryState make(double capacity, double level) {
    if (!(capacity > 0.0)) throw std::invalid_argument("capacity must be positive");
    if (level < 0.0 || level > capacity) throw std::invalid_argument("initial level outside [0, M]");
    return {level, capacity, 0};
  }
};

/// Outcome of one round for one store.
struct StepRecord {
  double allocation = 0.0;  // per-agent
  double budget = 0.0;
  double demand = 0.0;
  double drift = 0.0;       // budget - demand * allocation
  double waste = 0.0;       // overflow above capacity
  double stockout = 0.0;    // shortfall below zero
  double prev_level = 0.0;
  double level = 0.0;
  bool at_upper = false;    // post-update level == capacity
  bool at_lower = false;    // post-update level == 0
};

namespace detail {

inline StepRecord settle(double prev, double capacity, double budget, double drawdown) {
  StepRecord r;
  r.budget = budget;
  r.prev_level = prev;
  r.drift = budget - drawdown;
  const double raw = prev + r.drift;
  if (raw > capacity) {
    r.waste = raw - capacity;
    r.level = capacity;
  } else if (raw < 0.0) {
    r.stockout = -raw;
    r.level = 0.0;
  } else {
    r.level = raw;
  }
  r.at_upper = r.level == capacity;
  r.at_lower = r.level == 0.0;
  return r;
}

}  // namespace detail

/// Advances the store by one round: level <- clamp(S + B - N*A, 0, M).
inline std::pair<InventoryState, StepRecord> step(const InventoryState& state, double budget,
                                                  double demand, double allocation) {
  StepRecord r = detail::settle(state.level, state.capacity, budget, demand * allocation);
  r.allocation = allocation;
  r.demand = demand;
  return {InventoryState{r.level, state.capacity, state.round + 1}, r};
}

/// Unreflected walk increment used by the hitting-time estimators.
constexpr double step_unreflected(double q, double drift) noexcept { return q + drift; }

/// K virtual stores, each with its own cap; caps sum to the total capacity.
struct MultiInventoryState {
  std::vector<double> levels;
  std::vector<double> virtual_caps;
  std::uint64_t round = 0;

  [[nodiscard]] std::size_t resources() const noexcept { return levels.size(); }

  /// Equal split of `capacity` over `k` stores, each starting at `fill` of its cap.
  static MultiInventoryState split(double capacity, std::size_t k, double fill = 0.5) {
    if (!(capacity > 0.0) || k == 0) throw std::invalid_argument("need positive capacity and K >= 1");
    const double cap = capacity / static_cast<double>(k);
    return {std::vector<double>(k, cap * fill), std::vector<double>(k, cap), 0};
  }
};

/// Row-major type x resource matrix of per-agent allocations.
struct AllocationMatrix {
  std::size_t types = 0;
  std::size_t resources = 0;
  std::vector<double> values;

  AllocationMatrix() = default;
  AllocationMatrix(std::size_t t, std::size_t k, double fill = 0.0)
      : types(t), resources(k), values(t * k, fill) {}

  double& operator()(std::size_t theta, std::size_t k) { return values[theta * resources + k]; }
  double operator()(std::size_t theta, std::size_t k) const { return values[theta * resources + k]; }
  [[nodiscard]] std::span<const double> row(std::size_t theta) const {
    return std::span<const double>(values).subspan(theta * resources, resources);
  }
};

/// Advances every virtual store independently.
///
/// Store k sees budget B_k and drawdown sum_theta N_theta * A(theta, k), and
/// clamps to its own cap. Returns one record per resource; `demand` holds the
/// aggregate agent count and `allocation` the drawdown per agent (the type's
/// own allocation when there is a single type).
inline std::pair<MultiInventoryState, std::vector<StepRecord>> step_multi(
    const MultiInventoryState& state, std::span<const double> budgets,
    std::span<const double> demand_by_type, const AllocationMatrix& allocations) {
  const std::size_t k_count = state.levels.size();
  if (state.virtual_caps.size() != k_count || budgets.size() != k_count ||
      allocations.resources != k_count || allocations.types != demand_by_type.size())
    throw std::invalid_argument("step_multi: dimension mismatch");

  double total_demand = 0.0;
  for (double n : demand_by_type) total_demand += n;

  MultiInventoryState next{std::vector<double>(k_count), state.virtual_caps, state.round + 1};
  std::vector<StepRecord> records(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double drawdown = 0.0;
    for (std::size_t th = 0; th < demand_by_type.size(); ++th) drawdown += demand_by_type[th] * allocations(th, k);
    StepRecord r = detail::settle(state.levels[k], state.virtual_caps[k], budgets[k], drawdown);
    r.demand = total_demand;
    if (allocations.types == 1)
      r.allocation = allocations(0, k);
    else
      r.allocation = total_demand > 0.0 ? drawdown / total_demand : 0.0;
    next.levels[k] = r.level;
    records[k] = r;
  }
  return {std::move(next), std::move(records)};
}

}  // namespace fairinv
