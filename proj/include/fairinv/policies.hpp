#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fairinv/distributions.hpp"
#include "fairinv/inventory.hpp"

namespace fairinv {

enum class PolicyKind {
  Static,
  Proportional,
  BangBang,
  TimeVaryingBangBang,
  MultiBangBang,
  EgBangBang,
  FullDepletion
};

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Static: return "static";
    case PolicyKind::Proportional: return "proportional";
    case PolicyKind::BangBang: return "bang_bang";
    case PolicyKind::TimeVaryingBangBang: return "time_varying_bang_bang";
    case PolicyKind::MultiBangBang: return "multi_bang_bang";
    case PolicyKind::EgBangBang: return "eg_bang_bang";
    case PolicyKind::FullDepletion: return "full_depletion";
  }
  return "unknown";
}

inline PolicyKind policy_kind_from_string(std::string_view s) {
  for (auto k : {PolicyKind::Static, PolicyKind::Proportional, PolicyKind::BangBang,
                 PolicyKind::TimeVaryingBangBang, PolicyKind::MultiBangBang, PolicyKind::EgBangBang,
                 PolicyKind::FullDepletion}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown policy kind '" + std::string(s) + "'");
}

inline bool is_multi_resource(PolicyKind k) {
  return k == PolicyKind::MultiBangBang || k == PolicyKind::EgBangBang;
}

inline bool uses_delta(PolicyKind k) {
  return k == PolicyKind::BangBang || k == PolicyKind::TimeVaryingBangBang ||
         k == PolicyKind::MultiBangBang || k == PolicyKind::EgBangBang;
}

/// Allocation rule and its parameters.
///
/// Reference means are the policy's view of the environment; they are set
/// from the nominal means of the configured distributions unless overridden.
struct PolicySpec {
  PolicyKind kind = PolicyKind::Proportional;
  double alpha = 1.0;
  double delta = 0.0;
  double supply_mean = 1.0;
  double demand_mean = 1.0;
  std::vector<double> supply_schedule;
  std::vector<double> demand_schedule;
  std::vector<double> resource_supply_means;
  std::optional<AllocationMatrix> eg_allocations;
  double a_max = std::numeric_limits<double>::infinity();

  /// mu_B / mu_N.
  [[nodiscard]] double reference() const { return supply_mean / demand_mean; }

  /// Checks the kind-specific parameter ranges; throws std::invalid_argument.
  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("policy: " + m); };
    if (!(a_max > 0.0)) fail("a_max must be positive");
    if (std::isnan(delta) || delta < 0.0) fail("delta must be >= 0");
    switch (kind) {
      case PolicyKind::Static:
        if (!(alpha >= 0.0 && alpha <= a_max)) fail("alpha must lie in [0, a_max]");
        break;
      case PolicyKind::Proportional:
      case PolicyKind::FullDepletion:
        if (!(supply_mean > 0.0 && demand_mean > 0.0)) fail("reference means must be positive");
        break;
      case PolicyKind::BangBang:
        if (!(supply_mean > 0.0 && demand_mean > 0.0)) fail("reference means must be positive");
        if (!(delta < 2.0 * reference())) fail("delta must be below 2 mu_B / mu_N");
        break;
      case PolicyKind::TimeVaryingBangBang: {
        if (supply_schedule.empty() || demand_schedule.empty()) fail("time-varying policy needs schedules");
        const double ref = cycle_reference(supply_schedule, demand_schedule);
        if (!(delta < 2.0 * ref)) fail("delta must be below twice the cycle reference");
        break;
      }
      case PolicyKind::MultiBangBang: {
        if (resource_supply_means.empty()) fail("multi policy needs per-resource supply means");
        if (!(demand_mean > 0.0)) fail("total demand mean must be positive");
        const double lo = *std::min_element(resource_supply_means.begin(), resource_supply_means.end());
        if (!(lo > 0.0)) fail("per-resource supply means must be positive");
        if (!(delta < 2.0 * lo / demand_mean)) fail("delta must be below 2 min_k mu_Bk / mu_N");
        break;
      }
      case PolicyKind::EgBangBang:
        if (!eg_allocations) fail("eg_bang_bang needs an EG allocation table");
        break;
    }
  }
};

/// A per-agent allocation plus whether it had to be clamped into [0, a_max].
struct Decision {
  double allocation = 0.0;
  bool clamped = false;
};

namespace detail {

inline Decision clamp_allocation(double a, double a_max) {
  if (a < 0.0) return {0.0, true};
  if (a > a_max) return {a_max, true};
  return {a, false};
}

inline Decision threshold_rule(double center, double delta, double level, double threshold, double a_max) {
  // ties at the threshold take the high branch
  const double a = level >= threshold ? center + delta / 2.0 : center - delta / 2.0;
  return clamp_allocation(a, a_max);
}

}  // namespace detail

/// Constant allocation alpha; Proportional uses alpha = mu_B / mu_N.
inline double decide_static(const PolicySpec& spec, const InventoryState& /*state*/) {
  if (spec.kind == PolicyKind::Proportional) return std::min(spec.reference(), spec.a_max);
  if (spec.kind != PolicyKind::Static) throw std::invalid_argument("decide_static: not a static policy");
  return spec.alpha;
}

/// Two-point threshold rule around mu_B / mu_N with switch at M/2.
inline Decision decide_bang_bang(const PolicySpec& spec, const InventoryState& state) {
  return detail::threshold_rule(spec.reference(), spec.delta, state.level, state.capacity / 2.0, spec.a_max);
}

/// Threshold rule whose center is cycle supply over cycle demand.
inline Decision decide_time_varying(const PolicySpec& spec, const InventoryState& state) {
  const double ref = cycle_reference(spec.supply_schedule, spec.demand_schedule);
  return detail::threshold_rule(ref, spec.delta, state.level, state.capacity / 2.0, spec.a_max);
}

/// Multi-resource decision with the number of clamped entries.
struct MultiDecision {
  AllocationMatrix allocations;
  int clamps = 0;
};

/// Per-store threshold rule; every type receives the same bundle.
inline MultiDecision decide_multi(const PolicySpec& spec, const MultiInventoryState& state, std::size_t types) {
  const std::size_t k_count = state.levels.size();
  if (spec.resource_supply_means.size() != k_count || state.virtual_caps.size() != k_count)
    throw std::invalid_argument("decide_multi: dimension mismatch");
  MultiDecision out{AllocationMatrix(types, k_count), 0};
  for (std::size_t k = 0; k < k_count; ++k) {
    const Decision d = detail::threshold_rule(spec.resource_supply_means[k] / spec.demand_mean, spec.delta,
                                              state.levels[k], state.virtual_caps[k] / 2.0, spec.a_max);
    out.clamps += d.clamped ? static_cast<int>(types) : 0;
    for (std::size_t th = 0; th < types; ++th) out.allocations(th, k) = d.allocation;
  }
  return out;
}

/// Per-store threshold rule centered on the type-specific EG allocations.
inline MultiDecision decide_eg_bang_bang(const PolicySpec& spec, const MultiInventoryState& state) {
  if (!spec.eg_allocations) throw std::invalid_argument("decide_eg_bang_bang: missing EG table");
  const AllocationMatrix& eg = *spec.eg_allocations;
  const std::size_t k_count = state.levels.size();
  if (eg.resources != k_count || state.virtual_caps.size() != k_count)
    throw std::invalid_argument("decide_eg_bang_bang: dimension mismatch");
  MultiDecision out{AllocationMatrix(eg.types, k_count), 0};
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t th = 0; th < eg.types; ++th) {
      const Decision d = detail::threshold_rule(eg(th, k), spec.delta, state.levels[k],
                                                state.virtual_caps[k] / 2.0, spec.a_max);
      out.allocations(th, k) = d.allocation;
      out.clamps += d.clamped ? 1 : 0;
    }
  }
  return out;
}

/// Hands out everything on hand: min(a_max, (S + B) / N), or 0 without demand.
inline double decide_full_depletion(const PolicySpec& spec, const InventoryState& state, double budget,
                                    double demand) {
  if (!(demand > 0.0)) return 0.0;
  return std::min(spec.a_max, (state.level + budget) / demand);
}

/// Single-resource dispatch over the policy kinds.
inline Decision decide(const PolicySpec& spec, const InventoryState& state, double budget, double demand) {
  switch (spec.kind) {
    case PolicyKind::Static:
    case PolicyKind::Proportional: return {decide_static(spec, state), false};
    case PolicyKind::BangBang: return decide_bang_bang(spec, state);
    case PolicyKind::TimeVaryingBangBang: return decide_time_varying(spec, state);
    case PolicyKind::FullDepletion: return {decide_full_depletion(spec, state, budget, demand), false};
    case PolicyKind::MultiBangBang:
    case PolicyKind::EgBangBang: break;
  }
  throw std::invalid_argument("decide: multi-resource policy used on a single store");
}

/// Multi-resource dispatch over the policy kinds.
inline MultiDecision decide(const PolicySpec& spec, const MultiInventoryState& state, std::size_t types) {
  switch (spec.kind) {
    case PolicyKind::MultiBangBang: return decide_multi(spec, state, types);
    case PolicyKind::EgBangBang: return decide_eg_bang_bang(spec, state);
    default: break;
  }
  throw std::invalid_argument("decide: single-resource policy used on virtual stores");
}

}  // namespace fairinv
