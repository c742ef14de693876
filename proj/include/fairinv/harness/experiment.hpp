#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "fairinv/distributions.hpp"
#include "fairinv/harness/config.hpp"
#include "fairinv/inventory.hpp"
#include "fairinv/metrics.hpp"
#include "fairinv/policies.hpp"
#include "fairinv/rng.hpp"

namespace fairinv {

/// Called once per round of a single-resource run with the 1-based round index.
using TraceSink = std::function<void(std::uint64_t, const StepRecord&)>;

inline constexpr double kPlotFloor = 1e-4;

namespace detail {

// Largest allocation the policy can emit, used as the drawdown bound per agent.
inline double allocation_ceiling(const PolicySpec& p) {
  switch (p.kind) {
    case PolicyKind::Static: return p.alpha;
    case PolicyKind::Proportional: return std::min(p.reference(), p.a_max);
    case PolicyKind::BangBang: return std::min(p.reference() + p.delta / 2.0, p.a_max);
    case PolicyKind::TimeVaryingBangBang:
      return std::min(cycle_reference(p.supply_schedule, p.demand_schedule) + p.delta / 2.0, p.a_max);
    default: return p.a_max;
  }
}

inline RunSummary run_single(const ExperimentConfig& cfg, const PolicySpec& policy, double M, std::uint64_t rep,
                             const TraceSink& trace) {
  const RngStream rng(cfg.root_seed, rep, 0);
  InventoryState state = InventoryState::make(M, cfg.initial_fraction * M);
  RunAccumulator acc;
  SandwichAudit audit(M, cfg.env.supply.support_max(), cfg.env.demand.support_max() * allocation_ceiling(policy));
  std::uint64_t clamps = 0;
  for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
    const double b = sample_supply(cfg.env.supply, rng, t);
    const double n = sample_demand(cfg.env.demand, rng, t);
    const Decision d = decide(policy, state, b, n);
    clamps += d.clamped ? 1 : 0;
    auto [next, rec] = step(state, b, n, d.allocation);
    state = next;
    acc.accumulate(rec);
    if (cfg.audit) audit.observe(rec);
    if (trace) trace(t, rec);
  }
  acc.add_clamp_warnings(clamps);
  RunSummary s = acc.finalize(cfg.h, cfg.b);
  if (cfg.audit) audit.write_to(s);
  return s;
}

inline RunSummary run_multi(const ExperimentConfig& cfg, const PolicySpec& policy, double M, std::uint64_t rep) {
  const MultiSetup& ms = *cfg.multi;
  const std::size_t K = ms.env.supply.size();
  const std::size_t types = ms.env.demand.size();
  const RngStream rng(cfg.root_seed, rep, 0);
  MultiInventoryState state = MultiInventoryState::split(M, K, cfg.initial_fraction);
  RunAccumulator acc;
  MultiEnvyTracker envy(ms.weights);
  std::vector<SandwichAudit> audits;
  for (std::size_t k = 0; k < K; ++k) {
    const double cap = state.virtual_caps[k];
    audits.emplace_back(cap, ms.env.supply[k].support_max(), std::numeric_limits<double>::infinity());
  }
  std::vector<double> budgets(K), demand(types);
  std::uint64_t violations = 0;
  double hm_prev = 0.0, h0_prev = 0.0, max_b = 0.0, max_dd = 0.0;
  for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
    for (std::size_t k = 0; k < K; ++k) budgets[k] = sample_supply(ms.env.supply[k], rng.lane(static_cast<std::uint32_t>(k)), t);
    for (std::size_t th = 0; th < types; ++th)
      demand[th] = sample_demand(ms.env.demand[th], rng.lane(static_cast<std::uint32_t>(th)), t);
    const MultiDecision d = decide(policy, state, types);
    acc.add_clamp_warnings(static_cast<std::uint64_t>(d.clamps));
    auto [next, recs] = step_multi(state, budgets, demand, d.allocations);
    state = std::move(next);
    acc.accumulate_multi(recs);
    envy.update(d.allocations, demand);
    if (cfg.audit)
      for (std::size_t k = 0; k < K; ++k) audits[k].observe(recs[k]);
  }
  RunSummary s = acc.finalize(cfg.h, cfg.b);
  s.delta_fair = envy.delta_fair();
  if (cfg.audit) {
    for (const auto& a : audits) {
      RunSummary part;
      a.write_to(part);
      violations += part.pathwise_violations;
      hm_prev += part.h_m_prev / static_cast<double>(K);
      h0_prev += part.h_0_prev / static_cast<double>(K);
      max_b = std::max(max_b, part.max_budget);
      max_dd = std::max(max_dd, part.max_drawdown);
    }
    s.pathwise_violations = violations;
    s.h_m_prev = hm_prev;
    s.h_0_prev = h0_prev;
    s.max_budget = max_b;
    s.max_drawdown = max_dd;
  }
  return s;
}

}  // namespace detail

/// One replication of cell (M, delta).
///
/// Draws depend only on (seed, replication, round), so every cell of a sweep
/// sees the same supply and demand path for a given replication.
inline RunSummary run_replication(const ExperimentConfig& cfg, double M, double delta, std::uint64_t replication,
                                  const TraceSink& trace = {}) {
  const PolicySpec policy = cfg.policy_for(delta);
  if (cfg.is_multi()) {
    if (trace) throw ConfigError("per-round trace is only available for single-resource runs");
    return detail::run_multi(cfg, policy, M, replication);
  }
  return detail::run_single(cfg, policy, M, replication, trace);
}

/// Aggregates of one (M, delta) cell.
struct SweepRow {
  double M = 0.0;
  double delta = 0.0;
  double delta_eff_mean = 0.0;
  double delta_eff_se = 0.0;
  double w_bar_mean = 0.0;
  double v_bar_mean = 0.0;
  double delta_fair_mean = 0.0;
  double h_m_mean = 0.0;
  double h_0_mean = 0.0;
  double delta_eff_plot = 0.0;  // max(delta_eff_mean, 1e-4)
  std::uint64_t reps = 0;
  std::string error;            // non-empty when the cell failed

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::vector<RunSummary>> runs;  // per row, when kept

  [[nodiscard]] const SweepRow* find(double M, double delta) const {
    for (const auto& r : rows)
      if (r.M == M && r.delta == delta) return &r;
    return nullptr;
  }
};

struct SweepOptions {
  unsigned parallel = 1;
  bool keep_runs = false;
};

/// Mean and standard error over replications of one cell.
inline SweepRow summarize_cell(double M, double delta, const std::vector<RunSummary>& runs) {
  SweepRow row;
  row.M = M;
  row.delta = delta;
  row.reps = runs.size();
  if (runs.empty()) return row;
  const double n = static_cast<double>(runs.size());
  for (const auto& r : runs) {
    row.delta_eff_mean += r.delta_eff;
    row.w_bar_mean += r.w_bar;
    row.v_bar_mean += r.v_bar;
    row.delta_fair_mean += r.delta_fair;
    row.h_m_mean += r.h_m;
    row.h_0_mean += r.h_0;
  }
  row.delta_eff_mean /= n;
  row.w_bar_mean /= n;
  row.v_bar_mean /= n;
  row.delta_fair_mean /= n;
  row.h_m_mean /= n;
  row.h_0_mean /= n;
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.delta_eff - row.delta_eff_mean) * (r.delta_eff - row.delta_eff_mean);
    row.delta_eff_se = std::sqrt(ss / (n - 1.0) / n);
  }
  row.delta_eff_plot = std::max(row.delta_eff_mean, kPlotFloor);
  return row;
}

/// Every (M, delta) cell times every replication, spread over `parallel` threads.
///
/// Rows follow grid order (M outer, delta inner) regardless of scheduling.
/// A failing replication marks its cell with the error and leaves the other
/// cells untouched.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& opt = {}) {
  cfg.validate();
  struct Cell {
    double M, delta;
  };
  std::vector<Cell> cells;
  for (double m : cfg.m_grid)
    for (double d : cfg.delta_grid) cells.push_back({m, d});
  const std::uint64_t reps = cfg.replications;
  const std::size_t tasks = cells.size() * reps;

  std::vector<std::vector<RunSummary>> runs(cells.size(), std::vector<RunSummary>(reps));
  std::vector<std::string> errors(cells.size());
  std::vector<std::atomic<bool>> failed(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < tasks; i = next.fetch_add(1)) {
      const std::size_t c = i / reps;
      const std::uint64_t r = i % reps;
      if (failed[c].load()) continue;
      try {
        runs[c][r] = run_replication(cfg, cells[c].M, cells[c].delta, r);
      } catch (const std::exception& e) {
        // the first failure per cell wins; later ones are skipped above
        if (!failed[c].exchange(true)) errors[c] = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opt.parallel, static_cast<unsigned>(std::max<std::size_t>(tasks, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepResult out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (failed[c].load()) {
      SweepRow row;
      row.M = cells[c].M;
      row.delta = cells[c].delta;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.delta_eff_mean = row.delta_eff_se = row.w_bar_mean = row.v_bar_mean = nan;
      row.delta_fair_mean = row.h_m_mean = row.h_0_mean = row.delta_eff_plot = nan;
      row.error = errors[c];
      out.rows.push_back(row);
      if (opt.keep_runs) out.runs.emplace_back();
      continue;
    }
    out.rows.push_back(summarize_cell(cells[c].M, cells[c].delta, runs[c]));
    if (opt.keep_runs) out.runs.push_back(std::move(runs[c]));
  }
  return out;
}

}  // namespace fairinv
