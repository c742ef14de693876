#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairinv/distributions.hpp"
#include "fairinv/eg_solver.hpp"
#include "fairinv/metrics.hpp"
#include "fairinv/policies.hpp"

namespace fairinv {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void allow_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
  }
}

inline double get_number(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(std::string(where) + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline std::vector<double> get_numbers(const json& j, std::string_view where) {
  if (!j.is_array()) throw ConfigError(std::string(where) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(std::string(where) + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("'") + key + "': " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------- distributions

inline json to_json(const DistributionSpec& d) {
  json j;
  j["family"] = std::string(to_string(d.family()));
  if (d.family() == Family::BoundedDiscrete) {
    j["values"] = std::vector<double>(d.values().begin(), d.values().end());
    j["probs"] = std::vector<double>(d.probs().begin(), d.probs().end());
    return j;
  }
  if (d.has_schedule())
    j["mean_schedule"] = std::vector<double>(d.schedule().begin(), d.schedule().end());
  else
    j["mean"] = d.mean_at(0);
  if (d.family() == Family::TruncatedNormal) j["sigma"] = d.sigma();
  return j;
}

/// {"family": ..., "mean" | "mean_schedule", "sigma" (truncated_normal), "values"/"probs" (bounded_discrete)}
inline DistributionSpec distribution_from_json(const json& j, std::string_view where = "distribution") {
  detail::allow_keys(j, where, {"family", "mean", "sigma", "mean_schedule", "values", "probs"});
  if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError(std::string(where) + ": missing 'family'");
  try {
    const Family f = family_from_string(j.at("family").get<std::string>());
    if (f == Family::BoundedDiscrete) {
      if (j.contains("mean") || j.contains("sigma") || j.contains("mean_schedule"))
        throw ConfigError(std::string(where) + ": bounded_discrete takes only 'values' and 'probs'");
      if (!j.contains("values") || !j.contains("probs"))
        throw ConfigError(std::string(where) + ": bounded_discrete needs 'values' and 'probs'");
      return DistributionSpec::bounded_discrete(detail::get_numbers(j.at("values"), where),
                                                detail::get_numbers(j.at("probs"), where));
    }
    if (j.contains("values") || j.contains("probs"))
      throw ConfigError(std::string(where) + ": 'values'/'probs' only apply to bounded_discrete");
    if (f != Family::TruncatedNormal && j.contains("sigma"))
      throw ConfigError(std::string(where) + ": 'sigma' only applies to truncated_normal");
    const bool has_sched = j.contains("mean_schedule");
    if (has_sched == j.contains("mean"))
      throw ConfigError(std::string(where) + ": give exactly one of 'mean' and 'mean_schedule'");
    std::vector<double> sched;
    if (has_sched) {
      sched = detail::get_numbers(j.at("mean_schedule"), where);
      if (sched.empty()) throw ConfigError(std::string(where) + ": 'mean_schedule' must be non-empty");
    }
    const double loc = has_sched ? sched.front() : detail::get_number(j, "mean", where);
    DistributionSpec d = [&] {
      switch (f) {
        case Family::Deterministic: return DistributionSpec::deterministic(loc);
        case Family::Bernoulli: return DistributionSpec::bernoulli(loc);
        case Family::TruncatedNormal:
          return DistributionSpec::truncated_normal(loc, detail::get_number(j, "sigma", where));
        case Family::Poisson: return DistributionSpec::poisson(loc);
        case Family::Exponential: return DistributionSpec::exponential(loc);
        default: break;
      }
      throw ConfigError("unreachable family");
    }();
    if (has_sched) d = d.with_schedule(std::move(sched));
    return d;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

// ---------------------------------------------------------------- experiment

/// Multi-resource part of the environment.
struct MultiSetup {
  MultiEnvironment env;
  WeightTable weights;
};

struct OutputOptions {
  std::string path;  // empty: stdout
  std::string format = "csv";
  bool trace = false;
};

/// Everything a simulate or sweep run needs.
///
/// `policy` is a template: its delta is overwritten per grid cell, and its
/// reference means are filled from the environment unless given explicitly.
struct ExperimentConfig {
  Environment env{DistributionSpec::deterministic(1.0), DistributionSpec::deterministic(1.0)};
  std::optional<MultiSetup> multi;
  PolicySpec policy;
  std::vector<double> m_grid{100.0};
  std::vector<double> delta_grid{0.0};
  std::uint64_t horizon = 10'000;
  std::uint64_t replications = 100;
  std::uint64_t root_seed = 1;
  double initial_fraction = 0.5;  // S_0 = fraction * M
  bool audit = true;
  double h = 1.0;
  double b = 1.0;
  OutputOptions output;

  [[nodiscard]] bool is_multi() const noexcept { return multi.has_value(); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (m_grid.empty()) fail("grid.M must be non-empty");
    if (delta_grid.empty()) fail("grid.delta must be non-empty");
    for (double m : m_grid)
      if (!(m > 0.0) || !std::isfinite(m)) fail("grid.M entries must be positive");
    for (double d : delta_grid)
      if (!(d >= 0.0) || !std::isfinite(d)) fail("grid.delta entries must be >= 0");
    if (horizon < 1) fail("run.horizon must be >= 1");
    if (replications < 1) fail("run.replications must be >= 1");
    if (!(initial_fraction >= 0.0 && initial_fraction <= 1.0)) fail("run.initial_fraction must lie in [0, 1]");
    if (!(h >= 0.0 && b >= 0.0)) fail("costs must be >= 0");
    if (output.format != "csv" && output.format != "json") fail("output.format must be csv or json");
    if (is_multi_resource(policy.kind) != is_multi()) {
      fail(is_multi() ? "multi-resource environment needs multi_bang_bang or eg_bang_bang"
                      : "multi-resource policy needs env.resources, env.types and env.weights");
    }
    if (is_multi()) {
      if (multi->env.supply.empty() || multi->env.demand.empty()) fail("env.resources and env.types must be non-empty");
      if (multi->weights.types != multi->env.demand.size() || multi->weights.resources != multi->env.supply.size())
        fail("env.weights must be types x resources");
    }
  }

  /// Policy for one grid cell, validated.
  [[nodiscard]] PolicySpec policy_for(double delta) const {
    PolicySpec p = policy;
    p.delta = delta;
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(e.what()) + " (delta = " + std::to_string(delta) + ")");
    }
    return p;
  }
};

namespace detail {

inline std::vector<double> grid_from_json(const json& j, std::string_view where) {
  if (j.is_array()) return get_numbers(j, where);
  allow_keys(j, where, {"from", "to", "count"});
  const double lo = get_number(j, "from", where);
  const double hi = get_number(j, "to", where);
  if (!j.contains("count") || !j.at("count").is_number_integer() || j.at("count").get<long>() < 1)
    throw ConfigError(std::string(where) + ": 'count' must be a positive integer");
  const auto n = j.at("count").get<long>();
  std::vector<double> g(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

// Repeats each schedule (constant specs count as length 1) up to the lcm of the lengths.
inline std::pair<std::vector<double>, std::vector<double>> aligned_schedules(const DistributionSpec& s,
                                                                            const DistributionSpec& d) {
  auto sched = [](const DistributionSpec& x) {
    return x.has_schedule() ? std::vector<double>(x.schedule().begin(), x.schedule().end())
                            : std::vector<double>{x.nominal_mean()};
  };
  std::vector<double> a = sched(s), b = sched(d);
  const std::size_t c = std::lcm(a.size(), b.size());
  std::vector<double> ra(c), rb(c);
  for (std::size_t i = 0; i < c; ++i) {
    ra[i] = a[i % a.size()];
    rb[i] = b[i % b.size()];
  }
  return {ra, rb};
}

}  // namespace detail

/// Fills reference means (and the EG table) of a policy template from the environment.
inline void complete_policy(ExperimentConfig& cfg, bool have_supply_mean, bool have_demand_mean) {
  PolicySpec& p = cfg.policy;
  if (!cfg.is_multi()) {
    if (!have_supply_mean) p.supply_mean = cfg.env.supply.nominal_mean();
    if (!have_demand_mean) p.demand_mean = cfg.env.demand.nominal_mean();
    if (p.kind == PolicyKind::TimeVaryingBangBang && p.supply_schedule.empty()) {
      auto [s, d] = detail::aligned_schedules(cfg.env.supply, cfg.env.demand);
      p.supply_schedule = std::move(s);
      p.demand_schedule = std::move(d);
    }
    return;
  }
  const auto& m = *cfg.multi;
  if (p.resource_supply_means.empty())
    for (const auto& s : m.env.supply) p.resource_supply_means.push_back(s.nominal_mean());
  if (!have_demand_mean) {
    p.demand_mean = 0.0;
    for (const auto& d : m.env.demand) p.demand_mean += d.nominal_mean();
  }
  if (p.kind == PolicyKind::EgBangBang && !p.eg_allocations) {
    EgInstance inst{m.weights, {}, p.resource_supply_means};
    for (const auto& d : m.env.demand) inst.type_means.push_back(d.nominal_mean());
    p.eg_allocations = solve_fluid_eg(inst).allocations;
  }
}

inline PolicySpec policy_from_json(const json& j, bool& has_supply_mean, bool& has_demand_mean) {
  detail::allow_keys(j, "policy",
                     {"kind", "alpha", "delta", "a_max", "supply_mean", "demand_mean", "supply_schedule",
                      "demand_schedule", "resource_supply_means", "eg_allocations"});
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("policy: missing 'kind'");
  PolicySpec p;
  try {
    p.kind = policy_kind_from_string(j.at("kind").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  p.alpha = detail::get_or(j, "alpha", p.alpha);
  p.delta = detail::get_or(j, "delta", p.delta);
  p.a_max = detail::get_or(j, "a_max", p.a_max);
  has_supply_mean = j.contains("supply_mean");
  has_demand_mean = j.contains("demand_mean");
  p.supply_mean = detail::get_or(j, "supply_mean", p.supply_mean);
  p.demand_mean = detail::get_or(j, "demand_mean", p.demand_mean);
  if (j.contains("supply_schedule")) p.supply_schedule = detail::get_numbers(j.at("supply_schedule"), "policy.supply_schedule");
  if (j.contains("demand_schedule")) p.demand_schedule = detail::get_numbers(j.at("demand_schedule"), "policy.demand_schedule");
  if (j.contains("resource_supply_means"))
    p.resource_supply_means = detail::get_numbers(j.at("resource_supply_means"), "policy.resource_supply_means");
  if (j.contains("eg_allocations")) {
    const json& t = j.at("eg_allocations");
    if (!t.is_array() || t.empty()) throw ConfigError("policy.eg_allocations: expected a non-empty matrix");
    const std::size_t rows = t.size();
    const std::size_t cols = t.front().is_array() ? t.front().size() : 0;
    AllocationMatrix a(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = detail::get_numbers(t.at(r), "policy.eg_allocations");
      if (row.size() != cols || cols == 0) throw ConfigError("policy.eg_allocations: ragged matrix");
      for (std::size_t c = 0; c < cols; ++c) a(r, c) = row[c];
    }
    p.eg_allocations = std::move(a);
  }
  return p;
}

inline WeightTable weights_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("env.weights: expected a non-empty matrix");
  const std::size_t rows = j.size();
  std::vector<double> w;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = detail::get_numbers(j.at(r), "env.weights");
    if (r == 0) cols = row.size();
    if (row.size() != cols || cols == 0) throw ConfigError("env.weights: ragged matrix");
    w.insert(w.end(), row.begin(), row.end());
  }
  try {
    return WeightTable(rows, cols, std::move(w));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env.weights: ") + e.what());
  }
}

/// Parses the config document; unknown keys anywhere are errors.
inline ExperimentConfig config_from_json(const json& root) {
  detail::allow_keys(root, "config", {"env", "policy", "grid", "costs", "run", "output"});
  ExperimentConfig cfg;
  if (!root.contains("env")) throw ConfigError("config: missing 'env'");
  if (!root.contains("policy")) throw ConfigError("config: missing 'policy'");

  const json& env = root.at("env");
  detail::allow_keys(env, "env", {"supply", "demand", "resources", "types", "weights"});
  const bool single = env.contains("supply") || env.contains("demand");
  const bool multi = env.contains("resources") || env.contains("types") || env.contains("weights");
  if (single == multi) throw ConfigError("env: give either supply/demand or resources/types/weights");
  if (single) {
    if (!env.contains("supply") || !env.contains("demand")) throw ConfigError("env: need both 'supply' and 'demand'");
    cfg.env = {distribution_from_json(env.at("supply"), "env.supply"),
               distribution_from_json(env.at("demand"), "env.demand")};
  } else {
    if (!env.contains("resources") || !env.contains("types") || !env.contains("weights"))
      throw ConfigError("env: multi-resource needs 'resources', 'types' and 'weights'");
    MultiSetup m;
    for (const auto& r : env.at("resources")) m.env.supply.push_back(distribution_from_json(r, "env.resources[]"));
    for (const auto& t : env.at("types")) m.env.demand.push_back(distribution_from_json(t, "env.types[]"));
    m.weights = weights_from_json(env.at("weights"));
    cfg.multi = std::move(m);
  }

  bool has_sm = false, has_dm = false;
  cfg.policy = policy_from_json(root.at("policy"), has_sm, has_dm);

  if (root.contains("grid")) {
    const json& g = root.at("grid");
    detail::allow_keys(g, "grid", {"M", "delta"});
    if (g.contains("M")) cfg.m_grid = detail::grid_from_json(g.at("M"), "grid.M");
    if (g.contains("delta")) cfg.delta_grid = detail::grid_from_json(g.at("delta"), "grid.delta");
    else cfg.delta_grid = {cfg.policy.delta};
  } else {
    cfg.delta_grid = {cfg.policy.delta};
  }
  if (root.contains("costs")) {
    const json& c = root.at("costs");
    detail::allow_keys(c, "costs", {"h", "b"});
    cfg.h = detail::get_or(c, "h", cfg.h);
    cfg.b = detail::get_or(c, "b", cfg.b);
  }
  if (root.contains("run")) {
    const json& r = root.at("run");
    detail::allow_keys(r, "run", {"horizon", "replications", "seed", "initial_fraction", "audit"});
    cfg.horizon = detail::get_or<std::uint64_t>(r, "horizon", cfg.horizon);
    cfg.replications = detail::get_or<std::uint64_t>(r, "replications", cfg.replications);
    cfg.root_seed = detail::get_or<std::uint64_t>(r, "seed", cfg.root_seed);
    cfg.initial_fraction = detail::get_or(r, "initial_fraction", cfg.initial_fraction);
    cfg.audit = detail::get_or(r, "audit", cfg.audit);
  }
  if (root.contains("output")) {
    const json& o = root.at("output");
    detail::allow_keys(o, "output", {"path", "format", "trace"});
    cfg.output.path = detail::get_or<std::string>(o, "path", "");
    cfg.output.format = detail::get_or<std::string>(o, "format", "csv");
    cfg.output.trace = detail::get_or(o, "trace", false);
  }
  if (is_multi_resource(cfg.policy.kind) != cfg.is_multi()) cfg.validate();  // reports the mismatch
  try {
    complete_policy(cfg, has_sm, has_dm);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const PolicySpec& p) {
  json j;
  j["kind"] = std::string(to_string(p.kind));
  j["alpha"] = p.alpha;
  j["delta"] = p.delta;
  if (std::isfinite(p.a_max)) j["a_max"] = p.a_max;
  j["supply_mean"] = p.supply_mean;
  j["demand_mean"] = p.demand_mean;
  if (!p.supply_schedule.empty()) j["supply_schedule"] = p.supply_schedule;
  if (!p.demand_schedule.empty()) j["demand_schedule"] = p.demand_schedule;
  if (!p.resource_supply_means.empty()) j["resource_supply_means"] = p.resource_supply_means;
  if (p.eg_allocations) {
    json rows = json::array();
    for (std::size_t th = 0; th < p.eg_allocations->types; ++th) {
      const auto r = p.eg_allocations->row(th);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["eg_allocations"] = rows;
  }
  return j;
}

/// Serializes a config so that config_from_json reproduces it.
inline json to_json(const ExperimentConfig& c) {
  json j;
  if (c.is_multi()) {
    json res = json::array(), types = json::array(), w = json::array();
    for (const auto& s : c.multi->env.supply) res.push_back(to_json(s));
    for (const auto& d : c.multi->env.demand) types.push_back(to_json(d));
    for (std::size_t th = 0; th < c.multi->weights.types; ++th) {
      std::vector<double> row;
      for (std::size_t k = 0; k < c.multi->weights.resources; ++k) row.push_back(c.multi->weights(th, k));
      w.push_back(row);
    }
    j["env"] = {{"resources", res}, {"types", types}, {"weights", w}};
  } else {
    j["env"] = {{"supply", to_json(c.env.supply)}, {"demand", to_json(c.env.demand)}};
  }
  j["policy"] = to_json(c.policy);
  j["grid"] = {{"M", c.m_grid}, {"delta", c.delta_grid}};
  j["costs"] = {{"h", c.h}, {"b", c.b}};
  j["run"] = {{"horizon", c.horizon},
              {"replications", c.replications},
              {"seed", c.root_seed},
              {"initial_fraction", c.initial_fraction},
              {"audit", c.audit}};
  j["output"] = {{"path", c.output.path}, {"format", c.output.format}, {"trace", c.output.trace}};
  return j;
}

/// EG instance section: {"weights": [[...]], "type_means": [...], "supply_means": [...]}.
inline EgInstance eg_instance_from_json(const json& j) {
  detail::allow_keys(j, "eg", {"weights", "type_means", "supply_means"});
  if (!j.contains("weights") || !j.contains("type_means") || !j.contains("supply_means"))
    throw ConfigError("eg: need 'weights', 'type_means' and 'supply_means'");
  EgInstance inst{weights_from_json(j.at("weights")), detail::get_numbers(j.at("type_means"), "eg.type_means"),
                  detail::get_numbers(j.at("supply_means"), "eg.supply_means")};
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return inst;
}

}  // namespace fairinv
