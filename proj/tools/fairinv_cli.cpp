// fairinv: simulate, sweep and check the capacity-M fair allocation model.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairinv/fairinv.hpp"

namespace {

using fairinv::json;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  bool trace = false;
  unsigned parallel = 1;
  std::optional<std::uint64_t> horizon;
  std::optional<std::uint64_t> reps;
};

// Output stream for --out, or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open output '" + path + "'");
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

fairinv::ExperimentConfig load(const Common& c) {
  if (c.config.empty()) throw fairinv::ConfigError("--config is required");
  auto cfg = fairinv::load_config(c.config);
  if (c.seed) cfg.root_seed = *c.seed;
  if (c.horizon) cfg.horizon = *c.horizon;
  if (c.reps) cfg.replications = *c.reps;
  cfg.validate();
  return cfg;
}

// Command-line values win over the config's output section.
std::string pick_format(const Common& c, const CLI::App& sub, const fairinv::ExperimentConfig& cfg) {
  return sub.count("--format") ? c.format : cfg.output.format;
}
std::string pick_out(const Common& c, const fairinv::ExperimentConfig& cfg) {
  return c.out.empty() ? cfg.output.path : c.out;
}

int cmd_simulate(const Common& c, const CLI::App& sub, std::optional<double> m_opt, std::optional<double> d_opt) {
  const auto cfg = load(c);
  const double M = m_opt.value_or(cfg.m_grid.front());
  const double delta = d_opt.value_or(cfg.delta_grid.front());
  const std::uint64_t reps = c.reps.value_or(1);
  Sink sink(pick_out(c, cfg));
  const bool trace = c.trace || cfg.output.trace;

  std::vector<fairinv::SummaryRow> rows;
  const std::string policy(fairinv::to_string(cfg.policy.kind));
  if (trace) {
    // trace of replication 0 goes to the output; summaries go to stderr
    sink.get() << fairinv::kTraceHeader << '\n';
    auto& os = sink.get();
    const auto s = fairinv::run_replication(cfg, M, delta, 0,
                                            [&os](std::uint64_t t, const fairinv::StepRecord& r) {
                                              fairinv::write_trace_row(os, t, r);
                                            });
    std::cerr << fairinv::to_json(fairinv::SummaryRow{policy, M, delta, cfg.root_seed, s}).dump() << '\n';
    return 0;
  }
  for (std::uint64_t r = 0; r < reps; ++r)
    rows.push_back({policy, M, delta, cfg.root_seed, fairinv::run_replication(cfg, M, delta, r)});
  if (pick_format(c, sub, cfg) == "json") {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(fairinv::to_json(r));
    sink.get() << arr.dump(2) << '\n';
  } else {
    fairinv::write_summary_csv(sink.get(), rows);
  }
  return 0;
}

int cmd_sweep(const Common& c, const CLI::App& sub) {
  const auto cfg = load(c);
  const auto res = fairinv::run_sweep(cfg, {c.parallel, false});
  Sink sink(pick_out(c, cfg));
  if (pick_format(c, sub, cfg) == "json")
    sink.get() << fairinv::to_json(res).dump(2) << '\n';
  else
    fairinv::write_sweep_csv(sink.get(), res);
  int failed = 0;
  for (const auto& r : res.rows) {
    if (r.error.empty()) continue;
    ++failed;
    std::cerr << "cell M=" << r.M << " delta=" << r.delta << " failed: " << r.error << '\n';
  }
  return failed == 0 ? 0 : 3;
}

int cmd_verify(const Common& c) {
  fairinv::VerifyOptions opt;
  if (c.seed) opt.seed = *c.seed;
  if (c.reps) opt.replications = *c.reps;
  const auto checks = fairinv::run_verification(opt);
  const json report = fairinv::to_json(checks);
  Sink sink(c.out);
  sink.get() << report.dump(2) << '\n';
  return report.at("passed").get<bool>() ? 0 : 1;
}

int cmd_eg(const Common& c) {
  fairinv::EgInstance inst = fairinv::food_bank_instance();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw fairinv::ConfigError("cannot open config '" + c.config + "'");
    const json j = json::parse(in, nullptr, true, true);
    if (j.contains("env")) {
      const auto cfg = fairinv::config_from_json(j);
      if (!cfg.is_multi()) throw fairinv::ConfigError("eg: config has no multi-resource environment");
      inst = {cfg.multi->weights, {}, {}};
      for (const auto& d : cfg.multi->env.demand) inst.type_means.push_back(d.nominal_mean());
      for (const auto& s : cfg.multi->env.supply) inst.supply_means.push_back(s.nominal_mean());
    } else {
      inst = fairinv::eg_instance_from_json(j.contains("eg") ? j.at("eg") : j);
    }
  }
  const auto sol = fairinv::solve_fluid_eg(inst);
  json alloc = json::array();
  for (std::size_t th = 0; th < inst.types(); ++th) {
    const auto r = sol.allocations.row(th);
    alloc.push_back(std::vector<double>(r.begin(), r.end()));
  }
  const json j = {{"allocations", alloc},
                  {"dual_prices", sol.dual_prices},
                  {"kkt_residual", sol.kkt_residual},
                  {"objective", inst.objective(sol.allocations)},
                  {"newton_steps", sol.newton_steps}};
  Sink sink(c.out);
  sink.get() << j.dump(2) << '\n';
  return 0;
}

int cmd_lower_bound(const Common& c, double a, double delta, double M) {
  const auto lb = fairinv::analysis::epoch_lower_bound(a, delta, M);
  const json j = {{"case", static_cast<int>(lb.which)},
                  {"w_lb", lb.w_lb},
                  {"v_lb", lb.v_lb},
                  {"L", lb.L},
                  {"t", lb.t},
                  {"tail_bound", lb.tail_bound}};
  Sink sink(c.out);
  sink.get() << j.dump(2) << '\n';
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool grid_flags) {
  sub->add_option("--config", c.config, "experiment config (JSON)");
  sub->add_option("--seed", c.seed, "root seed, overrides run.seed");
  sub->add_option("--out", c.out, "output path (default stdout)");
  if (grid_flags) {
    sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--horizon", c.horizon, "rounds per replication, overrides run.horizon")
        ->check(CLI::PositiveNumber);
  }
  sub->add_option("--reps", c.reps, "replications")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairinv: fair allocation from a capacity-limited store"};
  app.require_subcommand(1);
  Common c;
  std::optional<double> sim_m, sim_delta;
  double lb_a = 0.5, lb_delta = 0.1, lb_m = 10.0;

  auto* sim = app.add_subcommand("simulate", "run replications of one cell, optionally with a per-round trace");
  add_common(sim, c, true);
  sim->add_flag("--trace", c.trace, "write the per-round trace of replication 0 instead of summaries");
  sim->add_option("--M", sim_m, "capacity (default: first grid value)");
  sim->add_option("--delta", sim_delta, "fairness target (default: first grid value)");

  auto* sweep = app.add_subcommand("sweep", "evaluate every (M, delta) grid cell");
  add_common(sweep, c, true);
  sweep->add_option("--parallel", c.parallel, "worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "run the analysis oracle suite and print a JSON report");
  add_common(verify, c, false);

  auto* eg = app.add_subcommand("eg", "solve a fluid Eisenberg-Gale instance (default: food-bank table)");
  eg->add_option("--config", c.config, "instance or experiment config (JSON)");
  eg->add_option("--out", c.out, "output path (default stdout)");

  auto* lb = app.add_subcommand("lower-bound", "epoch lower bound for Bernoulli(1/2) supply and unit demand");
  lb->add_option("--a", lb_a, "lowest allocation")->required();
  lb->add_option("--delta", lb_delta, "allocation spread")->required();
  lb->add_option("--M", lb_m, "capacity")->required();
  lb->add_option("--out", c.out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(c, *sim, sim_m, sim_delta);
    if (*sweep) return cmd_sweep(c, *sweep);
    if (*verify) return cmd_verify(c);
    if (*eg) return cmd_eg(c);
    if (*lb) return cmd_lower_bound(c, lb_a, lb_delta, lb_m);
  } catch (const fairinv::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
