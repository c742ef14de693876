#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fairinv/harness/config.hpp"
#include "fairinv/harness/experiment.hpp"
#include "fairinv/harness/io.hpp"
#include "fairinv/harness/scaling.hpp"

using namespace fairinv;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using nlohmann::json;

namespace {

ExperimentConfig deterministic(double b, double n, PolicyKind kind, double alpha = 1.0) {
  json j = {{"env",
             {{"supply", {{"family", "deterministic"}, {"mean", b}}},
              {"demand", {{"family", "deterministic"}, {"mean", n}}}}},
            {"policy", {{"kind", to_string(kind)}, {"alpha", alpha}}},
            {"grid", {{"M", {10}}, {"delta", {0}}}},
            {"run", {{"horizon", 100}, {"replications", 1}, {"seed", 1}}}};
  return config_from_json(j);
}

ExperimentConfig tn_config(const std::string& kind, std::vector<double> ms, std::vector<double> deltas,
                           std::uint64_t horizon, std::uint64_t reps) {
  json j = {{"env",
             {{"supply", {{"family", "truncated_normal"}, {"mean", 5.0}, {"sigma", 1.0}}},
              {"demand", {{"family", "truncated_normal"}, {"mean", 5.0}, {"sigma", 1.0}}}}},
            {"policy", {{"kind", kind}}},
            {"grid", {{"M", ms}, {"delta", deltas}}},
            {"run", {{"horizon", horizon}, {"replications", reps}, {"seed", 7}}}};
  return config_from_json(j);
}

}  // namespace

TEST_CASE("deterministic runs", "[harness]") {
  SECTION("matched supply and demand never moves the store") {
    const auto cfg = deterministic(5, 5, PolicyKind::Proportional);
    std::vector<double> levels;
    const auto s = run_replication(cfg, 10, 0, 0, [&](std::uint64_t, const StepRecord& r) { levels.push_back(r.level); });
    CHECK(s.delta_eff == 0.0);
    CHECK(s.delta_fair == 0.0);
    REQUIRE(levels.size() == 100);
    for (double l : levels) CHECK(l == 5.0);
  }
  SECTION("one unit of surplus per round overflows after five rounds") {
    const auto cfg = deterministic(6, 5, PolicyKind::Static, 1.0);
    const auto s = run_replication(cfg, 10, 0, 0);
    CHECK_THAT(s.w_bar, WithinAbs(0.95, 1e-15));
    CHECK(s.v_bar == 0.0);
    CHECK_THAT(s.delta_eff, WithinAbs(0.95, 1e-15));
    CHECK(s.pathwise_violations == 0);
  }
}

TEST_CASE("replications are reproducible from the seed", "[harness]") {
  const auto cfg = tn_config("bang_bang", {20}, {0.3}, 2000, 3);
  const auto a = run_replication(cfg, 20, 0.3, 2), b = run_replication(cfg, 20, 0.3, 2);
  CHECK(a == b);
  const auto c = run_replication(cfg, 20, 0.3, 1);
  CHECK_FALSE(a == c);
  auto other = cfg;
  other.root_seed = 8;
  CHECK_FALSE(run_replication(other, 20, 0.3, 2) == a);
}

TEST_CASE("a one-cell sweep averages its replications", "[harness]") {
  const auto cfg = tn_config("bang_bang", {15}, {0.2}, 3000, 6);
  const auto res = run_sweep(cfg, {1, true});
  REQUIRE(res.rows.size() == 1);
  REQUIRE(res.runs.size() == 1);
  double m = 0, w = 0, f = 0;
  std::vector<double> x;
  for (std::uint64_t r = 0; r < 6; ++r) {
    const auto s = run_replication(cfg, 15, 0.2, r);
    CHECK(s == res.runs[0][r]);
    x.push_back(s.delta_eff);
    m += s.delta_eff / 6;
    w += s.w_bar / 6;
    f += s.delta_fair / 6;
  }
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  const auto& row = res.rows[0];
  CHECK_THAT(row.delta_eff_mean, WithinRel(m, 1e-12));
  CHECK_THAT(row.w_bar_mean, WithinRel(w, 1e-12));
  CHECK_THAT(row.delta_fair_mean, WithinRel(f, 1e-12));
  CHECK_THAT(row.delta_eff_se, WithinRel(std::sqrt(ss / 5 / 6), 1e-10));
  CHECK(row.reps == 6);
}

TEST_CASE("sweep output does not depend on thread count", "[harness]") {
  const auto cfg = tn_config("bang_bang", {10, 20, 30}, {0, 0.25, 0.5}, 1000, 4);
  const auto one = run_sweep(cfg, {1, false});
  const auto four = run_sweep(cfg, {4, false});
  REQUIRE(one.rows.size() == 9);
  CHECK(one.rows == four.rows);
  // grid order: M outer, delta inner
  CHECK(one.rows[1].M == 10);
  CHECK(one.rows[1].delta == 0.25);
  CHECK(one.rows[3].M == 20);
}

TEST_CASE("plot floor applies only to the plot column", "[harness]") {
  std::vector<RunSummary> runs(2);
  runs[0].delta_eff = 0.0;
  runs[1].delta_eff = 2e-5;
  const auto row = summarize_cell(50, 0.5, runs);
  CHECK(row.delta_eff_mean == 1e-5);
  CHECK(row.delta_eff_plot == 1e-4);
  runs[1].delta_eff = 0.4;
  CHECK(summarize_cell(50, 0.5, runs).delta_eff_plot == 0.2);
}

TEST_CASE("sweep CSV round-trips losslessly", "[harness][io]") {
  const auto cfg = tn_config("bang_bang", {10, 40}, {0.1, 0.4}, 700, 3);
  const auto res = run_sweep(cfg);
  std::stringstream ss;
  write_sweep_csv(ss, res);
  const auto back = read_sweep_csv(ss);
  CHECK(back.rows == res.rows);
  std::stringstream bad("M,delta\n1,2\n");
  CHECK_THROWS(read_sweep_csv(bad));
}

TEST_CASE("a failing cell is reported without sinking the sweep", "[harness]") {
  // delta = 2 is outside the threshold rule's range, delta = 0.2 is fine
  auto cfg = tn_config("bang_bang", {10}, {0.2, 2.0}, 200, 2);
  const auto res = run_sweep(cfg);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].error.empty());
  CHECK(std::isfinite(res.rows[0].delta_eff_mean));
  CHECK_FALSE(res.rows[1].error.empty());
  CHECK(std::isnan(res.rows[1].delta_eff_mean));
}

TEST_CASE("scaling fits", "[harness][scaling]") {
  SECTION("log-log slope of 1/M") {
    std::vector<SweepRow> rows;
    for (double m : {10.0, 20.0, 40.0, 80.0}) {
      SweepRow r;
      r.M = m;
      r.delta_eff_mean = 3.0 / m;
      rows.push_back(r);
    }
    const auto f = fit_scaling(rows, "M", "delta_eff_mean", FitTransform::LogLog);
    CHECK_THAT(f.slope, WithinAbs(-1.0, 1e-12));
    CHECK_THAT(f.r_squared, WithinAbs(1.0, 1e-12));
    CHECK(f.points == 4);
  }
  SECTION("lin-log slope of exp(-0.02 M)") {
    std::vector<SweepRow> rows;
    for (double m : {10.0, 30.0, 50.0, 70.0, 90.0}) {
      SweepRow r;
      r.M = m;
      r.delta_eff_mean = 2.0 * std::exp(-0.02 * m);
      rows.push_back(r);
    }
    CHECK_THAT(fit_scaling(rows, "M", "delta_eff_mean", FitTransform::LinLog).slope, WithinAbs(-0.02, 1e-12));
  }
  SECTION("rows under the floor are dropped, and fewer than three is an error") {
    std::vector<SweepRow> rows(4);
    rows[0].M = 1;
    rows[0].delta_eff_mean = 1;
    rows[1].M = 2;
    rows[1].delta_eff_mean = 0.5;
    rows[2].M = 3;
    rows[2].delta_eff_mean = 1e-6;
    rows[3].M = 4;
    rows[3].delta_eff_mean = 0.0;
    CHECK_THROWS_AS(fit_scaling(rows, "M", "delta_eff_mean", FitTransform::LogLog), std::invalid_argument);
    CHECK_THROWS_AS(fit_scaling(rows, "M", "nope", FitTransform::LogLog), std::invalid_argument);
  }
}

TEST_CASE("config parsing", "[harness][config]") {
  SECTION("unknown keys are errors") {
    json j = json::parse(R"({"env": {"supply": {"family": "deterministic", "mean": 5},
                                    "demand": {"family": "deterministic", "mean": 5}},
                           "policy": {"kind": "proportional"}, "run": {"horizn": 100}})");
    CHECK_THROWS_WITH(config_from_json(j), ContainsSubstring("horizn"));
    j["run"] = json::object();
    j["extra"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SECTION("grid ranges and defaults") {
    const auto cfg = tn_config("bang_bang", {10}, {0}, 10, 1);
    json j = to_json(cfg);
    j["grid"]["M"] = {{"from", 10}, {"to", 100}, {"count", 10}};
    const auto g = config_from_json(j);
    REQUIRE(g.m_grid.size() == 10);
    CHECK(g.m_grid.front() == 10);
    CHECK(g.m_grid[1] == 20);
    CHECK(g.m_grid.back() == 100);
    json minimal = {{"env",
                     {{"supply", {{"family", "poisson"}, {"mean", 4}}},
                      {"demand", {{"family", "poisson"}, {"mean", 2}}}}},
                    {"policy", {{"kind", "bang_bang"}, {"delta", 0.3}}}};
    const auto d = config_from_json(minimal);
    CHECK(d.delta_grid == std::vector<double>{0.3});
    CHECK(d.horizon == 10'000);
    CHECK(d.replications == 100);
    CHECK(d.policy.supply_mean == 4);
    CHECK(d.policy.demand_mean == 2);
    CHECK(d.policy.reference() == 2);
  }
  SECTION("round trip through JSON") {
    const auto cfg = tn_config("bang_bang", {10, 20}, {0.1, 0.2}, 123, 4);
    const auto back = config_from_json(to_json(cfg));
    CHECK(back.m_grid == cfg.m_grid);
    CHECK(back.delta_grid == cfg.delta_grid);
    CHECK(back.horizon == 123);
    CHECK(back.replications == 4);
    CHECK(back.root_seed == 7);
  }
  SECTION("policy and environment must agree on dimension") {
    json j = {{"env",
               {{"supply", {{"family", "poisson"}, {"mean", 4}}}, {"demand", {{"family", "poisson"}, {"mean", 2}}}}},
              {"policy", {{"kind", "multi_bang_bang"}}}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j["policy"]["kind"] = "greedy";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j["policy"]["kind"] = "bang_bang";
    j["grid"] = {{"M", {{"from", 10}, {"to", 20}, {"count", 0}}}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
  }
  SECTION("missing files") { CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError); }
}

TEST_CASE("multi-resource trace requests are rejected", "[harness][multi]") {
  json j = {{"env",
             {{"resources", {{{"family", "poisson"}, {"mean", 3}}, {{"family", "poisson"}, {"mean", 3}}}},
              {"types", {{{"family", "poisson"}, {"mean", 1}}, {{"family", "poisson"}, {"mean", 2}}}},
              {"weights", {{1, 2}, {2, 1}}}}},
            {"policy", {{"kind", "eg_bang_bang"}, {"delta", 0.1}}},
            {"grid", {{"M", {20}}}},
            {"run", {{"horizon", 500}, {"replications", 1}}}};
  const auto cfg = config_from_json(j);
  REQUIRE(cfg.policy.eg_allocations.has_value());
  const auto s = run_replication(cfg, 20, 0.1, 0);
  CHECK(s.horizon == 500);
  CHECK(s.pathwise_violations == 0);
  CHECK_THROWS_AS(run_replication(cfg, 20, 0.1, 0, [](std::uint64_t, const StepRecord&) {}), ConfigError);
}

TEST_CASE("larger stores waste less, and the threshold rule beats proportional", "[harness][mc]") {
  auto prop = tn_config("proportional", {10, 25, 50, 100}, {0}, 5000, 20);
  const auto p = run_sweep(prop, {1, false});
  for (std::size_t i = 1; i < p.rows.size(); ++i) CHECK(p.rows[i].delta_eff_mean < p.rows[i - 1].delta_eff_mean);
  const auto bb = run_sweep(tn_config("bang_bang", {100}, {0.5}, 5000, 20), {1, false});
  CHECK(bb.rows[0].delta_eff_mean * 10 <= p.rows.back().delta_eff_mean);
}
