#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairinv/distributions.hpp"
#include "fairinv/inventory.hpp"
#include "fairinv/metrics.hpp"
#include "fairinv/policies.hpp"

using namespace fairinv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

StepRecord rec(double alloc, double demand, double waste = 0, double stockout = 0) {
  StepRecord r;
  r.allocation = alloc;
  r.demand = demand;
  r.waste = waste;
  r.stockout = stockout;
  return r;
}

// Direct pairwise form of the multi-type envy: every (t, theta) vs (t', theta') pair.
double brute_force_envy(const WeightTable& w, const std::vector<AllocationMatrix>& hist,
                        const std::vector<std::vector<double>>& dem) {
  double best = 0.0;
  for (std::size_t t = 0; t < hist.size(); ++t)
    for (std::size_t a = 0; a < hist[t].types; ++a) {
      if (!(dem[t][a] > 0)) continue;
      for (std::size_t t2 = 0; t2 < hist.size(); ++t2)
        for (std::size_t b = 0; b < hist[t2].types; ++b) {
          if (!(dem[t2][b] > 0)) continue;
          for (std::size_t viewer = 0; viewer < w.types; ++viewer)
            best = std::max(best, std::abs(w.utility(viewer, hist[t].row(a)) - w.utility(viewer, hist[t2].row(b))));
        }
    }
  return best;
}

}  // namespace

TEST_CASE("envy is the allocation range over rounds with demand", "[metrics]") {
  RunAccumulator acc;
  for (auto r : {rec(1.0, 1), rec(1.2, 3), rec(0.8, 2)}) acc.accumulate(r);
  CHECK_THAT(acc.finalize(1, 1).delta_fair, WithinAbs(0.4, 1e-15));

  RunAccumulator skip;
  for (auto r : {rec(1.0, 1), rec(5.0, 0), rec(1.1, 2)}) skip.accumulate(r);
  CHECK_THAT(skip.finalize(1, 1).delta_fair, WithinAbs(0.1, 1e-15));

  EnvyTracker none;
  none.update(3.0, 0);
  CHECK(none.delta_fair() == 0.0);
}

TEST_CASE("efficiency loss is the cost-weighted average of waste and stockout", "[metrics]") {
  RunAccumulator acc;
  for (auto r : {rec(1, 1, 0, 1), rec(1, 1, 2, 0), rec(1, 1, 0, 0)}) acc.accumulate(r);
  const auto s = acc.finalize(1, 1);
  CHECK(s.delta_eff == 1.0);
  CHECK(s.horizon == 3);
  const auto s2 = acc.finalize(2, 3);
  CHECK(s2.delta_eff == 2 * s2.w_bar + 3 * s2.v_bar);

  RunAccumulator zeros;
  for (int i = 0; i < 5; ++i) zeros.accumulate(rec(1, 1));
  CHECK(zeros.finalize(1, 1).delta_eff == 0.0);
  CHECK(zeros.finalize(1, 1).delta_fair == 0.0);
  CHECK_THROWS_AS(RunAccumulator{}.finalize(1, 1), std::invalid_argument);
}

TEST_CASE("streaming summary equals batch recomputation of the stored trace", "[metrics][property]") {
  const RngStream rng(3, 0);
  const auto bud = DistributionSpec::exponential(5), dem = DistributionSpec::poisson(5);
  PolicySpec p;
  p.kind = PolicyKind::BangBang;
  p.delta = 0.5;
  p.supply_mean = 5;
  p.demand_mean = 5;
  for (int trial = 0; trial < 20; ++trial) {
    const double M = 3.0 + trial;
    InventoryState s = InventoryState::make(M, M / 2);
    std::vector<StepRecord> trace;
    RunAccumulator acc;
    for (std::uint64_t t = 0; t < 50; ++t) {
      const double b = sample_supply(bud, rng.lane(trial), t), n = sample_demand(dem, rng.lane(trial), t);
      auto [ns, r] = step(s, b, n, decide(p, s, b, n).allocation);
      trace.push_back(r);
      acc.accumulate(r);
      s = ns;
    }
    const auto sum = acc.finalize(1.5, 0.5);
    double W = 0, V = 0, up = 0, lo = 0;
    double amin = 1e300, amax = -1e300;
    for (const auto& r : trace) {
      W += r.waste;
      V += r.stockout;
      up += r.at_upper;
      lo += r.at_lower;
      if (r.demand > 0) {
        amin = std::min(amin, r.allocation);
        amax = std::max(amax, r.allocation);
      }
    }
    CHECK_THAT(sum.w_bar, WithinRel(W / 50, 1e-12));
    CHECK_THAT(sum.v_bar, WithinRel(V / 50, 1e-12));
    CHECK_THAT(sum.delta_eff, WithinAbs(1.5 * W / 50 + 0.5 * V / 50, 1e-12));
    CHECK(sum.h_m == up / 50);
    CHECK(sum.h_0 == lo / 50);
    CHECK(sum.delta_fair == (amax >= amin ? amax - amin : 0.0));
  }
}

TEST_CASE("multi-type envy", "[metrics][multi]") {
  SECTION("two bundles and crossed weights give envy 1") {
    const WeightTable w(2, 2, {1, 2, 2, 1});
    AllocationMatrix x(1, 2), y(1, 2);
    x(0, 0) = 1;
    y(0, 1) = 1;
    const std::vector<AllocationMatrix> hist{x, y};
    const std::vector<std::vector<double>> dem{{1}, {1}};
    const WeightTable w1(1, 2, {1, 2});
    // the viewer set is the weight table's types; the bundles are handed out to one type per round
    MultiEnvyTracker tr(WeightTable(2, 2, {1, 2, 2, 1}));
    AllocationMatrix both(2, 2);
    both(0, 0) = 1;
    both(1, 1) = 1;
    const std::vector<double> d2{1, 1};
    tr.update(both, d2);
    CHECK(tr.delta_fair() == 1.0);
    CHECK(brute_force_envy(w, {both}, {d2}) == 1.0);
    CHECK(multi_envy(w1, hist, dem) == 1.0);
  }
  SECTION("identical bundles give zero") {
    const WeightTable w(3, 2, {1, 2, 3, 1, 2, 2});
    std::vector<AllocationMatrix> hist(10, AllocationMatrix(3, 2, 0.7));
    std::vector<std::vector<double>> dem(10, std::vector<double>{1, 2, 3});
    CHECK(multi_envy(w, hist, dem) == 0.0);
  }
  SECTION("single type with unit weight reduces to the scalar tracker") {
    const WeightTable w(1, 1, {1});
    const std::vector<double> a{1.0, 5.0, 1.1}, n{1, 0, 2};
    std::vector<AllocationMatrix> hist;
    std::vector<std::vector<double>> dem;
    EnvyTracker scalar;
    for (std::size_t t = 0; t < a.size(); ++t) {
      hist.emplace_back(1, 1, a[t]);
      dem.push_back({n[t]});
      scalar.update(a[t], n[t]);
    }
    CHECK(multi_envy(w, hist, dem) == scalar.delta_fair());
  }
  SECTION("streaming extrema match the pairwise definition on random histories") {
    const RngStream rng(12, 0);
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
      auto eng = rng.at_round(trial);
      const std::size_t T = 2 + trial % 5, types = 1 + trial % 3, K = 1 + trial % 4;
      std::vector<double> wv(types * K);
      for (auto& x : wv) x = 0.1 + eng.uniform();
      const WeightTable w(types, K, wv);
      std::vector<AllocationMatrix> hist;
      std::vector<std::vector<double>> dem;
      for (std::size_t t = 0; t < T; ++t) {
        AllocationMatrix m(types, K);
        for (auto& x : m.values) x = 2 * eng.uniform();
        std::vector<double> d(types);
        for (auto& x : d) x = eng.uniform() < 0.3 ? 0.0 : 1.0;
        hist.push_back(m);
        dem.push_back(d);
      }
      CHECK_THAT(multi_envy(w, hist, dem), WithinAbs(brute_force_envy(w, hist, dem), 1e-12));
    }
  }
  SECTION("dimension mismatch") {
    MultiEnvyTracker tr(WeightTable::uniform(2, 2));
    const std::vector<double> d{1};
    CHECK_THROWS_AS(tr.update(AllocationMatrix(2, 2), d), std::invalid_argument);
    CHECK_THROWS_AS(WeightTable(1, 2, {1, 0}), std::invalid_argument);
  }
}

TEST_CASE("multi-resource threshold envy stays under the weighted ceiling", "[metrics][multi]") {
  const std::size_t K = 3, types = 2;
  const WeightTable w(types, K, {1, 2, 0.5, 0.3, 0.3, 3});
  PolicySpec p;
  p.kind = PolicyKind::MultiBangBang;
  p.delta = 0.2;
  p.demand_mean = 5;
  p.resource_supply_means = {5, 5, 5};
  const auto bud = DistributionSpec::truncated_normal(5, 1);
  const auto dem = DistributionSpec::poisson(2.5);
  const RngStream rng(44, 0);
  MultiInventoryState st = MultiInventoryState::split(30, K);
  MultiEnvyTracker tr(w);
  for (std::uint64_t t = 0; t < 20'000; ++t) {
    std::vector<double> bv(K), nv(types);
    for (std::uint32_t k = 0; k < K; ++k) bv[k] = sample_supply(bud, rng.lane(k), t);
    for (std::uint32_t th = 0; th < types; ++th) nv[th] = sample_demand(dem, rng.lane(th), t);
    const auto d = decide(p, st, types);
    tr.update(d.allocations, nv);
    st = step_multi(st, bv, nv, d.allocations).first;
  }
  CHECK(tr.delta_fair() > 0.0);
  CHECK(tr.delta_fair() <= tr.envy_ceiling(0.2) + 1e-12);
  CHECK_THAT(tr.envy_ceiling(0.2), WithinAbs(std::max(3.5, 3.6) * 0.2, 1e-12));
}

TEST_CASE("long-run waste and stockout respect the occupancy sandwich", "[metrics][sandwich]") {
  // fixed-allocation policy: W_bar / H_M between E[Z^+] and Z_max
  const auto bud = DistributionSpec::bounded_discrete({0, 2, 4}, {0.3, 0.4, 0.3});
  const auto dem = DistributionSpec::bounded_discrete({1, 2, 3}, {0.3, 0.4, 0.3});
  // Z = B - N with alpha = 1: exact E[Z^+], E[Z^-] by enumeration
  double ez_pos = 0, ez_neg = 0;
  const double bv[] = {0, 2, 4}, pb[] = {0.3, 0.4, 0.3}, nv[] = {1, 2, 3}, pn[] = {0.3, 0.4, 0.3};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double z = bv[i] - nv[j];
      ez_pos += pb[i] * pn[j] * std::max(z, 0.0);
      ez_neg += pb[i] * pn[j] * std::max(-z, 0.0);
    }
  const double M = 6.0, zmax = 4.0, zmin = 3.0;
  std::vector<double> wr, vr;
  for (std::uint32_t rep = 0; rep < 40; ++rep) {
    const RngStream rng(77, rep);
    InventoryState s = InventoryState::make(M, 3);
    RunAccumulator acc;
    SandwichAudit audit(M, zmax, zmin);
    for (std::uint64_t t = 0; t < 50'000; ++t) {
      auto [ns, r] = step(s, sample_supply(bud, rng, t), sample_demand(dem, rng, t), 1.0);
      acc.accumulate(r);
      audit.observe(r);
      s = ns;
    }
    auto sum = acc.finalize(1, 1);
    audit.write_to(sum);
    REQUIRE(sum.pathwise_violations == 0);
    // upper bounds hold path-wise
    CHECK(sum.w_bar <= zmax * sum.h_m + 1e-12);
    CHECK(sum.v_bar <= zmin * sum.h_0 + 1e-12);
    wr.push_back(sum.w_bar - ez_pos * sum.h_m_prev);
    vr.push_back(sum.v_bar - ez_neg * sum.h_0_prev);
  }
  // lower bounds hold in expectation: mean residual >= -3 SE
  for (const auto* v : {&wr, &vr}) {
    double m = 0, q = 0;
    for (double x : *v) m += x;
    m /= static_cast<double>(v->size());
    for (double x : *v) q += (x - m) * (x - m);
    const double se = std::sqrt(q / static_cast<double>(v->size() - 1) / static_cast<double>(v->size()));
    CHECK(m >= -3 * se);
  }
}
