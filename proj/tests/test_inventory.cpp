#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fairinv/distributions.hpp"
#include "fairinv/inventory.hpp"
#include "fairinv/metrics.hpp"
#include "fairinv/rng.hpp"

using namespace fairinv;

TEST_CASE("single-store step arithmetic", "[inventory]") {
  SECTION("lands exactly on the cap") {
    auto [s, r] = step(InventoryState::make(10, 9), 3, 2, 1);
    CHECK(s.level == 10);
    CHECK(r.waste == 0);
    CHECK(r.stockout == 0);
    CHECK(r.at_upper);
    CHECK(s.round == 1);
  }
  SECTION("overflow") {
    auto [s, r] = step(InventoryState::make(10, 9), 4, 1, 1);
    CHECK(s.level == 10);
    CHECK(r.waste == 2);
    CHECK(r.stockout == 0);
  }
  SECTION("stockout") {
    auto [s, r] = step(InventoryState::make(10, 1), 0, 2, 1);
    CHECK(s.level == 0);
    CHECK(r.waste == 0);
    CHECK(r.stockout == 1);
    CHECK(r.at_lower);
    CHECK(r.drift == -2);
  }
}

TEST_CASE("invalid initial states are rejected", "[inventory]") {
  CHECK_THROWS_AS(InventoryState::make(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(InventoryState::make(10, 11), std::invalid_argument);
  CHECK_THROWS_AS(InventoryState::make(10, -1), std::invalid_argument);
}

TEST_CASE("unreflected increment", "[inventory]") {
  CHECK(step_unreflected(5, -2) == 3);
  CHECK(step_unreflected(0, 0) == 0);
}

TEST_CASE("step invariants on random inputs", "[inventory][property]") {
  const RngStream rng(11, 0);
  const auto bud = DistributionSpec::exponential(5.0);
  const auto dem = DistributionSpec::poisson(5.0);
  InventoryState s = InventoryState::make(7.5, 3.0);
  for (std::uint64_t t = 0; t < 200'000; ++t) {
    auto eng = rng.lane(7).at_round(t);
    const double a = 2.0 * eng.uniform();
    const double b = sample_supply(bud, rng, t), n = sample_demand(dem, rng, t);
    const double prev = s.level;
    auto [next, r] = step(s, b, n, a);
    REQUIRE(next.level >= 0.0);
    REQUIRE(next.level <= s.capacity);
    REQUIRE(r.waste >= 0.0);
    REQUIRE(r.stockout >= 0.0);
    REQUIRE(r.waste * r.stockout == 0.0);
    if (r.waste > 0) REQUIRE(r.at_upper);
    if (r.stockout > 0) REQUIRE(r.at_lower);
    // conservation, to rounding of one addition chain
    REQUIRE(std::abs(next.level - (prev + b - n * a - r.waste + r.stockout)) <= 1e-12 * (1 + prev + b + n * a));
    s = next;
  }
}

TEST_CASE("unreflected walk equals the store until the first exit", "[inventory][coupling]") {
  const auto bud = DistributionSpec::truncated_normal(5.0, 2.0);
  const auto dem = DistributionSpec::poisson(5.0);
  const double M = 12.0;
  int exits = 0;
  for (std::uint32_t path = 0; path < 10'000; ++path) {
    const RngStream rng(99, path);
    InventoryState s = InventoryState::make(M, 6.0);
    double q = 6.0;
    for (std::uint64_t t = 0; t < 100'000; ++t) {
      const double b = sample_supply(bud, rng, t), n = sample_demand(dem, rng, t);
      auto [next, r] = step(s, b, n, 1.0);
      q = step_unreflected(q, r.drift);
      if (q <= 0.0 || q >= M) {
        ++exits;
        break;
      }
      REQUIRE(next.level == q);
      s = next;
    }
  }
  CHECK(exits == 10'000);
}

TEST_CASE("virtual-store step arithmetic", "[inventory][multi]") {
  SECTION("overflow on one store") {
    const MultiInventoryState st{{5, 2}, {5, 5}, 0};
    AllocationMatrix a(1, 2, 1.0);
    const std::vector<double> bud{2, 0}, dem{1};
    auto [next, recs] = step_multi(st, bud, dem, a);
    CHECK(next.levels == std::vector<double>{5, 1});
    CHECK(recs[0].waste == 1);
    CHECK(recs[1].waste == 0);
    CHECK(recs[0].stockout == 0);
    CHECK(recs[1].stockout == 0);
  }
  SECTION("stockout and overflow on different stores") {
    const MultiInventoryState st{{0, 5}, {5, 5}, 0};
    AllocationMatrix a(1, 2);
    a(0, 0) = 2.0;
    const std::vector<double> bud{0, 3}, dem{1};
    auto [next, recs] = step_multi(st, bud, dem, a);
    CHECK(next.levels == std::vector<double>{0, 5});
    CHECK(recs[0].waste == 0);
    CHECK(recs[1].waste == 3);
    CHECK(recs[0].stockout == 2);
    CHECK(recs[1].stockout == 0);
  }
  SECTION("dimension mismatch") {
    const MultiInventoryState st{{0, 5}, {5, 5}, 0};
    const std::vector<double> bud{0}, dem{1};
    CHECK_THROWS_AS(step_multi(st, bud, dem, AllocationMatrix(1, 2)), std::invalid_argument);
  }
}

TEST_CASE("one virtual store reduces to the single-store step", "[inventory][multi]") {
  const RngStream rng(5, 0);
  const auto bud = DistributionSpec::truncated_normal(5.0, 1.5);
  const auto dem = DistributionSpec::poisson(5.0);
  InventoryState s = InventoryState::make(20, 10);
  MultiInventoryState m = MultiInventoryState::split(20, 1);
  for (std::uint64_t t = 0; t < 50'000; ++t) {
    const double b = sample_supply(bud, rng, t), n = sample_demand(dem, rng, t);
    const double a = 0.8 + 0.4 * rng.lane(3).at_round(t).uniform();
    auto [ns, r] = step(s, b, n, a);
    AllocationMatrix am(1, 1, a);
    const std::vector<double> bv{b}, nv{n};
    auto [nm, rs] = step_multi(m, bv, nv, am);
    REQUIRE(nm.levels[0] == ns.level);
    REQUIRE(rs[0].waste == r.waste);
    REQUIRE(rs[0].stockout == r.stockout);
    REQUIRE(rs[0].at_upper == r.at_upper);
    REQUIRE(rs[0].at_lower == r.at_lower);
    s = ns;
    m = nm;
  }
}

TEST_CASE("virtual stores never exceed the total capacity", "[inventory][multi]") {
  const RngStream rng(8, 0);
  const auto bud = DistributionSpec::exponential(3.0);
  const auto dem = DistributionSpec::poisson(2.0);
  MultiInventoryState m = MultiInventoryState::split(30, 3, 0.2);
  CHECK(m.virtual_caps == std::vector<double>{10, 10, 10});
  for (std::uint64_t t = 0; t < 20'000; ++t) {
    std::vector<double> bv(3), nv(2);
    for (std::uint32_t k = 0; k < 3; ++k) bv[k] = sample_supply(bud, rng.lane(k), t);
    for (std::uint32_t th = 0; th < 2; ++th) nv[th] = sample_demand(dem, rng.lane(th), t);
    AllocationMatrix a(2, 3, 0.75);
    auto [nm, rs] = step_multi(m, bv, nv, a);
    double total = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(nm.levels[k] >= 0.0);
      REQUIRE(nm.levels[k] <= nm.virtual_caps[k]);
      total += nm.levels[k];
    }
    REQUIRE(total <= 30.0 + 1e-12);
    m = nm;
  }
}

TEST_CASE("per-round sandwich bounds hold on simulated paths", "[inventory][sandwich]") {
  const RngStream rng(21, 0);
  for (const auto& [bud, dem] : {std::pair{DistributionSpec::truncated_normal(5, 1), DistributionSpec::poisson(5)},
                                 std::pair{DistributionSpec::exponential(5), DistributionSpec::poisson(5)},
                                 std::pair{DistributionSpec::bounded_discrete({0, 10}, {0.5, 0.5}),
                                           DistributionSpec::deterministic(5)}}) {
    const double M = 8.0;
    InventoryState s = InventoryState::make(M, 4.0);
    SandwichAudit audit(M, bud.support_max(), dem.support_max() * 1.2);
    for (std::uint64_t t = 0; t < 100'000; ++t) {
      const double a = s.level >= M / 2 ? 1.1 : 0.9;
      auto [next, r] = step(s, sample_supply(bud, rng, t), sample_demand(dem, rng, t), a);
      audit.observe(r);
      // independent restatement of the four inequalities
      const bool prev_full = r.prev_level == M, prev_empty = r.prev_level == 0.0;
      REQUIRE(r.waste >= (prev_full ? std::max(r.drift, 0.0) : 0.0) - 1e-12);
      REQUIRE(r.stockout >= (prev_empty ? std::max(-r.drift, 0.0) : 0.0) - 1e-12);
      REQUIRE(r.waste <= (r.at_upper ? r.budget : 0.0) + 1e-12);
      REQUIRE(r.stockout <= (r.at_lower ? r.demand * r.allocation : 0.0) + 1e-12);
      s = next;
    }
    CHECK(audit.violations() == 0);
  }
}
