#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fairinv/analysis/binomial.hpp"
#include "fairinv/analysis/birth_death.hpp"
#include "fairinv/analysis/conditions.hpp"
#include "fairinv/analysis/hitting.hpp"
#include "fairinv/eg_solver.hpp"

namespace fairinv {

struct CheckResult {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  std::uint64_t replications = 20'000;  // Monte Carlo checks
};

namespace detail {

inline CheckResult within(std::string name, double residual, double tol, std::string detail = {}) {
  return {std::move(name), std::abs(residual) <= tol, residual, tol, std::move(detail)};
}

// Expected exit time of the +-1 walk on {0..M} from s, by solving the first-step equations.
inline double simple_walk_exit_time(int M, int s) {
  const int n = M - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) A(i, i - 1) = -0.5;
    if (i + 1 < n) A(i, i + 1) = -0.5;
  }
  const Eigen::VectorXd e = A.partialPivLu().solve(Eigen::VectorXd::Ones(n));
  return e(s - 1);
}

}  // namespace detail

/// Runs the analysis oracles and reports one entry per check.
inline std::vector<CheckResult> run_verification(const VerifyOptions& opt = {}) {
  using namespace analysis;
  std::vector<CheckResult> out;

  {  // closed-form stationary law vs linear solve
    double worst = 0.0;
    for (double p : {0.1, 0.25, 0.4})
      for (double d : {0.0, 0.05, 0.1})
        for (int m : {4, 10, 50}) {
          const auto a = birth_death_stationary_closed_form(p, d, m);
          const auto b = birth_death_stationary_solve({m, p, d});
          for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
        }
    out.push_back(fairinv::detail::within("birth_death_closed_form_vs_solve", worst, 1e-10));
  }
  {  // symmetric chain is uniform
    const auto pi = birth_death_stationary_closed_form(0.3, 0.0, 7);
    double worst = 0.0;
    for (double x : pi) worst = std::max(worst, std::abs(x - 1.0 / 8.0));
    out.push_back(fairinv::detail::within("birth_death_uniform_without_tilt", worst, 0.0));
  }
  {  // binomial tail bound over the full scan
    std::int64_t failures = 0, cases = 0;
    for (std::int64_t L = 8; L <= 200; L += 2)
      for (std::int64_t t = 1; 8 * t <= L; ++t) {
        ++cases;
        failures += binomial_tail_bound(L, t).holds ? 0 : 1;
      }
    out.push_back(fairinv::detail::within("binomial_tail_bound_scan", static_cast<double>(failures), 0.0,
                                 std::to_string(cases) + " (L, t) pairs"));
  }
  {  // epoch lower bound cases
    const auto c1 = epoch_lower_bound(0.2, 0.1, 10);
    const auto c2 = epoch_lower_bound(0.6, 0.1, 10);
    const auto c3 = epoch_lower_bound(0.5, 1.0 / 9.0, 9);
    const bool ok = c1.which == EpochCase::UnderAllocate && c1.w_lb == 0.5 && c1.L == 55 &&
                    c2.which == EpochCase::OverAllocate && c2.v_lb == 0.5 && c3.which == EpochCase::Balanced &&
                    c3.L == 648 && c3.t == 73 && c3.v_lb > 0.0 && c3.v_lb >= c3.tail_bound;
    out.push_back({"epoch_lower_bound_cases", ok, ok ? 0.0 : 1.0, 0.0,
                   "balanced tail " + std::to_string(c3.v_lb)});
  }
  {  // two-point feasibility example
    const auto rep = check_delta_feasible(DistributionSpec::bounded_discrete({0.0, 10.0}, {0.5, 0.5}),
                                          DistributionSpec::deterministic(5.0), 0.2, {4.5});
    out.push_back(fairinv::detail::within("feasibility_two_point", rep.feasible ? rep.delta - 0.5 : 1.0, 1e-15));
    const auto none = check_delta_feasible(DistributionSpec::deterministic(5.0), DistributionSpec::deterministic(5.0),
                                           0.2, {});
    out.push_back({"feasibility_degenerate_is_infeasible", !none.feasible, none.feasible ? 1.0 : 0.0, 0.0, {}});
  }
  {  // exponential supermartingale example
    const auto mg = supermartingale_mgf_check(DistributionSpec::bounded_discrete({0.0, 2.0}, {0.5, 0.5}),
                                              DistributionSpec::deterministic(1.0), 0.2, 1.0);
    const double expect = (std::exp(0.16) + std::exp(-0.24)) / 2.0;
    out.push_back(fairinv::detail::within("supermartingale_two_point", mg.holds ? mg.expectation - expect : 1.0, 1e-14));
  }
  {  // renewal identity substitution
    const auto o = renewal_identity(10.0, 8.0, 0.9, 0.9);
    out.push_back(fairinv::detail::within("renewal_identity_substitution",
                                 std::max(std::abs(o.h_m - 1.0 / 18.0), std::abs(o.h_0 - 1.0 / 18.0)), 1e-15));
  }
  {  // +-1 walk exit time against the first-step equations
    const Environment env{DistributionSpec::bounded_discrete({0.0, 2.0}, {0.5, 0.5}), DistributionSpec::deterministic(1.0)};
    PolicySpec p;
    p.kind = PolicyKind::Static;
    p.alpha = 1.0;
    HittingOptions ho;
    ho.replications = opt.replications;
    ho.root_seed = opt.seed;
    const auto s = estimate_hitting_from(p, env, 10.0, 5.0, ho);
    const double exact = fairinv::detail::simple_walk_exit_time(10, 5);
    const double z = (s.mean_time - exact) / s.se_time;
    out.push_back(fairinv::detail::within("simple_walk_exit_time", z, 3.0,
                                 "estimate " + std::to_string(s.mean_time) + ", exact " + std::to_string(exact)));
  }
  {  // EG symmetric and disjoint-preference instances
    const EgInstance sym{WeightTable(3, 2, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0}), {1.0, 2.0, 3.0}, {4.0, 5.0}};
    const auto s = solve_fluid_eg(sym);
    double dev = 0.0;
    for (std::size_t th = 0; th < 3; ++th) {
      dev = std::max(dev, std::abs(s.allocations(th, 0) - 4.0 / 6.0));
      dev = std::max(dev, std::abs(s.allocations(th, 1) - 5.0 / 6.0));
    }
    out.push_back(fairinv::detail::within("eg_symmetric_kkt", s.kkt_residual, 1e-8));
    out.push_back(fairinv::detail::within("eg_symmetric_allocation", dev, 1e-9));
    const EgInstance two{WeightTable(2, 2, {1.0, 0.01, 0.01, 1.0}), {1.0, 1.0}, {1.0, 1.0}};
    const auto t = solve_fluid_eg(two);
    const double d2 = std::max({std::abs(t.allocations(0, 0) - 1.0), std::abs(t.allocations(0, 1)),
                                std::abs(t.allocations(1, 0)), std::abs(t.allocations(1, 1) - 1.0)});
    out.push_back(fairinv::detail::within("eg_disjoint_preferences", d2, 1e-3));
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<CheckResult>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    nlohmann::json j = {{"name", c.name}, {"passed", c.passed}, {"residual", c.residual}, {"tolerance", c.tolerance}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    arr.push_back(j);
  }
  return {{"passed", all}, {"checks", arr}};
}

}  // namespace fairinv
