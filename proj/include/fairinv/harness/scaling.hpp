#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fairinv/harness/experiment.hpp"

namespace fairinv {

enum class FitTransform { LogLog, LinLog };

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of y on x. Needs three points and some spread in x.
inline ScalingFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("fit_line: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: x values are all equal");
  ScalingFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Fit on transformed points: loglog uses (log x, log y), linlog uses (x, log y).
inline ScalingFit fit_points(std::span<const double> x, std::span<const double> y, FitTransform tr) {
  std::vector<double> tx, ty;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) throw std::invalid_argument("fit_points: y must be positive");
    if (tr == FitTransform::LogLog && !(x[i] > 0.0)) throw std::invalid_argument("fit_points: x must be positive");
    tx.push_back(tr == FitTransform::LogLog ? std::log(x[i]) : x[i]);
    ty.push_back(std::log(y[i]));
  }
  return fit_line(tx, ty);
}

inline double sweep_field(const SweepRow& r, std::string_view name) {
  if (name == "M") return r.M;
  if (name == "delta") return r.delta;
  if (name == "delta_eff_mean") return r.delta_eff_mean;
  if (name == "delta_eff_se") return r.delta_eff_se;
  if (name == "w_bar_mean") return r.w_bar_mean;
  if (name == "v_bar_mean") return r.v_bar_mean;
  if (name == "delta_fair_mean") return r.delta_fair_mean;
  if (name == "h_m_mean") return r.h_m_mean;
  if (name == "h_0_mean") return r.h_0_mean;
  if (name == "delta_eff_plot") return r.delta_eff_plot;
  if (name == "reps") return static_cast<double>(r.reps);
  throw std::invalid_argument("unknown sweep field '" + std::string(name) + "'");
}

/// Scaling fit over sweep rows.
///
/// Rows whose y is below `floor` (by default the plotting floor) or that
/// failed are left out; at least three must remain.
inline ScalingFit fit_scaling(std::span<const SweepRow> rows, std::string_view x_field, std::string_view y_field,
                              FitTransform tr, double floor = kPlotFloor) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    const double yv = sweep_field(r, y_field);
    if (!(yv > 0.0) || yv < floor) continue;
    x.push_back(sweep_field(r, x_field));
    y.push_back(yv);
  }
  if (x.size() < 3)
    throw std::invalid_argument("fit_scaling: only " + std::to_string(x.size()) + " usable rows, need 3");
  return fit_points(x, y, tr);
}

}  // namespace fairinv
