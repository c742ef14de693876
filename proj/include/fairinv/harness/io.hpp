#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairinv/harness/experiment.hpp"
#include "fairinv/metrics.hpp"

namespace fairinv {

inline constexpr std::string_view kSweepHeader =
    "M,delta,delta_eff_mean,delta_eff_se,w_bar_mean,v_bar_mean,delta_fair_mean,h_m_mean,h_0_mean,delta_eff_plot,reps";
inline constexpr std::string_view kSummaryHeader = "policy,M,delta,seed,T,W_bar,V_bar,delta_eff,delta_fair,H_M,H_0";
inline constexpr std::string_view kTraceHeader =
    "round,level,budget,demand,allocation,drift,waste,stockout,at_upper,at_lower";

/// %.17g, enough digits to read back the same double.
inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
  os << kSweepHeader << '\n';
  for (const auto& r : res.rows) {
    os << fmt_double(r.M) << ',' << fmt_double(r.delta) << ',' << fmt_double(r.delta_eff_mean) << ','
       << fmt_double(r.delta_eff_se) << ',' << fmt_double(r.w_bar_mean) << ',' << fmt_double(r.v_bar_mean) << ','
       << fmt_double(r.delta_fair_mean) << ',' << fmt_double(r.h_m_mean) << ',' << fmt_double(r.h_0_mean) << ','
       << fmt_double(r.delta_eff_plot) << ',' << r.reps << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::runtime_error("csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Reads what write_sweep_csv wrote. Error strings are not part of the CSV.
inline SweepResult read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader) throw std::runtime_error("csv: unexpected header '" + line + "'");
  SweepResult res;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != 11) throw std::runtime_error("csv: expected 11 columns, got " + std::to_string(c.size()));
    SweepRow r;
    r.M = detail::parse_double(c[0]);
    r.delta = detail::parse_double(c[1]);
    r.delta_eff_mean = detail::parse_double(c[2]);
    r.delta_eff_se = detail::parse_double(c[3]);
    r.w_bar_mean = detail::parse_double(c[4]);
    r.v_bar_mean = detail::parse_double(c[5]);
    r.delta_fair_mean = detail::parse_double(c[6]);
    r.h_m_mean = detail::parse_double(c[7]);
    r.h_0_mean = detail::parse_double(c[8]);
    r.delta_eff_plot = detail::parse_double(c[9]);
    r.reps = std::stoull(c[10]);
    res.rows.push_back(r);
  }
  return res;
}

inline nlohmann::json to_json(const SweepRow& r) {
  nlohmann::json j = {{"M", r.M},
                      {"delta", r.delta},
                      {"delta_eff_mean", r.delta_eff_mean},
                      {"delta_eff_se", r.delta_eff_se},
                      {"w_bar_mean", r.w_bar_mean},
                      {"v_bar_mean", r.v_bar_mean},
                      {"delta_fair_mean", r.delta_fair_mean},
                      {"h_m_mean", r.h_m_mean},
                      {"h_0_mean", r.h_0_mean},
                      {"delta_eff_plot", r.delta_eff_plot},
                      {"reps", r.reps}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline nlohmann::json to_json(const SweepResult& res) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : res.rows) rows.push_back(to_json(r));
  return {{"rows", rows}};
}

/// One RunSummary row of the summary CSV.
struct SummaryRow {
  std::string policy;
  double M = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.policy << ',' << fmt_double(r.M) << ',' << fmt_double(r.delta) << ',' << r.seed << ',' << s.horizon << ','
       << fmt_double(s.w_bar) << ',' << fmt_double(s.v_bar) << ',' << fmt_double(s.delta_eff) << ','
       << fmt_double(s.delta_fair) << ',' << fmt_double(s.h_m) << ',' << fmt_double(s.h_0) << '\n';
  }
}

inline nlohmann::json to_json(const SummaryRow& r) {
  const auto& s = r.summary;
  return {{"policy", r.policy},
          {"M", r.M},
          {"delta", r.delta},
          {"seed", r.seed},
          {"T", s.horizon},
          {"W_bar", s.w_bar},
          {"V_bar", s.v_bar},
          {"delta_eff", s.delta_eff},
          {"delta_fair", s.delta_fair},
          {"H_M", s.h_m},
          {"H_0", s.h_0},
          {"clamp_warnings", s.clamp_warnings},
          {"pathwise_violations", s.pathwise_violations}};
}

inline void write_trace_row(std::ostream& os, std::uint64_t round, const StepRecord& r) {
  os << round << ',' << fmt_double(r.level) << ',' << fmt_double(r.budget) << ',' << fmt_double(r.demand) << ','
     << fmt_double(r.allocation) << ',' << fmt_double(r.drift) << ',' << fmt_double(r.waste) << ','
     << fmt_double(r.stockout) << ',' << (r.at_upper ? 1 : 0) << ',' << (r.at_lower ? 1 : 0) << '\n';
}

}  // namespace fairinv
