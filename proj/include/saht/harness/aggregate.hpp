#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "saht/harness/runner.hpp"

namespace saht::harness {

inline std::vector<ResultRow> parse_results(const std::string& text, const std::string& origin = "results") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError(origin + ":1: unexpected results header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto f = split_fields(line, ',');
    if (f.size() != 11) throw ConfigError(where + ": expected 11 fields, found " + std::to_string(f.size()));
    ResultRow r;
    r.env = f[0];
    r.size = parse_number<std::size_t>(f[1], where);
    r.trial = parse_number<std::size_t>(f[2], where);
    r.behavior = f[3];
    r.estimator = f[4];
    r.bound = f[5];
    r.decision = f[6];
    r.chosen = f[7];
    r.oracle_reliable = f[8];
    r.alpha_values = f[9];
    r.runtime_ms = parse_number<long long>(f[10], where);
    if (r.decision != "solution" && r.decision != "no_solution" && r.decision != "timeout" && r.decision != "error")
      throw ConfigError(where + ": unknown decision '" + r.decision + "'");
    if (r.decision == "solution" && r.chosen.empty()) throw ConfigError(where + ": solution row without 'chosen'");
    if (r.oracle_reliable != "1" && r.oracle_reliable != "0" && r.oracle_reliable != "ambiguous" &&
        r.oracle_reliable != "NA")
      throw ConfigError(where + ": bad oracle_reliable value '" + r.oracle_reliable + "'");
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Proportion with a 95% normal-approximation interval clipped to [0, 1].
struct Proportion {
  std::size_t hits = 0;
  std::size_t n = 0;

  double p() const { return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n); }
  double half_width() const {
    if (n == 0) return 0.0;
    const double q = p();
    return 1.959963984540054 * std::sqrt(q * (1.0 - q) / static_cast<double>(n));
  }
  double lo() const { return std::clamp(p() - half_width(), 0.0, 1.0); }
  double hi() const { return std::clamp(p() + half_width(), 0.0, 1.0); }
};

/// Per-group tallies. Unreliable selection is counted among decided runs whose
/// pick has a clear oracle verdict; ambiguous picks are excluded.
struct Summary {
  Proportion solution;
  Proportion unreliable;
  std::size_t timeouts = 0;
  std::size_t errors = 0;

  void add(const ResultRow& r) {
    ++solution.n;
    if (r.decision == "timeout") ++timeouts;
    if (r.decision == "error") ++errors;
    if (r.decision != "solution") return;
    ++solution.hits;
    if (r.oracle_reliable == "1" || r.oracle_reliable == "0") {
      ++unreliable.n;
      if (r.oracle_reliable == "0") ++unreliable.hits;
    }
  }
};

inline constexpr std::string_view kSummaryColumns =
    "runs,solutions,prob_solution,prob_solution_lo,prob_solution_hi,counted,unreliable,prob_unreliable,"
    "prob_unreliable_lo,prob_unreliable_hi,timeouts,errors";

inline std::string summary_fields(const Summary& s) {
  auto f = [](double v) { return format_fixed(v, 4); };
  return std::to_string(s.solution.n) + "," + std::to_string(s.solution.hits) + "," + f(s.solution.p()) + "," +
         f(s.solution.lo()) + "," + f(s.solution.hi()) + "," + std::to_string(s.unreliable.n) + "," +
         std::to_string(s.unreliable.hits) + "," + f(s.unreliable.p()) + "," + f(s.unreliable.lo()) + "," +
         f(s.unreliable.hi()) + "," + std::to_string(s.timeouts) + "," + std::to_string(s.errors);
}

using SummaryKey = std::tuple<std::string, std::string, std::string, std::size_t>;  // env, estimator, bound, size

inline std::map<SummaryKey, Summary> summarize(const std::vector<ResultRow>& rows) {
  std::map<SummaryKey, Summary> out;
  for (const auto& r : rows) out[{r.env, r.estimator, r.bound, r.size}].add(r);
  return out;
}

inline std::string summary_to_csv(const std::map<SummaryKey, Summary>& groups) {
  std::string out = "env,size,estimator,bound," + std::string(kSummaryColumns) + "\n";
  for (const auto& [k, s] : groups) {
    const auto& [env, est, bound, size] = k;
    out += env + "," + std::to_string(size) + "," + est + "," + bound + "," + summary_fields(s) + "\n";
  }
  return out;
}

using AblationKey = std::tuple<std::string, double, std::string, std::string, std::size_t>;

/// Same tallies keyed by the behavior policy's epsilon instead of pooling behaviors.
inline std::map<AblationKey, Summary> summarize_by_epsilon(const std::vector<ResultRow>& rows,
                                                           const ExperimentConfig& cfg) {
  std::map<AblationKey, Summary> out;
  for (const auto& r : rows) {
    auto it = cfg.policies.find(r.behavior);
    if (it == cfg.policies.end()) throw ConfigError("results mention unknown behavior '" + r.behavior + "'");
    if (!it->second.epsilon) throw ConfigError("behavior '" + r.behavior + "' has no epsilon annotation");
    out[{r.env, *it->second.epsilon, r.estimator, r.bound, r.size}].add(r);
  }
  return out;
}

inline std::string ablation_to_csv(const std::map<AblationKey, Summary>& groups) {
  std::string out = "env,epsilon,size,estimator,bound," + std::string(kSummaryColumns) + "\n";
  for (const auto& [k, s] : groups) {
    const auto& [env, eps, est, bound, size] = k;
    out += env + "," + format_double(eps) + "," + std::to_string(size) + "," + est + "," + bound + "," +
           summary_fields(s) + "\n";
  }
  return out;
}

}  // namespace saht::harness
