#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "saht/envs/collect.hpp"
#include "saht/harness/config.hpp"
#include "saht/harness/pool.hpp"

namespace saht::harness {

enum class Verdict { reliable, unreliable, ambiguous };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::reliable: return "reliable";
    case Verdict::unreliable: return "unreliable";
    case Verdict::ambiguous: return "ambiguous";
  }
  return "?";
}

inline Verdict parse_verdict(const std::string& s) {
  if (s == "reliable") return Verdict::reliable;
  if (s == "unreliable") return Verdict::unreliable;
  if (s == "ambiguous") return Verdict::ambiguous;
  throw ConfigError("unknown verdict '" + s + "'");
}

/// A true mean within this many standard errors of its threshold is ambiguous.
inline constexpr double kAmbiguitySE = 3.0;

inline Verdict classify(double mean, double se, double threshold) {
  if (std::abs(mean - threshold) <= kAmbiguitySE * se) return Verdict::ambiguous;
  return mean >= threshold ? Verdict::reliable : Verdict::unreliable;
}

struct OracleEntry {
  std::string policy;
  std::vector<MonteCarloEstimate> g;  // per constraint
  MonteCarloEstimate ret;
  std::vector<Verdict> per_constraint;
  Verdict verdict = Verdict::reliable;
};

/// Ground truth for every candidate: Monte Carlo g and return under the true
/// environment and teammates.
struct OracleVerdict {
  std::vector<std::string> constraint_names;
  std::vector<double> thresholds;
  std::vector<OracleEntry> entries;

  const OracleEntry& at(const std::string& id) const {
    for (const auto& e : entries)
      if (e.policy == id) return e;
    throw ConfigError("oracle has no entry for policy '" + id + "'");
  }

  /// `policy,signal,mean,std_error,threshold,verdict` with one row per
  /// constraint and one `return` row per policy.
  std::string to_csv() const {
    std::string out = "policy,signal,mean,std_error,threshold,verdict\n";
    for (const auto& e : entries) {
      for (std::size_t j = 0; j < e.g.size(); ++j)
        out += e.policy + "," + constraint_names[j] + "," + format_double(e.g[j].mean) + "," +
               format_double(e.g[j].std_error) + "," + format_double(thresholds[j]) + "," +
               to_string(e.per_constraint[j]) + "\n";
      out += e.policy + ",return," + format_double(e.ret.mean) + "," + format_double(e.ret.std_error) + ",NA," +
             to_string(e.verdict) + "\n";
    }
    return out;
  }
};

/// A policy is unreliable if any constraint is clearly violated, ambiguous if
/// none is violated but one sits within the ambiguity band.
inline Verdict combine(const std::vector<Verdict>& vs) {
  bool ambiguous = false;
  for (auto v : vs) {
    if (v == Verdict::unreliable) return Verdict::unreliable;
    if (v == Verdict::ambiguous) ambiguous = true;
  }
  return ambiguous ? Verdict::ambiguous : Verdict::reliable;
}

inline OracleVerdict run_oracle(const ExperimentConfig& cfg, const ResolvedExperiment& r, std::size_t episodes) {
  OracleVerdict out;
  for (const auto& g : r.constraints) {
    out.constraint_names.push_back(g.name());
    out.thresholds.push_back(g.threshold());
  }
  std::vector<ConstraintSpec> signals = r.constraints;
  signals.push_back(r.reward);
  const auto ids = cfg.all_candidates();
  out.entries.resize(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto mc = simulate_returns(*r.env, *r.policy(id), r.teammates, signals, cfg.gamma, episodes,
                                     derive_seed(cfg.seed, {hash_string("oracle"), hash_string(id)}));
    OracleEntry& e = out.entries[i];
    e.policy = id;
    e.g.assign(mc.begin(), mc.end() - 1);
    e.ret = mc.back();
    for (std::size_t j = 0; j < e.g.size(); ++j)
      e.per_constraint.push_back(classify(e.g[j].mean, e.g[j].std_error, out.thresholds[j]));
    e.verdict = combine(e.per_constraint);
  });
  return out;
}

inline OracleVerdict oracle_from_csv(const std::string& text, const std::string& origin) {
  OracleVerdict out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != "policy,signal,mean,std_error,threshold,verdict")
    throw ConfigError(origin + ":1: bad oracle header");
  ++lineno;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto f = split_fields(line, ',');
    if (f.size() != 6) throw ConfigError(where + ": expected 6 fields");
    auto [it, fresh] = index.try_emplace(f[0], out.entries.size());
    if (fresh) {
      out.entries.emplace_back();
      out.entries.back().policy = f[0];
    }
    OracleEntry& e = out.entries[it->second];
    MonteCarloEstimate est;
    est.mean = parse_number<double>(f[2], where);
    est.std_error = parse_number<double>(f[3], where);
    if (f[1] == "return") {
      e.ret = est;
      e.verdict = parse_verdict(f[5]);
      continue;
    }
    const std::size_t j = e.g.size();
    if (out.entries.size() == 1) {
      out.constraint_names.push_back(f[1]);
      out.thresholds.push_back(parse_number<double>(f[4], where));
    } else if (j >= out.constraint_names.size() || out.constraint_names[j] != f[1]) {
      throw ConfigError(where + ": constraint rows out of order");
    }
    e.g.push_back(est);
    e.per_constraint.push_back(parse_verdict(f[5]));
  }
  return out;
}

}  // namespace saht::harness
