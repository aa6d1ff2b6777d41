#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "saht/harness/oracle.hpp"
#include "saht/harness/pool.hpp"

namespace saht::harness {

/// One (behavior, size, trial) dataset.
struct Cell {
  std::string behavior;
  std::size_t size = 0;
  std::size_t trial = 0;

  std::string label() const {
    return behavior + "/" + std::to_string(size) + "/" + std::to_string(trial);
  }
};

/// Cells in behavior-major, then size, then trial order.
inline std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (const auto& b : cfg.behaviors)
    for (auto m : cfg.sizes)
      for (std::size_t t = 0; t < cfg.trials; ++t) out.push_back({b, m, t});
  return out;
}

inline std::uint64_t cell_seed(const ExperimentConfig& cfg, std::string_view purpose, const Cell& c) {
  return derive_seed(cfg.seed, {hash_string(purpose), hash_string(c.behavior), c.size, c.trial});
}

/// Writes one dataset file per cell and returns the number written.
inline std::size_t run_collect(const ExperimentConfig& cfg, const ResolvedExperiment& r) {
  const auto cells = enumerate_cells(cfg);
  if (cells.empty()) return 0;
  std::filesystem::create_directories(cfg.data_dir());
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    try {
      const Dataset d =
          collect_dataset(*r.env, r.policy(c.behavior), c.behavior, r.teammates, c.size, cell_seed(cfg, "collect", c));
      write_dataset(cfg.dataset_path(c.behavior, c.size, c.trial).string(), d);
    } catch (const Error& e) {
      throw Error("cell " + c.label() + ": " + e.what());
    }
  });
  return cells.size();
}

inline void write_oracle(const ExperimentConfig& cfg, const OracleVerdict& v) {
  std::filesystem::create_directories(cfg.output);
  write_text_file(cfg.oracle_path().string(), v.to_csv());
}

inline OracleVerdict read_oracle(const ExperimentConfig& cfg) {
  const auto path = cfg.oracle_path().string();
  if (!std::filesystem::exists(path)) throw ConfigError("oracle file '" + path + "' is missing; run 'oracle' first");
  return oracle_from_csv(read_text_file(path), path);
}

inline constexpr std::string_view kResultsHeader =
    "env,size,trial,behavior_id,estimator,bound,decision,chosen,oracle_reliable,alpha_values,runtime_ms";

struct ResultRow {
  std::string env;
  std::size_t size = 0;
  std::size_t trial = 0;
  std::string behavior;
  std::string estimator;  // "baseline" marks the unreliable baseline
  std::string bound;      // "none" for the baseline
  std::string decision;   // solution | no_solution | timeout | error
  std::string chosen;
  std::string oracle_reliable = "NA";  // 1 | 0 | ambiguous | NA
  std::string alpha_values;
  long long runtime_ms = 0;

  std::string to_csv() const {
    return env + "," + std::to_string(size) + "," + std::to_string(trial) + "," + behavior + "," + estimator + "," +
           bound + "," + decision + "," + chosen + "," + oracle_reliable + "," + alpha_values + "," +
           std::to_string(runtime_ms);
  }
};

/// Restricts the estimator x bound matrix, as the --estimator/--bound flags do.
struct RunFilter {
  std::optional<EstimatorKind> estimator;
  std::optional<BoundKind> bound;
};

namespace detail {

inline std::string short_number(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// `id:alpha[/alpha...]` per candidate, joined with ';'.
inline std::string alpha_field(const Decision& d) {
  std::string out;
  for (const auto& c : d.candidates) {
    if (!out.empty()) out += ';';
    out += c.name + ":";
    for (std::size_t j = 0; j < c.alpha.size(); ++j) {
      if (j > 0) out += '/';
      out += short_number(c.alpha[j]);
    }
  }
  return out;
}

inline std::string oracle_flag(const OracleVerdict& o, const std::string& id) {
  switch (o.at(id).verdict) {
    case Verdict::reliable: return "1";
    case Verdict::unreliable: return "0";
    case Verdict::ambiguous: return "ambiguous";
  }
  return "NA";
}

}  // namespace detail

struct RunOutcome {
  std::vector<ResultRow> rows;
  std::size_t errors = 0;
};

/// Runs every cell x estimator x bound plus the baseline and returns rows in a
/// fixed order independent of the worker count.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const ResolvedExperiment& r, const OracleVerdict& oracle,
                                 const RunFilter& filter = {}) {
  const auto cells = enumerate_cells(cfg);
  std::vector<std::string> missing;
  for (const auto& c : cells)
    if (!std::filesystem::exists(cfg.dataset_path(c.behavior, c.size, c.trial))) missing.push_back(c.label());
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " dataset(s) missing; run 'collect' first:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw ConfigError(msg);
  }
  for (const auto& id : cfg.all_candidates()) oracle.at(id);

  std::vector<std::pair<EstimatorKind, BoundKind>> matrix;
  for (auto e : cfg.estimators)
    for (auto b : cfg.bounds)
      if ((!filter.estimator || *filter.estimator == e) && (!filter.bound || *filter.bound == b)) matrix.emplace_back(e, b);
  if (matrix.empty()) throw ConfigError("the estimator/bound filter leaves nothing to run");

  const SeldonianConfig base = base_seldonian_config(cfg, r);
  const std::string env_name = r.env->signature().name;
  std::vector<std::vector<ResultRow>> per_cell(cells.size());
  std::vector<std::size_t> errors(cells.size(), 0);

  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    Dataset data = read_dataset(cfg.dataset_path(c.behavior, c.size, c.trial).string());
    if (!data.signature.compatible(r.env->signature()) || data.signature.name != env_name)
      throw ConfigError("cell " + c.label() + ": dataset does not match the configured environment");
    for (const auto& e : data.entries)
      if (!data.behaviors.contains(e.behavior_id)) data.behaviors[e.behavior_id] = r.policy(e.behavior_id);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(cfg.timeout_s);
    SeldonianConfig scfg = base;
    scfg.candidates = r.lookup(cfg.candidates_for(c.behavior));
    scfg.seed = cell_seed(cfg, "split", c);
    if (cfg.timeout_s > 0.0) scfg.should_stop = [deadline] { return std::chrono::steady_clock::now() > deadline; };

    auto run_one = [&](const SeldonianConfig& sc, std::string est, std::string bound) {
      ResultRow row;
      row.env = env_name;
      row.size = c.size;
      row.trial = c.trial;
      row.behavior = c.behavior;
      row.estimator = std::move(est);
      row.bound = std::move(bound);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Decision d = run_seldonian(data, sc);
        row.decision = d.has_policy() ? "solution" : "no_solution";
        if (d.has_policy()) {
          row.chosen = d.candidates.at(*d.chosen).name;
          row.oracle_reliable = detail::oracle_flag(oracle, row.chosen);
        }
        if (!sc.unreliable_baseline) row.alpha_values = detail::alpha_field(d);
      } catch (const Timeout&) {
        row.decision = "timeout";
      } catch (const Error& e) {
        row.decision = "error";
        ++errors[i];
        std::fprintf(stderr, "error: cell %s %s/%s: %s\n", c.label().c_str(), row.estimator.c_str(),
                     row.bound.c_str(), e.what());
      }
      if (cfg.record_runtime)
        row.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
                             .count();
      per_cell[i].push_back(std::move(row));
    };

    for (const auto& [e, b] : matrix) {
      SeldonianConfig sc = scfg;
      sc.estimator = e;
      sc.bound = b;
      run_one(sc, to_string(e), to_string(b));
    }
    if (cfg.baseline) {
      SeldonianConfig sc = scfg;
      sc.estimator = cfg.return_estimator;
      sc.unreliable_baseline = true;
      run_one(sc, "baseline", "none");
    }
  });

  RunOutcome out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out.errors += errors[i];
    for (auto& row : per_cell[i]) out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::string results_to_csv(const std::vector<ResultRow>& rows) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : rows) out += r.to_csv() + "\n";
  return out;
}

}  // namespace saht::harness
