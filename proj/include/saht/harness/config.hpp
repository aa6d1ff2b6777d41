#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "saht/envs/registry.hpp"
#include "saht/io.hpp"
#include "saht/seldonian.hpp"

namespace saht::harness {

/// Where a policy table comes from: a shipped rule or a policy file, optionally
/// mixed with uniform at rate epsilon.
struct PolicySource {
  std::string id;
  std::string rule;
  std::string file;
  std::optional<double> epsilon;
};

struct ConstraintEntry {
  std::string g = "builtin";  // "builtin" or "reward"
  double delta = 0.05;
  double threshold = 0.0;
};

/// One experiment: environment, policies, sweep, algorithm settings, and outputs.
struct ExperimentConfig {
  std::filesystem::path base_dir;  // relative paths resolve against the config file
  nlohmann::json env_block;
  double gamma = 0.99;
  std::map<std::string, PolicySource> policies;
  std::vector<std::string> type_library;
  std::vector<std::string> teammates;  // true assignment, one id per slot
  std::vector<std::string> behaviors;
  std::vector<std::string> candidates;
  bool exclude_behavior = false;
  std::vector<ConstraintEntry> constraints;

  std::vector<std::size_t> sizes;
  std::size_t trials = 20;

  double split_ratio = 0.15;
  std::vector<EstimatorKind> estimators{EstimatorKind::dr, EstimatorKind::pdis};
  std::vector<BoundKind> bounds{BoundKind::student_t, BoundKind::bernstein};
  EstimatorKind return_estimator = EstimatorKind::dr;
  bool baseline = true;
  double clip_lo = -std::numeric_limits<double>::infinity();
  double clip_hi = std::numeric_limits<double>::infinity();
  std::vector<double> xi;
  bool literal_t_formula = false;
  std::optional<double> vmax;
  std::optional<double> return_vmax;
  std::string fallback = "self";  // "self" or "absorbing"
  double tol = 1e-8;
  std::size_t max_iter = 100000;

  std::size_t oracle_episodes = 100000;
  std::size_t jobs = 1;
  double timeout_s = 0.0;  // 0 disables
  bool record_runtime = true;

  std::uint64_t seed = 1;
  std::filesystem::path output;

  std::filesystem::path resolve(const std::string& rel) const {
    std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::filesystem::path data_dir() const { return output / "data"; }
  std::filesystem::path dataset_path(const std::string& behavior, std::size_t size, std::size_t trial) const {
    return data_dir() / (behavior + "_" + std::to_string(size) + "_" + std::to_string(trial) + ".dat");
  }
  std::filesystem::path oracle_path() const { return output / "oracle.csv"; }
  std::filesystem::path results_path() const { return output / "results.csv"; }
  std::filesystem::path summary_path() const { return output / "summary.csv"; }
  std::filesystem::path ablation_path() const { return output / "ablation.csv"; }

  /// Candidate ids evaluated on data from `behavior`.
  std::vector<std::string> candidates_for(const std::string& behavior) const {
    std::vector<std::string> out;
    for (const auto& c : candidates)
      if (!(exclude_behavior && c == behavior)) out.push_back(c);
    return out;
  }

  /// Every id that is ever a candidate.
  std::vector<std::string> all_candidates() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& c : candidates)
      if (seen.insert(c).second) out.push_back(c);
    return out;
  }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0,1)");
    auto known = [&](const std::string& id, const char* what) {
      if (!policies.contains(id)) throw ConfigError(std::string(what) + " '" + id + "' is not a declared policy");
    };
    if (type_library.empty()) throw ConfigError("teammate type library is empty");
    for (const auto& id : type_library) known(id, "type library entry");
    for (const auto& id : teammates) {
      known(id, "teammate");
      if (std::find(type_library.begin(), type_library.end(), id) == type_library.end())
        throw ConfigError("teammate '" + id + "' is not in the type library");
    }
    if (behaviors.empty()) throw ConfigError("no behavior policies");
    for (const auto& id : behaviors) known(id, "behavior");
    if (candidates.empty()) throw ConfigError("no candidate policies");
    for (const auto& id : candidates) known(id, "candidate");
    for (const auto& b : behaviors)
      if (candidates_for(b).empty()) throw ConfigError("behavior '" + b + "' leaves no candidates");
    if (constraints.empty()) throw ConfigError("no constraints");
    for (const auto& c : constraints) {
      if (c.g != "builtin" && c.g != "reward") throw ConfigError("constraint g must be 'builtin' or 'reward'");
      if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("constraint delta must lie in (0,1)");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) throw ConfigError("sweep sizes must be positive");
      if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sweep sizes must be strictly ascending");
    }
    if (estimators.empty() || bounds.empty()) throw ConfigError("empty estimator or bound matrix");
    if (!(clip_lo <= clip_hi)) throw ConfigError("clip range is empty");
    if (fallback != "self" && fallback != "absorbing") throw ConfigError("fallback must be 'self' or 'absorbing'");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    for (const auto& [id, src] : policies) {
      if (src.rule.empty() == src.file.empty())
        throw ConfigError("policy '" + id + "' needs exactly one of 'rule' or 'file'");
      if (src.epsilon && !(*src.epsilon >= 0.0 && *src.epsilon <= 1.0))
        throw ConfigError("policy '" + id + "': epsilon must lie in [0,1]");
      if (!src.file.empty() && !std::filesystem::exists(resolve(src.file)))
        throw ConfigError("policy '" + id + "': file '" + resolve(src.file).string() + "' does not exist");
    }
  }
};

namespace detail {

inline double number_or_inf(const nlohmann::json& j, double inf) {
  return j.is_null() ? inf : j.get<double>();
}

}  // namespace detail

/// Parses the JSON text. `base_dir` anchors relative policy paths and the output directory.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    c.env_block = j.at("env");
    c.gamma = j.value("gamma", c.gamma);
    for (const auto& [id, pj] : j.at("policies").items()) {
      PolicySource src;
      src.id = id;
      src.rule = pj.value("rule", std::string());
      src.file = pj.value("file", std::string());
      if (pj.contains("epsilon")) src.epsilon = pj.at("epsilon").get<double>();
      c.policies[id] = src;
    }
    const auto& tm = j.at("teammates");
    c.type_library = tm.at("library").get<std::vector<std::string>>();
    c.teammates = tm.at("actual").get<std::vector<std::string>>();
    c.behaviors = j.at("behaviors").get<std::vector<std::string>>();
    const auto& cj = j.at("candidates");
    if (cj.is_array()) {
      c.candidates = cj.get<std::vector<std::string>>();
    } else {
      c.candidates = cj.at("ids").get<std::vector<std::string>>();
      c.exclude_behavior = cj.value("exclude_behavior", false);
    }
    for (const auto& k : j.at("constraints")) {
      ConstraintEntry e;
      e.g = k.value("g", e.g);
      e.delta = k.at("delta").get<double>();
      e.threshold = k.at("threshold").get<double>();
      c.constraints.push_back(e);
    }
    const auto& sw = j.at("sweep");
    c.sizes = sw.at("sizes").get<std::vector<std::size_t>>();
    c.trials = sw.value("trials", c.trials);

    const nlohmann::json alg = j.value("algorithm", nlohmann::json::object());
    c.split_ratio = alg.value("split_ratio", c.split_ratio);
    if (alg.contains("estimators")) {
      c.estimators.clear();
      for (const auto& e : alg.at("estimators")) c.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    if (alg.contains("bounds")) {
      c.bounds.clear();
      for (const auto& b : alg.at("bounds")) c.bounds.push_back(parse_bound(b.get<std::string>()));
    }
    if (alg.contains("return_estimator"))
      c.return_estimator = parse_estimator(alg.at("return_estimator").get<std::string>());
    c.baseline = alg.value("baseline", c.baseline);
    if (alg.contains("clip")) {
      const auto& cl = alg.at("clip");
      if (!cl.is_array() || cl.size() != 2) throw ConfigError("algorithm.clip must be [lo, hi]");
      c.clip_lo = detail::number_or_inf(cl[0], -std::numeric_limits<double>::infinity());
      c.clip_hi = detail::number_or_inf(cl[1], std::numeric_limits<double>::infinity());
    }
    if (alg.contains("xi") && !alg.at("xi").is_null()) {
      const auto& xj = alg.at("xi");
      c.xi = xj.is_array() ? xj.get<std::vector<double>>() : std::vector<double>{xj.get<double>()};
    }
    c.literal_t_formula = alg.value("literal_t_formula", c.literal_t_formula);
    if (alg.contains("vmax") && !alg.at("vmax").is_null()) c.vmax = alg.at("vmax").get<double>();
    if (alg.contains("return_vmax") && !alg.at("return_vmax").is_null())
      c.return_vmax = alg.at("return_vmax").get<double>();
    c.fallback = alg.value("fallback", c.fallback);
    c.tol = alg.value("tol", c.tol);
    c.max_iter = alg.value("max_iter", c.max_iter);

    const nlohmann::json orc = j.value("oracle", nlohmann::json::object());
    c.oracle_episodes = orc.value("episodes", c.oracle_episodes);
    const nlohmann::json rt = j.value("runtime", nlohmann::json::object());
    c.jobs = rt.value("jobs", c.jobs);
    c.timeout_s = rt.value("timeout_s", c.timeout_s);
    c.record_runtime = rt.value("record_runtime", c.record_runtime);

    c.seed = j.value("seed", c.seed);
    c.output = c.resolve(j.value("output", std::string("out")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path.string()), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = parse_config(j, path.parent_path());
  c.validate();
  return c;
}

/// Environment plus every declared policy, tabulated once.
struct ResolvedExperiment {
  EnvPtr env;
  std::map<std::string, PolicyPtr> policies;
  std::vector<PolicyPtr> type_library;
  std::vector<PolicyPtr> teammates;
  std::vector<ConstraintSpec> constraints;
  ConstraintSpec reward;

  const PolicyPtr& policy(const std::string& id) const {
    auto it = policies.find(id);
    if (it == policies.end()) throw ConfigError("unknown policy '" + id + "'");
    return it->second;
  }

  std::vector<PolicyPtr> lookup(const std::vector<std::string>& ids) const {
    std::vector<PolicyPtr> out;
    for (const auto& id : ids) out.push_back(policy(id));
    return out;
  }
};

inline TabularPolicy resolve_policy(const Environment& env, const ExperimentConfig& cfg, const PolicySource& src,
                                    bool teammate) {
  TabularPolicy base = src.file.empty() ? builtin_policy(env, src.rule, teammate, src.id)
                                        : read_policy(cfg.resolve(src.file).string(), src.id, env.signature());
  if (src.epsilon && *src.epsilon > 0.0) return base.mixed_with_uniform(*src.epsilon, src.id);
  return base;
}

inline ResolvedExperiment resolve(const ExperimentConfig& cfg) {
  ResolvedExperiment r;
  r.env = make_environment(cfg.env_block);
  const auto& sig = r.env->signature();
  if (cfg.teammates.size() != sig.p)
    throw ConfigError("environment has " + std::to_string(sig.p) + " teammate slots but " +
                      std::to_string(cfg.teammates.size()) + " teammates are assigned");
  const std::set<std::string> mates(cfg.type_library.begin(), cfg.type_library.end());
  for (const auto& [id, src] : cfg.policies)
    r.policies[id] = std::make_shared<const TabularPolicy>(resolve_policy(*r.env, cfg, src, mates.contains(id)));
  r.type_library = r.lookup(cfg.type_library);
  r.teammates = r.lookup(cfg.teammates);
  for (std::size_t j = 0; j < cfg.constraints.size(); ++j) {
    const auto& e = cfg.constraints[j];
    ConstraintSpec g = e.g == "reward" ? ConstraintSpec::logged_reward("reward", sig.rmax, e.delta, e.threshold)
                                       : builtin_g(*r.env, e.delta, e.threshold);
    r.constraints.push_back(std::move(g));
  }
  r.reward = ConstraintSpec::logged_reward("return", sig.rmax, cfg.constraints.front().delta, 0.0);
  return r;
}

/// Seldonian settings shared by every cell; estimator, bound, candidates, and seed are filled per run.
inline SeldonianConfig base_seldonian_config(const ExperimentConfig& cfg, const ResolvedExperiment& r) {
  SeldonianConfig s;
  s.split_ratio = cfg.split_ratio;
  s.gamma = cfg.gamma;
  s.constraints = r.constraints;
  s.reward = r.reward;
  s.type_library = r.type_library;
  s.p = r.env->signature().p;
  s.clip_lo = cfg.clip_lo;
  s.clip_hi = cfg.clip_hi;
  s.xi = cfg.xi;
  s.literal_t_formula = cfg.literal_t_formula;
  s.tol = cfg.tol;
  s.max_iter = cfg.max_iter;
  s.vmax = cfg.vmax;
  s.return_vmax = cfg.return_vmax;
  if (cfg.fallback == "absorbing") {
    std::vector<double> fb(r.env->signature().num_states, 0.0);
    fb.back() = 1.0;
    s.transition_fallback = std::move(fb);
  }
  return s;
}

}  // namespace saht::harness
