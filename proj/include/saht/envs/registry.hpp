#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "saht/envs/blackjack_policies.hpp"
#include "saht/envs/chain_policies.hpp"
#include "saht/envs/foraging_policies.hpp"

namespace saht {

namespace detail {

template <class T>
T param_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("environment parameter '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Builds an environment from `{"name": ..., <parameters>}`. Unknown names are a ConfigError.
inline EnvPtr make_environment(const nlohmann::json& block) {
  if (!block.is_object() || !block.contains("name")) throw ConfigError("environment block needs a 'name'");
  const std::string name = block.at("name").get<std::string>();
  using detail::param_or;
  if (name == "chain_world") {
    ChainWorldParams p;
    p.num_chain_states = param_or(block, "num_chain_states", p.num_chain_states);
    p.agents = param_or(block, "agents", p.agents);
    p.small_reward = param_or(block, "small_reward", p.small_reward);
    p.large_reward = param_or(block, "large_reward", p.large_reward);
    p.length = param_or(block, "length", p.length);
    p.env_noise = param_or(block, "env_noise", p.env_noise);
    return chain_world(p);
  }
  if (name == "blackjack") {
    BlackjackParams p;
    p.turns = param_or(block, "turns", p.turns);
    p.mismatch_reward = param_or(block, "mismatch_reward", p.mismatch_reward);
    p.dealer_bust_reward = param_or(block, "dealer_bust_reward", p.dealer_bust_reward);
    p.win_reward = param_or(block, "win_reward", p.dealer_bust_reward / 2.0);
    return blackjack_coop(p);
  }
  if (name == "lbf") {
    ForagingParams p;
    p.grid = param_or(block, "grid", p.grid);
    p.players = param_or(block, "players", p.players);
    p.foods = param_or(block, "foods", p.foods);
    p.length = param_or(block, "length", p.length);
    p.layout_seed = param_or(block, "layout_seed", p.layout_seed);
    return level_based_foraging(p);
  }
  throw ConfigError("unknown environment '" + name + "'");
}

/// The environment's own desirability function: agreement for Chain World and
/// Blackjack, the per-step reward for level-based foraging.
inline ConstraintSpec builtin_g(const Environment& env, double delta, double threshold) {
  const std::string& name = env.signature().name;
  if (name == "chain_world") return chain_world_agreement(delta, threshold);
  if (name == "blackjack") return blackjack_agreement(dynamic_cast<const BlackjackCoop&>(env), delta, threshold);
  if (name == "lbf") return foraging_reward_constraint(dynamic_cast<const LevelBasedForaging&>(env), delta, threshold);
  throw ConfigError("no built-in g for environment '" + name + "'");
}

/// Names of the shipped rule policies, by role.
inline std::vector<std::string> builtin_rule_names(const Environment& env, bool teammate) {
  std::vector<std::string> out;
  const std::string& name = env.signature().name;
  auto collect = [&](const auto& rules) {
    for (const auto& r : rules) out.push_back(r.name);
  };
  if (name == "chain_world") {
    collect(teammate ? chain_teammate_rules() : default_chain_rules());
  } else if (name == "blackjack") {
    collect(teammate ? blackjack_teammate_rules() : blackjack_ego_rules());
  } else if (name == "lbf") {
    collect(teammate ? foraging_teammate_rules() : foraging_ego_rules());
  }
  return out;
}

/// Tabulates a shipped rule. Teammate rules are built from the teammate's
/// point of view (its own hand in Blackjack, player 1 in foraging).
inline TabularPolicy builtin_policy(const Environment& env, const std::string& rule, bool teammate,
                                    const std::string& id) {
  const std::string& name = env.signature().name;
  auto find = [&](const auto& rules) -> std::optional<std::decay_t<decltype(rules[0])>> {
    for (const auto& r : rules)
      if (r.name == rule) return r;
    return std::nullopt;
  };
  std::optional<TabularPolicy> out;
  if (name == "chain_world") {
    const auto& cw = dynamic_cast<const ChainWorld&>(env);
    if (auto r = find(teammate ? chain_teammate_rules() : default_chain_rules())) out = chain_policy(cw, *r);
  } else if (name == "blackjack") {
    const auto& bj = dynamic_cast<const BlackjackCoop&>(env);
    if (auto r = find(teammate ? blackjack_teammate_rules() : blackjack_ego_rules()))
      out = blackjack_policy(bj, *r, teammate);
  } else if (name == "lbf") {
    const auto& lbf = dynamic_cast<const LevelBasedForaging&>(env);
    if (auto r = find(teammate ? foraging_teammate_rules() : foraging_ego_rules()))
      out = foraging_policy(lbf, *r, teammate ? 1 : 0);
  }
  if (!out)
    throw ConfigError("environment '" + name + "' has no " + (teammate ? "teammate" : "ego") + " rule '" + rule +
                      "'");
  return TabularPolicy(id, out->num_states(), out->num_actions(), out->table());
}

}  // namespace saht
