#pragma once

#include <algorithm>
#include <vector>

#include "saht/envs/chain_world.hpp"

namespace saht {

/// Rule-based Chain World policy: probability of action 0 at chain position i
/// is base + slope * i, clamped into [0.02, 0.98].
struct ChainRule {
  std::string name;
  double base = 0.5;
  double slope = 0.0;
};

inline TabularPolicy chain_policy(const ChainWorld& env, const ChainRule& rule) {
  const auto& sig = env.signature();
  return TabularPolicy::from_rows(rule.name, sig.num_states, sig.num_actions, [&](StateId s) {
    const double p0 = std::clamp(rule.base + rule.slope * static_cast<double>(s), 0.02, 0.98);
    return std::vector<double>{p0, 1.0 - p0};
  });
}

/// The five handcrafted ego candidates shipped for Chain World.
inline std::vector<ChainRule> default_chain_rules() {
  return {
      {"forward", 0.45, 0.0},
      {"resetter", 0.32, 0.0},
      {"indifferent", 0.5, 0.0},
      {"drifting", 0.5, -0.05},
      {"cooling", 0.6, -0.25},
  };
}

/// Teammate type library for Chain World. The default team plays "steady"
/// and "eager".
inline std::vector<ChainRule> chain_teammate_rules() {
  return {
      {"steady", 0.5, 0.0},
      {"eager", 0.9, -0.08},
      {"wary", 0.25, 0.0},
  };
}

}  // namespace saht
