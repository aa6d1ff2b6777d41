#pragma once

#include <limits>
#include <string>
#include <vector>

#include "saht/envs/foraging.hpp"

namespace saht {

/// Approach-and-load rule for one player. Next to a present food the player
/// loads with probability p_load; elsewhere it steps toward the nearest present
/// food with probability p_approach. Leftover mass is spread evenly over the
/// remaining actions. With no food left the row is uniform.
struct ForagingRule {
  std::string name;
  double p_load = 0.9;
  double p_approach = 0.8;
};

inline ActionId foraging_approach_action(const LevelBasedForaging& env, const LevelBasedForaging::State& st,
                                         std::size_t player, bool& adjacent) {
  const auto& lay = env.layout();
  const Cell me = st.players[player];
  int best = std::numeric_limits<int>::max();
  Cell goal = me;
  for (std::size_t j = 0; j < lay.food_cells.size(); ++j) {
    if (!(st.mask >> j & 1u)) continue;
    const int d = manhattan(me, lay.food_cells[j]);
    if (d < best) {
      best = d;
      goal = lay.food_cells[j];
    }
  }
  adjacent = best == 1;
  if (adjacent) return LevelBasedForaging::kLoad;
  if (goal.row < me.row) return LevelBasedForaging::kUp;
  if (goal.row > me.row) return LevelBasedForaging::kDown;
  return goal.col < me.col ? LevelBasedForaging::kLeft : LevelBasedForaging::kRight;
}

/// `player` 0 is the ego; teammate u reads player u + 1.
inline TabularPolicy foraging_policy(const LevelBasedForaging& env, const ForagingRule& rule, std::size_t player) {
  const auto& sig = env.signature();
  if (player > sig.p) throw ConfigError("foraging_policy: player index out of range");
  const std::size_t A = sig.num_actions;
  return TabularPolicy::from_rows(rule.name, sig.num_states, A, [&](StateId s) {
    const auto st = env.decode(s);
    std::vector<double> row(A, 1.0 / static_cast<double>(A));
    if (st.mask == 0) return row;
    bool adjacent = false;
    const ActionId pick = foraging_approach_action(env, st, player, adjacent);
    const double p = adjacent ? rule.p_load : rule.p_approach;
    for (std::size_t a = 0; a < A; ++a) row[a] = a == pick ? p : (1.0 - p) / static_cast<double>(A - 1);
    return row;
  });
}

inline std::vector<ForagingRule> foraging_teammate_rules() {
  return {
      {"chaser", 0.9, 0.8},
      {"hesitant", 0.4, 0.5},
      {"wanderer", 0.2, 0.2},
  };
}

/// Ego base policies standing in for three training checkpoints of increasing quality.
inline std::vector<ForagingRule> foraging_ego_rules() {
  return {
      {"early", 0.3, 0.3},
      {"middle", 0.6, 0.6},
      {"late", 0.95, 0.9},
  };
}

}  // namespace saht
