#pragma once

#include <string>
#include <vector>

#include "saht/envs/blackjack.hpp"

namespace saht {

/// Threshold rule on one hand of the state: hit with probability p_low while
/// the watched hand is below hit_below, with probability p_high otherwise.
/// The absorbing state gets a uniform row.
struct BlackjackRule {
  enum class Watch { own, other };

  std::string name;
  int hit_below = 17;
  double p_low = 0.9;
  double p_high = 0.1;
  Watch watch = Watch::own;
};

/// `as_teammate` decides whose hand is "own": the teammate reads the mate hand.
inline TabularPolicy blackjack_policy(const BlackjackCoop& env, const BlackjackRule& rule, bool as_teammate) {
  const auto& sig = env.signature();
  return TabularPolicy::from_rows(rule.name, sig.num_states, sig.num_actions, [&](StateId s) {
    if (s == env.absorbing()) return std::vector<double>{0.5, 0.5};
    const auto st = env.decode(s);
    const bool own_is_mate = as_teammate;
    const bool read_mate = rule.watch == BlackjackRule::Watch::own ? own_is_mate : !own_is_mate;
    const int total = read_mate ? st.mate.total : st.ego.total;
    const double hit = total < rule.hit_below ? rule.p_low : rule.p_high;
    std::vector<double> row(2);
    row[BlackjackCoop::kHit] = hit;
    row[BlackjackCoop::kStick] = 1.0 - hit;
    return row;
  });
}

/// Teammate types: cautious, by-the-book, and bold thresholds on the teammate's own hand.
inline std::vector<BlackjackRule> blackjack_teammate_rules() {
  return {
      {"timid", 12, 0.9, 0.1, BlackjackRule::Watch::own},
      {"standard", 17, 0.9, 0.1, BlackjackRule::Watch::own},
      {"bold", 19, 0.9, 0.1, BlackjackRule::Watch::own},
  };
}

/// Ego base policies. "mirror" tracks the standard teammate rule on the
/// teammate's hand, "solo" plays its own hand and ignores the teammate.
inline std::vector<BlackjackRule> blackjack_ego_rules() {
  return {
      {"mirror", 17, 1.0, 0.0, BlackjackRule::Watch::other},
      {"solo", 15, 1.0, 0.0, BlackjackRule::Watch::own},
  };
}

}  // namespace saht
