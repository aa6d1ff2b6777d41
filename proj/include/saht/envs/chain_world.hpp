#pragma once

#include <algorithm>
#include <cmath>

#include "saht/envs/environment.hpp"

namespace saht {

struct ChainWorldParams {
  std::size_t num_chain_states = 10;
  std::size_t agents = 3;
  double small_reward = 10.0;
  double large_reward = 100.0;
  std::size_t length = 200;
  double env_noise = 0.1;
};

/// Coordination chain. State i is position s_{i+1}; every agent has actions
/// {0, 1}. Unanimous 0 advances, unanimous 1 resets to s_1 and pays the small
/// reward, any disagreement stays. Stepping into the last position pays the
/// large reward and teleports back to s_1, so the last index is never occupied.
///
/// With probability env_noise the rule outcome is replaced by a uniform pick
/// among {stay, advance, reset}. The small reward follows the actions; the
/// large reward follows the realized move.
class ChainWorld final : public Environment {
 public:
  enum class Move { stay, advance, reset };

  explicit ChainWorld(ChainWorldParams params) : params_(params) {
    if (params_.num_chain_states < 2) throw ConfigError("chain_world: need at least 2 chain states");
    if (params_.agents < 2) throw ConfigError("chain_world: need at least 2 agents");
    if (!(params_.env_noise >= 0.0 && params_.env_noise < 1.0))
      throw ConfigError("chain_world: env_noise must lie in [0,1)");
    if (params_.length == 0) throw ConfigError("chain_world: episode length must be positive");
    if (!(params_.small_reward >= 0.0 && params_.large_reward >= 0.0))
      throw ConfigError("chain_world: rewards must be nonnegative");
    sig_ = {"chain_world", params_.num_chain_states, 2, params_.agents - 1, params_.length,
            std::max(params_.small_reward, params_.large_reward)};
  }

  const EnvSignature& signature() const override { return sig_; }
  const ChainWorldParams& params() const { return params_; }

  StateId reset(Rng&) const override { return 0; }

  static bool all_equal(const ActionProfile& a, ActionId value) {
    return a.ego == value && std::all_of(a.teammates.begin(), a.teammates.end(), [&](ActionId t) { return t == value; });
  }

  static Move rule_move(const ActionProfile& a) {
    if (all_equal(a, 0)) return Move::advance;
    if (all_equal(a, 1)) return Move::reset;
    return Move::stay;
  }

  /// Deterministic consequence of a realized move.
  Transition apply(StateId s, const ActionProfile& a, Move move) const {
    Transition out{s, all_equal(a, 1) ? params_.small_reward : 0.0};
    switch (move) {
      case Move::stay:
        break;
      case Move::reset:
        out.next = 0;
        break;
      case Move::advance:
        out.next = s + 1;
        if (out.next == params_.num_chain_states - 1) {
          out.next = 0;
          out.reward = params_.large_reward;
        }
        break;
    }
    return out;
  }

  Transition step(StateId s, const ActionProfile& a, Rng& rng) const override {
    check_profile(s, a);
    Move move = rule_move(a);
    if (params_.env_noise > 0.0 && rng.uniform() < params_.env_noise) move = static_cast<Move>(rng.below(3));
    return apply(s, a, move);
  }

  std::string describe_state(StateId s) const override { return "s_" + std::to_string(s + 1); }

 private:
  ChainWorldParams params_;
  EnvSignature sig_;
};

inline std::shared_ptr<const ChainWorld> chain_world(const ChainWorldParams& params) {
  return std::make_shared<const ChainWorld>(params);
}

/// exp(-x) with x = 0 iff every agent picked the same action.
inline ConstraintSpec chain_world_agreement(double delta, double threshold) {
  return ConstraintSpec::from_function(
      "agreement",
      [](StateId, const ActionProfile& a) {
        const bool same = std::all_of(a.teammates.begin(), a.teammates.end(), [&](ActionId t) { return t == a.ego; });
        return same ? 1.0 : std::exp(-1.0);
      },
      1.0, delta, threshold);
}

}  // namespace saht
