#pragma once

#include <memory>
#include <string>

#include "saht/core.hpp"

namespace saht {

struct Transition {
  StateId next = 0;
  double reward = 0.0;
};

/// Simulator kernel. Implementations are immutable; all randomness comes
/// from the caller-owned Rng, so independent rollouts may run concurrently.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSignature& signature() const = 0;

  /// Draws the start state of an episode.
  virtual StateId reset(Rng& rng) const = 0;

  virtual Transition step(StateId s, const ActionProfile& a, Rng& rng) const = 0;

  /// Human-readable form of a state index.
  virtual std::string describe_state(StateId s) const { return std::to_string(s); }

 protected:
  void check_profile(StateId s, const ActionProfile& a) const {
    const auto& sig = signature();
    if (s >= sig.num_states) throw IndexError(sig.name + ": state " + std::to_string(s) + " out of range");
    if (a.ego >= sig.num_actions || a.teammates.size() != sig.p)
      throw IndexError(sig.name + ": malformed joint action");
    for (auto t : a.teammates)
      if (t >= sig.num_actions) throw IndexError(sig.name + ": teammate action out of range");
  }
};

using EnvPtr = std::shared_ptr<const Environment>;

}  // namespace saht
