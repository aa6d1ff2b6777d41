#pragma once

#include <cmath>
#include <vector>

#include "saht/envs/environment.hpp"

namespace saht {

/// Explicit finite model: T[s][joint][s'], deterministic reward r[s][joint],
/// and an initial-state distribution. Joint actions use joint_index().
class TabularEnv final : public Environment {
 public:
  TabularEnv(EnvSignature sig, std::vector<double> transitions, std::vector<double> rewards,
             std::vector<double> initial)
      : sig_(std::move(sig)), trans_(std::move(transitions)), rewards_(std::move(rewards)), init_(std::move(initial)) {
    joints_ = int_pow(sig_.num_actions, sig_.p + 1);
    const std::size_t S = sig_.num_states;
    if (trans_.size() != S * joints_ * S || rewards_.size() != S * joints_ || init_.size() != S)
      throw ConfigError("tabular env: table sizes do not match the signature");
    auto check_row = [&](const double* row, const char* what) {
      double sum = 0.0;
      for (std::size_t i = 0; i < S; ++i) {
        if (!(row[i] >= 0.0)) throw ConfigError(std::string("tabular env: negative ") + what);
        sum += row[i];
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string("tabular env: ") + what + " row does not sum to 1");
    };
    for (std::size_t i = 0; i < S * joints_; ++i) check_row(trans_.data() + i * S, "transition");
    check_row(init_.data(), "initial distribution");
    for (double r : rewards_)
      if (!(r >= 0.0 && r <= sig_.rmax)) throw ConfigError("tabular env: reward outside [0, Rmax]");
  }

  const EnvSignature& signature() const override { return sig_; }
  std::size_t num_joint_actions() const { return joints_; }

  double transition(StateId s, std::size_t joint, StateId next) const {
    return trans_[(s * joints_ + joint) * sig_.num_states + next];
  }
  double reward(StateId s, std::size_t joint) const { return rewards_[s * joints_ + joint]; }
  double initial(StateId s) const { return init_[s]; }

  StateId reset(Rng& rng) const override { return draw(init_.data(), rng); }

  Transition step(StateId s, const ActionProfile& a, Rng& rng) const override {
    check_profile(s, a);
    const std::size_t j = joint_index(a, sig_.num_actions);
    return {draw(trans_.data() + (s * joints_ + j) * sig_.num_states, rng), reward(s, j)};
  }

 private:
  StateId draw(const double* row, Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < sig_.num_states; ++i) {
      acc += row[i];
      if (u < acc) return i;
    }
    for (std::size_t i = sig_.num_states; i-- > 0;)
      if (row[i] > 0.0) return i;
    return 0;
  }

  EnvSignature sig_;
  std::size_t joints_ = 0;
  std::vector<double> trans_;
  std::vector<double> rewards_;
  std::vector<double> init_;
};

}  // namespace saht
