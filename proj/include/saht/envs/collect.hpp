#pragma once

#include <cmath>
#include <vector>

#include "saht/envs/environment.hpp"

namespace saht {

inline void check_policies(const Environment& env, const TabularPolicy& ego, std::span<const PolicyPtr> teammates) {
  const auto& sig = env.signature();
  validate_policy_shape(ego, sig);
  if (teammates.size() != sig.p)
    throw ConfigError(sig.name + ": expected " + std::to_string(sig.p) + " teammate policies, got " +
                      std::to_string(teammates.size()));
  for (const auto& t : teammates) {
    if (!t) throw ConfigError(sig.name + ": null teammate policy");
    validate_policy_shape(*t, sig);
  }
}

/// One fixed-length episode; teammates act independently of each other and of the ego.
inline Trajectory rollout(const Environment& env, const TabularPolicy& ego, std::span<const PolicyPtr> teammates,
                          Rng& rng) {
  const auto& sig = env.signature();
  Trajectory traj;
  traj.steps.reserve(sig.L);
  StateId s = env.reset(rng);
  for (std::size_t t = 0; t < sig.L; ++t) {
    Step st;
    st.state = s;
    st.actions.ego = sample_action(ego, s, rng);
    st.actions.teammates.resize(teammates.size());
    for (std::size_t u = 0; u < teammates.size(); ++u) st.actions.teammates[u] = sample_action(*teammates[u], s, rng);
    const Transition tr = env.step(s, st.actions, rng);
    st.next_state = tr.next;
    st.reward = tr.reward;
    traj.steps.push_back(std::move(st));
    s = tr.next;
  }
  return traj;
}

/// m episodes, each on its own stream derived from (seed, episode index).
inline Dataset collect_dataset(const Environment& env, PolicyPtr ego, const std::string& behavior_id,
                               std::span<const PolicyPtr> teammates, std::size_t m, std::uint64_t seed) {
  if (!ego) throw ConfigError("collect_dataset: null ego policy");
  check_policies(env, *ego, teammates);
  Dataset d;
  d.signature = env.signature();
  d.behaviors[behavior_id] = ego;
  d.entries.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    Rng rng(derive_seed(seed, {k}));
    d.entries.push_back({rollout(env, *ego, teammates, rng), behavior_id});
  }
  return d;
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
};

/// Discounted returns of several per-step signals under on-policy rollouts,
/// sharing the same episodes across signals.
inline std::vector<MonteCarloEstimate> simulate_returns(const Environment& env, const TabularPolicy& ego,
                                                        std::span<const PolicyPtr> teammates,
                                                        std::span<const ConstraintSpec> signals, double gamma,
                                                        std::size_t episodes, std::uint64_t seed) {
  check_policies(env, ego, teammates);
  const std::size_t n = signals.size();
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (std::size_t k = 0; k < episodes; ++k) {
    Rng rng(derive_seed(seed, {k}));
    const Trajectory traj = rollout(env, ego, teammates, rng);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = g_return(traj, signals[j], gamma);
      sum[j] += g;
      sum_sq[j] += g * g;
    }
  }
  std::vector<MonteCarloEstimate> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j].episodes = episodes;
    if (episodes == 0) continue;
    const double e = static_cast<double>(episodes);
    out[j].mean = sum[j] / e;
    const double var = episodes > 1 ? std::max(0.0, (sum_sq[j] - e * out[j].mean * out[j].mean) / (e - 1.0)) : 0.0;
    out[j].std_error = std::sqrt(var / e);
  }
  return out;
}

}  // namespace saht
