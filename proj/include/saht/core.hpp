#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "saht/error.hpp"
#include "saht/rng.hpp"

namespace saht {

/// Dense index into an environment's enumerated state space.
using StateId = std::size_t;
/// Index into one agent's action set.
using ActionId = std::size_t;

/// Joint action: the ego action plus one action per teammate slot.
struct ActionProfile {
  ActionId ego = 0;
  std::vector<ActionId> teammates;

  bool operator==(const ActionProfile&) const = default;
};

/// Mixed-radix code of a joint action, ego digit first.
inline std::size_t joint_index(const ActionProfile& a, std::size_t num_actions) {
  std::size_t code = 0;
  for (auto it = a.teammates.rbegin(); it != a.teammates.rend(); ++it) code = code * num_actions + *it;
  return code * num_actions + a.ego;
}

/// Mixed-radix code of the teammate part only.
inline std::size_t teammate_index(std::span<const ActionId> mates, std::size_t num_actions) {
  std::size_t code = 0;
  for (auto it = mates.rbegin(); it != mates.rend(); ++it) code = code * num_actions + *it;
  return code;
}

inline std::vector<ActionId> decode_teammates(std::size_t code, std::size_t num_actions, std::size_t p) {
  std::vector<ActionId> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    out[i] = code % num_actions;
    code /= num_actions;
  }
  return out;
}

inline std::size_t int_pow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

struct Step {
  StateId state = 0;
  ActionProfile actions;
  StateId next_state = 0;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
};

/// Shape shared by an environment and everything estimated from it.
struct EnvSignature {
  std::string name;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t p = 0;  // teammate count
  std::size_t L = 0;  // fixed episode length
  double rmax = 0.0;

  bool compatible(const EnvSignature& o) const {
    return num_states == o.num_states && num_actions == o.num_actions && p == o.p && L == o.L;
  }
};

/// Per-state categorical distribution over one agent's actions, stored row-major.
class TabularPolicy {
 public:
  static constexpr double kRowTolerance = 1e-9;

  TabularPolicy() = default;

  /// Validates that every row is a distribution; throws ConfigError otherwise.
  TabularPolicy(std::string name, std::size_t num_states, std::size_t num_actions, std::vector<double> probs)
      : name_(std::move(name)), num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
    if (num_states_ == 0 || num_actions_ == 0) throw ConfigError("policy '" + name_ + "': empty state or action space");
    if (probs_.size() != num_states_ * num_actions_)
      throw ConfigError("policy '" + name_ + "': probability table has wrong size");
    for (std::size_t s = 0; s < num_states_; ++s) {
      double sum = 0.0;
      for (std::size_t a = 0; a < num_actions_; ++a) {
        const double v = probs_[s * num_actions_ + a];
        if (!(v >= 0.0 && v <= 1.0))
          throw ConfigError("policy '" + name_ + "': entry outside [0,1] at state " + std::to_string(s));
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw ConfigError("policy '" + name_ + "': row " + std::to_string(s) + " does not sum to 1");
    }
  }

  static TabularPolicy uniform(std::string name, std::size_t num_states, std::size_t num_actions) {
    return TabularPolicy(std::move(name), num_states, num_actions,
                         std::vector<double>(num_states * num_actions, 1.0 / static_cast<double>(num_actions)));
  }

  /// Builds a policy from a per-state row generator.
  static TabularPolicy from_rows(std::string name, std::size_t num_states, std::size_t num_actions,
                                 const std::function<std::vector<double>(StateId)>& row_of) {
    std::vector<double> probs;
    probs.reserve(num_states * num_actions);
    for (StateId s = 0; s < num_states; ++s) {
      auto row = row_of(s);
      if (row.size() != num_actions) throw ConfigError("policy '" + name + "': generator returned wrong row size");
      probs.insert(probs.end(), row.begin(), row.end());
    }
    return TabularPolicy(std::move(name), num_states, num_actions, std::move(probs));
  }

  /// (1-eps) * this + eps * uniform.
  TabularPolicy mixed_with_uniform(double eps, std::string name) const {
    if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("epsilon must lie in [0,1]");
    std::vector<double> probs(probs_.size());
    const double u = 1.0 / static_cast<double>(num_actions_);
    for (std::size_t i = 0; i < probs_.size(); ++i) probs[i] = (1.0 - eps) * probs_[i] + eps * u;
    return TabularPolicy(std::move(name), num_states_, num_actions_, std::move(probs));
  }

  const std::string& name() const { return name_; }
  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  const std::vector<double>& table() const { return probs_; }

  std::span<const double> row(StateId s) const {
    if (s >= num_states_) throw IndexError("policy '" + name_ + "': state " + std::to_string(s) + " out of range");
    return {probs_.data() + s * num_actions_, num_actions_};
  }

  double prob(StateId s, ActionId a) const {
    if (s >= num_states_ || a >= num_actions_)
      throw IndexError("policy '" + name_ + "': index (" + std::to_string(s) + "," + std::to_string(a) +
                       ") out of range");
    return probs_[s * num_actions_ + a];
  }

  /// Unchecked lookup for inner loops whose indices were validated upstream.
  double operator()(StateId s, ActionId a) const { return probs_[s * num_actions_ + a]; }

 private:
  std::string name_;
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> probs_;
};

inline double policy_prob(const TabularPolicy& policy, StateId s, ActionId a) { return policy.prob(s, a); }

/// Inverse-CDF draw from the policy row at s.
inline ActionId sample_action(const TabularPolicy& policy, StateId s, Rng& rng) {
  const auto row = policy.row(s);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    acc += row[a];
    if (u < acc) return a;
  }
  // Rounding left u above the accumulated mass: fall back to the last supported action.
  for (std::size_t a = row.size(); a-- > 0;)
    if (row[a] > 0.0) return a;
  return row.size() - 1;
}

using PolicyPtr = std::shared_ptr<const TabularPolicy>;

struct DatasetEntry {
  Trajectory trajectory;
  std::string behavior_id;
};

/// Logged trajectories tagged with the id of the (ego) behavior policy that produced them.
struct Dataset {
  EnvSignature signature;
  std::vector<DatasetEntry> entries;
  std::map<std::string, PolicyPtr> behaviors;

  std::size_t size() const { return entries.size(); }

  const TabularPolicy& behavior(const std::string& id) const {
    auto it = behaviors.find(id);
    if (it == behaviors.end() || !it->second) throw ConfigError("unknown behavior policy id '" + id + "'");
    return *it->second;
  }

  /// Copy of the signature and registry with a subset of entries.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.signature = signature;
    out.behaviors = behaviors;
    out.entries.reserve(indices.size());
    for (auto i : indices) out.entries.push_back(entries.at(i));
    return out;
  }
};

/// Checks ranges, chaining, length, and reward bounds.
inline void validate_trajectory(const Trajectory& traj, const EnvSignature& sig) {
  if (traj.length() != sig.L)
    throw ConfigError("trajectory length " + std::to_string(traj.length()) + " != L=" + std::to_string(sig.L));
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const Step& st = traj.steps[t];
    if (st.state >= sig.num_states || st.next_state >= sig.num_states)
      throw IndexError("step " + std::to_string(t) + ": state out of range");
    if (st.actions.ego >= sig.num_actions || st.actions.teammates.size() != sig.p)
      throw IndexError("step " + std::to_string(t) + ": malformed joint action");
    for (auto a : st.actions.teammates)
      if (a >= sig.num_actions) throw IndexError("step " + std::to_string(t) + ": teammate action out of range");
    if (!(st.reward >= 0.0 && st.reward <= sig.rmax))
      throw ConfigError("step " + std::to_string(t) + ": reward outside [0, Rmax]");
    if (t + 1 < traj.steps.size() && st.next_state != traj.steps[t + 1].state)
      throw ConfigError("step " + std::to_string(t) + ": next_state does not chain into the following step");
  }
}

inline void validate_policy_shape(const TabularPolicy& pol, const EnvSignature& sig) {
  if (pol.num_states() != sig.num_states || pol.num_actions() != sig.num_actions)
    throw ConfigError("policy '" + pol.name() + "' does not match environment '" + sig.name + "'");
}

inline void validate_dataset(const Dataset& d) {
  for (const auto& [id, pol] : d.behaviors) {
    if (!pol) throw ConfigError("behavior '" + id + "' has no policy");
    validate_policy_shape(*pol, d.signature);
  }
  for (std::size_t k = 0; k < d.entries.size(); ++k) {
    const auto& e = d.entries[k];
    if (!d.behaviors.contains(e.behavior_id))
      throw ConfigError("trajectory " + std::to_string(k) + ": behavior id '" + e.behavior_id + "' not registered");
    validate_trajectory(e.trajectory, d.signature);
  }
}

/// A per-step desirability signal with its confidence level and threshold.
///
/// Two kinds exist: a function g(s, a) of the state and joint action, and the
/// logged ego reward. The second is what the return estimate and
/// reward-as-constraint settings use; its model-side value comes from the
/// mean observed reward of each transition.
class ConstraintSpec {
 public:
  using Fn = std::function<double(StateId, const ActionProfile&)>;

  ConstraintSpec() = default;

  static ConstraintSpec from_function(std::string name, Fn g, double gmax, double delta, double threshold) {
    ConstraintSpec c(std::move(name), gmax, delta, threshold);
    c.g_ = std::move(g);
    return c;
  }

  static ConstraintSpec logged_reward(std::string name, double rmax, double delta, double threshold) {
    return ConstraintSpec(std::move(name), rmax, delta, threshold);
  }

  const std::string& name() const { return name_; }
  double gmax() const { return gmax_; }
  double delta() const { return delta_; }
  double threshold() const { return threshold_; }
  bool uses_logged_reward() const { return !g_; }

  ConstraintSpec with_threshold(double d) const {
    ConstraintSpec c = *this;
    c.threshold_ = d;
    return c;
  }
  ConstraintSpec with_delta(double delta) const {
    ConstraintSpec c = *this;
    c.check_delta(delta);
    c.delta_ = delta;
    return c;
  }

  /// g(s, a) clamped to [0, Gmax]. Only valid for function-kind constraints.
  double evaluate(StateId s, const ActionProfile& a) const {
    if (!g_) throw ConfigError("constraint '" + name_ + "' is reward-based and has no g(s,a)");
    return clamp(g_(s, a));
  }

  /// Per-step value on a logged step.
  double step_value(const Step& st) const { return g_ ? clamp(g_(st.state, st.actions)) : clamp(st.reward); }

  /// Number of raw values seen outside [0, Gmax] so far.
  std::size_t out_of_range_count() const { return violations_ ? violations_->load() : 0; }

 private:
  ConstraintSpec(std::string name, double gmax, double delta, double threshold)
      : name_(std::move(name)), gmax_(gmax), delta_(delta), threshold_(threshold),
        violations_(std::make_shared<std::atomic<std::size_t>>(0)) {
    if (!(gmax_ > 0.0)) throw ConfigError("constraint '" + name_ + "': Gmax must be positive");
    check_delta(delta_);
  }

  void check_delta(double delta) const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("constraint '" + name_ + "': delta must lie in (0,1)");
  }

  double clamp(double raw) const {
    if (raw >= 0.0 && raw <= gmax_) return raw;
    if (violations_ && violations_->fetch_add(1) == 0)
      std::fprintf(stderr, "warning: constraint '%s' produced %g outside [0, %g]; clamping\n", name_.c_str(), raw,
                   gmax_);
    return raw < 0.0 || std::isnan(raw) ? 0.0 : gmax_;
  }

  std::string name_;
  double gmax_ = 1.0;
  double delta_ = 0.05;
  double threshold_ = 0.0;
  Fn g_;
  std::shared_ptr<std::atomic<std::size_t>> violations_;
};

/// Discounted alternative return: sum_t gamma^t g(s_t, a_t).
inline double g_return(const Trajectory& traj, const ConstraintSpec& c, double gamma) {
  double total = 0.0;
  double disc = 1.0;
  for (const auto& st : traj.steps) {
    total += disc * c.step_value(st);
    disc *= gamma;
  }
  return total;
}

}  // namespace saht
