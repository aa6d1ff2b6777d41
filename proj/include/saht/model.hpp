#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "saht/core.hpp"

namespace saht {

/// Maximum-likelihood transition model over (state, joint action) rows.
///
/// Each observed row keeps the count and reward sum of every successor, so
/// the model can also serve the mean logged reward of a transition. Rows never
/// observed fall back to a self-loop, or to a fixed distribution when one is given.
class TransitionModel {
 public:
  struct Outcome {
    StateId next = 0;
    double count = 0.0;
    double reward_sum = 0.0;
  };
  struct Row {
    std::vector<Outcome> outcomes;  // sorted by next state
    double total = 0.0;
  };

  TransitionModel() = default;
  TransitionModel(EnvSignature sig, std::optional<std::vector<double>> fallback)
      : sig_(std::move(sig)), joints_(int_pow(sig_.num_actions, sig_.p + 1)), fallback_(std::move(fallback)) {
    if (fallback_) {
      if (fallback_->size() != sig_.num_states) throw ConfigError("transition fallback has wrong size");
      double sum = 0.0;
      for (double v : *fallback_) {
        if (!(v >= 0.0)) throw ConfigError("transition fallback has a negative entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("transition fallback does not sum to 1");
    }
  }

  const EnvSignature& signature() const { return sig_; }
  std::size_t num_joint_actions() const { return joints_; }
  bool self_loop_fallback() const { return !fallback_.has_value(); }
  const std::optional<std::vector<double>>& fallback() const { return fallback_; }

  void add(const Step& st, double weight = 1.0) {
    Row& row = rows_[key(st.state, joint_index(st.actions, sig_.num_actions))];
    auto it = std::lower_bound(row.outcomes.begin(), row.outcomes.end(), st.next_state,
                               [](const Outcome& o, StateId n) { return o.next < n; });
    if (it == row.outcomes.end() || it->next != st.next_state) it = row.outcomes.insert(it, Outcome{st.next_state});
    it->count += weight;
    it->reward_sum += weight * st.reward;
    row.total += weight;
  }

  /// Observed row, or nullptr when (s, joint) never occurred.
  const Row* find(StateId s, std::size_t joint) const {
    auto it = rows_.find(key(s, joint));
    return it == rows_.end() ? nullptr : &it->second;
  }

  bool seen(StateId s, std::size_t joint) const { return find(s, joint) != nullptr; }

  /// T_hat(s, joint, next) including the fallback for unseen rows.
  double prob(StateId s, std::size_t joint, StateId next) const {
    if (const Row* row = find(s, joint)) {
      for (const auto& o : row->outcomes)
        if (o.next == next) return o.count / row->total;
      return 0.0;
    }
    if (fallback_) return (*fallback_)[next];
    return next == s ? 1.0 : 0.0;
  }

  /// Full probability row over next states (dense; meant for small models and tests).
  std::vector<double> distribution(StateId s, std::size_t joint) const {
    std::vector<double> out(sig_.num_states, 0.0);
    if (const Row* row = find(s, joint)) {
      for (const auto& o : row->outcomes) out[o.next] = o.count / row->total;
    } else if (fallback_) {
      out = *fallback_;
    } else {
      out[s] = 1.0;
    }
    return out;
  }

  /// Mean logged reward of (s, joint) -> next; 0 where nothing was observed.
  double mean_reward(StateId s, std::size_t joint, StateId next) const {
    if (const Row* row = find(s, joint))
      for (const auto& o : row->outcomes)
        if (o.next == next) return o.reward_sum / o.count;
    return 0.0;
  }

  /// States that are the source of at least one observed row, ascending.
  std::vector<StateId> observed_states() const {
    std::vector<StateId> out;
    out.reserve(rows_.size());
    for (const auto& [k, row] : rows_) out.push_back(static_cast<StateId>(k / joints_));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::size_t observed_rows() const { return rows_.size(); }

 private:
  std::uint64_t key(StateId s, std::size_t joint) const { return static_cast<std::uint64_t>(s) * joints_ + joint; }

  EnvSignature sig_;
  std::size_t joints_ = 1;
  std::optional<std::vector<double>> fallback_;
  std::unordered_map<std::uint64_t, Row> rows_;
};

/// T_hat(s, a, s') = count(s, a, s') / count(s, a). Passing no fallback selects the self-loop.
inline TransitionModel estimate_transition(const Dataset& train,
                                           std::optional<std::vector<double>> fallback = std::nullopt) {
  if (train.entries.empty()) throw InsufficientData("estimate_transition: empty training split");
  TransitionModel model(train.signature, std::move(fallback));
  for (const auto& e : train.entries)
    for (const auto& st : e.trajectory.steps) model.add(st);
  return model;
}

/// Per-slot maximum-likelihood teammate types.
struct TeammateModel {
  struct Slot {
    std::size_t type_index = 0;
    PolicyPtr policy;
    std::vector<double> scores;  // log-likelihood per library entry
  };
  std::vector<Slot> slots;

  std::size_t p() const { return slots.size(); }

  /// Probability of the teammate joint action under independent slots.
  double prob(StateId s, std::span<const ActionId> mates) const {
    double pr = 1.0;
    for (std::size_t u = 0; u < slots.size(); ++u) pr *= (*slots[u].policy)(s, mates[u]);
    return pr;
  }

  static TeammateModel fixed(std::span<const PolicyPtr> policies) {
    TeammateModel m;
    for (std::size_t u = 0; u < policies.size(); ++u) m.slots.push_back({u, policies[u], {}});
    return m;
  }
};

/// For each teammate slot, the library policy maximizing the sum of log P(a_u | s)
/// over the training steps. Zero likelihood on any observed action scores -inf;
/// ties go to the lowest library index.
inline TeammateModel infer_types(const Dataset& train, std::span<const PolicyPtr> library, std::size_t p) {
  if (library.empty()) throw ConfigError("infer_types: empty type library");
  if (train.entries.empty()) throw InsufficientData("infer_types: empty training split");
  if (p != train.signature.p) throw ConfigError("infer_types: teammate count does not match the dataset");
  for (const auto& pol : library) {
    if (!pol) throw ConfigError("infer_types: null library policy");
    validate_policy_shape(*pol, train.signature);
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  TeammateModel model;
  for (std::size_t u = 0; u < p; ++u) {
    std::vector<double> scores(library.size(), 0.0);
    for (std::size_t q = 0; q < library.size(); ++q) {
      const TabularPolicy& pol = *library[q];
      double score = 0.0;
      for (const auto& e : train.entries) {
        for (const auto& st : e.trajectory.steps) {
          const double pr = pol.prob(st.state, st.actions.teammates.at(u));
          if (pr <= 0.0) {
            score = kNegInf;
            break;
          }
          score += std::log(pr);
        }
        if (score == kNegInf) break;
      }
      scores[q] = score;
    }
    std::size_t best = 0;
    for (std::size_t q = 1; q < scores.size(); ++q)
      if (scores[q] > scores[best]) best = q;
    if (scores[best] == kNegInf)
      throw TypeInferenceFailure("infer_types: no library type explains teammate slot " + std::to_string(u));
    model.slots.push_back({best, library[best], std::move(scores)});
  }
  return model;
}

struct QVOptions {
  double gamma = 0.99;
  double tol = 1e-8;
  std::size_t max_iter = 100000;
  std::optional<double> vmax;  // default Gmax / (1 - gamma)
};

/// Ego-action values of one candidate for one constraint under an estimated model.
struct QVTables {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> q;  // row-major (state, ego action)
  std::vector<double> v;
  double gamma = 0.0;
  double tol = 0.0;
  double vmax = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> residual_history;

  double Q(StateId s, ActionId a) const { return q[s * num_actions + a]; }
  double V(StateId s) const { return v[s]; }

  /// All-zero tables; DR with these reduces to PDIS.
  static QVTables zeros(std::size_t num_states, std::size_t num_actions) {
    QVTables t;
    t.num_states = num_states;
    t.num_actions = num_actions;
    t.q.assign(num_states * num_actions, 0.0);
    t.v.assign(num_states, 0.0);
    t.converged = true;
    return t;
  }

  void write_csv(std::ostream& os) const {
    os << "state,action,q,v\n";
    char buf[64];
    for (std::size_t s = 0; s < num_states; ++s)
      for (std::size_t a = 0; a < num_actions; ++a) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", Q(s, a), V(s));
        os << s << ',' << a << ',' << buf << '\n';
      }
  }
};

namespace detail {

/// Linear form of one (state, ego action) backup:
/// Q = constant + gamma * (self * V(s) + sum_k weight_k V(next_k) + fallback_mass * F),
/// where F is the fallback-weighted mean of V.
struct Backup {
  double constant = 0.0;
  double self = 0.0;
  double fallback_mass = 0.0;
  std::uint32_t begin = 0;  // range into the successor arrays
  std::uint32_t end = 0;
};

}  // namespace detail

/// Stationary fixed point of
///   Q(s, a) = sum_c P_mates(c | s) sum_s' T_hat(s, (a, c), s') [g(s, (a, c)) + gamma V(s')],
///   V(s)    = sum_a candidate(a | s) Q(s, a),
/// iterated from zero until the max-norm change of V drops below tol.
///
/// Sweeps are Gauss-Seidel in descending state order and solve each state's
/// self-loop weight in closed form. This is the same fixed point as plain
/// value iteration and still contracts with modulus at most gamma. States
/// without any observed row are self-contained under the self-loop fallback
/// and are solved once, outside the sweeps. The result is clipped to [0, vmax]
/// and V is recomputed from the clipped Q.
inline QVTables solve_qv(const TabularPolicy& candidate, const ConstraintSpec& g, const TransitionModel& model,
                         const TeammateModel& mates, const QVOptions& opt) {
  const EnvSignature& sig = model.signature();
  validate_policy_shape(candidate, sig);
  if (!(opt.gamma > 0.0 && opt.gamma < 1.0)) throw ConfigError("solve_qv: gamma must lie in (0,1)");
  if (!(opt.tol > 0.0)) throw ConfigError("solve_qv: tol must be positive");
  if (mates.p() != sig.p) throw ConfigError("solve_qv: teammate model does not match the signature");
  const double gamma = opt.gamma;
  const double vmax = opt.vmax.value_or(g.gmax() / (1.0 - gamma));
  if (!(vmax > 0.0)) throw ConfigError("solve_qv: vmax must be positive");

  const std::size_t S = sig.num_states;
  const std::size_t A = sig.num_actions;
  const std::size_t combos = int_pow(A, sig.p);
  const bool self_loop = model.self_loop_fallback();

  std::vector<std::vector<ActionId>> mate_actions(combos);
  for (std::size_t c = 0; c < combos; ++c) mate_actions[c] = decode_teammates(c, A, sig.p);

  std::vector<char> active(S, 0);
  for (StateId s : model.observed_states()) active[s] = 1;

  std::vector<detail::Backup> backups(S * A);
  std::vector<StateId> succ_state;
  std::vector<double> succ_weight;
  std::vector<std::pair<StateId, double>> scratch;

  ActionProfile profile;
  profile.teammates.resize(sig.p);
  for (StateId s = 0; s < S; ++s) {
    // With a distribution fallback every state couples to F, so all states stay in the sweep.
    if (!active[s] && self_loop && g.uses_logged_reward()) {
      for (std::size_t a = 0; a < A; ++a) backups[s * A + a].self = 1.0;
      continue;
    }
    for (std::size_t a = 0; a < A; ++a) {
      detail::Backup& b = backups[s * A + a];
      scratch.clear();
      profile.ego = a;
      for (std::size_t c = 0; c < combos; ++c) {
        const double pc = mates.prob(s, mate_actions[c]);
        if (pc <= 0.0) continue;
        std::copy(mate_actions[c].begin(), mate_actions[c].end(), profile.teammates.begin());
        const std::size_t joint = c * A + a;
        const TransitionModel::Row* row = active[s] ? model.find(s, joint) : nullptr;
        if (row) {
          const double gval = g.uses_logged_reward() ? 0.0 : g.evaluate(s, profile);
          for (const auto& o : row->outcomes) {
            const double t = o.count / row->total;
            const double val = g.uses_logged_reward() ? o.reward_sum / o.count : gval;
            b.constant += pc * t * val;
            if (o.next == s)
              b.self += pc * t;
            else
              scratch.emplace_back(o.next, pc * t);
          }
        } else {
          // Unseen row: logged reward contributes 0, g(s, a) is still paid.
          if (!g.uses_logged_reward()) b.constant += pc * g.evaluate(s, profile);
          if (self_loop)
            b.self += pc;
          else
            b.fallback_mass += pc;
        }
      }
      std::sort(scratch.begin(), scratch.end());
      b.begin = static_cast<std::uint32_t>(succ_state.size());
      for (std::size_t i = 0; i < scratch.size(); ++i) {
        if (!succ_state.empty() && succ_state.size() > b.begin && succ_state.back() == scratch[i].first)
          succ_weight.back() += scratch[i].second;
        else {
          succ_state.push_back(scratch[i].first);
          succ_weight.push_back(scratch[i].second);
        }
      }
      b.end = static_cast<std::uint32_t>(succ_state.size());
    }
  }

  QVTables out;
  out.num_states = S;
  out.num_actions = A;
  out.gamma = gamma;
  out.tol = opt.tol;
  out.vmax = vmax;
  out.v.assign(S, 0.0);
  std::vector<double>& V = out.v;

  auto backup_value = [&](StateId s, std::size_t a, double F) {
    const detail::Backup& b = backups[s * A + a];
    double cont = b.self * V[s] + b.fallback_mass * F;
    for (std::uint32_t k = b.begin; k < b.end; ++k) cont += succ_weight[k] * V[succ_state[k]];
    return b.constant + gamma * cont;
  };

  // Self-contained states: V = sum_a pi_a C_a / (1 - gamma).
  std::vector<StateId> sweep_states;
  for (StateId s = S; s-- > 0;) {
    if (active[s] || !self_loop) {
      sweep_states.push_back(s);
      continue;
    }
    double c = 0.0;
    for (std::size_t a = 0; a < A; ++a) c += candidate(s, a) * backups[s * A + a].constant;
    V[s] = c / (1.0 - gamma);
  }

  const std::vector<double>* fb = model.fallback() ? &*model.fallback() : nullptr;
  auto fallback_mean = [&] {
    if (!fb) return 0.0;
    double f = 0.0;
    for (std::size_t i = 0; i < S; ++i) f += (*fb)[i] * V[i];
    return f;
  };

  out.residual = std::numeric_limits<double>::infinity();
  while (out.iterations < opt.max_iter) {
    const double F = fallback_mean();
    double delta = 0.0;
    for (StateId s : sweep_states) {
      double numer = 0.0;
      double self = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double pa = candidate(s, a);
        if (pa <= 0.0) continue;
        const detail::Backup& b = backups[s * A + a];
        double cont = b.fallback_mass * F;
        for (std::uint32_t k = b.begin; k < b.end; ++k) cont += succ_weight[k] * V[succ_state[k]];
        numer += pa * (b.constant + gamma * cont);
        self += pa * b.self;
      }
      const double updated = numer / (1.0 - gamma * self);
      delta = std::max(delta, std::abs(updated - V[s]));
      V[s] = updated;
    }
    ++out.iterations;
    out.residual = delta;
    out.residual_history.push_back(delta);
    if (delta < opt.tol) {
      out.converged = true;
      break;
    }
  }
  if (sweep_states.empty()) {
    out.converged = true;
    out.residual = 0.0;
  }
  if (!out.converged)
    std::fprintf(stderr, "warning: solve_qv for '%s' stopped after %zu sweeps with residual %g\n",
                 candidate.name().c_str(), out.iterations, out.residual);

  const double F = fallback_mean();
  out.q.assign(S * A, 0.0);
  for (StateId s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) out.q[s * A + a] = std::clamp(backup_value(s, a, F), 0.0, vmax);
  for (StateId s = 0; s < S; ++s) {
    double v = 0.0;
    for (std::size_t a = 0; a < A; ++a) v += candidate(s, a) * out.q[s * A + a];
    V[s] = v;
  }
  return out;
}

}  // namespace saht
