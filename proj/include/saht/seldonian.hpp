#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "saht/bounds.hpp"
#include "saht/model.hpp"
#include "saht/ope.hpp"

namespace saht {

struct SeldonianConfig {
  double split_ratio = 0.15;  // lambda
  EstimatorKind estimator = EstimatorKind::dr;
  BoundKind bound = BoundKind::student_t;
  double gamma = 0.99;
  std::vector<ConstraintSpec> constraints;
  /// Signal whose estimated return ranks the reliable candidates.
  std::optional<ConstraintSpec> reward;
  std::vector<PolicyPtr> candidates;
  std::vector<PolicyPtr> type_library;
  std::size_t p = 0;
  double clip_lo = -std::numeric_limits<double>::infinity();
  double clip_hi = std::numeric_limits<double>::infinity();
  /// Bernstein caps; empty selects shift + (clip_hi if finite, else vmax).
  std::vector<double> xi;
  bool literal_t_formula = false;
  /// Skip the reliability test and pick the best estimated return.
  bool unreliable_baseline = false;
  double tol = 1e-8;
  std::size_t max_iter = 100000;
  std::optional<double> vmax;         // constraint Q/V cap, default Gmax / (1 - gamma)
  std::optional<double> return_vmax;  // reward Q/V cap, default Rmax / (1 - gamma)
  std::optional<std::vector<double>> transition_fallback;
  std::uint64_t seed = 0;
  /// Polled between candidates; returning true aborts with Timeout.
  std::function<bool()> should_stop;

  void validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split ratio must lie in (0,1)");
    if (candidates.empty()) throw ConfigError("no candidate policies");
    if (constraints.empty() && !unreliable_baseline) throw ConfigError("no constraints");
    if (!reward) throw ConfigError("no reward signal for the return estimate");
    if (type_library.empty()) throw ConfigError("empty teammate type library");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
    if (!(clip_lo <= clip_hi)) throw ConfigError("clip range is empty");
  }
};

struct CandidateReport {
  std::size_t index = 0;
  std::string name;
  std::vector<double> alpha;       // per constraint
  std::vector<double> delta_used;  // confidence handed to the bound, per constraint
  std::vector<double> estimate_mean;
  bool reliable = false;
  std::optional<double> estimated_return;
  std::vector<std::string> notes;
};

/// Either a selected candidate or NoSolution, with the full diagnostics.
struct Decision {
  enum class Outcome { policy, no_solution };

  Outcome outcome = Outcome::no_solution;
  std::optional<std::size_t> chosen;
  double estimated_return = 0.0;
  std::vector<CandidateReport> candidates;
  std::vector<std::size_t> reliable;
  std::vector<std::size_t> inferred_types;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  bool baseline = false;

  bool has_policy() const { return outcome == Outcome::policy; }

  std::string report() const {
    std::ostringstream os;
    os << (baseline ? "baseline" : "seldonian") << " decision: ";
    if (has_policy())
      os << "policy " << candidates.at(*chosen).name << " (index " << *chosen << ", estimated return "
         << estimated_return << ")\n";
    else
      os << "NoSolution\n";
    os << "split: train=" << train_size << " val=" << val_size << "\n";
    os << "inferred teammate types:";
    for (auto t : inferred_types) os << ' ' << t;
    os << "\n";
    for (const auto& c : candidates) {
      os << "  [" << c.index << "] " << c.name << (c.reliable ? " reliable" : " unreliable");
      for (std::size_t j = 0; j < c.alpha.size(); ++j)
        os << " alpha" << j << "=" << c.alpha[j] << " (delta " << c.delta_used[j] << ")";
      if (c.estimated_return) os << " return=" << *c.estimated_return;
      for (const auto& n : c.notes) os << " note: " << n;
      os << "\n";
    }
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["outcome"] = has_policy() ? "policy" : "no_solution";
    j["baseline"] = baseline;
    if (chosen) {
      j["chosen"] = *chosen;
      j["chosen_name"] = candidates.at(*chosen).name;
      j["estimated_return"] = estimated_return;
    }
    j["reliable"] = reliable;
    j["inferred_types"] = inferred_types;
    j["train_size"] = train_size;
    j["val_size"] = val_size;
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    for (const auto& c : candidates) {
      nlohmann::json cj;
      cj["index"] = c.index;
      cj["name"] = c.name;
      cj["reliable"] = c.reliable;
      for (double a : c.alpha) cj["alpha"].push_back(finite_or_null(a));
      cj["delta_used"] = c.delta_used;
      if (c.estimated_return) cj["estimated_return"] = *c.estimated_return;
      cj["notes"] = c.notes;
      j["candidates"].push_back(std::move(cj));
    }
    return j;
  }
};

/// Uniform random partition: round(lambda * m) trajectories to train, the rest to validation.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double lambda, std::uint64_t seed) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("split_dataset: lambda must lie in (0,1)");
  const std::size_t m = d.size();
  if (m < 2) throw InsufficientData("split_dataset: need at least 2 trajectories");
  const auto n_train = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(m)));
  if (n_train == 0 || n_train >= m)
    throw InsufficientData("split_dataset: lambda=" + std::to_string(lambda) + " leaves a side empty for m=" +
                           std::to_string(m));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5911}));
  for (std::size_t i = 0; i + 1 < m; ++i) std::swap(order[i], order[i + rng.below(m - i)]);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {d.subset(train), d.subset(val)};
}

/// Artifacts estimated from the training split, shared read-only by all candidates.
struct TrainArtifacts {
  TransitionModel transitions;
  TeammateModel mates;
};

inline TrainArtifacts fit_train_artifacts(const Dataset& train, const SeldonianConfig& cfg) {
  return {estimate_transition(train, cfg.transition_fallback), infer_types(train, cfg.type_library, cfg.p)};
}

namespace detail {

template <class Fn>
auto with_context(const std::string& ctx, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SupportViolation& e) {
    throw SupportViolation(ctx + ": " + e.what());
  } catch (const InsufficientData& e) {
    throw InsufficientData(ctx + ": " + e.what());
  }
}

inline QVOptions qv_options(const SeldonianConfig& cfg, std::optional<double> vmax) {
  QVOptions o;
  o.gamma = cfg.gamma;
  o.tol = cfg.tol;
  o.max_iter = cfg.max_iter;
  o.vmax = vmax;
  return o;
}

}  // namespace detail

/// Mean per-trajectory estimate of the reward return of one candidate on the validation split.
inline double estimate_return(std::size_t candidate_index, const Dataset& val, const TrainArtifacts& art,
                              const SeldonianConfig& cfg) {
  const TabularPolicy& cand = *cfg.candidates.at(candidate_index);
  return detail::with_context("candidate '" + cand.name() + "', return estimate", [&] {
    std::optional<QVTables> qv;
    if (cfg.estimator == EstimatorKind::dr)
      qv = solve_qv(cand, *cfg.reward, art.transitions, art.mates, detail::qv_options(cfg, cfg.return_vmax));
    const EstimateBatch b = estimate_batch(val, cand, *cfg.reward, cfg.estimator, cfg.gamma, qv ? &*qv : nullptr);
    return batch_mean(b);
  });
}

/// Batch ready for a bound: estimates on the validation split, clipped, then shifted to be nonnegative.
inline EstimateBatch constraint_batch(const TabularPolicy& cand, const ConstraintSpec& g, const Dataset& val,
                                      const TrainArtifacts& art, const SeldonianConfig& cfg) {
  std::optional<QVTables> qv;
  if (cfg.estimator == EstimatorKind::dr)
    qv = solve_qv(cand, g, art.transitions, art.mates, detail::qv_options(cfg, cfg.vmax));
  EstimateBatch b = estimate_batch(val, cand, g, cfg.estimator, cfg.gamma, qv ? &*qv : nullptr);
  b = clip_batch(std::move(b), cfg.clip_lo, cfg.clip_hi);
  if (std::isfinite(cfg.clip_lo)) {
    // Clipping already floors every value at clip_lo.
    const double a = std::max(0.0, -cfg.clip_lo);
    for (double& v : b.values) v += a;
    b.shift += a;
  } else if (cfg.estimator == EstimatorKind::dr) {
    b = shift_nonneg(std::move(b), val.signature.L, g.gmax(), qv->vmax);
  }
  return b;
}

inline BoundConfig bound_config_for(const EstimateBatch& b, double delta,
                                    const SeldonianConfig& cfg, double vmax) {
  BoundConfig bc;
  bc.kind = cfg.bound;
  bc.delta = delta;
  bc.literal_t_formula = cfg.literal_t_formula;
  if (!cfg.xi.empty())
    bc.xi = cfg.xi;
  else
    bc.xi = {b.shift + (std::isfinite(cfg.clip_hi) ? std::max(cfg.clip_hi, 1e-12) : vmax)};
  return bc;
}

/// Seldonian selection over the candidate set.
///
/// Split, fit T_hat and teammate types on the training split, then for every
/// (candidate, constraint) pair solve Q/V, form the validation estimates, and
/// lower-bound them at delta_j / (number of candidates). Candidates whose bounds
/// all clear their thresholds are reliable; the reliable candidate with the
/// highest estimated return wins (ties to the lowest index). An empty reliable
/// set yields NoSolution.
inline Decision run_seldonian(const Dataset& d, const SeldonianConfig& cfg) {
  cfg.validate();
  for (const auto& c : cfg.candidates) {
    if (!c) throw ConfigError("null candidate policy");
    validate_policy_shape(*c, d.signature);
  }
  if (cfg.p != d.signature.p) throw ConfigError("teammate count does not match the dataset");

  Decision dec;
  dec.baseline = cfg.unreliable_baseline;
  auto [train, val] = split_dataset(d, cfg.split_ratio, cfg.seed);
  dec.train_size = train.size();
  dec.val_size = val.size();
  const TrainArtifacts art = fit_train_artifacts(train, cfg);
  for (const auto& s : art.mates.slots) dec.inferred_types.push_back(s.type_index);

  const std::size_t ell = cfg.candidates.size();
  auto poll = [&] {
    if (cfg.should_stop && cfg.should_stop()) throw Timeout("run_seldonian: deadline exceeded");
  };

  for (std::size_t i = 0; i < ell; ++i) {
    poll();
    const TabularPolicy& cand = *cfg.candidates[i];
    CandidateReport rep;
    rep.index = i;
    rep.name = cand.name();
    if (cfg.unreliable_baseline) {
      rep.reliable = true;
    } else {
      rep.reliable = true;
      for (const auto& g : cfg.constraints) {
        const double delta = g.delta() / static_cast<double>(ell);
        const std::string ctx = "candidate '" + cand.name() + "', constraint '" + g.name() + "'";
        const EstimateBatch b = detail::with_context(ctx, [&] { return constraint_batch(cand, g, val, art, cfg); });
        const double vmax = cfg.vmax.value_or(g.gmax() / (1.0 - cfg.gamma));
        double alpha = -std::numeric_limits<double>::infinity();
        try {
          alpha = detail::with_context(ctx, [&] { return lower_bound(b, bound_config_for(b, delta, cfg, vmax)); });
        } catch (const PreconditionError& e) {
          rep.notes.push_back(std::string(e.what()) + "; treated as unreliable");
        }
        rep.delta_used.push_back(delta);
        rep.alpha.push_back(alpha);
        rep.estimate_mean.push_back(batch_mean(b));
        if (!(alpha >= g.threshold())) rep.reliable = false;
      }
    }
    dec.candidates.push_back(std::move(rep));
  }

  for (const auto& c : dec.candidates)
    if (c.reliable) dec.reliable.push_back(c.index);
  if (dec.reliable.empty()) return dec;

  std::optional<std::size_t> best;
  for (std::size_t i : dec.reliable) {
    poll();
    const double r = estimate_return(i, val, art, cfg);
    dec.candidates[i].estimated_return = r;
    if (!best || r > dec.estimated_return) {
      best = i;
      dec.estimated_return = r;
    }
  }
  dec.outcome = Decision::Outcome::policy;
  dec.chosen = best;
  return dec;
}

}  // namespace saht
