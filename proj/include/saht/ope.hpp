#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "saht/core.hpp"
#include "saht/model.hpp"

namespace saht {

enum class EstimatorKind { is, pdis, dr };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::is: return "is";
    case EstimatorKind::pdis: return "pdis";
    case EstimatorKind::dr: return "dr";
  }
  return "?";
}

inline EstimatorKind parse_estimator(const std::string& s) {
  if (s == "is") return EstimatorKind::is;
  if (s == "pdis") return EstimatorKind::pdis;
  if (s == "dr") return EstimatorKind::dr;
  throw ConfigError("unknown estimator '" + s + "' (expected dr, pdis or is)");
}

/// Ego-only importance ratio at one step.
inline double ego_ratio(const Step& st, const TabularPolicy& behavior, const TabularPolicy& candidate) {
  const double b = behavior.prob(st.state, st.actions.ego);
  if (b <= 0.0)
    throw SupportViolation("behavior policy '" + behavior.name() + "' gives probability 0 to logged action " +
                           std::to_string(st.actions.ego) + " in state " + std::to_string(st.state));
  return candidate.prob(st.state, st.actions.ego) / b;
}

/// Full-trajectory importance sampling: g-return times the product of ego ratios.
inline double is_estimate(const Trajectory& traj, const TabularPolicy& behavior, const TabularPolicy& candidate,
                          const ConstraintSpec& g, double gamma) {
  double w = 1.0;
  for (const auto& st : traj.steps) w *= ego_ratio(st, behavior, candidate);
  return w == 0.0 ? 0.0 : g_return(traj, g, gamma) * w;
}

/// Per-decision importance sampling: sum_t gamma^t g_t w_{<=t}.
inline double pdis_estimate(const Trajectory& traj, const TabularPolicy& behavior, const TabularPolicy& candidate,
                            const ConstraintSpec& g, double gamma) {
  double total = 0.0, w = 1.0, disc = 1.0;
  for (const auto& st : traj.steps) {
    w *= ego_ratio(st, behavior, candidate);
    total += disc * g.step_value(st) * w;
    disc *= gamma;
  }
  return total;
}

/// Doubly-robust estimate:
///   sum_t gamma^t ( w_{<=t} (g_t - Q(s_t, a_t^ego)) + w_{<=t-1} V(s_t) ),  w_{<=-1} = 1.
/// Once the running weight reaches zero every later term vanishes, so the loop
/// stops early; support is still checked on the remaining steps.
inline double dr_estimate(const Trajectory& traj, const TabularPolicy& behavior, const TabularPolicy& candidate,
                          const ConstraintSpec& g, const QVTables& qv, double gamma) {
  double total = 0.0, w_prev = 1.0, disc = 1.0;
  for (const auto& st : traj.steps) {
    const double ratio = ego_ratio(st, behavior, candidate);
    if (w_prev == 0.0) continue;
    const double w = w_prev * ratio;
    double term = w_prev * qv.V(st.state);
    if (w != 0.0) term += w * (g.step_value(st) - qv.Q(st.state, st.actions.ego));
    total += disc * term;
    disc *= gamma;
    w_prev = w;
  }
  return total;
}

inline double final_weight(const Trajectory& traj, const TabularPolicy& behavior, const TabularPolicy& candidate) {
  double w = 1.0;
  for (const auto& st : traj.steps) w *= ego_ratio(st, behavior, candidate);
  return w;
}

/// Per-trajectory estimates of one (candidate, constraint) pair on a split.
struct EstimateBatch {
  std::vector<double> values;
  std::vector<double> final_weights;
  EstimatorKind kind = EstimatorKind::dr;
  double shift = 0.0;
  double clip_lo = -std::numeric_limits<double>::infinity();
  double clip_hi = std::numeric_limits<double>::infinity();

  std::size_t size() const { return values.size(); }

  void write_csv(std::ostream& os) const {
    os << "traj_index,value,weight_final\n";
    char buf[64];
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", values[k], k < final_weights.size() ? final_weights[k] : 0.0);
      os << k << ',' << buf << '\n';
    }
  }
};

/// Runs the chosen estimator on every trajectory of `data`, each with its own behavior policy.
inline EstimateBatch estimate_batch(const Dataset& data, const TabularPolicy& candidate, const ConstraintSpec& g,
                                    EstimatorKind kind, double gamma, const QVTables* qv = nullptr) {
  if (kind == EstimatorKind::dr && !qv) throw ConfigError("estimate_batch: DR needs Q/V tables");
  EstimateBatch batch;
  batch.kind = kind;
  batch.values.reserve(data.size());
  batch.final_weights.reserve(data.size());
  for (const auto& e : data.entries) {
    const TabularPolicy& behavior = data.behavior(e.behavior_id);
    double v = 0.0;
    switch (kind) {
      case EstimatorKind::is: v = is_estimate(e.trajectory, behavior, candidate, g, gamma); break;
      case EstimatorKind::pdis: v = pdis_estimate(e.trajectory, behavior, candidate, g, gamma); break;
      case EstimatorKind::dr: v = dr_estimate(e.trajectory, behavior, candidate, g, *qv, gamma); break;
    }
    batch.values.push_back(v);
    batch.final_weights.push_back(final_weight(e.trajectory, behavior, candidate));
  }
  return batch;
}

/// Lemma-style nonnegativity shift a = L (Gmax + 2 Vmax), recorded on the batch.
inline double nonneg_shift_constant(std::size_t L, double gmax, double vmax) {
  return static_cast<double>(L) * (gmax + 2.0 * vmax);
}

inline EstimateBatch shift_nonneg(EstimateBatch batch, std::size_t L, double gmax, double vmax) {
  const double a = nonneg_shift_constant(L, gmax, vmax);
  for (double& v : batch.values) v += a;
  batch.shift += a;
  return batch;
}

/// Clamps each per-trajectory estimate into [lo, hi]. Applied before shifting.
inline EstimateBatch clip_batch(EstimateBatch batch, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("clip_batch: empty range");
  if (batch.shift != 0.0) throw ConfigError("clip_batch: clip must be applied before the shift");
  for (double& v : batch.values) v = std::clamp(v, lo, hi);
  batch.clip_lo = std::max(batch.clip_lo, lo);
  batch.clip_hi = std::min(batch.clip_hi, hi);
  return batch;
}

inline double batch_mean(const EstimateBatch& b) {
  if (b.values.empty()) return 0.0;
  double s = 0.0;
  for (double v : b.values) s += v;
  return s / static_cast<double>(b.values.size()) - b.shift;
}

}  // namespace saht
