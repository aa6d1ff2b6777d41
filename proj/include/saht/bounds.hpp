#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "saht/ope.hpp"
#include "saht/stats.hpp"

namespace saht {

enum class BoundKind { bernstein, student_t };

inline std::string to_string(BoundKind k) { return k == BoundKind::bernstein ? "bernstein" : "tstudent"; }

inline BoundKind parse_bound(const std::string& s) {
  if (s == "bernstein") return BoundKind::bernstein;
  if (s == "tstudent" || s == "student_t") return BoundKind::student_t;
  throw ConfigError("unknown bound '" + s + "' (expected bernstein or tstudent)");
}

struct BoundConfig {
  BoundKind kind = BoundKind::student_t;
  double delta = 0.05;
  /// Truncation caps: one entry broadcasts to every sample, otherwise one per sample.
  std::vector<double> xi;
  /// Evaluate the t bound as mean - sqrt(stdev / m) * t_quantile instead of the standard error form.
  bool literal_t_formula = false;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bound delta must lie in (0,1)");
    if (kind == BoundKind::bernstein) {
      if (xi.empty()) throw ConfigError("bernstein bound needs at least one cap xi");
      for (double x : xi)
        if (!(x > 0.0)) throw ConfigError("bernstein caps xi must be positive");
    }
  }
};

/// Extended empirical Bernstein lower bound on the mean of nonnegative,
/// independent samples with per-sample caps xi_k and Y_k = min(X_k, xi_k):
///
///   (sum 1/xi)^-1 [ sum Y/xi - 7 m ln(2/delta) / (3(m-1))
///                   - sqrt( 2 ln(2/delta)/(m-1) (m sum (Y/xi)^2 - (sum Y/xi)^2) ) ]
///
/// evaluated on the shifted values, after which the batch shift is subtracted.
inline double bernstein_lower(const EstimateBatch& batch, const BoundConfig& cfg) {
  cfg.validate();
  const std::size_t m = batch.size();
  if (m < 2) throw InsufficientData("bernstein_lower: need at least 2 samples");
  if (cfg.xi.size() != 1 && cfg.xi.size() != m)
    throw ConfigError("bernstein_lower: xi must have 1 or m entries");
  double inv_xi_sum = 0.0, ratio_sum = 0.0, ratio_sq_sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = batch.values[k];
    if (!(x >= 0.0))
      throw PreconditionError("bernstein_lower: sample " + std::to_string(k) + " is negative after the shift");
    const double xi = cfg.xi.size() == 1 ? cfg.xi[0] : cfg.xi[k];
    const double r = std::min(x, xi) / xi;
    inv_xi_sum += 1.0 / xi;
    ratio_sum += r;
    ratio_sq_sum += r * r;
  }
  const double md = static_cast<double>(m);
  const double log_term = std::log(2.0 / cfg.delta);
  const double spread = std::max(0.0, md * ratio_sq_sum - ratio_sum * ratio_sum);
  const double bracket = ratio_sum - 7.0 * md * log_term / (3.0 * (md - 1.0)) -
                         std::sqrt(2.0 * log_term / (md - 1.0) * spread);
  return bracket / inv_xi_sum - batch.shift;
}

struct SampleMoments {
  double mean = 0.0;
  double stdev = 0.0;
};

inline SampleMoments sample_moments(const std::vector<double>& values) {
  SampleMoments out;
  double n = 0.0, m2 = 0.0;
  for (double v : values) {
    n += 1.0;
    const double d = v - out.mean;
    out.mean += d / n;
    m2 += d * (v - out.mean);
  }
  out.stdev = n > 1.0 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  return out;
}

/// One-sided Student's t lower confidence bound on the unshifted mean.
inline double tstudent_lower(const EstimateBatch& batch, double delta, bool literal_formula = false) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("tstudent_lower: delta must lie in (0,1)");
  const std::size_t m = batch.size();
  if (m < 2) throw InsufficientData("tstudent_lower: need at least 2 samples");
  const SampleMoments mom = sample_moments(batch.values);
  if (!std::isfinite(mom.stdev)) throw PreconditionError("tstudent_lower: sample standard deviation is not finite");
  const double md = static_cast<double>(m);
  const double quantile = stats::inv_t_cdf(1.0 - delta, md - 1.0);
  const double spread = literal_formula ? std::sqrt(mom.stdev / md) : mom.stdev / std::sqrt(md);
  return mom.mean - batch.shift - spread * quantile;
}

inline double lower_bound(const EstimateBatch& batch, const BoundConfig& cfg) {
  cfg.validate();
  return cfg.kind == BoundKind::bernstein ? bernstein_lower(batch, cfg)
                                          : tstudent_lower(batch, cfg.delta, cfg.literal_t_formula);
}

}  // namespace saht
