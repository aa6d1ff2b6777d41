#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "saht/error.hpp"

namespace saht::stats {

namespace detail {

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 20000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge");
}

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete_beta: x must lie in [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Inverse of I_x(a, b) in x: initial guess followed by Halley steps.
inline double inverse_incomplete_beta(double p, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("inverse_incomplete_beta: a and b must be positive");
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double a1 = a - 1.0, b1 = b - 1.0;
  double x;
  if (a >= 1.0 && b >= 1.0) {
    const double pp = p < 0.5 ? p : 1.0 - p;
    const double t = std::sqrt(-2.0 * std::log(pp));
    x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
    if (p < 0.5) x = -x;
    const double al = (x * x - 3.0) / 6.0;
    const double h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
    const double w = x * std::sqrt(al + h) / h - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) *
                                                       (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
    x = a / (a + b * std::exp(2.0 * w));
  } else {
    const double lna = std::log(a / (a + b)), lnb = std::log(b / (a + b));
    const double t = std::exp(a * lna) / a;
    const double u = std::exp(b * lnb) / b;
    const double w = t + u;
    x = p < t / w ? std::pow(a * w * p, 1.0 / a) : 1.0 - std::pow(b * w * (1.0 - p), 1.0 / b);
  }
  const double afac = -detail::log_beta(a, b);
  for (int j = 0; j < 64; ++j) {
    if (x <= 0.0 || x >= 1.0) break;
    const double err = incomplete_beta(a, b, x) - p;
    const double dens = std::exp(a1 * std::log(x) + b1 * std::log1p(-x) + afac);
    if (dens == 0.0) break;
    const double u = err / dens;
    const double step = u / (1.0 - 0.5 * std::min(1.0, u * (a1 / x - b1 / (1.0 - x))));
    x -= step;
    if (x <= 0.0) x = 0.5 * (x + step);
    if (x >= 1.0) x = 0.5 * (x + step + 1.0);
    if (std::abs(step) < 1e-15 * x && j > 0) break;
  }
  return std::clamp(x, 0.0, 1.0);
}

inline double t_pdf(double t, double dof) {
  const double logc = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * std::numbers::pi);
  return std::exp(logc - 0.5 * (dof + 1.0) * std::log1p(t * t / dof));
}

/// Student's t CDF via the incomplete beta identity.
inline double t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ConfigError("t_cdf: dof must be positive");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

/// Quantile of Student's t with `dof` degrees of freedom: inverse incomplete
/// beta for the starting point, then Newton steps on the CDF itself.
inline double inv_t_cdf(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("inv_t_cdf: p must lie in (0,1)");
  if (!(dof > 0.0)) throw ConfigError("inv_t_cdf: dof must be positive");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;  // one-sided tail mass, < 0.5
  const double x = inverse_incomplete_beta(2.0 * tail, 0.5 * dof, 0.5);
  double t = x > 0.0 ? std::sqrt(dof * (1.0 - x) / x) : 1e300;
  // Refine |t| against the upper-tail equation 1 - F(t) = tail.
  for (int i = 0; i < 50; ++i) {
    const double f = t_pdf(t, dof);
    if (f <= 0.0) break;
    const double step = (tail - (1.0 - t_cdf(t, dof))) / f;
    // Increasing t shrinks the tail, so d(tail)/dt = -pdf.
    t -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  return upper ? t : -t;
}

}  // namespace saht::stats
