// Gaussian CDF helpers and the truncated-Gaussian random-walk kernel.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "tweedie_reserve/random.hpp"

namespace tweedie {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x).
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log(1 - Phi(x)), stable far into the upper tail.
inline double log_normal_sf(double x) {
  if (x < 30.0) return std::log(normal_sf(x));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

/// Inverse of normal_sf for q in (0, 1).
inline double normal_sf_inv(double q) { return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q); }

/// Inverse of normal_cdf for p in (0, 1).
inline double normal_cdf_inv(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

/// log(Phi(hi) - Phi(lo)) for standardized bounds lo < hi.
inline double log_normal_interval(double lo, double hi) {
  if (lo >= 0.0) {
    // Both in the upper tail; subtract survival functions.
    const double la = log_normal_sf(lo);
    const double lb = log_normal_sf(hi);
    return la + std::log1p(-std::exp(lb - la));
  }
  if (hi <= 0.0) return log_normal_interval(-hi, -lo);
  return std::log(normal_cdf(hi) - normal_cdf(lo));
}

/// Log density of N(mean, sigma) truncated to (a, b), evaluated at x.
inline double truncated_normal_log_pdf(double x, double mean, double sigma, double a, double b) {
  if (!(x > a && x < b)) return -std::numeric_limits<double>::infinity();
  const double z = (x - mean) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi) -
         log_normal_interval((a - mean) / sigma, (b - mean) / sigma);
}

/// Draws from N(mean, sigma) truncated to (a, b) by inverse-CDF transform.
/// Works on whichever tail keeps the CDF differences well conditioned.
/// The result is strictly inside (a, b).
inline double sample_truncated_gaussian(double mean, double sigma, double a, double b, Rng& rng) {
  if (!(a < b)) throw std::invalid_argument("truncated gaussian requires a < b");
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated gaussian requires sigma > 0");
  const double lo = (a - mean) / sigma;
  const double hi = (b - mean) / sigma;
  const double u = rng.uniform();
  double z;
  if (lo >= 0.0 || hi <= 0.0) {
    // One-sided: reflect so the interval lies in the upper tail.
    const bool flip = hi <= 0.0;
    const double l = flip ? -hi : lo;
    const double h = flip ? -lo : hi;
    const double ql = normal_sf(l);
    const double qh = normal_sf(h);
    double t;
    if (ql > 0.0 && ql - qh > 0.0) {
      t = normal_sf_inv(ql - u * (ql - qh));
    } else {
      // Beyond double range of the survival function: exponential tail limit.
      t = l - std::log1p(-u * -std::expm1(-l * (h - l))) / l;
    }
    z = flip ? -t : t;
  } else {
    const double pl = normal_cdf(lo);
    const double ph = normal_cdf(hi);
    const double target = pl + u * (ph - pl);
    if (target < 0.5) {
      z = normal_cdf_inv(target);
    } else {
      const double ql = normal_sf(lo);
      z = normal_sf_inv(ql - u * (ql - normal_sf(hi)));
    }
  }
  double x = mean + sigma * z;
  if (x <= a) x = std::nextafter(a, b);
  if (x >= b) x = std::nextafter(b, a);
  return x;
}

}  // namespace tweedie
