// Tweedie compound Poisson distribution, 1 < p < 2.
//
// Three equivalent parameterizations are used:
//   * compound Poisson: N ~ Poisson(lambda), severities Gamma(shape gamma, mean tau);
//   * exponential dispersion: canonical theta and cumulant kappa_p(theta);
//   * mean form: (mu, phi, p) with E[Y] = mu, Var(Y) = phi mu^p.
//
// For y > 0 the density is c(y; phi, p) exp{ [y mu^{1-p}/(1-p) - mu^{2-p}/(2-p)] / phi }
// with c(y; phi, p) = (1/y) sum_{r >= 1} W_r and
//   log W_r = r log z - log Gamma(1 + r) - log Gamma(gamma r),
//   z = phi^{-(gamma+1)} y^gamma / ((p-1)^gamma (2-p)),  gamma = (2-p)/(p-1) > 0.
// The series is summed around its approximate mode R0 = y^{2-p} / ((2-p) phi),
// expanding in both directions until the terms fall below e^-37 of the largest
// one, accumulated in log scale.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tweedie_reserve/random.hpp"

namespace tweedie {

/// Closed range of p accepted by the density evaluation.
struct PowerRange {
  double lower = 1.1;
  double upper = 1.95;
  bool contains(double p) const noexcept { return p >= lower && p <= upper; }
};

struct TweediePoint {
  double mu = 1.0;
  double phi = 1.0;
  double p = 1.5;
};

struct CompoundPoissonParams {
  double lambda = 1.0;
  double tau = 1.0;
  double gamma_shape = 1.0;
};

struct SeriesDiagnostics {
  long r_max_index = 1;  // R0 rounded, at least 1
  long r_lower = 1;      // R_L
  long r_upper = 1;      // R_U
  long terms_summed = 1;
  double log_c = 0.0;
  /// Dunn-Smyth geometric-tail ratios at R_L - 1 and R_U + 1 (q_L absent when R_L = 1).
  std::optional<double> q_lower;
  std::optional<double> q_upper;
  /// log of the geometric bound on the omitted part of sum W_r.
  std::optional<double> log_tail_bound;
};

class DensityRangeError : public std::domain_error {
 public:
  explicit DensityRangeError(double p)
      : std::domain_error("variance power p = " + std::to_string(p) + " outside the density range") {}
};

class DensityEvaluationError : public std::runtime_error {
 public:
  DensityEvaluationError(const std::string& what, SeriesDiagnostics diag)
      : std::runtime_error(what), diagnostics(diag) {}
  SeriesDiagnostics diagnostics;
};

inline constexpr double kSeriesLogDrop = 37.0;
inline constexpr long kSeriesTermCap = 1'000'000;

/// Gamma shape of the severities, (2-p)/(p-1).
inline double gamma_shape(double p) { return (2.0 - p) / (p - 1.0); }

/// Canonical parameter theta = mu^{1-p} / (1-p) (negative for p in (1,2)).
inline double canonical_theta(double mu, double p) { return std::pow(mu, 1.0 - p) / (1.0 - p); }

/// Cumulant function kappa_p(theta) = [(1-p) theta]^{(2-p)/(1-p)} / (2-p).
inline double cumulant(double theta, double p) {
  return std::pow((1.0 - p) * theta, (2.0 - p) / (1.0 - p)) / (2.0 - p);
}

inline CompoundPoissonParams to_compound_poisson(const TweediePoint& pt) {
  CompoundPoissonParams cp;
  cp.lambda = std::pow(pt.mu, 2.0 - pt.p) / (pt.phi * (2.0 - pt.p));
  cp.tau = pt.mu / cp.lambda;
  cp.gamma_shape = gamma_shape(pt.p);
  return cp;
}

inline TweediePoint from_compound_poisson(const CompoundPoissonParams& cp) {
  TweediePoint pt;
  pt.p = (cp.gamma_shape + 2.0) / (cp.gamma_shape + 1.0);
  pt.mu = cp.lambda * cp.tau;
  pt.phi = std::pow(cp.lambda, 1.0 - pt.p) * std::pow(cp.tau, 2.0 - pt.p) / (2.0 - pt.p);
  return pt;
}

/// log P[Y = 0] = -mu^{2-p} / ((2-p) phi).
inline double log_zero_mass(const TweediePoint& pt) {
  return -std::pow(pt.mu, 2.0 - pt.p) / ((2.0 - pt.p) * pt.phi);
}

/// Mean-dependent part of the log density, y mu^{1-p}/(1-p) - mu^{2-p}/(2-p), before the 1/phi factor.
inline double mean_term(double y, double mu, double p) {
  const double mu1 = std::pow(mu, 1.0 - p);
  return y * mu1 / (1.0 - p) - mu1 * mu / (2.0 - p);
}

namespace detail {

/// log r! for small r, shared and built once.
inline const std::vector<double>& log_factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(4096);
    for (std::size_t r = 0; r < t.size(); ++r) t[r] = std::lgamma(static_cast<double>(r) + 1.0);
    return t;
  }();
  return table;
}

inline double log_factorial(long r) {
  const auto& t = log_factorial_table();
  if (r < static_cast<long>(t.size())) return t[static_cast<std::size_t>(r)];
  return std::lgamma(static_cast<double>(r) + 1.0);
}

}  // namespace detail

/// log Gamma(1 + r) + log Gamma(gamma r), evaluated on demand.
class DirectLogGammaTerms {
 public:
  explicit DirectLogGammaTerms(double gamma) : gamma_(gamma) {}
  double gamma() const noexcept { return gamma_; }
  double operator()(long r) const {
    return detail::log_factorial(r) + std::lgamma(gamma_ * static_cast<double>(r));
  }

 private:
  double gamma_;
};

/// Same terms as DirectLogGammaTerms, memoized for one gamma. Every cell of a
/// triangle shares gamma, so a sampler sweeping phi reuses the table.
class CachedLogGammaTerms {
 public:
  CachedLogGammaTerms() = default;
  explicit CachedLogGammaTerms(double gamma) { reset(gamma); }

  void reset(double gamma) {
    if (gamma == gamma_) return;
    gamma_ = gamma;
    table_.assign(1, 0.0);
  }
  double gamma() const noexcept { return gamma_; }

  double operator()(long r) {
    if (r >= static_cast<long>(table_.size())) {
      const auto old = static_cast<long>(table_.size());
      const long target = std::max<long>(r + 1, old * 2);
      table_.resize(static_cast<std::size_t>(target));
      for (long k = old; k < target; ++k)
        table_[static_cast<std::size_t>(k)] =
            detail::log_factorial(k) + std::lgamma(gamma_ * static_cast<double>(k));
    }
    return table_[static_cast<std::size_t>(r)];
  }

 private:
  double gamma_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> table_{0.0};
};

/// log c(y; phi, p) by adaptive summation around R0. Requires y > 0.
template <class LogGammaTerms>
SeriesDiagnostics log_series_constant(double y, double phi, double p, LogGammaTerms& terms) {
  const double gamma = terms.gamma();
  const double log_y = std::log(y);
  const double log_z = -(gamma + 1.0) * std::log(phi) + gamma * log_y - gamma * std::log(p - 1.0) -
                       std::log(2.0 - p);
  auto log_w = [&](long r) { return static_cast<double>(r) * log_z - terms(r); };

  SeriesDiagnostics d;
  const double r0 = std::exp((2.0 - p) * log_y) / ((2.0 - p) * phi);
  if (!(r0 < static_cast<double>(kSeriesTermCap)))
    throw DensityEvaluationError("series mode beyond term cap", d);
  d.r_max_index = std::max(1L, std::lround(r0));

  const long k0 = d.r_max_index;
  const double lw0 = log_w(k0);
  double peak = lw0;
  double sum = 1.0;

  long r = k0;
  while (r > 1) {
    --r;
    const double lw = log_w(r);
    sum += std::exp(lw - lw0);
    peak = std::max(peak, lw);
    if (lw <= peak - kSeriesLogDrop) break;
  }
  d.r_lower = r;

  r = k0;
  while (true) {
    ++r;
    if (r > kSeriesTermCap) {
      d.r_upper = r - 1;
      throw DensityEvaluationError("series upper limit reached the term cap", d);
    }
    const double lw = log_w(r);
    sum += std::exp(lw - lw0);
    peak = std::max(peak, lw);
    if (lw <= peak - kSeriesLogDrop) break;
  }
  d.r_upper = r;
  d.terms_summed = d.r_upper - d.r_lower + 1;
  d.log_c = -log_y + lw0 + std::log(sum);
  return d;
}

inline SeriesDiagnostics log_series_constant(double y, double phi, double p) {
  DirectLogGammaTerms terms(gamma_shape(p));
  return log_series_constant(y, phi, p, terms);
}

/// Adds the Dunn-Smyth geometric tail bound to a diagnostics record.
inline void attach_tail_bound(SeriesDiagnostics& d, double y, double phi, double p) {
  const double gamma = gamma_shape(p);
  const double log_z = -(gamma + 1.0) * std::log(phi) + gamma * std::log(y) - gamma * std::log(p - 1.0) -
                       std::log(2.0 - p);
  DirectLogGammaTerms terms(gamma);
  auto log_w = [&](long r) { return static_cast<double>(r) * log_z - terms(r); };
  auto slope = [&](double r) { return log_z - std::log(r) - gamma * std::log(gamma * r); };
  double bound = 0.0;
  if (d.r_lower > 1) {
    const long rl = d.r_lower - 1;
    // Below the mode the ratio W_{r-1}/W_r is exp(-slope).
    const double q = std::exp(-slope(static_cast<double>(rl)));
    d.q_lower = q;
    if (q < 1.0) bound += std::exp(log_w(rl)) * (1.0 - std::pow(q, static_cast<double>(rl))) / (1.0 - q);
  }
  const long ru = d.r_upper + 1;
  const double qu = std::exp(slope(static_cast<double>(ru)));
  d.q_upper = qu;
  if (qu < 1.0) bound += std::exp(log_w(ru)) / (1.0 - qu);
  if (bound > 0.0) d.log_tail_bound = std::log(bound);
}

struct DensityValue {
  double log_density = 0.0;
  SeriesDiagnostics diagnostics;
};

inline void check_point(const TweediePoint& pt, const PowerRange& range) {
  if (!range.contains(pt.p)) throw DensityRangeError(pt.p);
  if (!(pt.mu > 0.0) || !(pt.phi > 0.0))
    throw std::invalid_argument("tweedie point requires mu > 0 and phi > 0");
}

/// Log density at y > 0.
template <class LogGammaTerms>
DensityValue log_density(double y, const TweediePoint& pt, LogGammaTerms& terms, const PowerRange& range = {}) {
  if (!(y > 0.0)) throw std::invalid_argument("log_density requires y > 0; use log_zero_mass for y = 0");
  check_point(pt, range);
  DensityValue out;
  out.diagnostics = log_series_constant(y, pt.phi, pt.p, terms);
  out.log_density = out.diagnostics.log_c + mean_term(y, pt.mu, pt.p) / pt.phi;
  if (!std::isfinite(out.log_density))
    throw DensityEvaluationError("non-finite log density", out.diagnostics);
  return out;
}

inline DensityValue log_density(double y, const TweediePoint& pt, const PowerRange& range = {}) {
  DirectLogGammaTerms terms(gamma_shape(pt.p));
  return log_density(y, pt, terms, range);
}

/// log P[Y = 0] for y = 0, log density otherwise.
inline double log_probability(double y, const TweediePoint& pt, const PowerRange& range = {}) {
  if (y == 0.0) {
    check_point(pt, range);
    return log_zero_mass(pt);
  }
  return log_density(y, pt, range).log_density;
}

/// Compound Poisson draw: N ~ Poisson(lambda), then N Gamma(gamma, mean tau) severities.
inline double sample(const TweediePoint& pt, Rng& rng) {
  const auto cp = to_compound_poisson(pt);
  const auto n = rng.poisson(cp.lambda);
  if (n == 0) return 0.0;
  // A sum of n iid Gamma(gamma, scale) severities is Gamma(n gamma, scale).
  const double scale = cp.tau / cp.gamma_shape;
  return rng.gamma(static_cast<double>(n) * cp.gamma_shape) * scale;
}

}  // namespace tweedie
