// Maximum likelihood fitting, observed-information covariance and the
// frequentist reserve / MSEP estimators.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "tweedie_reserve/model.hpp"
#include "tweedie_reserve/nelder_mead.hpp"
#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/triangle.hpp"
#include "tweedie_reserve/tweedie_density.hpp"

namespace tweedie {

enum class DispersionSource { kMle, kPearson };

inline const char* to_string(DispersionSource s) { return s == DispersionSource::kMle ? "MLE" : "PEARSON"; }

struct OptimizerSettings {
  NelderMeadOptions nelder_mead{};
  int starts = 3;         // initial point plus jittered restarts
  double jitter = 0.1;    // std-dev of the restart jitter in transformed coordinates
  std::uint64_t seed = 1;
  double initial_p = 1.5;
  PowerRange range{};
};

/// Which parameters a covariance matrix is expressed over.
struct CovarianceLayout {
  std::optional<int> p;
  std::optional<int> phi;
  std::vector<int> alpha_group;  // row of each alpha block
  std::vector<int> beta_group;   // row of each beta block
  std::vector<std::string> names;
  int size() const noexcept { return static_cast<int>(names.size()); }
};

struct MleFit {
  ModelSpec spec = model_spec("M0", 0);
  TweedieParams params;
  double log_lik = std::numeric_limits<double>::quiet_NaN();
  CovarianceLayout layout;
  std::optional<Eigen::MatrixXd> covariance;
  bool converged = false;
  long evaluations = 0;
  /// max |H - H^T| relative to max |H| before symmetrization.
  double hessian_asymmetry = 0.0;
  /// Set for fits at a fixed variance power (conditional and boundary fits).
  std::optional<double> p_fixed;
  /// Boundary fits use the quasi-likelihood; log_lik is then NaN.
  bool quasi_likelihood = false;
  std::vector<std::string> warnings;

  /// Standard deviations over `layout`, empty when the covariance is unavailable.
  std::vector<double> standard_deviations() const {
    std::vector<double> out;
    if (!covariance) return out;
    for (int k = 0; k < covariance->rows(); ++k) out.push_back(std::sqrt(std::max(0.0, (*covariance)(k, k))));
    return out;
  }
};

struct MsepReport {
  double reserve = 0.0;
  double process_variance = 0.0;
  std::optional<double> estimation_error;
  DispersionSource dispersion_source = DispersionSource::kMle;
  double phi = 0.0;

  /// Process variance plus estimation error; absent without a covariance.
  std::optional<double> msep() const {
    if (!estimation_error) return std::nullopt;
    return process_variance + *estimation_error;
  }
};

namespace detail {

/// Quasi log-likelihood kernel phi * l(y; mu), valid on the closed interval p in [1, 2].
inline double quasi_kernel(double y, double mu, double p) {
  if (p == 1.0) return (y > 0.0 ? y * std::log(mu) : 0.0) - mu;
  if (p == 2.0) return -y / mu - std::log(mu);
  return mean_term(y, mu, p);
}

inline CovarianceLayout make_layout(const ModelSpec& spec, bool with_p, bool with_phi) {
  CovarianceLayout l;
  const auto names = spec.coordinate_names();
  if (with_p) {
    l.p = l.size();
    l.names.push_back(names[0]);
  }
  if (with_phi) {
    l.phi = l.size();
    l.names.push_back(names[1]);
  }
  for (int g = 0; g < spec.alpha_group_count(); ++g) {
    l.alpha_group.push_back(l.size());
    l.names.push_back(names[static_cast<std::size_t>(spec.alpha_index(g))]);
  }
  for (int g = 0; g < spec.beta_group_count(); ++g) {
    l.beta_group.push_back(l.size());
    l.names.push_back(names[static_cast<std::size_t>(spec.beta_index(g))]);
  }
  return l;
}

inline std::vector<double> layout_values(const CovarianceLayout& l, const ModelSpec& spec, const TweedieParams& params) {
  const auto x = spec.compress(params);
  std::vector<double> v(static_cast<std::size_t>(l.size()));
  if (l.p) v[static_cast<std::size_t>(*l.p)] = x[0];
  if (l.phi) v[static_cast<std::size_t>(*l.phi)] = x[1];
  for (std::size_t g = 0; g < l.alpha_group.size(); ++g)
    v[static_cast<std::size_t>(l.alpha_group[g])] = x[static_cast<std::size_t>(spec.alpha_index(static_cast<int>(g)))];
  for (std::size_t g = 0; g < l.beta_group.size(); ++g)
    v[static_cast<std::size_t>(l.beta_group[g])] = x[static_cast<std::size_t>(spec.beta_index(static_cast<int>(g)))];
  return v;
}

struct HessianResult {
  Eigen::MatrixXd hessian;
  double asymmetry = 0.0;
};

/// Hessian of sum_cells term(y, p, phi, alpha_i, beta_j) over the layout's
/// coordinates by central differences with h_k = max(1e-5 |theta_k|, 1e-7).
/// Each cell depends on at most four coordinates, so the differences are taken
/// cell by cell and accumulated; pairs that share no cell are exactly zero.
template <class CellTerm>
HessianResult cell_hessian(const Triangle& t, const ModelSpec& spec, const TweedieParams& params,
                           const CovarianceLayout& layout, CellTerm&& term) {
  const int n = layout.size();
  const auto theta = layout_values(layout, spec, params);
  std::vector<double> h(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) h[k] = std::max(1e-5 * std::fabs(theta[k]), 1e-7);

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i <= t.I(); ++i) {
    for (int j = 0; j <= t.I() - i; ++j) {
      // local coordinates: 0 = p, 1 = phi, 2 = alpha_i, 3 = beta_j
      std::array<int, 4> global{-1, -1, -1, -1};
      if (layout.p) global[0] = *layout.p;
      if (layout.phi) global[1] = *layout.phi;
      const int ag = spec.alpha_groups()[static_cast<std::size_t>(i)];
      if (ag != ModelSpec::kFixedOne) global[2] = layout.alpha_group[static_cast<std::size_t>(ag)];
      global[3] = layout.beta_group[static_cast<std::size_t>(spec.beta_groups()[static_cast<std::size_t>(j)])];

      const std::array<double, 4> base{params.p, params.phi, params.alpha[static_cast<std::size_t>(i)],
                                       params.beta[static_cast<std::size_t>(j)]};
      const double y = t(i, j);
      auto f = [&](std::array<double, 4> v) { return term(y, v[0], v[1], v[2], v[3]); };
      const double f0 = f(base);
      for (int a = 0; a < 4; ++a) {
        if (global[a] < 0) continue;
        const double ha = h[static_cast<std::size_t>(global[a])];
        for (int b = 0; b < 4; ++b) {
          if (global[b] < 0) continue;
          const double hb = h[static_cast<std::size_t>(global[b])];
          double d2;
          if (a == b) {
            auto up = base, dn = base;
            up[a] += ha;
            dn[a] -= ha;
            d2 = (f(up) - 2.0 * f0 + f(dn)) / (ha * ha);
          } else {
            auto pp = base, pm = base, mp = base, mm = base;
            pp[a] += ha, pp[b] += hb;
            pm[a] += ha, pm[b] -= hb;
            mp[a] -= ha, mp[b] += hb;
            mm[a] -= ha, mm[b] -= hb;
            d2 = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * ha * hb);
          }
          H(global[a], global[b]) += d2;
        }
      }
    }
  }
  HessianResult r;
  const double scale = std::max(H.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  r.asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff() / scale;
  r.hessian = 0.5 * (H + H.transpose());
  return r;
}

/// Inverse of the negated Hessian, or nullopt when it is not positive definite.
inline std::optional<Eigen::MatrixXd> covariance_from_hessian(const Eigen::MatrixXd& hessian) {
  const Eigen::MatrixXd info = -hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  if (!cov.allFinite()) return std::nullopt;
  return 0.5 * (cov + cov.transpose());
}

inline double logit(double u) { return std::log(u / (1.0 - u)); }
inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

/// phi^P = (N - k)^{-1} sum (Y - mu)^2 / mu^p, k = number of estimated alpha/beta blocks.
inline double pearson_dispersion(const Triangle& t, const TweedieParams& params, int estimated_count) {
  const auto N = static_cast<int>(t.cell_count());
  if (N <= estimated_count)
    throw std::invalid_argument("pearson dispersion needs more cells than estimated parameters");
  CompensatedSum s;
  for (int i = 0; i <= t.I(); ++i)
    for (int j = 0; j <= t.I() - i; ++j) {
      const double mu = params.mean(i, j);
      const double r = t(i, j) - mu;
      s.add(r * r / std::pow(mu, params.p));
    }
  return s.value() / static_cast<double>(N - estimated_count);
}

/// Saturated model: k = 2I + 1 (alpha_1..alpha_I, beta_0..beta_I).
inline double pearson_dispersion(const Triangle& t, const TweedieParams& params) {
  return pearson_dispersion(t, params, 2 * t.I() + 1);
}

inline double pearson_dispersion(const Triangle& t, const TweedieParams& params, const ModelSpec& spec) {
  return pearson_dispersion(t, params, spec.alpha_group_count() + spec.beta_group_count());
}

/// Attaches the observed-information covariance of the full log-likelihood.
/// Difference steps may leave the configured p range, so the cell terms are
/// evaluated on the open interval (1, 2) where the series is defined.
inline void attach_covariance(MleFit& fit, const Triangle& t, bool with_p) {
  fit.layout = detail::make_layout(fit.spec, with_p, true);
  auto term = [&](double y, double p, double phi, double a, double b) {
    if (!(p > 1.0 && p < 2.0)) return std::numeric_limits<double>::quiet_NaN();
    CachedLogGammaTerms terms(gamma_shape(p));
    return cell_log_likelihood(y, a * b, phi, p, terms);
  };
  auto hr = detail::cell_hessian(t, fit.spec, fit.params, fit.layout, term);
  fit.hessian_asymmetry = hr.asymmetry;
  fit.covariance = detail::covariance_from_hessian(hr.hessian);
  if (!fit.covariance) fit.warnings.push_back("observed information is not positive definite; covariance unavailable");
}

/// Maximizes the log-likelihood over (p, phi, alpha blocks) with beta blocks profiled.
inline MleFit fit_mle(const Triangle& t, const ModelSpec& spec, const PriorBox& box, const OptimizerSettings& opts = {}) {
  if (spec.I() != t.I()) throw ModelConsistencyError("model dimension does not match the triangle");
  const double p_lo = box.lower[0], p_hi = box.upper[0];
  const int na = spec.alpha_group_count();

  // Starting point: exact score solution at the initial p, Pearson dispersion.
  const auto start_sol = solve_score_equations(t, spec, opts.initial_p);
  TweedieParams start;
  start.p = opts.initial_p;
  start.alpha = start_sol.alpha;
  start.beta = start_sol.beta;
  start.phi = 1.0;
  const double phi0 = pearson_dispersion(t, start, spec);
  start.phi = phi0 > 0.0 ? phi0 : 1.0;
  const auto x_start = spec.compress(start, 1e-9);

  auto decode = [&](const std::vector<double>& z) {
    TweedieParams q;
    q.p = p_lo + (p_hi - p_lo) * detail::logistic(z[0]);
    q.phi = std::exp(z[1]);
    std::vector<double> xa(static_cast<std::size_t>(spec.free_param_count()), 1.0);
    xa[0] = q.p;
    xa[1] = q.phi;
    for (int g = 0; g < na; ++g) xa[static_cast<std::size_t>(spec.alpha_index(g))] = std::exp(z[static_cast<std::size_t>(2 + g)]);
    for (int g = 0; g < spec.beta_group_count(); ++g) xa[static_cast<std::size_t>(spec.beta_index(g))] = 1.0;
    q.alpha = spec.expand(xa).alpha;
    q.beta = profile_beta(t, q.alpha, q.p, spec).beta;
    return q;
  };
  auto objective = [&](const std::vector<double>& z) {
    try {
      const auto q = decode(z);
      for (double b : q.beta)
        if (!(b > 0.0)) return std::numeric_limits<double>::infinity();
      return -log_likelihood(t, q, opts.range);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  std::vector<double> z0(static_cast<std::size_t>(2 + na));
  z0[0] = detail::logit((start.p - p_lo) / (p_hi - p_lo));
  z0[1] = std::log(start.phi);
  for (int g = 0; g < na; ++g) z0[static_cast<std::size_t>(2 + g)] = std::log(x_start[static_cast<std::size_t>(spec.alpha_index(g))]);

  Rng rng(opts.seed);
  NelderMeadResult best;
  long evaluations = 0;
  for (int s = 0; s < std::max(1, opts.starts); ++s) {
    auto z = z0;
    if (s > 0)
      for (double& v : z) v += opts.jitter * rng.normal();
    auto r = nelder_mead(objective, z, opts.nelder_mead);
    evaluations += r.evaluations;
    if (s == 0 || r.value < best.value) best = std::move(r);
  }

  MleFit fit;
  fit.spec = spec;
  fit.params = decode(best.x);
  const auto prof = profile_beta(t, fit.params.alpha, fit.params.p, spec);
  for (std::size_t j = 0; j < prof.boundary.size(); ++j) {
    if (prof.boundary[j]) {
      const double lo = box.lower[static_cast<std::size_t>(spec.beta_coordinate(static_cast<int>(j)))];
      fit.params.beta[j] = lo;
      fit.warnings.push_back("beta_" + std::to_string(j) + " profiles to 0 (all-zero column); clamped to prior lower bound");
    }
  }
  fit.log_lik = log_likelihood(t, fit.params, opts.range);
  fit.converged = best.converged;
  fit.evaluations = evaluations;
  if (!fit.converged) fit.warnings.push_back("optimizer stopped at the evaluation limit");
  if (best.stalled)
    fit.warnings.push_back("optimizer stopped on the stall rule: no improvement above the objective's rounding floor");
  attach_covariance(fit, t, true);
  return fit;
}

/// Fit at a fixed variance power: alpha/beta from the score equations (phi-free),
/// phi^MLE by one-dimensional maximization.
inline MleFit fit_at_fixed_p(const Triangle& t, const ModelSpec& spec, double p, const PriorBox& box,
                             const PowerRange& range = {}) {
  if (!range.contains(p)) throw DensityRangeError(p);
  const auto sol = solve_score_equations(t, spec, p);
  MleFit fit;
  fit.spec = spec;
  fit.p_fixed = p;
  fit.params.p = p;
  fit.params.alpha = sol.alpha;
  fit.params.beta = sol.beta;
  fit.params.phi = 1.0;
  auto neg = [&](double log_phi) {
    auto q = fit.params;
    q.phi = std::exp(log_phi);
    try {
      return -log_likelihood(t, q, range);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::brent_find_minima(neg, std::log(box.lower[1]), std::log(box.upper[1]), 52, iters);
  fit.params.phi = std::exp(r.first);
  fit.log_lik = -r.second;
  fit.converged = sol.converged;
  fit.evaluations = static_cast<long>(iters);
  attach_covariance(fit, t, false);
  return fit;
}

struct BoundaryFit {
  MleFit fit;
  MsepReport report;
  double pearson_phi = 0.0;
};

/// Estimation error: the three covariance double sums over pairs of lower-triangle cells.
inline std::optional<double> estimation_error(const MleFit& fit) {
  if (!fit.covariance) return std::nullopt;
  const auto& C = *fit.covariance;
  const auto& spec = fit.spec;
  const auto& a = fit.params.alpha;
  const auto& b = fit.params.beta;
  const int n = fit.params.I();
  auto alpha_row = [&](int i) -> int {
    const int g = spec.alpha_groups()[static_cast<std::size_t>(i)];
    return g == ModelSpec::kFixedOne ? -1 : fit.layout.alpha_group[static_cast<std::size_t>(g)];
  };
  auto beta_row = [&](int j) { return fit.layout.beta_group[static_cast<std::size_t>(spec.beta_groups()[static_cast<std::size_t>(j)])]; };
  auto cov = [&](int r1, int r2) { return (r1 < 0 || r2 < 0) ? 0.0 : C(r1, r2); };

  std::vector<CellIndex> lower;
  for (int i = 1; i <= n; ++i)
    for (int j = n - i + 1; j <= n; ++j) lower.push_back({i, j});
  CompensatedSum bb, aa, ab;
  for (const auto& c1 : lower)
    for (const auto& c2 : lower) {
      const auto i1 = static_cast<std::size_t>(c1.i), i2 = static_cast<std::size_t>(c2.i);
      const auto j1 = static_cast<std::size_t>(c1.j), j2 = static_cast<std::size_t>(c2.j);
      bb.add(a[i1] * a[i2] * cov(beta_row(c1.j), beta_row(c2.j)));
      aa.add(b[j1] * b[j2] * cov(alpha_row(c1.i), alpha_row(c2.i)));
      ab.add(a[i1] * b[j2] * cov(alpha_row(c2.i), beta_row(c1.j)));
    }
  return bb.value() + aa.value() + 2.0 * ab.value();
}

/// Reserve, process variance and estimation error at a fitted point. With an
/// explicit `phi`, PV uses it and EE is rescaled by phi / phi_fit (the
/// alpha/beta covariance is proportional to phi at fixed p).
inline MsepReport reserve_mle(const MleFit& fit, DispersionSource source = DispersionSource::kMle,
                              std::optional<double> phi = std::nullopt) {
  MsepReport r;
  r.dispersion_source = source;
  r.phi = phi.value_or(fit.params.phi);
  r.reserve = expected_reserve(fit.params);
  auto at_phi = fit.params;
  at_phi.phi = r.phi;
  r.process_variance = process_variance(at_phi);
  if (auto ee = estimation_error(fit)) r.estimation_error = *ee * (r.phi / fit.params.phi);
  return r;
}

/// Overdispersed Poisson (p = 1) or gamma (p = 2) multiplicative model with
/// Pearson dispersion. alpha/beta solve the quasi-score equations; the
/// covariance is the inverse observed quasi-information at phi^P.
inline BoundaryFit fit_boundary(const Triangle& t, double p_fixed, const ModelSpec& spec) {
  if (p_fixed != 1.0 && p_fixed != 2.0) throw std::invalid_argument("boundary fits take p = 1 or p = 2");
  const auto sol = solve_score_equations(t, spec, p_fixed);
  BoundaryFit out;
  auto& fit = out.fit;
  fit.spec = spec;
  fit.p_fixed = p_fixed;
  fit.quasi_likelihood = true;
  fit.params.p = p_fixed;
  fit.params.alpha = sol.alpha;
  fit.params.beta = sol.beta;
  fit.params.phi = 1.0;
  fit.converged = sol.converged;
  fit.evaluations = sol.iterations;
  out.pearson_phi = pearson_dispersion(t, fit.params, spec);
  fit.params.phi = out.pearson_phi;
  fit.layout = detail::make_layout(spec, false, false);
  auto term = [&](double y, double p, double phi, double a, double b) { return detail::quasi_kernel(y, a * b, p) / phi; };
  auto hr = detail::cell_hessian(t, spec, fit.params, fit.layout, term);
  fit.hessian_asymmetry = hr.asymmetry;
  fit.covariance = detail::covariance_from_hessian(hr.hessian);
  if (!fit.covariance) fit.warnings.push_back("quasi-information is not positive definite; covariance unavailable");
  out.report = reserve_mle(fit, DispersionSource::kPearson);
  return out;
}

inline BoundaryFit fit_boundary(const Triangle& t, double p_fixed) {
  return fit_boundary(t, p_fixed, model_spec("M0", t.I()));
}

}  // namespace tweedie
