// Random-walk Metropolis-Hastings within Gibbs over the posterior of a
// Tweedie run-off model under uniform prior boxes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tweedie_reserve/mle.hpp"
#include "tweedie_reserve/model.hpp"
#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/stats.hpp"
#include "tweedie_reserve/triangle.hpp"
#include "tweedie_reserve/truncated_normal.hpp"
#include "tweedie_reserve/tweedie_density.hpp"

namespace tweedie {

struct ProposalScales {
  std::vector<double> sigma;
};

/// Stored sweeps of one chain. Samples are the spec's free coordinates,
/// row-major, one row per sweep (burn-in included).
struct Chain {
  std::string spec_id;
  std::vector<std::string> names;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<double> log_lik;
  std::size_t burn_in = 0;
  std::vector<long> accepted;
  std::vector<long> attempted;
  std::uint64_t seed = 0;
  std::optional<double> p_fixed;
  ProposalScales scales;
  long evaluation_failures = 0;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::size_t retained() const noexcept { return size() > burn_in ? size() - burn_in : 0; }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * dim, dim}; }
  double at(std::size_t t, std::size_t k) const { return values[t * dim + k]; }

  /// Coordinate k over the retained (post burn-in) sweeps.
  std::vector<double> column(std::size_t k) const {
    std::vector<double> out;
    out.reserve(retained());
    for (std::size_t t = burn_in; t < size(); ++t) out.push_back(at(t, k));
    return out;
  }

  std::span<const double> retained_log_lik() const { return std::span<const double>(log_lik).subspan(burn_in); }

  double acceptance_rate(std::size_t k) const {
    return attempted[k] > 0 ? static_cast<double>(accepted[k]) / static_cast<double>(attempted[k])
                            : std::numeric_limits<double>::quiet_NaN();
  }
};

/// log Z(from) - log Z(to), Z(m) the mass of N(m, sigma) inside (a, b): the
/// ratio of truncated proposal densities for a move from -> to.
inline double truncated_kernel_correction(double from, double to, double sigma, double a, double b) {
  return log_normal_interval((a - from) / sigma, (b - from) / sigma) -
         log_normal_interval((a - to) / sigma, (b - to) / sigma);
}

/// One random-walk Metropolis-Hastings update of a scalar with a truncated
/// Gaussian proposal on (a, b). `log_target_ratio(proposal)` returns
/// log pi(proposal) - log pi(current). Returns true and stores the proposal
/// in `current` when accepted. Exceptions from the target propagate after the
/// acceptance uniform has been drawn, so the stream position does not depend
/// on failures.
template <class LogTargetRatio>
bool truncated_rw_step(double& current, double sigma, double a, double b, Rng& rng, LogTargetRatio&& log_target_ratio) {
  const double proposal = sample_truncated_gaussian(current, sigma, a, b, rng);
  double log_ratio;
  try {
    log_ratio = log_target_ratio(proposal) + truncated_kernel_correction(current, proposal, sigma, a, b);
  } catch (...) {
    rng.uniform();
    throw;
  }
  if (std::log(rng.uniform()) < log_ratio) {
    current = proposal;
    return true;
  }
  return false;
}

/// Sequential MH-within-Gibbs sampler with cached per-cell likelihood terms.
/// A cell's log-likelihood is log c(y; phi, p) + m(y, mu, p) / phi, with
/// m the mean term; c does not depend on mu, so alpha and beta updates only
/// touch m for the affected cells, and phi updates only touch c.
class GibbsSampler {
 public:
  GibbsSampler(const Triangle& t, ModelSpec spec, PriorBox box, const TweedieParams& init,
               std::optional<double> p_fixed = std::nullopt, PowerRange range = {})
      : spec_(std::move(spec)), box_(std::move(box)), p_fixed_(p_fixed), range_(range) {
    if (spec_.I() != t.I()) throw ModelConsistencyError("model dimension does not match the triangle");
    if (box_.size() != static_cast<std::size_t>(spec_.free_param_count()))
      throw ModelConsistencyError("prior box dimension does not match the model");
    for (int i = 0; i <= t.I(); ++i)
      for (int j = 0; j <= t.I() - i; ++j) {
        const auto c = cells_.size();
        cells_.push_back({i, j, t(i, j)});
        const int ag = spec_.alpha_groups()[static_cast<std::size_t>(i)];
        const int bg = spec_.beta_groups()[static_cast<std::size_t>(j)];
        alpha_cells_.resize(static_cast<std::size_t>(spec_.alpha_group_count()));
        beta_cells_.resize(static_cast<std::size_t>(spec_.beta_group_count()));
        if (ag != ModelSpec::kFixedOne) alpha_cells_[static_cast<std::size_t>(ag)].push_back(c);
        beta_cells_[static_cast<std::size_t>(bg)].push_back(c);
      }
    auto start = init;
    if (p_fixed_) start.p = *p_fixed_;
    x_ = spec_.compress(start, 1e-9);
    params_ = spec_.expand(x_);
    if (!p_fixed_ && !range_.contains(params_.p)) throw DensityRangeError(params_.p);
    for (std::size_t k = 0; k < x_.size(); ++k) {
      if (p_fixed_ && k == 0) continue;
      if (!(x_[k] > box_.lower[k] && x_[k] < box_.upper[k]))
        throw std::invalid_argument("initial state lies outside the prior box");
    }
    terms_.reset(gamma_shape(params_.p));
    log_c_.resize(cells_.size());
    mean_.resize(cells_.size());
    fill_log_c(params_.phi, params_.p, terms_, log_c_);
    fill_mean(params_, mean_);
    log_lik_ = total(log_c_, mean_, params_.phi);
    if (!std::isfinite(log_lik_)) throw std::invalid_argument("initial state has a non-finite likelihood");
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const PriorBox& box() const noexcept { return box_; }
  const std::vector<double>& state() const noexcept { return x_; }
  const TweedieParams& params() const noexcept { return params_; }
  double log_likelihood() const noexcept { return log_lik_; }
  long evaluation_failures() const noexcept { return failures_; }
  bool frozen(std::size_t k) const noexcept { return k == 0 && p_fixed_.has_value(); }
  std::size_t dim() const noexcept { return x_.size(); }

  /// Log acceptance ratio for moving coordinate k to `proposal`: posterior
  /// ratio plus the truncated-kernel correction log Z(current) - log Z(proposal).
  /// Evaluates the candidate caches as a side effect.
  double log_acceptance(std::size_t k, double proposal, double sigma) {
    const double a = box_.lower[k], b = box_.upper[k];
    if (!(proposal > a && proposal < b)) return -std::numeric_limits<double>::infinity();
    return log_posterior_ratio(k, proposal) + truncated_kernel_correction(x_[k], proposal, sigma, a, b);
  }

  /// log posterior(candidate) - log posterior(current) with coordinate k moved
  /// to `proposal`; fills the candidate caches. The flat prior cancels.
  double log_posterior_ratio(std::size_t k, double proposal) {
    candidate_ = params_;
    cand_log_c_ = log_c_;
    cand_mean_ = mean_;
    cand_gamma_changed_ = false;
    const int ki = static_cast<int>(k);
    if (ki == spec_.p_index()) {
      candidate_.p = proposal;
      cand_terms_.reset(gamma_shape(proposal));
      cand_gamma_changed_ = true;
      fill_log_c(candidate_.phi, candidate_.p, cand_terms_, cand_log_c_);
      fill_mean(candidate_, cand_mean_);
    } else if (ki == spec_.phi_index()) {
      candidate_.phi = proposal;
      fill_log_c(candidate_.phi, candidate_.p, terms_, cand_log_c_);
    } else if (ki < spec_.beta_index(0)) {
      const int g = ki - spec_.alpha_index(0);
      for (int i = 0; i <= spec_.I(); ++i)
        if (spec_.alpha_groups()[static_cast<std::size_t>(i)] == g) candidate_.alpha[static_cast<std::size_t>(i)] = proposal;
      for (auto c : alpha_cells_[static_cast<std::size_t>(g)]) cand_mean_[c] = cell_mean(candidate_, c);
    } else {
      const int g = ki - spec_.beta_index(0);
      for (int j = 0; j <= spec_.I(); ++j)
        if (spec_.beta_groups()[static_cast<std::size_t>(j)] == g) candidate_.beta[static_cast<std::size_t>(j)] = proposal;
      for (auto c : beta_cells_[static_cast<std::size_t>(g)]) cand_mean_[c] = cell_mean(candidate_, c);
    }
    cand_log_lik_ = total(cand_log_c_, cand_mean_, candidate_.phi);
    if (!std::isfinite(cand_log_lik_)) throw DensityEvaluationError("non-finite likelihood at proposal", {});
    cand_k_ = k;
    cand_value_ = proposal;
    return cand_log_lik_ - log_lik_;
  }

  /// One deterministic scan over the free coordinates; returns accept flags.
  std::vector<char> sweep(const ProposalScales& scales, Rng& rng) {
    std::vector<char> accepted(x_.size(), 0);
    for (std::size_t k = 0; k < x_.size(); ++k) {
      if (frozen(k)) continue;
      double value = x_[k];
      try {
        if (truncated_rw_step(value, scales.sigma[k], box_.lower[k], box_.upper[k], rng,
                              [&](double proposal) { return log_posterior_ratio(k, proposal); })) {
          commit();
          accepted[k] = 1;
        }
      } catch (const std::exception&) {
        ++failures_;
      }
    }
    return accepted;
  }

 private:
  struct Cell {
    int i, j;
    double y;
  };

  double cell_mean(const TweedieParams& q, std::size_t c) const {
    const auto& cell = cells_[c];
    return mean_term(cell.y, q.mean(cell.i, cell.j), q.p);
  }

  void fill_mean(const TweedieParams& q, std::vector<double>& out) const {
    for (std::size_t c = 0; c < cells_.size(); ++c) out[c] = cell_mean(q, c);
  }

  void fill_log_c(double phi, double p, CachedLogGammaTerms& terms, std::vector<double>& out) const {
    for (std::size_t c = 0; c < cells_.size(); ++c)
      out[c] = cells_[c].y > 0.0 ? log_series_constant(cells_[c].y, phi, p, terms).log_c : 0.0;
  }

  static double total(const std::vector<double>& log_c, const std::vector<double>& mean, double phi) {
    CompensatedSum s;
    for (std::size_t c = 0; c < log_c.size(); ++c) s.add(log_c[c] + mean[c] / phi);
    return s.value();
  }

  void commit() {
    x_[cand_k_] = cand_value_;
    params_ = candidate_;
    std::swap(log_c_, cand_log_c_);
    std::swap(mean_, cand_mean_);
    if (cand_gamma_changed_) std::swap(terms_, cand_terms_);
    log_lik_ = cand_log_lik_;
  }

  ModelSpec spec_;
  PriorBox box_;
  std::optional<double> p_fixed_;
  PowerRange range_;
  std::vector<Cell> cells_;
  std::vector<std::vector<std::size_t>> alpha_cells_, beta_cells_;

  std::vector<double> x_;
  TweedieParams params_;
  CachedLogGammaTerms terms_, cand_terms_;
  std::vector<double> log_c_, mean_;
  double log_lik_ = 0.0;

  TweedieParams candidate_;
  std::vector<double> cand_log_c_, cand_mean_;
  double cand_log_lik_ = 0.0;
  std::size_t cand_k_ = 0;
  double cand_value_ = 0.0;
  bool cand_gamma_changed_ = false;
  long failures_ = 0;
};

struct PretuneOptions {
  std::size_t batch_sweeps = 1000;
  int max_batches = 50;
  double target = 0.234;
  double band_lower = 0.15;
  double band_upper = 0.35;
};

struct PretuneResult {
  ProposalScales scales;
  std::vector<double> rates;  // acceptance rates of the batch that produced `scales`
  int batches = 0;
  bool in_band = false;
  std::vector<std::vector<double>> history;  // scales before each batch
};

/// Batch pretuning: after each batch sigma_k *= clip(exp(rate_k - target), 0.5, 2).
/// Stops once every free coordinate's batch rate is inside the band. Any
/// sampler with dim(), frozen(k) and sweep(scales, rng) -> accept flags works.
template <class Sampler>
PretuneResult pretune(Sampler& sampler, ProposalScales scales, Rng& rng, const PretuneOptions& opts = {}) {
  PretuneResult res;
  const std::size_t n = sampler.dim();
  double best_gap = std::numeric_limits<double>::infinity();
  for (int b = 0; b < opts.max_batches; ++b) {
    res.history.push_back(scales.sigma);
    std::vector<long> acc(n, 0);
    for (std::size_t s = 0; s < opts.batch_sweeps; ++s) {
      const auto flags = sampler.sweep(scales, rng);
      for (std::size_t k = 0; k < n; ++k) acc[k] += flags[k];
    }
    ++res.batches;
    std::vector<double> rates(n, std::numeric_limits<double>::quiet_NaN());
    double gap = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (sampler.frozen(k)) continue;
      rates[k] = static_cast<double>(acc[k]) / static_cast<double>(opts.batch_sweeps);
      gap = std::max({gap, opts.band_lower - rates[k], rates[k] - opts.band_upper});
    }
    if (gap < best_gap) {
      best_gap = gap;
      res.scales = scales;
      res.rates = rates;
    }
    if (gap <= 0.0) {
      res.in_band = true;
      return res;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (sampler.frozen(k)) continue;
      scales.sigma[k] *= std::clamp(std::exp(rates[k] - opts.target), 0.5, 2.0);
    }
  }
  return res;
}

/// Initial proposal scales from the MLE standard deviations, falling back to
/// a tenth of the coordinate's magnitude.
inline ProposalScales initial_scales(const MleFit& fit) {
  const auto& spec = fit.spec;
  const auto x = spec.compress(fit.params, 1e-9);
  ProposalScales s;
  s.sigma.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) s.sigma[k] = std::max(0.1 * std::fabs(x[k]), 1e-6);
  if (fit.covariance) {
    const auto sd = fit.standard_deviations();
    auto set = [&](std::optional<int> row, std::size_t k) {
      if (row && sd[static_cast<std::size_t>(*row)] > 0.0) s.sigma[k] = sd[static_cast<std::size_t>(*row)];
    };
    set(fit.layout.p, 0);
    set(fit.layout.phi, 1);
    for (int g = 0; g < spec.alpha_group_count(); ++g)
      set(fit.layout.alpha_group[static_cast<std::size_t>(g)], static_cast<std::size_t>(spec.alpha_index(g)));
    for (int g = 0; g < spec.beta_group_count(); ++g)
      set(fit.layout.beta_group[static_cast<std::size_t>(g)], static_cast<std::size_t>(spec.beta_index(g)));
  }
  return s;
}

struct ChainOptions {
  std::size_t iterations = 100000;
  std::size_t burn_in = 10000;
  std::uint64_t seed = 1;
  std::optional<double> p_fixed;
  /// Starting point; the MLE (or the fixed-p MLE) when absent.
  std::optional<TweedieParams> init;
  /// Proposal scales; pretuned from MLE standard deviations when absent.
  std::optional<ProposalScales> scales;
  bool pretune = true;
  PretuneOptions pretune_options{};
  /// Streams expanded samples to this CSV every `spill_every` sweeps.
  std::optional<std::string> spill_path;
  std::size_t spill_every = 10000;
  PowerRange range{};
};

/// Chain CSV header: iteration, the expanded parameters, and the log-likelihood.
inline void write_chain_csv_header(std::ostream& out, int I) {
  out << "iter,p,phi";
  for (int i = 1; i <= I; ++i) out << ",alpha_" << i;
  for (int j = 0; j <= I; ++j) out << ",beta_" << j;
  out << ",log_lik\n";
}

/// Rows [from, to) with 1-based iteration numbers.
inline void write_chain_csv_rows(std::ostream& out, const Chain& chain, const ModelSpec& spec, std::size_t from,
                                 std::size_t to) {
  for (std::size_t t = from; t < to; ++t) {
    const auto q = spec.expand(std::vector<double>(chain.row(t).begin(), chain.row(t).end()));
    out << (t + 1) << ',' << format_17(q.p) << ',' << format_17(q.phi);
    for (std::size_t i = 1; i < q.alpha.size(); ++i) out << ',' << format_17(q.alpha[i]);
    for (double b : q.beta) out << ',' << format_17(b);
    out << ',' << format_17(chain.log_lik[t]) << '\n';
  }
}

/// Runs pretuning (optional) and then `iterations` sweeps. Deterministic given
/// the seed: pretuning and sampling draw from separate split streams.
inline Chain run_chain(const Triangle& t, const ModelSpec& spec, const PriorBox& box, const ChainOptions& opts) {
  if (!(opts.iterations > opts.burn_in)) throw std::invalid_argument("chain length must exceed burn-in");
  std::optional<MleFit> fit;
  auto need_fit = !opts.init || !opts.scales;
  if (need_fit) fit = opts.p_fixed ? fit_at_fixed_p(t, spec, *opts.p_fixed, box, opts.range) : fit_mle(t, spec, box);
  const TweedieParams init = opts.init ? *opts.init : fit->params;
  GibbsSampler sampler(t, spec, box, init, opts.p_fixed, opts.range);

  Chain chain;
  chain.spec_id = spec.id();
  chain.names = spec.coordinate_names();
  chain.dim = sampler.dim();
  chain.burn_in = opts.burn_in;
  chain.seed = opts.seed;
  chain.p_fixed = opts.p_fixed;
  chain.accepted.assign(chain.dim, 0);
  chain.attempted.assign(chain.dim, 0);

  ProposalScales scales = opts.scales ? *opts.scales : initial_scales(*fit);
  if (opts.p_fixed && scales.sigma.size() == chain.dim) scales.sigma[0] = 1.0;
  if (scales.sigma.size() != chain.dim) throw std::invalid_argument("proposal scale dimension does not match the model");
  const Rng master(opts.seed);
  if (opts.pretune) {
    Rng tune_rng = master.split(1);
    GibbsSampler tuner = sampler;
    auto tuned = pretune(tuner, scales, tune_rng, opts.pretune_options);
    scales = tuned.scales;
    if (!tuned.in_band) chain.warnings.push_back("pretuning did not reach the acceptance band; using the closest scales");
  }
  chain.scales = scales;

  Rng rng = master.split(2);
  chain.values.reserve(opts.iterations * chain.dim);
  chain.log_lik.reserve(opts.iterations);
  std::ofstream spill;
  if (opts.spill_path) {
    spill.open(*opts.spill_path);
    if (!spill) throw std::runtime_error("cannot open chain spill file " + *opts.spill_path);
    write_chain_csv_header(spill, t.I());
  }
  std::size_t spilled = 0;
  for (std::size_t s = 0; s < opts.iterations; ++s) {
    const auto flags = sampler.sweep(scales, rng);
    for (std::size_t k = 0; k < chain.dim; ++k) {
      if (sampler.frozen(k)) continue;
      ++chain.attempted[k];
      chain.accepted[k] += flags[k];
    }
    const auto& x = sampler.state();
    chain.values.insert(chain.values.end(), x.begin(), x.end());
    chain.log_lik.push_back(sampler.log_likelihood());
    if (spill.is_open() && (s + 1) % opts.spill_every == 0) {
      write_chain_csv_rows(spill, chain, spec, spilled, s + 1);
      spilled = s + 1;
      spill.flush();
    }
  }
  if (spill.is_open() && spilled < chain.size()) write_chain_csv_rows(spill, chain, spec, spilled, chain.size());
  chain.evaluation_failures = sampler.evaluation_failures();
  if (chain.evaluation_failures > 0)
    chain.warnings.push_back(std::to_string(chain.evaluation_failures) + " proposals rejected after likelihood failures");
  return chain;
}

struct CoordinateSummary {
  std::string name;
  double mmse = 0.0, map = 0.0, sd = 0.0, q05 = 0.0, q95 = 0.0;
  // Numerical standard errors by blocking (NaN with fewer than two blocks).
  double se_mmse = 0.0, se_sd = 0.0, se_q05 = 0.0, se_q95 = 0.0;
  // Spread of the per-block MAP samples. The sample MAP is the MAP of one
  // block, so this is not reduced by the number of blocks.
  double se_map = 0.0;
  double acceptance_rate = 0.0;
};

struct PosteriorSummary {
  std::string spec_id;
  std::size_t samples = 0;
  std::size_t block_length = kDefaultBlockLength;
  std::vector<CoordinateSummary> coordinates;
  std::vector<double> map_state;
  double map_log_lik = 0.0;
  std::vector<double> scales;
};

/// Posterior summaries over the retained sweeps. The uniform prior makes the
/// log-posterior the log-likelihood plus a constant, so the MAP is the stored
/// sample with the largest log-likelihood.
inline PosteriorSummary summarize(const Chain& chain, std::size_t block_length = kDefaultBlockLength) {
  const std::size_t n = chain.retained();
  if (n <= block_length) throw std::invalid_argument("chain too short to summarize: need more retained sweeps than one block");
  PosteriorSummary s;
  s.spec_id = chain.spec_id;
  s.samples = n;
  s.block_length = block_length;
  s.scales = chain.scales.sigma;
  const auto ll = chain.retained_log_lik();
  const auto best = static_cast<std::size_t>(std::max_element(ll.begin(), ll.end()) - ll.begin());
  const auto map_row = chain.row(chain.burn_in + best);
  s.map_state.assign(map_row.begin(), map_row.end());
  s.map_log_lik = ll[best];
  auto sd = [](std::span<const double> x) { return std::sqrt(sample_variance(x)); };
  auto q05 = [](std::span<const double> x) { return empirical_quantile(x, 0.05); };
  auto q95 = [](std::span<const double> x) { return empirical_quantile(x, 0.95); };
  const std::size_t blocks = n / block_length;
  std::vector<std::size_t> block_map;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto seg = ll.subspan(b * block_length, block_length);
    block_map.push_back(b * block_length + static_cast<std::size_t>(std::max_element(seg.begin(), seg.end()) - seg.begin()));
  }
  for (std::size_t k = 0; k < chain.dim; ++k) {
    const auto col = chain.column(k);
    CoordinateSummary c;
    c.name = chain.names[k];
    c.mmse = sample_mean(col);
    c.map = s.map_state[k];
    c.sd = sd(col);
    c.q05 = q05(col);
    c.q95 = q95(col);
    c.se_mmse = blocking_standard_error(col, block_length);
    c.se_sd = blocking_standard_error(col, sd, block_length);
    c.se_q05 = blocking_standard_error(col, q05, block_length);
    c.se_q95 = blocking_standard_error(col, q95, block_length);
    if (blocks >= 2) {
      std::vector<double> maps;
      for (auto t : block_map) maps.push_back(col[t]);
      c.se_map = std::sqrt(sample_variance(maps) * static_cast<double>(blocks) / static_cast<double>(blocks - 1));
    } else {
      c.se_map = std::numeric_limits<double>::quiet_NaN();
    }
    c.acceptance_rate = chain.acceptance_rate(k);
    s.coordinates.push_back(c);
  }
  return s;
}

/// Posterior correlation matrix of the retained free coordinates.
inline Eigen::MatrixXd posterior_correlation(const Chain& chain) {
  const auto d = static_cast<Eigen::Index>(chain.dim);
  const auto n = static_cast<Eigen::Index>(chain.retained());
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index k = 0; k < d; ++k) X(t, k) = chain.at(chain.burn_in + static_cast<std::size_t>(t), static_cast<std::size_t>(k));
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  Eigen::MatrixXd C = X.transpose() * X / static_cast<double>(n);
  Eigen::VectorXd sd = C.diagonal().cwiseSqrt();
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      C(a, b) = (sd(a) > 0.0 && sd(b) > 0.0) ? C(a, b) / (sd(a) * sd(b)) : std::numeric_limits<double>::quiet_NaN();
  return C;
}

/// Expanded parameters of sweep t.
inline TweedieParams chain_params(const Chain& chain, const ModelSpec& spec, std::size_t t) {
  const auto r = chain.row(t);
  return spec.expand(std::vector<double>(r.begin(), r.end()));
}

}  // namespace tweedie
