// Reserve analytics from posterior samples: expected reserves, process
// variance, estimation error, predictive outstanding payments and VaR, both
// averaged over p and conditional on p.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tweedie_reserve/mcmc.hpp"
#include "tweedie_reserve/mle.hpp"
#include "tweedie_reserve/model.hpp"
#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/stats.hpp"
#include "tweedie_reserve/triangle.hpp"
#include "tweedie_reserve/tweedie_density.hpp"

namespace tweedie {

inline const std::vector<double>& default_var_levels() {
  static const std::vector<double> levels{0.75, 0.90, 0.95};
  return levels;
}

struct VarEntry {
  double r_tilde = 0.0;
  double r_tilde_se = 0.0;
  std::optional<double> r;
  std::optional<double> r_se;
};

struct ReserveReport {
  enum class Mode { kModelAveraged, kConditional };
  Mode mode = Mode::kModelAveraged;
  std::optional<double> p;  // set for conditional reports
  double er = 0.0;
  double pv = 0.0;
  double ee = 0.0;
  double se_er = 0.0, se_pv = 0.0, se_ee = 0.0, se_msep = 0.0;
  std::map<double, VarEntry> var;
  std::size_t samples = 0;

  double msep() const { return pv + ee; }
};

/// R-tilde^t = sum over the lower triangle of alpha_i^t beta_j^t, retained sweeps only.
inline std::vector<double> reserve_draws(const Chain& chain, const ModelSpec& spec) {
  std::vector<double> out;
  out.reserve(chain.retained());
  for (std::size_t t = chain.burn_in; t < chain.size(); ++t) out.push_back(expected_reserve(chain_params(chain, spec, t)));
  return out;
}

/// Plug-in process variance sum phi^t (alpha_i^t beta_j^t)^{p^t} per retained sweep.
inline std::vector<double> process_variance_draws(const Chain& chain, const ModelSpec& spec) {
  std::vector<double> out;
  out.reserve(chain.retained());
  for (std::size_t t = chain.burn_in; t < chain.size(); ++t) out.push_back(process_variance(chain_params(chain, spec, t)));
  return out;
}

namespace detail {

/// Block standard errors of ER, PV, EE and their sum computed jointly per block.
inline void attach_block_errors(ReserveReport& r, std::span<const double> rt, std::span<const double> pv,
                                std::size_t block_length) {
  const std::size_t blocks = rt.size() / block_length;
  if (blocks < 2) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.se_er = r.se_pv = r.se_ee = r.se_msep = nan;
    return;
  }
  std::vector<double> er, p, e, m;
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto xs = rt.subspan(b * block_length, block_length);
    const auto ps = pv.subspan(b * block_length, block_length);
    er.push_back(sample_mean(xs));
    p.push_back(sample_mean(ps));
    e.push_back(sample_variance(xs));
    m.push_back(p.back() + e.back());
  }
  auto se = [&](const std::vector<double>& v) {
    return std::sqrt(sample_variance(v) / static_cast<double>(blocks - 1));
  };
  r.se_er = se(er);
  r.se_pv = se(p);
  r.se_ee = se(e);
  r.se_msep = se(m);
}

}  // namespace detail

struct Quantile {
  double value = 0.0;
  double se = 0.0;
};

/// Nearest-rank quantile with a blocking standard error.
inline Quantile value_at_risk(std::span<const double> draws, double q, std::size_t block_length = kDefaultBlockLength) {
  Quantile r;
  r.value = empirical_quantile(draws, q);
  r.se = blocking_standard_error(draws, [q](std::span<const double> b) { return empirical_quantile(b, q); }, block_length);
  return r;
}

/// ER = mean R-tilde, EE = var R-tilde, PV = mean of the plug-in process
/// variance. Predictive draws, when given, add VaR of R next to VaR of R-tilde.
inline ReserveReport decompose(std::span<const double> r_tilde, std::span<const double> pv,
                               std::optional<std::span<const double>> predictive = std::nullopt,
                               std::size_t block_length = kDefaultBlockLength,
                               const std::vector<double>& levels = default_var_levels()) {
  if (r_tilde.empty() || r_tilde.size() != pv.size()) throw std::invalid_argument("reserve draws are empty or misaligned");
  ReserveReport r;
  r.samples = r_tilde.size();
  r.er = sample_mean(r_tilde);
  r.ee = sample_variance(r_tilde);
  r.pv = sample_mean(pv);
  detail::attach_block_errors(r, r_tilde, pv, block_length);
  for (double q : levels) {
    VarEntry v;
    const auto a = value_at_risk(r_tilde, q, block_length);
    v.r_tilde = a.value;
    v.r_tilde_se = a.se;
    if (predictive) {
      const auto b = value_at_risk(*predictive, q, block_length);
      v.r = b.value;
      v.r_se = b.se;
    }
    r.var[q] = v;
  }
  return r;
}

/// Outstanding payments R^t: one compound Poisson draw per lower-triangle cell
/// at each retained sample, from a stream split off `master` by sample index.
inline std::vector<double> predictive_outstanding(const Chain& chain, const ModelSpec& spec, const Rng& master) {
  std::vector<double> out;
  out.reserve(chain.retained());
  for (std::size_t t = chain.burn_in; t < chain.size(); ++t) {
    const auto q = chain_params(chain, spec, t);
    Rng rng = master.split(t);
    const int n = q.I();
    double total = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int j = n - i + 1; j <= n; ++j) total += sample({q.mean(i, j), q.phi, q.p}, rng);
    out.push_back(total);
  }
  return out;
}

/// Model-averaged (over p) report from one chain.
inline ReserveReport bayesian_decomposition(const Chain& chain, const ModelSpec& spec,
                                            std::optional<std::span<const double>> predictive = std::nullopt,
                                            std::size_t block_length = kDefaultBlockLength) {
  const auto rt = reserve_draws(chain, spec);
  const auto pv = process_variance_draws(chain, spec);
  auto r = decompose(rt, pv, predictive, block_length);
  if (chain.p_fixed) {
    r.mode = ReserveReport::Mode::kConditional;
    r.p = chain.p_fixed;
  }
  return r;
}

struct PBin {
  double left = 0.0, right = 0.0;
  std::size_t count = 0;
  double er = 0.0, pv = 0.0, ee = 0.0;
};

struct PBinDecomposition {
  std::vector<PBin> bins;
  // Recombined totals: weighted bin means and the law of total variance.
  double er = 0.0, pv = 0.0, ee = 0.0;
  double ee_within = 0.0, ee_between = 0.0;
};

/// Bins retained samples on p into equal-width bins over the observed p range
/// and recombines the per-bin ER_p, PV_p, EE_p into the averaged quantities.
inline PBinDecomposition p_bin_decomposition(const Chain& chain, const ModelSpec& spec, int bins = 20) {
  if (bins < 1) throw std::invalid_argument("need at least one p bin");
  const auto rt = reserve_draws(chain, spec);
  const auto pv = process_variance_draws(chain, spec);
  const auto ps = chain.column(0);
  const auto [lo_it, hi_it] = std::minmax_element(ps.begin(), ps.end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(bins));
  for (std::size_t t = 0; t < ps.size(); ++t) {
    auto b = static_cast<int>((ps[t] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    members[static_cast<std::size_t>(b)].push_back(t);
  }
  PBinDecomposition d;
  const double n = static_cast<double>(rt.size());
  const double er_all = sample_mean(rt);
  CompensatedSum er, pvs, within, between;
  for (int b = 0; b < bins; ++b) {
    PBin bin;
    bin.left = lo + b * width;
    bin.right = lo + (b + 1) * width;
    const auto& m = members[static_cast<std::size_t>(b)];
    bin.count = m.size();
    if (!m.empty()) {
      std::vector<double> x, v;
      for (auto t : m) {
        x.push_back(rt[t]);
        v.push_back(pv[t]);
      }
      bin.er = sample_mean(x);
      bin.pv = sample_mean(v);
      bin.ee = sample_variance(x);
      const double w = static_cast<double>(m.size()) / n;
      er.add(w * bin.er);
      pvs.add(w * bin.pv);
      within.add(w * bin.ee);
      between.add(w * (bin.er - er_all) * (bin.er - er_all));
    }
    d.bins.push_back(bin);
  }
  d.er = er.value();
  d.pv = pvs.value();
  d.ee_within = within.value();
  d.ee_between = between.value();
  d.ee = d.ee_within + d.ee_between;
  return d;
}

struct ConditionalPoint {
  double p = 0.0;
  std::optional<ReserveReport> bayesian;
  std::optional<MsepReport> mle;
  std::optional<MleFit> mle_fit;
  std::string error;
};

/// For each grid value: a chain with p frozen (Bayesian ER_p, PV_p, EE_p) and
/// the fixed-p maximum likelihood fit with phi-hat^MLE. A failure at one grid
/// point is recorded there and does not stop the others.
inline std::vector<ConditionalPoint> conditional_on_p(const Triangle& t, const ModelSpec& spec, const PriorBox& box,
                                                      const std::vector<double>& p_grid, const ChainOptions& base,
                                                      bool run_chains = true,
                                                      std::size_t block_length = kDefaultBlockLength) {
  std::vector<ConditionalPoint> out;
  for (double p : p_grid) {
    ConditionalPoint pt;
    pt.p = p;
    try {
      auto fit = fit_at_fixed_p(t, spec, p, box, base.range);
      pt.mle = reserve_mle(fit);
      if (run_chains) {
        ChainOptions o = base;
        o.p_fixed = p;
        o.init = fit.params;
        if (!o.scales) o.scales = initial_scales(fit);
        if (o.scales->sigma.size() == static_cast<std::size_t>(spec.free_param_count())) o.scales->sigma[0] = 1.0;
        const auto chain = run_chain(t, spec, box, o);
        pt.bayesian = bayesian_decomposition(chain, spec, std::nullopt, block_length);
      }
      pt.mle_fit = std::move(fit);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

struct HistogramBin {
  double left = 0.0, right = 0.0;
  std::size_t count = 0;
};

/// Histogram with Freedman-Diaconis bin width 2 IQR n^{-1/3}.
inline std::vector<HistogramBin> histogram_fd(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("histogram of an empty sample");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  double width = 2.0 * (empirical_quantile(x, 0.75) - empirical_quantile(x, 0.25)) *
                 std::cbrt(1.0 / static_cast<double>(x.size()));
  std::size_t nb = 1;
  if (hi > lo && width > 0.0) nb = std::min<std::size_t>(static_cast<std::size_t>(std::ceil((hi - lo) / width)), 10000);
  nb = std::max<std::size_t>(nb, 1);
  width = hi > lo ? (hi - lo) / static_cast<double>(nb) : 1.0;
  std::vector<HistogramBin> bins(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    bins[b].left = lo + static_cast<double>(b) * width;
    bins[b].right = lo + static_cast<double>(b + 1) * width;
  }
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    bins[std::min(b, nb - 1)].count += 1;
  }
  return bins;
}

inline void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_left,bin_right,count\n";
  for (const auto& b : bins) out << format_17(b.left) << ',' << format_17(b.right) << ',' << b.count << '\n';
}

}  // namespace tweedie
