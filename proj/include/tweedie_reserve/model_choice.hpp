// Posterior model probabilities over the nested model ladder, DIC and
// likelihood-ratio p-values.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "tweedie_reserve/mcmc.hpp"
#include "tweedie_reserve/mle.hpp"
#include "tweedie_reserve/model.hpp"
#include "tweedie_reserve/stats.hpp"
#include "tweedie_reserve/triangle.hpp"

namespace tweedie {

class ChainAlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-iteration model weights from aligned per-model log-likelihood
/// sequences: softmax across models at each iteration, averaged over iterations.
/// With equal model priors and the product-space parameter prior, all prior
/// terms cancel from the ratio.
inline std::vector<double> congdon_probabilities(const std::vector<std::vector<double>>& log_liks) {
  if (log_liks.empty()) throw std::invalid_argument("no models to compare");
  const std::size_t n = log_liks.front().size();
  if (n == 0) throw ChainAlignmentError("empty log-likelihood sequence");
  for (const auto& l : log_liks)
    if (l.size() != n) throw ChainAlignmentError("model chains have different retained lengths");
  const std::size_t K = log_liks.size();
  std::vector<CompensatedSum> acc(K);
  std::vector<double> w(K);
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, log_liks[k][j]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      w[k] = std::exp(log_liks[k][j] - mx);
      z += w[k];
    }
    for (std::size_t k = 0; k < K; ++k) acc[k].add(w[k] / z);
  }
  std::vector<double> out(K);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) total += out[k] = acc[k].value() / static_cast<double>(n);
  for (auto& v : out) v /= total;
  return out;
}

/// Chains must share length and burn-in so that iteration j pairs across models.
inline std::vector<double> congdon_probabilities(const std::vector<const Chain*>& chains) {
  if (chains.empty()) throw std::invalid_argument("no models to compare");
  std::vector<std::vector<double>> ll;
  for (const auto* c : chains) {
    if (c->size() != chains.front()->size() || c->burn_in != chains.front()->burn_in)
      throw ChainAlignmentError("chains " + chains.front()->spec_id + " and " + c->spec_id +
                                " differ in length or burn-in");
    const auto r = c->retained_log_lik();
    ll.emplace_back(r.begin(), r.end());
  }
  return congdon_probabilities(ll);
}

struct DicResult {
  double dic = 0.0;
  double mean_deviance = 0.0;  // D-bar
  double effective_parameters = 0.0;  // p_D
  double deviance_at_mean = 0.0;
  bool mean_outside_box = false;
};

/// DIC = D-bar + p_D with D = -2 log L and p_D = D-bar - D(theta-bar).
inline DicResult dic(const Chain& chain, const Triangle& t, const ModelSpec& spec, const PriorBox& box) {
  if (chain.retained() == 0) throw std::invalid_argument("no retained samples for DIC");
  DicResult r;
  r.mean_deviance = -2.0 * sample_mean(chain.retained_log_lik());
  std::vector<double> mean(chain.dim);
  for (std::size_t k = 0; k < chain.dim; ++k) mean[k] = sample_mean(chain.column(k));
  auto box_check = mean;
  if (chain.p_fixed) box_check[0] = 0.5 * (box.lower[0] + box.upper[0]);
  r.mean_outside_box = !box.contains(box_check);
  r.deviance_at_mean = -2.0 * log_likelihood(t, spec.expand(mean));
  r.effective_parameters = r.mean_deviance - r.deviance_at_mean;
  r.dic = r.mean_deviance + r.effective_parameters;
  return r;
}

struct LhrResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool nesting_warning = false;
};

/// Likelihood-ratio test of a reduced model against the saturated fit:
/// chi-square upper tail with df = difference in free coordinate counts.
inline LhrResult lhr_pvalue(const MleFit& full, const MleFit& reduced) {
  LhrResult r;
  r.df = full.spec.free_param_count() - reduced.spec.free_param_count();
  if (r.df < 0) throw std::invalid_argument("reduced model has more parameters than the full model");
  r.statistic = 2.0 * (full.log_lik - reduced.log_lik);
  if (r.statistic < 0.0) {
    r.nesting_warning = true;
    r.statistic = 0.0;
  }
  if (r.df == 0 || r.statistic == 0.0) {
    r.p_value = 1.0;
  } else {
    r.p_value = std::clamp(boost::math::gamma_q(0.5 * r.df, 0.5 * r.statistic), 0.0, 1.0);
  }
  return r;
}

struct ModelComparison {
  std::vector<std::string> models;
  std::vector<double> posterior_probability;
  std::vector<double> dic;
  std::vector<double> lhr_pvalue;
};

/// CSV with rows posterior_probability, dic, lhr_pvalue and one column per model.
inline void write_comparison_csv(std::ostream& out, const ModelComparison& c) {
  out << "metric";
  for (const auto& m : c.models) out << ',' << m;
  out << '\n';
  auto row = [&](const char* name, const std::vector<double>& v) {
    out << name;
    for (double x : v) out << ',' << format_17(x);
    out << '\n';
  };
  row("posterior_probability", c.posterior_probability);
  row("dic", c.dic);
  row("lhr_pvalue", c.lhr_pvalue);
}

}  // namespace tweedie
