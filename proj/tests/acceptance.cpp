// End-to-end acceptance run on the table 2 triangle. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "test_support.hpp"
#include "tweedie_reserve/tweedie_reserve.hpp"

using namespace tweedie;

namespace {

class Criterion {
 public:
  Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {
    std::printf("[%d] %s\n", number_, title_.c_str());
  }

  /// |value - target| <= tolerance.
  void near(const std::string& what, double value, double target, double tolerance) {
    record(what, std::fabs(value - target) <= tolerance, value, "target " + fmt(target) + " +- " + fmt(tolerance));
  }

  void within(const std::string& what, double value, double lo, double hi) {
    record(what, value >= lo && value <= hi, value, "range [" + fmt(lo) + ", " + fmt(hi) + "]");
  }

  void at_most(const std::string& what, double value, double bound) {
    record(what, value <= bound, value, "bound " + fmt(bound));
  }

  void holds(const std::string& what, bool ok) { record(what, ok, std::nan(""), ""); }

  bool finish() const {
    std::printf("criterion %d: %s (%s)\n\n", number_, ok_ ? "PASS" : "FAIL", title_.c_str());
    std::fflush(stdout);
    return ok_;
  }

 private:
  static std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
  }

  void record(const std::string& what, bool ok, double value, const std::string& target) {
    ok_ = ok_ && ok;
    if (std::isnan(value))
      std::printf("  %-4s %s\n", ok ? "ok" : "FAIL", what.c_str());
    else
      std::printf("  %-4s %-34s %-14s %s\n", ok ? "ok" : "FAIL", what.c_str(), fmt(value).c_str(), target.c_str());
  }

  int number_;
  std::string title_;
  bool ok_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ChainOptions long_chain(std::uint64_t seed) {
  ChainOptions o;
  o.iterations = 100000;
  o.burn_in = 10000;
  o.seed = seed;
  return o;
}

double relative(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

double density(double y, const TweediePoint& pt) {
  try {
    return std::exp(log_density(y, pt).log_density);
  } catch (const std::exception&) {
    return 0.0;
  }
}

double positive_mass(const TweediePoint& pt) {
  auto f = [&](double y) { return density(y, pt); };
  boost::math::quadrature::tanh_sinh<double> inner;
  boost::math::quadrature::exp_sinh<double> outer;
  return inner.integrate(f, 0.0, pt.mu, 1e-13) + outer.integrate(f, pt.mu, std::numeric_limits<double>::infinity(), 1e-13);
}

std::string chain_csv(const Chain& c, const ModelSpec& spec) {
  std::ostringstream out;
  write_chain_csv(out, c, spec);
  return out.str();
}

}  // namespace

int main() {
  const auto t = testing::table2();
  const testing::ReferenceMle reference;
  const auto m0 = model_spec("M0", t.I());
  const auto m0_box = PriorBox::for_model(m0);
  bool all = true;

  // 1. Maximum likelihood point estimates.
  auto t0 = std::chrono::steady_clock::now();
  const auto fit = fit_mle(t, m0, m0_box);
  std::printf("MLE fit: %.1f s, %ld evaluations\n", seconds_since(t0), fit.evaluations);
  {
    Criterion c(1, "MLE point estimates");
    c.near("p", fit.params.p, 1.259, 0.005);
    c.near("phi", fit.params.phi, 0.351, 0.005);
    c.near("beta_0", fit.params.beta[0], 669.1, 0.5);
    c.holds("beta_9 equals Y_{0,9} exactly", fit.params.beta[9] == t(0, 9));
    c.at_most("rel. error p", relative(fit.params.p, reference.p), 0.005);
    c.at_most("rel. error phi", relative(fit.params.phi, reference.phi), 0.005);
    for (int i = 1; i <= 9; ++i)
      c.at_most("rel. error alpha_" + std::to_string(i), relative(fit.params.alpha[i], reference.alpha[i]), 0.005);
    for (int j = 0; j <= 9; ++j)
      c.at_most("rel. error beta_" + std::to_string(j), relative(fit.params.beta[j], reference.beta[j]), 0.005);
    all = c.finish() && all;
  }

  // 2. Maximum likelihood reserve decomposition.
  const auto msep = reserve_mle(fit);
  {
    Criterion c(2, "MLE reserve decomposition");
    c.near("reserve", msep.reserve, 602.630, 0.1);
    c.near("sqrt PV", std::sqrt(msep.process_variance), 25.937, 0.1);
    c.holds("estimation error available", msep.estimation_error.has_value());
    if (msep.estimation_error) {
      c.near("sqrt EE", std::sqrt(*msep.estimation_error), 28.336, 0.5);
      c.near("sqrt MSEP", std::sqrt(*msep.msep()), 38.414, 0.5);
    }
    all = c.finish() && all;
  }

  // 3. Boundary models with Pearson dispersion.
  {
    Criterion c(3, "boundary models p = 1 and p = 2");
    const auto odp = fit_boundary(t, 1.0);
    c.near("p=1 reserve", odp.report.reserve, 604.706, 0.05);
    c.at_most("p=1 rel. diff to chain ladder", relative(odp.report.reserve, testing::chain_ladder_reserve(t)), 1e-8);
    c.near("p=1 Pearson phi", odp.pearson_phi, 1.471, 0.01);
    c.holds("p=1 MSEP available", odp.report.msep().has_value());
    if (odp.report.msep()) c.near("p=1 sqrt MSEP", std::sqrt(*odp.report.msep()), 42.989, 0.2);
    const auto gamma = fit_boundary(t, 2.0);
    c.near("p=2 reserve", gamma.report.reserve, 594.705, 0.05);
    c.holds("p=2 MSEP available", gamma.report.msep().has_value());
    if (gamma.report.msep()) c.near("p=2 sqrt MSEP", std::sqrt(*gamma.report.msep()), 111.895, 0.5);
    all = c.finish() && all;
  }

  // Chains for every model in the ladder.
  const std::vector<std::string> ids{"M0", "M1", "M2", "M3", "M4", "M5", "M6"};
  std::vector<Chain> chains;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto spec = model_spec(ids[k], t.I());
    t0 = std::chrono::steady_clock::now();
    chains.push_back(run_chain(t, spec, PriorBox::for_model(spec), long_chain(1)));
    std::printf("chain %s: %.1f s, T = %zu\n", ids[k].c_str(), seconds_since(t0), chains.back().size());
  }
  const Chain& chain = chains.front();
  const auto summary = summarize(chain);

  // 4. Posterior summaries of the saturated model.
  {
    Criterion c(4, "Bayesian posterior");
    c.near("MMSE p", summary.coordinates[0].mmse, 1.332, 0.03);
    c.near("MMSE phi", summary.coordinates[1].mmse, 0.533, 0.06);
    c.near("MMSE beta_0", summary.coordinates[11].mmse, 672.7, 6.0);
    for (std::size_t k : {0u, 1u, 11u})
      std::printf("  info %-34s %.4g\n", ("blocking SE of MMSE " + summary.coordinates[k].name).c_str(),
                  summary.coordinates[k].se_mmse);
    c.near("corr(p, phi)", posterior_correlation(chain)(0, 1), -0.82, 0.05);
    all = c.finish() && all;
  }

  // 5. Model-averaged reserving with the predictive distribution.
  t0 = std::chrono::steady_clock::now();
  const auto predictive = predictive_outstanding(chain, m0, Rng(1).split(3));
  const auto averaged = bayesian_decomposition(chain, m0, std::span<const double>(predictive));
  std::printf("predictive draws: %.1f s\n", seconds_since(t0));
  {
    Criterion c(5, "model-averaged reserving");
    c.near("ER", averaged.er, 624.1, 3.0);
    c.near("sqrt PV", std::sqrt(averaged.pv), 37.3, 1.0);
    c.near("sqrt EE", std::sqrt(averaged.ee), 44.8, 2.0);
    c.near("sqrt MSEP", std::sqrt(averaged.msep()), 58.3, 2.0);
    const std::vector<std::pair<double, double>> var_targets{{0.75, 659.8}, {0.90, 698.4}, {0.95, 724.0}};
    for (const auto& [q, target] : var_targets) {
      const auto& v = averaged.var.at(q);
      c.holds("VaR(R) available at " + std::to_string(q), v.r.has_value());
      if (v.r) c.near("VaR " + std::to_string(static_cast<int>(q * 100)) + " R", *v.r, target, 5.0);
    }
    c.near("VaR 95 R-tilde", averaged.var.at(0.95).r_tilde, 701.7, 6.0);
    all = c.finish() && all;
  }

  // 6. Model selection.
  {
    Criterion c(6, "model selection");
    std::vector<const Chain*> ptrs;
    for (const auto& ch : chains) ptrs.push_back(&ch);
    const auto prob = congdon_probabilities(ptrs);
    c.within("P(M0 | D)", prob[0], 0.55, 0.85);
    c.within("P(M6 | D)", prob[6], 0.15, 0.45);
    for (std::size_t k = 1; k <= 5; ++k) c.at_most("P(" + ids[k] + " | D)", prob[k], 1e-15);
    const auto m6 = model_spec("M6", t.I());
    const auto m6_box = PriorBox::for_model(m6);
    c.near("DIC M0", dic(chains[0], t, m0, m0_box).dic, 399.0, 5.0);
    c.near("DIC M6", dic(chains[6], t, m6, m6_box).dic, 398.0, 5.0);
    const auto lhr = lhr_pvalue(fit, fit_mle(t, m6, m6_box));
    c.within("LHR p-value M0 vs M6", lhr.p_value, 0.043 / 2.0, 0.043 * 2.0);
    all = c.finish() && all;
  }

  // 7. Curves conditional on p.
  {
    Criterion c(7, "conditional-on-p curves");
    std::vector<double> grid;
    for (int k = 11; k <= 19; ++k) grid.push_back(k / 10.0);
    const auto mle_curve = conditional_on_p(t, m0, m0_box, grid, long_chain(2), false);
    bool monotone = true;
    for (std::size_t k = 0; k < mle_curve.size(); ++k) {
      c.holds("MLE fit at p = " + std::to_string(grid[k]), mle_curve[k].error.empty() && mle_curve[k].mle.has_value());
      if (k > 0 && mle_curve[k].mle && mle_curve[k - 1].mle)
        monotone = monotone && mle_curve[k].mle->reserve < mle_curve[k - 1].mle->reserve;
    }
    c.holds("MLE ER_p decreases in p", monotone);
    if (mle_curve.front().mle) c.near("MLE ER_p at 1.1", mle_curve.front().mle->reserve, 603.96, 0.5);
    if (mle_curve.back().mle) c.near("MLE ER_p at 1.9", mle_curve.back().mle->reserve, 595.78, 0.5);
    t0 = std::chrono::steady_clock::now();
    const auto ends = conditional_on_p(t, m0, m0_box, {1.1, 1.9}, long_chain(2));
    std::printf("  conditional chains: %.1f s\n", seconds_since(t0));
    const double pv_target[] = {33.1, 68.5};
    const double ee_target[] = {37.4, 102.0};
    for (std::size_t k = 0; k < 2; ++k) {
      const std::string at = k == 0 ? "1.1" : "1.9";
      c.holds("Bayesian report at p = " + at, ends[k].bayesian.has_value());
      if (!ends[k].bayesian) continue;
      c.near("sqrt PV_p at " + at, std::sqrt(ends[k].bayesian->pv), pv_target[k], 2.0);
      c.near("sqrt EE_p at " + at, std::sqrt(ends[k].bayesian->ee), ee_target[k], 5.0);
    }
    all = c.finish() && all;
  }

  // 8. Property suites.
  {
    Criterion c(8, "property suites");
    double worst = 0.0;
    for (double p : {1.1, 1.3, 1.5, 1.7, 1.9})
      for (double phi : {0.1, 1.0, 10.0})
        for (double y : {0.01, 1.0, 100.0, 1e4})
          worst = std::max(worst, relative(log_density(y, {1.0, phi, p}).log_density,
                                           testing::compound_poisson_log_density(y, 1.0, phi, p)));
    c.at_most("series vs quad oracle (max rel.)", worst, 1e-10);

    double worst_mass = 0.0;
    for (double p : {1.1, 1.3, 1.5, 1.7, 1.9})
      for (double phi : {0.1, 1.0, 10.0}) {
        const TweediePoint pt{1.0, phi, p};
        worst_mass = std::max(worst_mass, std::fabs(std::exp(log_zero_mass(pt)) + positive_mass(pt) - 1.0));
      }
    c.at_most("density normalization (max abs.)", worst_mass, 1e-6);

    bool moments_ok = true;
    std::uint64_t seed = 100;
    for (const TweediePoint& pt : {TweediePoint{1.0, 1.0, 1.5}, TweediePoint{669.1, 0.351, 1.259},
                                   TweediePoint{2.0, 3.0, 1.9}, TweediePoint{0.5, 0.2, 1.1}}) {
      Rng rng(seed++);
      const std::size_t n = 1000000;
      std::vector<double> y(n);
      for (auto& v : y) v = sample(pt, rng);
      const double m = sample_mean(y), v = sample_variance(y);
      const double var = pt.phi * std::pow(pt.mu, pt.p);
      std::vector<double> sq(n);
      for (std::size_t k = 0; k < n; ++k) sq[k] = (y[k] - m) * (y[k] - m);
      moments_ok = moments_ok && std::fabs(m - pt.mu) <= 3.0 * std::sqrt(var / n) &&
                   std::fabs(v - var) <= 3.0 * std::sqrt(sample_variance(sq) / n);
    }
    c.holds("sampler mean and variance within 3 Monte Carlo SEs", moments_ok);

    const auto pb = profile_beta(t, fit.params.alpha, fit.params.p);
    TweedieParams q{fit.params.p, fit.params.phi, fit.params.alpha, pb.beta};
    const double ll = log_likelihood(t, q);
    double worst_grad = 0.0;
    for (std::size_t k = 0; k < q.beta.size(); ++k) {
      const double h = 1e-5 * q.beta[k];
      auto up = q, dn = q;
      up.beta[k] += h;
      dn.beta[k] -= h;
      worst_grad = std::max(worst_grad, std::fabs(log_likelihood(t, up) - log_likelihood(t, dn)) / (2.0 * h));
    }
    c.at_most("profile-beta gradient / |logL|", worst_grad / std::fabs(ll), 1e-8);

    c.holds("MSEP = PV + EE (MLE)", msep.msep() && *msep.msep() == msep.process_variance + *msep.estimation_error);
    c.holds("MSEP = PV + EE (Bayesian)", averaged.msep() == averaged.pv + averaged.ee);

    ChainOptions shorter;
    shorter.iterations = 2000;
    shorter.burn_in = 200;
    shorter.seed = 77;
    c.holds("chain determinism (byte-identical CSV)",
            chain_csv(run_chain(t, m0, m0_box, shorter), m0) == chain_csv(run_chain(t, m0, m0_box, shorter), m0));

    const auto bins = p_bin_decomposition(chain, m0, 20);
    const auto plain = bayesian_decomposition(chain, m0);
    c.at_most("20-bin ER identity (rel.)", relative(bins.er, plain.er), 0.01);
    c.at_most("20-bin PV identity (rel.)", relative(bins.pv, plain.pv), 0.01);
    c.at_most("20-bin EE identity (rel.)", relative(bins.ee, plain.ee), 0.01);

    const auto mle_point = m0.compress(fit.params);
    for (std::size_t k = 0; k < summary.coordinates.size(); ++k) {
      const auto& s = summary.coordinates[k];
      c.at_most("|MAP - MLE| / SE " + s.name, std::fabs(s.map - mle_point[k]) / s.se_map, 2.0);
    }
    all = c.finish() && all;
  }

  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
