#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "test_support.hpp"
#include "tweedie_reserve/reserving.hpp"

using namespace tweedie;

namespace {

Chain constant_chain(const ModelSpec& spec, const TweedieParams& q, std::size_t n, std::size_t burn_in) {
  Chain c;
  c.spec_id = spec.id();
  c.names = spec.coordinate_names();
  const auto x = spec.compress(q);
  c.dim = x.size();
  for (std::size_t t = 0; t < n; ++t) {
    c.values.insert(c.values.end(), x.begin(), x.end());
    c.log_lik.push_back(-1.0);
  }
  c.burn_in = burn_in;
  return c;
}

struct Table2Chain {
  Triangle t = testing::table2();
  ModelSpec spec = model_spec("M0", 9);
  PriorBox box = PriorBox::for_model(spec);
  Chain chain = [this] {
    ChainOptions o;
    o.iterations = 30000;
    o.burn_in = 5000;
    o.seed = 12;
    return run_chain(t, spec, box, o);
  }();
};

const Table2Chain& table2_chain() {
  static const Table2Chain c;
  return c;
}

}  // namespace

TEST_CASE("reserve of a point mass has no estimation error", "[reserving]") {
  const auto spec = model_spec("M0", 2);
  const TweedieParams q{1.5, 2.0, {1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  const auto c = constant_chain(spec, q, 12000, 1000);
  const auto rt = reserve_draws(c, spec);
  REQUIRE(rt.size() == 11000);
  for (double v : rt) CHECK(v == 45.0);
  const auto r = bayesian_decomposition(c, spec, std::nullopt, 5000);
  CHECK(r.er == 45.0);
  CHECK(r.ee == 0.0);
  CHECK(r.pv == Catch::Approx(process_variance(q)).epsilon(1e-14));
  CHECK(r.msep() == r.pv + r.ee);
  CHECK(r.var.at(0.95).r_tilde == 45.0);
  CHECK_FALSE(r.var.at(0.95).r.has_value());
  CHECK(r.mode == ReserveReport::Mode::kModelAveraged);
}

TEST_CASE("VaR uses nearest rank", "[reserving]") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(value_at_risk(x, 0.75, 10).value == 75.0);
  CHECK(value_at_risk(x, 1e-12, 10).value == 1.0);
  CHECK(std::isfinite(value_at_risk(x, 0.9, 10).se));
}

TEST_CASE("p bins recombine into the averaged quantities", "[reserving]") {
  const auto& s = table2_chain();
  const auto d = p_bin_decomposition(s.chain, s.spec, 20);
  const auto r = bayesian_decomposition(s.chain, s.spec);
  std::size_t total = 0;
  for (const auto& b : d.bins) total += b.count;
  CHECK(total == s.chain.retained());
  // Weighted bin means reproduce ER and PV; the law of total variance reproduces EE.
  CHECK(std::fabs(d.er - r.er) <= 1e-9 * r.er);
  CHECK(std::fabs(d.pv - r.pv) <= 1e-9 * r.pv);
  CHECK(std::fabs(d.ee - r.ee) <= 1e-9 * r.ee);
  CHECK(d.ee_within > 0.0);
  CHECK(d.ee_between > 0.0);
}

TEST_CASE("predictive draws obey the tower property", "[reserving]") {
  const auto& s = table2_chain();
  const auto pred = predictive_outstanding(s.chain, s.spec, Rng(5));
  const auto r = bayesian_decomposition(s.chain, s.spec, std::span<const double>(pred), 5000);
  const double n = static_cast<double>(pred.size());
  // E[R] = ER and Var[R] = PV + EE, with Monte Carlo error inflated for autocorrelation.
  const double m = sample_mean(pred);
  const double v = sample_variance(pred);
  CHECK(std::fabs(m - r.er) <= 3.0 * blocking_standard_error(pred, 5000) + 3.0 * std::sqrt(v / n));
  CHECK(std::fabs(v - r.msep()) <= 0.05 * r.msep());
  REQUIRE(r.var.at(0.95).r.has_value());
  CHECK(*r.var.at(0.95).r > r.var.at(0.95).r_tilde);
  const auto again = predictive_outstanding(s.chain, s.spec, Rng(5));
  CHECK(again == pred);
}

TEST_CASE("conditional spread widens with p", "[reserving]") {
  const auto& s = table2_chain();
  ChainOptions base;
  base.iterations = 12000;
  base.burn_in = 2000;
  base.seed = 3;
  const auto pts = conditional_on_p(s.t, s.spec, s.box, {1.1, 1.5, 1.9}, base, true, 2000);
  REQUIRE(pts.size() == 3);
  for (const auto& p : pts) {
    INFO("p " << p.p << " " << p.error);
    REQUIRE(p.error.empty());
    REQUIRE(p.bayesian);
    CHECK(p.bayesian->mode == ReserveReport::Mode::kConditional);
    CHECK(p.bayesian->p == p.p);
  }
  auto iqr_width = [](const ConditionalPoint& p) { return p.bayesian->pv + p.bayesian->ee; };
  CHECK(iqr_width(pts[0]) < iqr_width(pts[1]));
  CHECK(iqr_width(pts[1]) < iqr_width(pts[2]));
  CHECK(pts[0].mle->reserve > pts[2].mle->reserve);
}

TEST_CASE("Freedman-Diaconis histogram", "[reserving]") {
  std::vector<double> x;
  for (int k = 0; k < 1000; ++k) x.push_back(k * 0.001);
  const auto h = histogram_fd(x);
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  CHECK(total == 1000);
  CHECK(h.front().left == 0.0);
  CHECK(h.back().right == Catch::Approx(0.999));
  // Width 2 IQR n^{-1/3} = 2 * 0.5 / 10 = 0.1 gives ten bins.
  CHECK(h.size() == 10);
  std::ostringstream out;
  write_histogram_csv(out, histogram_fd(std::vector<double>{2.0, 2.0, 2.0}));
  CHECK(out.str() == "bin_left,bin_right,count\n2,3,3\n");
  CHECK_THROWS(histogram_fd(std::vector<double>{}));
}
