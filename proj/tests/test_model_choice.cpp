#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "tweedie_reserve/model_choice.hpp"
#include "tweedie_reserve/random.hpp"

using namespace tweedie;

namespace {

std::vector<std::vector<double>> random_log_liks(std::size_t models, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> ll(models, std::vector<double>(n));
  for (std::size_t k = 0; k < models; ++k)
    for (auto& v : ll[k]) v = -180.0 - 3.0 * static_cast<double>(k) + 2.0 * rng.normal();
  return ll;
}

}  // namespace

TEST_CASE("single model has probability one", "[model_choice]") {
  const auto p = congdon_probabilities(random_log_liks(1, 100, 1));
  REQUIRE(p.size() == 1);
  CHECK(p[0] == 1.0);
}

TEST_CASE("identical sequences split evenly", "[model_choice]") {
  for (std::size_t K : {2u, 3u, 7u}) {
    const auto base = random_log_liks(1, 500, 2).front();
    const std::vector<std::vector<double>> ll(K, base);
    for (double v : congdon_probabilities(ll)) CHECK(v == Catch::Approx(1.0 / static_cast<double>(K)).epsilon(1e-14));
  }
}

TEST_CASE("probabilities are invariant to per-iteration shifts and permute with the models", "[model_choice]") {
  const auto ll = random_log_liks(4, 1000, 3);
  const auto p = congdon_probabilities(ll);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == Catch::Approx(1.0).epsilon(1e-15));
  auto shifted = ll;
  Rng rng(4);
  for (std::size_t j = 0; j < ll.front().size(); ++j) {
    const double c = 500.0 * rng.normal();
    for (auto& m : shifted) m[j] += c;
  }
  const auto ps = congdon_probabilities(shifted);
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(ps[k] == Catch::Approx(p[k]).epsilon(1e-12));
  const std::vector<std::vector<double>> perm{ll[2], ll[0], ll[3], ll[1]};
  const auto pp = congdon_probabilities(perm);
  CHECK(pp[0] == Catch::Approx(p[2]).epsilon(1e-14));
  CHECK(pp[1] == Catch::Approx(p[0]).epsilon(1e-14));
  CHECK(pp[2] == Catch::Approx(p[3]).epsilon(1e-14));
  CHECK(pp[3] == Catch::Approx(p[1]).epsilon(1e-14));
}

TEST_CASE("a dominating model takes all the mass", "[model_choice]") {
  auto ll = random_log_liks(3, 200, 5);
  for (auto& v : ll[1]) v += 1000.0;
  const auto p = congdon_probabilities(ll);
  CHECK(p[1] >= 1.0 - 1e-17);
  CHECK(p[0] < 1e-300);
}

TEST_CASE("misaligned chains are rejected", "[model_choice]") {
  auto ll = random_log_liks(2, 100, 6);
  ll[1].pop_back();
  CHECK_THROWS_AS(congdon_probabilities(ll), ChainAlignmentError);
  Chain a, b;
  a.dim = b.dim = 1;
  a.values.assign(10, 1.0);
  b.values.assign(12, 1.0);
  a.log_lik.assign(10, -1.0);
  b.log_lik.assign(12, -1.0);
  CHECK_THROWS_AS(congdon_probabilities(std::vector<const Chain*>{&a, &b}), ChainAlignmentError);
}

TEST_CASE("DIC of a point mass is the deviance at that point", "[model_choice]") {
  const auto t = testing::table2();
  const auto spec = model_spec("M1", 9);
  const auto box = PriorBox::for_model(spec);
  const std::vector<double> x{1.5, 3.0, 90.0};
  const double ll = log_likelihood(t, spec.expand(x));
  Chain c;
  c.spec_id = "M1";
  c.dim = 3;
  for (int k = 0; k < 100; ++k) {
    c.values.insert(c.values.end(), x.begin(), x.end());
    c.log_lik.push_back(ll);
  }
  c.burn_in = 10;
  const auto d = dic(c, t, spec, box);
  CHECK(d.effective_parameters == Catch::Approx(0.0).margin(1e-9));
  CHECK(d.dic == Catch::Approx(-2.0 * ll).epsilon(1e-14));
  CHECK_FALSE(d.mean_outside_box);
}

TEST_CASE("likelihood-ratio p-values", "[model_choice]") {
  const auto t = testing::table2();
  auto fit = [&](const std::string& name) {
    const auto spec = model_spec(name, 9);
    return fit_mle(t, spec, PriorBox::for_model(spec));
  };
  const auto m0 = fit("M0");
  const auto self = lhr_pvalue(m0, m0);
  CHECK(self.p_value == 1.0);
  CHECK(self.df == 0);
  const auto m6 = lhr_pvalue(m0, fit("M6"));
  CHECK(m6.df == 8);
  CHECK(m6.p_value >= 0.043 / 2.0);
  CHECK(m6.p_value <= 0.043 * 2.0);
  const auto m1 = lhr_pvalue(m0, fit("M1"));
  CHECK(m1.df == 18);
  CHECK(m1.p_value < 1e-40);
  CHECK(m1.p_value > 0.0);
  CHECK_THROWS_AS(lhr_pvalue(fit("M1"), m0), std::invalid_argument);
}

TEST_CASE("comparison CSV layout", "[model_choice]") {
  ModelComparison c{{"M0", "M6"}, {0.7, 0.3}, {399.0, 398.0}, {1.0, 0.043}};
  std::ostringstream out;
  write_comparison_csv(out, c);
  CHECK(out.str() ==
        "metric,M0,M6\n"
        "posterior_probability,0.69999999999999996,0.29999999999999999\n"
        "dic,399,398\n"
        "lhr_pvalue,1,0.042999999999999997\n");
}
