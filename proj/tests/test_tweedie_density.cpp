#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/stats.hpp"
#include "tweedie_reserve/tweedie_density.hpp"

using namespace tweedie;

TEST_CASE("compound Poisson transforms", "[density]") {
  const auto cp = to_compound_poisson({1.0, 1.0, 1.5});
  CHECK(cp.lambda == Catch::Approx(2.0).epsilon(1e-15));
  CHECK(cp.gamma_shape == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(cp.tau == Catch::Approx(0.5).epsilon(1e-15));

  const auto back = from_compound_poisson(to_compound_poisson({2.0, 0.5, 1.5}));
  CHECK(std::fabs(back.mu - 2.0) < 1e-12);
  CHECK(std::fabs(back.phi - 0.5) < 1e-12);
  CHECK(std::fabs(back.p - 1.5) < 1e-12);

  for (double p : {1.1, 1.259, 1.7, 1.95})
    for (double mu : {0.01, 1.0, 669.1})
      for (double phi : {0.05, 0.351, 20.0}) {
        const auto r = from_compound_poisson(to_compound_poisson({mu, phi, p}));
        CHECK(std::fabs(r.mu - mu) <= 1e-12 * mu);
        CHECK(std::fabs(r.phi - phi) <= 1e-12 * phi);
        CHECK(std::fabs(r.p - p) <= 1e-12);
      }
}

TEST_CASE("transforms agree with a 50-digit evaluation", "[density]") {
  using big = boost::multiprecision::cpp_bin_float_50;
  const big mu = 1, phi = big("0.351"), p = big("1.259");
  const big lambda = boost::multiprecision::pow(mu, 2 - p) / (phi * (2 - p));
  const big tau = mu / lambda;
  const big gamma = (2 - p) / (p - 1);
  const auto cp = to_compound_poisson({1.0, 0.351, 1.259});
  CHECK(cp.lambda == Catch::Approx(lambda.convert_to<double>()).epsilon(1e-14));
  CHECK(cp.tau == Catch::Approx(tau.convert_to<double>()).epsilon(1e-14));
  CHECK(cp.gamma_shape == Catch::Approx(gamma.convert_to<double>()).epsilon(1e-14));
}

TEST_CASE("zero mass", "[density]") {
  CHECK(log_zero_mass({1.0, 1.0, 1.5}) == Catch::Approx(-2.0).epsilon(1e-15));
  CHECK(log_zero_mass({1.0, 1e12, 1.5}) < 0.0);
  CHECK(log_zero_mass({1.0, 1e12, 1.5}) > -1e-10);
  const TweediePoint cell{669.1 * 0.918, 0.351, 1.259};
  CHECK(std::fabs(log_zero_mass(cell) + to_compound_poisson(cell).lambda) <= 1e-14 * to_compound_poisson(cell).lambda);
  CHECK(log_probability(0.0, {1.0, 1.0, 1.5}) == log_zero_mass({1.0, 1.0, 1.5}));
}

TEST_CASE("series matches the quad-precision direct summation", "[density]") {
  auto rel = [](double a, double b) { return std::fabs(a - b) / std::fabs(b); };
  CHECK(rel(log_density(1.0, {1.0, 1.0, 1.5}).log_density, testing::compound_poisson_log_density(1.0, 1.0, 1.0, 1.5)) <= 1e-10);
  CHECK(rel(log_density(594.6975, {669.1, 0.351, 1.259}).log_density,
            testing::compound_poisson_log_density(594.6975, 669.1, 0.351, 1.259)) <= 1e-10);
  for (double p : {1.1, 1.3, 1.5, 1.7, 1.9})
    for (double phi : {0.1, 1.0, 10.0})
      for (double y : {0.01, 1.0, 100.0, 1e4}) {
        const double got = log_density(y, {1.0, phi, p}).log_density;
        const double want = testing::compound_poisson_log_density(y, 1.0, phi, p);
        INFO("p " << p << " phi " << phi << " y " << y << " got " << got << " want " << want);
        CHECK(rel(got, want) <= 1e-10);
      }
}

TEST_CASE("cached and direct log-gamma terms agree", "[density]") {
  CachedLogGammaTerms cached(gamma_shape(1.259));
  for (double y : {0.5, 594.6975, 1.5813})
    CHECK(log_density(y, {669.1, 0.351, 1.259}, cached).log_density == log_density(y, {669.1, 0.351, 1.259}).log_density);
}

TEST_CASE("series terms are unimodal around R0", "[density]") {
  for (double p : {1.1, 1.5, 1.9})
    for (double phi : {0.1, 1.0, 10.0})
      for (double y : {0.01, 1.0, 100.0, 1e4}) {
        const auto d = log_series_constant(y, phi, p);
        const double g = gamma_shape(p);
        const double log_z = -(g + 1.0) * std::log(phi) + g * std::log(y) - g * std::log(p - 1.0) - std::log(2.0 - p);
        auto log_w = [&](long r) { return r * log_z - std::lgamma(r + 1.0) - std::lgamma(g * r); };
        long argmax = d.r_lower;
        bool decreasing = false, ok = true;
        for (long r = d.r_lower + 1; r <= d.r_upper; ++r) {
          const bool up = log_w(r) > log_w(r - 1);
          if (up && decreasing) ok = false;
          if (!up) decreasing = true;
          if (log_w(r) > log_w(argmax)) argmax = r;
        }
        INFO("p " << p << " phi " << phi << " y " << y);
        CHECK(ok);
        CHECK(std::labs(argmax - std::min(d.r_max_index, d.r_upper)) <= 1);
        CHECK(log_w(d.r_upper) <= log_w(argmax) - kSeriesLogDrop);
        if (d.r_lower > 1) CHECK(log_w(d.r_lower) <= log_w(argmax) - kSeriesLogDrop);
      }
}

TEST_CASE("geometric tail bound is attached and small", "[density]") {
  auto d = log_series_constant(594.6975, 0.351, 1.259);
  attach_tail_bound(d, 594.6975, 0.351, 1.259);
  REQUIRE(d.log_tail_bound.has_value());
  REQUIRE(d.q_upper.has_value());
  CHECK(*d.q_upper < 1.0);
}

namespace {

double density(double y, const TweediePoint& pt) {
  try {
    return std::exp(log_density(y, pt).log_density);
  } catch (const std::exception&) {
    return 0.0;  // far tail beyond the series cap, where the density is below any double
  }
}

// Integral of y^k f(y) over (0, inf), split at the mean.
double positive_moment(const TweediePoint& pt, int k) {
  auto f = [&](double y) { return std::pow(y, k) * density(y, pt); };
  boost::math::quadrature::tanh_sinh<double> inner;
  boost::math::quadrature::exp_sinh<double> outer;
  return inner.integrate(f, 0.0, pt.mu, 1e-13) + outer.integrate(f, pt.mu, std::numeric_limits<double>::infinity(), 1e-13);
}

}  // namespace

TEST_CASE("density integrates to one with the zero atom", "[density]") {
  for (double p : {1.1, 1.3, 1.5, 1.7, 1.9})
    for (double phi : {0.1, 1.0, 10.0}) {
      const TweediePoint pt{1.0, phi, p};
      INFO("p " << p << " phi " << phi);
      const double mass = std::exp(log_zero_mass(pt)) + positive_moment(pt, 0);
      CHECK(std::fabs(mass - 1.0) <= 1e-6);
    }
  const TweediePoint cell{669.1, 0.351, 1.259};
  CHECK(std::fabs(std::exp(log_zero_mass(cell)) + positive_moment(cell, 0) - 1.0) <= 1e-6);
}

TEST_CASE("quadrature moments match mean and variance function", "[density]") {
  for (double p : {1.1, 1.5, 1.9})
    for (double phi : {0.1, 1.0}) {
      for (double mu : {1.0, 7.5}) {
        const TweediePoint pt{mu, phi, p};
        INFO("p " << p << " phi " << phi << " mu " << mu);
        const double m1 = positive_moment(pt, 1);
        const double m2 = positive_moment(pt, 2);
        CHECK(std::fabs(m1 - mu) <= 1e-4 * mu);
        const double var = phi * std::pow(mu, p);
        CHECK(std::fabs(m2 - m1 * m1 - var) <= 1e-4 * var);
      }
    }
}

TEST_CASE("compound Poisson draws match the atom, mean and variance", "[density]") {
  const std::vector<TweediePoint> points{{1.0, 1.0, 1.5}, {669.1, 0.351, 1.259}, {2.0, 3.0, 1.9}, {0.5, 0.2, 1.1}};
  std::uint64_t seed = 100;
  for (const auto& pt : points) {
    Rng rng(seed++);
    const int n = 1000000;
    std::vector<double> y(n);
    long zeros = 0;
    for (auto& v : y) {
      v = sample(pt, rng);
      zeros += v == 0.0;
    }
    INFO("mu " << pt.mu << " phi " << pt.phi << " p " << pt.p);
    const double p0 = std::exp(log_zero_mass(pt));
    CHECK(std::fabs(static_cast<double>(zeros) / n - p0) <= 3.0 * std::sqrt(p0 * (1.0 - p0) / n) + 1e-300);
    const double m = sample_mean(y), v = sample_variance(y);
    const double var = pt.phi * std::pow(pt.mu, pt.p);
    CHECK(std::fabs(m - pt.mu) <= 3.0 * std::sqrt(var / n));
    std::vector<double> sq(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) sq[k] = (y[k] - m) * (y[k] - m);
    CHECK(std::fabs(v - var) <= 3.0 * std::sqrt(sample_variance(sq) / n));
  }
}

TEST_CASE("density domain errors", "[density]") {
  CHECK_THROWS_AS(log_density(1.0, {1.0, 1.0, 1.05}), DensityRangeError);
  CHECK_THROWS_AS(log_density(1.0, {1.0, 1.0, 1.96}), DensityRangeError);
  CHECK_THROWS_AS(log_density(0.0, {1.0, 1.0, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(log_density(1.0, {-1.0, 1.0, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(log_density(1e12, {1.0, 0.01, 1.1}), DensityEvaluationError);
  CHECK_NOTHROW(log_density(1.0, {1.0, 1.0, 1.05}, PowerRange{1.01, 1.99}));
}
