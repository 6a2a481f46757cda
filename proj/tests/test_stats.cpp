#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/stats.hpp"

using namespace tweedie;

TEST_CASE("moments use divisor n", "[stats]") {
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(sample_mean(x) == 2.5);
  CHECK(sample_variance(x) == 1.25);
  const std::vector<double> y{2, 4, 6, 8};
  CHECK(sample_covariance(x, y) == 2.5);
  CHECK(sample_correlation(x, y) == Catch::Approx(1.0));
}

TEST_CASE("nearest-rank quantile", "[stats]") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  std::reverse(x.begin(), x.end());
  CHECK(empirical_quantile(x, 0.75) == 75.0);
  CHECK(empirical_quantile(x, 0.9) == 90.0);
  CHECK(empirical_quantile(x, 0.95) == 95.0);
  CHECK(empirical_quantile(x, 1e-9) == 1.0);
  CHECK(empirical_quantile(x, 1.0 - 1e-12) == 100.0);
  CHECK_THROWS(empirical_quantile(x, 0.0));
  CHECK_THROWS(empirical_quantile(std::vector<double>{}, 0.5));
}

TEST_CASE("blocking standard error of independent draws", "[stats]") {
  Rng rng(2);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.normal();
  const double se = blocking_standard_error(x, 5000);
  // 20 blocks of independent normals: block means have sd 1/sqrt(5000).
  CHECK(se == Catch::Approx(1.0 / std::sqrt(100000.0)).epsilon(0.5));
  CHECK(std::isnan(blocking_standard_error(std::vector<double>(9999, 1.0), 5000)));
  CHECK(blocking_standard_error(std::vector<double>(20000, 1.0), 5000) == 0.0);
}
