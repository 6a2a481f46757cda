// Sample statistics shared by posterior summaries and reserve reports.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "tweedie_reserve/model.hpp"

namespace tweedie {

inline constexpr std::size_t kDefaultBlockLength = 5000;

inline double sample_mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of an empty sample");
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

/// Variance with divisor n (the Monte Carlo estimate of a posterior variance).
inline double sample_variance(std::span<const double> x) {
  const double m = sample_mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return s.value() / static_cast<double>(x.size());
}

inline double sample_covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("covariance of samples with different lengths");
  const double mx = sample_mean(x), my = sample_mean(y);
  CompensatedSum s;
  for (std::size_t k = 0; k < x.size(); ++k) s.add((x[k] - mx) * (y[k] - my));
  return s.value() / static_cast<double>(x.size());
}

inline double sample_correlation(std::span<const double> x, std::span<const double> y) {
  const double c = sample_covariance(x, y);
  const double d = std::sqrt(sample_variance(x) * sample_variance(y));
  return d > 0.0 ? c / d : std::numeric_limits<double>::quiet_NaN();
}

/// Nearest-rank order statistic: the k-th smallest value with k = ceil(q n), k >= 1.
inline double empirical_quantile(std::span<const double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must be in (0, 1)");
  const auto n = static_cast<double>(x.size());
  auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-9 * n));
  k = std::clamp<std::size_t>(k, 1, x.size());
  std::vector<double> v(x.begin(), x.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

/// Standard deviation of a statistic over consecutive blocks divided by
/// sqrt(number of blocks). A trailing partial block is ignored; fewer than two
/// blocks give NaN.
inline double blocking_standard_error(std::span<const double> x,
                                      const std::function<double(std::span<const double>)>& statistic,
                                      std::size_t block_length = kDefaultBlockLength) {
  if (block_length == 0) throw std::invalid_argument("block length must be positive");
  const std::size_t blocks = x.size() / block_length;
  if (blocks < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values;
  values.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) values.push_back(statistic(x.subspan(b * block_length, block_length)));
  const double var = sample_variance(values) * static_cast<double>(blocks) / static_cast<double>(blocks - 1);
  return std::sqrt(var / static_cast<double>(blocks));
}

inline double blocking_standard_error(std::span<const double> x, std::size_t block_length = kDefaultBlockLength) {
  return blocking_standard_error(x, [](std::span<const double> b) { return sample_mean(b); }, block_length);
}

}  // namespace tweedie
