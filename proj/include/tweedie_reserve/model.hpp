// Multiplicative mean structure mu_{i,j} = alpha_i beta_j, the nested model
// ladder M0..M6, uniform prior boxes and the triangle log-likelihood.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tweedie_reserve/triangle.hpp"
#include "tweedie_reserve/tweedie_density.hpp"

namespace tweedie {

/// Full parameter vector (p, phi, alpha_0..alpha_I, beta_0..beta_I), alpha_0 = 1.
struct TweedieParams {
  double p = 1.5;
  double phi = 1.0;
  std::vector<double> alpha;
  std::vector<double> beta;

  int I() const noexcept { return static_cast<int>(alpha.size()) - 1; }
  double mean(int i, int j) const { return alpha[static_cast<std::size_t>(i)] * beta[static_cast<std::size_t>(j)]; }
};

class ModelConsistencyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Constraint map tying alpha / beta coordinates into shared blocks.
///
/// Free coordinates are ordered (p, phi, alpha groups..., beta groups...).
/// An alpha index mapped to kFixedOne is held at 1.
class ModelSpec {
 public:
  static constexpr int kFixedOne = -1;

  ModelSpec(std::string id, std::vector<int> alpha_groups, std::vector<int> beta_groups)
      : id_(std::move(id)), alpha_groups_(std::move(alpha_groups)), beta_groups_(std::move(beta_groups)) {
    if (alpha_groups_.size() != beta_groups_.size() || alpha_groups_.empty())
      throw std::invalid_argument("alpha and beta maps must both cover 0..I");
    if (alpha_groups_.front() != kFixedOne) throw std::invalid_argument("alpha_0 must be fixed at 1");
    alpha_count_ = count_groups(alpha_groups_, true);
    beta_count_ = count_groups(beta_groups_, false);
  }

  const std::string& id() const noexcept { return id_; }
  int I() const noexcept { return static_cast<int>(alpha_groups_.size()) - 1; }
  const std::vector<int>& alpha_groups() const noexcept { return alpha_groups_; }
  const std::vector<int>& beta_groups() const noexcept { return beta_groups_; }
  int alpha_group_count() const noexcept { return alpha_count_; }
  int beta_group_count() const noexcept { return beta_count_; }

  /// N_[k], including p and phi.
  int free_param_count() const noexcept { return 2 + alpha_count_ + beta_count_; }

  int p_index() const noexcept { return 0; }
  int phi_index() const noexcept { return 1; }
  int alpha_index(int group) const noexcept { return 2 + group; }
  int beta_index(int group) const noexcept { return 2 + alpha_count_ + group; }

  /// Free-coordinate index driving alpha_i, or nullopt when alpha_i is fixed.
  std::optional<int> alpha_coordinate(int i) const {
    const int g = alpha_groups_.at(static_cast<std::size_t>(i));
    if (g == kFixedOne) return std::nullopt;
    return alpha_index(g);
  }
  int beta_coordinate(int j) const { return beta_index(beta_groups_.at(static_cast<std::size_t>(j))); }

  /// Column names of the free coordinates: p, phi, alpha_1.., beta_0...
  std::vector<std::string> coordinate_names() const {
    std::vector<std::string> names{"p", "phi"};
    for (int g = 0; g < alpha_count_; ++g) names.push_back("alpha_" + std::to_string(g + 1));
    for (int g = 0; g < beta_count_; ++g) names.push_back("beta_" + std::to_string(g));
    return names;
  }

  /// Free coordinates to the full parameter vector.
  TweedieParams expand(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != free_param_count())
      throw ModelConsistencyError("free coordinate vector has wrong length for " + id_);
    TweedieParams out;
    out.p = x[0];
    out.phi = x[1];
    out.alpha.resize(alpha_groups_.size());
    out.beta.resize(beta_groups_.size());
    for (std::size_t i = 0; i < alpha_groups_.size(); ++i)
      out.alpha[i] = alpha_groups_[i] == kFixedOne ? 1.0 : x[static_cast<std::size_t>(alpha_index(alpha_groups_[i]))];
    for (std::size_t j = 0; j < beta_groups_.size(); ++j)
      out.beta[j] = x[static_cast<std::size_t>(beta_index(beta_groups_[j]))];
    return out;
  }

  /// Full parameters to free coordinates; throws if tied entries differ.
  std::vector<double> compress(const TweedieParams& params, double tolerance = 1e-12) const {
    check_dimensions(params);
    std::vector<double> x(static_cast<std::size_t>(free_param_count()), std::numeric_limits<double>::quiet_NaN());
    x[0] = params.p;
    x[1] = params.phi;
    auto tie = [&](std::size_t k, double v, const char* what, std::size_t idx) {
      if (std::isnan(x[k])) {
        x[k] = v;
      } else if (std::fabs(x[k] - v) > tolerance * std::max(1.0, std::fabs(v))) {
        throw ModelConsistencyError(std::string("tied ") + what + " coordinate " + std::to_string(idx) +
                                    " differs from its block in " + id_);
      }
    };
    for (std::size_t i = 0; i < alpha_groups_.size(); ++i) {
      if (alpha_groups_[i] == kFixedOne) {
        if (std::fabs(params.alpha[i] - 1.0) > tolerance)
          throw ModelConsistencyError("alpha_" + std::to_string(i) + " must equal 1 in " + id_);
      } else {
        tie(static_cast<std::size_t>(alpha_index(alpha_groups_[i])), params.alpha[i], "alpha", i);
      }
    }
    for (std::size_t j = 0; j < beta_groups_.size(); ++j)
      tie(static_cast<std::size_t>(beta_index(beta_groups_[j])), params.beta[j], "beta", j);
    return x;
  }

  void check_dimensions(const TweedieParams& params) const {
    if (params.alpha.size() != alpha_groups_.size() || params.beta.size() != beta_groups_.size())
      throw ModelConsistencyError("parameter dimension does not match model " + id_);
  }

  /// Sizes of the alpha blocks; the fixed block (if any) comes first.
  std::vector<int> alpha_block_sizes() const { return block_sizes(alpha_groups_, alpha_count_, true); }
  std::vector<int> beta_block_sizes() const { return block_sizes(beta_groups_, beta_count_, false); }

 private:
  static int count_groups(const std::vector<int>& groups, bool allow_fixed) {
    int max_g = -1;
    for (int g : groups) {
      if (g == kFixedOne) {
        if (!allow_fixed) throw std::invalid_argument("beta coordinates cannot be fixed");
        continue;
      }
      if (g < 0) throw std::invalid_argument("negative group index");
      max_g = std::max(max_g, g);
    }
    std::vector<bool> seen(static_cast<std::size_t>(max_g + 1), false);
    for (int g : groups)
      if (g >= 0) seen[static_cast<std::size_t>(g)] = true;
    for (bool s : seen)
      if (!s) throw std::invalid_argument("group indices must be contiguous from 0");
    return max_g + 1;
  }

  static std::vector<int> block_sizes(const std::vector<int>& groups, int count, bool fixed_first) {
    std::vector<int> sizes;
    if (fixed_first) {
      const auto fixed = std::count(groups.begin(), groups.end(), kFixedOne);
      if (fixed > 0) sizes.push_back(static_cast<int>(fixed));
    }
    for (int g = 0; g < count; ++g) sizes.push_back(static_cast<int>(std::count(groups.begin(), groups.end(), g)));
    return sizes;
  }

  std::string id_;
  std::vector<int> alpha_groups_;
  std::vector<int> beta_groups_;
  int alpha_count_ = 0;
  int beta_count_ = 0;
};

namespace detail {

/// Maps index ranges [first, last] to consecutive group numbers; -1 marks the fixed block.
inline std::vector<int> blocks(int size, std::initializer_list<std::pair<int, int>> ranges, int first_group) {
  std::vector<int> out(static_cast<std::size_t>(size), -2);
  int g = first_group;
  for (auto [a, b] : ranges) {
    for (int k = a; k <= b; ++k) out[static_cast<std::size_t>(k)] = g;
    ++g;
  }
  return out;
}

}  // namespace detail

/// M0 saturated; M1 one level; M2..M5 the homogeneous-block models (I = 9 only);
/// M6 a common exposure for accident years 1..I.
inline ModelSpec model_spec(const std::string& name, int I) {
  using detail::blocks;
  const int n = I + 1;
  if (I < 0) throw std::invalid_argument("I must be non-negative");
  if (name == "M0") {
    std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    a[0] = ModelSpec::kFixedOne;
    for (int i = 1; i < n; ++i) a[static_cast<std::size_t>(i)] = i - 1;
    for (int j = 0; j < n; ++j) b[static_cast<std::size_t>(j)] = j;
    return ModelSpec("M0", a, b);
  }
  if (name == "M1") {
    return ModelSpec("M1", std::vector<int>(static_cast<std::size_t>(n), ModelSpec::kFixedOne),
                     std::vector<int>(static_cast<std::size_t>(n), 0));
  }
  if (name == "M6") {
    if (I < 1) throw std::invalid_argument("M6 needs I >= 1");
    std::vector<int> a(static_cast<std::size_t>(n), 0), b(static_cast<std::size_t>(n));
    a[0] = ModelSpec::kFixedOne;
    for (int j = 0; j < n; ++j) b[static_cast<std::size_t>(j)] = j;
    return ModelSpec("M6", a, b);
  }
  if (name == "M2" || name == "M3" || name == "M4" || name == "M5") {
    if (I != 9) throw std::invalid_argument(name + " is defined for a 10x10 triangle (I = 9) only");
    if (name == "M2")
      return ModelSpec("M2", blocks(n, {{0, 4}, {5, 9}}, -1), blocks(n, {{0, 4}, {5, 9}}, 0));
    if (name == "M3")
      return ModelSpec("M3", blocks(n, {{0, 1}, {2, 5}, {6, 9}}, -1), blocks(n, {{0, 1}, {2, 5}, {6, 9}}, 0));
    if (name == "M4")
      return ModelSpec("M4", blocks(n, {{0, 1}, {2, 3}, {4, 6}, {7, 9}}, -1),
                       blocks(n, {{0, 1}, {2, 3}, {4, 6}, {7, 9}}, 0));
    return ModelSpec("M5", blocks(n, {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}}, -1),
                     blocks(n, {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}}, 0));
  }
  throw std::invalid_argument("unknown model '" + name + "' (expected M0..M6)");
}

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names{"M0", "M1", "M2", "M3", "M4", "M5", "M6"};
  return names;
}

/// Default uniform prior bounds per parameter kind.
struct PriorDefaults {
  double p_lo = 1.1, p_hi = 1.95;
  double phi_lo = 0.01, phi_hi = 100.0;
  double alpha_lo = 0.01, alpha_hi = 100.0;
  double beta_lo = 0.01, beta_hi = 1e4;
};

/// Uniform prior bounds, one (a, b) per free coordinate.
struct PriorBox {
  std::vector<double> lower;
  std::vector<double> upper;

  using Defaults = PriorDefaults;

  static PriorBox for_model(const ModelSpec& spec, const Defaults& d = {}) {
    PriorBox box;
    box.lower = {d.p_lo, d.phi_lo};
    box.upper = {d.p_hi, d.phi_hi};
    for (int g = 0; g < spec.alpha_group_count(); ++g) {
      box.lower.push_back(d.alpha_lo);
      box.upper.push_back(d.alpha_hi);
    }
    for (int g = 0; g < spec.beta_group_count(); ++g) {
      box.lower.push_back(d.beta_lo);
      box.upper.push_back(d.beta_hi);
    }
    box.validate();
    return box;
  }

  std::size_t size() const noexcept { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("prior box bounds differ in length");
    for (std::size_t k = 0; k < lower.size(); ++k)
      if (!(lower[k] < upper[k])) throw std::invalid_argument("prior box requires a < b");
  }

  bool contains(const std::vector<double>& x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!(x[k] > lower[k] && x[k] < upper[k])) return false;
    return true;
  }

  double log_volume() const {
    double s = 0.0;
    for (std::size_t k = 0; k < lower.size(); ++k) s += std::log(upper[k] - lower[k]);
    return s;
  }
};

/// -sum log(b - a) inside the box, -infinity outside.
inline double log_prior(const TweedieParams& params, const ModelSpec& spec, const PriorBox& box) {
  std::vector<double> x;
  try {
    x = spec.compress(params);
  } catch (const ModelConsistencyError&) {
    return -std::numeric_limits<double>::infinity();
  }
  if (!box.contains(x)) return -std::numeric_limits<double>::infinity();
  return -box.log_volume();
}

/// mu_{i,j} = alpha_i beta_j over the full (I+1)x(I+1) grid, row-major.
class MeanMatrix {
 public:
  MeanMatrix(int I, std::vector<double> values) : n_(I + 1), values_(std::move(values)) {}
  double operator()(int i, int j) const { return values_.at(static_cast<std::size_t>(i * n_ + j)); }
  int I() const noexcept { return n_ - 1; }

 private:
  int n_;
  std::vector<double> values_;
};

inline MeanMatrix mean_matrix(const TweedieParams& params, const ModelSpec& spec) {
  spec.compress(params);  // tie check
  const int n = spec.I() + 1;
  std::vector<double> v(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double mu = params.mean(i, j);
      if (!(mu > 0.0)) throw ModelConsistencyError("means must be positive");
      v[static_cast<std::size_t>(i * n + j)] = mu;
    }
  return MeanMatrix(spec.I(), std::move(v));
}

/// Density failure at a specific observed cell.
class CellEvaluationError : public std::runtime_error {
 public:
  CellEvaluationError(CellIndex cell, const std::string& what)
      : std::runtime_error("cell (" + std::to_string(cell.i) + "," + std::to_string(cell.j) + "): " + what),
        cell_(cell) {}
  CellIndex cell() const noexcept { return cell_; }

 private:
  CellIndex cell_;
};

/// Log-likelihood contribution of one cell.
template <class LogGammaTerms>
double cell_log_likelihood(double y, double mu, double phi, double p, LogGammaTerms& terms) {
  if (y == 0.0) return log_zero_mass({mu, phi, p});
  const double log_c = log_series_constant(y, phi, p, terms).log_c;
  return log_c + mean_term(y, mu, p) / phi;
}

/// Sum over observed cells of the log density (log zero mass for Y = 0).
inline double log_likelihood(const Triangle& t, const TweedieParams& params, const PowerRange& range = {}) {
  if (params.I() != t.I() || static_cast<int>(params.beta.size()) != t.I() + 1)
    throw ModelConsistencyError("parameter dimension does not match the triangle");
  if (!range.contains(params.p)) throw DensityRangeError(params.p);
  if (!(params.phi > 0.0)) throw std::invalid_argument("phi must be positive");
  CachedLogGammaTerms terms(gamma_shape(params.p));
  CompensatedSum sum;
  for (int i = 0; i <= t.I(); ++i)
    for (int j = 0; j <= t.I() - i; ++j) {
      try {
        const double mu = params.mean(i, j);
        if (!(mu > 0.0)) throw std::invalid_argument("non-positive mean");
        sum.add(cell_log_likelihood(t(i, j), mu, params.phi, params.p, terms));
      } catch (const std::exception& e) {
        throw CellEvaluationError({i, j}, e.what());
      }
    }
  return sum.value();
}

inline double log_likelihood(const Triangle& t, const TweedieParams& params, const ModelSpec& spec,
                             const PowerRange& range = {}) {
  spec.compress(params);
  return log_likelihood(t, params, range);
}

struct ProfileBeta {
  std::vector<double> beta;
  std::vector<bool> boundary;  // beta_k = 0 from an all-zero column
};

/// Stationary beta given alpha and p:
/// beta_k = sum_i Y_{i,k} alpha_i^{1-p} / sum_i alpha_i^{2-p}, i = 0..I-k.
inline ProfileBeta profile_beta(const Triangle& t, const std::vector<double>& alpha, double p) {
  if (static_cast<int>(alpha.size()) != t.I() + 1) throw std::invalid_argument("alpha has wrong length");
  for (double a : alpha)
    if (!(a > 0.0)) throw std::invalid_argument("alpha must be positive");
  ProfileBeta out;
  out.beta.resize(alpha.size());
  out.boundary.assign(alpha.size(), false);
  for (int k = 0; k <= t.I(); ++k) {
    CompensatedSum num, den;
    for (int i = 0; i <= t.I() - k; ++i) {
      const double a = alpha[static_cast<std::size_t>(i)];
      num.add(t(i, k) * std::pow(a, 1.0 - p));
      den.add(std::pow(a, 2.0 - p));
    }
    out.beta[static_cast<std::size_t>(k)] = num.value() / den.value();
    out.boundary[static_cast<std::size_t>(k)] = num.value() == 0.0;
  }
  return out;
}

/// Profile of the tied beta blocks of `spec` (a block pools the sums of its columns).
inline ProfileBeta profile_beta(const Triangle& t, const std::vector<double>& alpha, double p, const ModelSpec& spec) {
  const int nb = spec.beta_group_count();
  std::vector<CompensatedSum> num(static_cast<std::size_t>(nb)), den(static_cast<std::size_t>(nb));
  for (int i = 0; i <= t.I(); ++i) {
    const double a = alpha[static_cast<std::size_t>(i)];
    const double a1 = std::pow(a, 1.0 - p);
    const double a2 = std::pow(a, 2.0 - p);
    for (int j = 0; j <= t.I() - i; ++j) {
      const auto g = static_cast<std::size_t>(spec.beta_groups()[static_cast<std::size_t>(j)]);
      num[g].add(t(i, j) * a1);
      den[g].add(a2);
    }
  }
  ProfileBeta out;
  out.beta.resize(static_cast<std::size_t>(t.I() + 1));
  out.boundary.resize(out.beta.size());
  for (int j = 0; j <= t.I(); ++j) {
    const auto g = static_cast<std::size_t>(spec.beta_groups()[static_cast<std::size_t>(j)]);
    out.beta[static_cast<std::size_t>(j)] = num[g].value() / den[g].value();
    out.boundary[static_cast<std::size_t>(j)] = num[g].value() == 0.0;
  }
  return out;
}

/// Stationary alpha blocks given beta and p (fixed blocks stay at 1).
inline std::vector<double> profile_alpha(const Triangle& t, const std::vector<double>& beta, double p,
                                         const ModelSpec& spec) {
  const int na = spec.alpha_group_count();
  std::vector<CompensatedSum> num(static_cast<std::size_t>(na)), den(static_cast<std::size_t>(na));
  for (int j = 0; j <= t.I(); ++j) {
    const double b = beta[static_cast<std::size_t>(j)];
    const double b1 = std::pow(b, 1.0 - p);
    const double b2 = std::pow(b, 2.0 - p);
    for (int i = 0; i <= t.I() - j; ++i) {
      const int g = spec.alpha_groups()[static_cast<std::size_t>(i)];
      if (g == ModelSpec::kFixedOne) continue;
      num[static_cast<std::size_t>(g)].add(t(i, j) * b1);
      den[static_cast<std::size_t>(g)].add(b2);
    }
  }
  std::vector<double> alpha(static_cast<std::size_t>(t.I() + 1), 1.0);
  for (int i = 0; i <= t.I(); ++i) {
    const int g = spec.alpha_groups()[static_cast<std::size_t>(i)];
    if (g != ModelSpec::kFixedOne)
      alpha[static_cast<std::size_t>(i)] = num[static_cast<std::size_t>(g)].value() / den[static_cast<std::size_t>(g)].value();
  }
  return alpha;
}

struct ScoreSolution {
  std::vector<double> alpha;
  std::vector<double> beta;
  int iterations = 0;
  bool converged = false;
};

/// Solves the alpha/beta score equations at a fixed p by alternating the two
/// closed-form profiles. The solution does not depend on phi. Valid for
/// p in [1, 2], including the quasi-likelihood boundaries.
inline ScoreSolution solve_score_equations(const Triangle& t, const ModelSpec& spec, double p,
                                           int max_iterations = 100000, double tolerance = 1e-14) {
  ScoreSolution s;
  s.alpha.assign(static_cast<std::size_t>(t.I() + 1), 1.0);
  s.beta = profile_beta(t, s.alpha, p, spec).beta;
  for (s.iterations = 1; s.iterations <= max_iterations; ++s.iterations) {
    const auto prev = s.alpha;
    s.alpha = profile_alpha(t, s.beta, p, spec);
    for (double a : s.alpha)
      if (!(a > 0.0)) throw std::runtime_error("score iteration produced a non-positive exposure");
    s.beta = profile_beta(t, s.alpha, p, spec).beta;
    double change = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i)
      change = std::max(change, std::fabs(s.alpha[i] - prev[i]) / std::max(1.0, std::fabs(prev[i])));
    if (change <= tolerance) {
      s.converged = true;
      break;
    }
  }
  return s;
}

/// Sum of alpha_i beta_j over the lower triangle.
inline double expected_reserve(const TweedieParams& params) {
  const int n = params.I();
  CompensatedSum s;
  for (int i = 1; i <= n; ++i)
    for (int j = n - i + 1; j <= n; ++j) s.add(params.mean(i, j));
  return s.value();
}

/// Sum over the lower triangle of phi (alpha_i beta_j)^p.
inline double process_variance(const TweedieParams& params) {
  const int n = params.I();
  CompensatedSum s;
  for (int i = 1; i <= n; ++i)
    for (int j = n - i + 1; j <= n; ++j) s.add(params.phi * std::pow(params.mean(i, j), params.p));
  return s.value();
}

}  // namespace tweedie
