// Derivative-free Nelder-Mead simplex minimizer with dimension-adaptive
// coefficients (Gao & Han 2012) and restart on convergence.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace tweedie {

struct NelderMeadOptions {
  double x_tolerance = 1e-9;   // simplex diameter (max-norm to the best vertex)
  double f_tolerance = 1e-10;  // spread of objective values over the simplex
  long max_evaluations = 100000;
  double initial_step = 0.1;
  /// Rebuild the simplex around a converged point until it stops moving.
  int max_restarts = 5;
  /// Evaluations without an improvement of the best value by more than
  /// f_tolerance after which the simplex is taken to sit at the objective's
  /// rounding floor; 0 selects 200 (n + 1).
  long stall_evaluations = 0;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  long evaluations = 0;
  bool converged = false;
  /// Converged by the stall rule rather than by simplex size.
  bool stalled = false;
};

/// Minimizes `f`. Non-finite objective values are treated as +infinity.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, std::vector<double> start, const NelderMeadOptions& opts = {}) {
  const std::size_t n = start.size();
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  const double dn = static_cast<double>(n);
  const double c_reflect = 1.0;
  const double c_expand = n >= 2 ? 1.0 + 2.0 / dn : 2.0;
  const double c_contract = n >= 2 ? 0.75 - 0.5 / dn : 0.5;
  const double c_shrink = n >= 2 ? 1.0 - 1.0 / dn : 0.5;

  std::vector<double> best = std::move(start);
  double best_value = eval(best);

  for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
    std::vector<std::vector<double>> simplex(n + 1, best);
    std::vector<double> values(n + 1, best_value);
    for (std::size_t k = 0; k < n; ++k) {
      const double step = opts.initial_step * (attempt == 0 ? 1.0 : 0.1);
      simplex[k + 1][k] += step;
      values[k + 1] = eval(simplex[k + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    bool converged = false;
    bool stalled = false;
    const long stall_window = opts.stall_evaluations > 0 ? opts.stall_evaluations : 200 * static_cast<long>(n + 1);
    double anchor = *std::min_element(values.begin(), values.end());
    long anchor_evaluations = res.evaluations;
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    while (res.evaluations < opts.max_evaluations) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const auto ib = order.front();
      const auto iw = order.back();
      const auto is = order[n - 1];

      double diameter = 0.0;
      for (std::size_t v = 0; v <= n; ++v)
        for (std::size_t k = 0; k < n; ++k) diameter = std::max(diameter, std::fabs(simplex[v][k] - simplex[ib][k]));
      const double spread = values[iw] - values[ib];
      if (diameter < opts.x_tolerance && spread < opts.f_tolerance) {
        converged = true;
        break;
      }
      if (values[ib] < anchor - opts.f_tolerance) {
        anchor = values[ib];
        anchor_evaluations = res.evaluations;
      } else if (res.evaluations - anchor_evaluations >= stall_window) {
        converged = stalled = true;
        break;
      }

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t v = 0; v <= n; ++v) {
        if (v == iw) continue;
        for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[v][k] / dn;
      }
      for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + c_reflect * (centroid[k] - simplex[iw][k]);
      const double fr = eval(xr);
      if (fr < values[ib]) {
        for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + c_expand * (xr[k] - centroid[k]);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[iw] = xe;
          values[iw] = fe;
        } else {
          simplex[iw] = xr;
          values[iw] = fr;
        }
        continue;
      }
      if (fr < values[is]) {
        simplex[iw] = xr;
        values[iw] = fr;
        continue;
      }
      const bool outside = fr < values[iw];
      for (std::size_t k = 0; k < n; ++k)
        xc[k] = outside ? centroid[k] + c_contract * (xr[k] - centroid[k])
                        : centroid[k] - c_contract * (centroid[k] - simplex[iw][k]);
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[iw])) {
        simplex[iw] = xc;
        values[iw] = fc;
        continue;
      }
      for (std::size_t v = 0; v <= n; ++v) {
        if (v == ib) continue;
        for (std::size_t k = 0; k < n; ++k) simplex[v][k] = simplex[ib][k] + c_shrink * (simplex[v][k] - simplex[ib][k]);
        values[v] = eval(simplex[v]);
      }
    }
    const auto ib = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    const double improvement = best_value - values[ib];
    double moved = 0.0;
    for (std::size_t k = 0; k < n; ++k) moved = std::max(moved, std::fabs(simplex[ib][k] - best[k]));
    if (values[ib] <= best_value) {
      best = simplex[ib];
      best_value = values[ib];
    }
    res.converged = converged;
    res.stalled = stalled;
    if (!converged) break;
    if (attempt > 0 && improvement < opts.f_tolerance && (moved < opts.x_tolerance * 10.0 || stalled)) break;
  }
  res.x = std::move(best);
  res.value = best_value;
  return res;
}

}  // namespace tweedie
