#pragma once
// Shared closed-form linear fit for the factor engines: given shape values s
// and responses y, solve y ~ scale*s (+ intercept). One iterative-refinement
// pass against the residuals absorbs the rounding of the accumulated sums, so
// exactly representable fits (e.g. a constant target against a constant
// shape) come back with a true zero MSE.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "bbp/engines.hpp"

namespace bbp::detail {

struct LinearFit {
  double scale = 0.0;
  double intercept = 0.0;
  double mse = kInfiniteMse;
};

inline double mean_squared_residual(std::span<const double> s, std::span<const double> y,
                                    double scale, double intercept) {
  double sq = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = y[i] - scale * s[i] - intercept;
    sq += r * r;
  }
  const double mse = sq / static_cast<double>(s.size());
  return std::isfinite(mse) ? mse : kInfiniteMse;
}

inline LinearFit solve_linear(std::span<const double> s, std::span<const double> y,
                              FitMode mode) {
  const std::size_t n = s.size();
  LinearFit fit;
  if (n == 0) return fit;

  // Solve for the correction against `target`, then fold it into the fit.
  // First round target = y with zero current fit; second round target = the
  // residuals, refining scale/intercept by their remaining least-squares
  // correction.
  fit.scale = 0.0;
  fit.intercept = 0.0;
  for (int round = 0; round < 2; ++round) {
    double dk = 0.0, dc = 0.0;
    if (mode == FitMode::Scale) {
      double ss = 0.0, sr = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.scale * s[i];
        ss += s[i] * s[i];
        sr += s[i] * r;
      }
      if (!(ss > 0.0)) break;
      dk = sr / ss;
    } else {
      double sm = 0.0, rm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sm += s[i];
        rm += y[i] - fit.scale * s[i] - fit.intercept;
      }
      sm /= static_cast<double>(n);
      rm /= static_cast<double>(n);
      double var = 0.0, cov = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.scale * s[i] - fit.intercept;
        var += (s[i] - sm) * (s[i] - sm);
        cov += (s[i] - sm) * (r - rm);
      }
      dk = var > 0.0 ? cov / var : 0.0;
      dc = rm - dk * sm;
    }
    if (!std::isfinite(dk) || !std::isfinite(dc)) break;
    const double next_scale = fit.scale + dk;
    const double next_intercept = fit.intercept + dc;
    const double next_mse = mean_squared_residual(s, y, next_scale, next_intercept);
    if (round > 0 && !(next_mse < fit.mse)) break;  // keep only improving refinements
    fit.scale = next_scale;
    fit.intercept = next_intercept;
    fit.mse = next_mse;
    if (fit.mse == 0.0) break;
  }
  if (fit.mse == kInfiniteMse) fit.mse = mean_squared_residual(s, y, fit.scale, fit.intercept);
  return fit;
}

}  // namespace bbp::detail
