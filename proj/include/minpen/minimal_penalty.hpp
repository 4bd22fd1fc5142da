#pragma once

// One-dimensional noise-variance estimation by minimal penalty.
//
// For a penalty level C the selected ridge parameter is
//   lambda0(C) = argmin_lambda  (1/n)||A_lambda y - y||^2 + C pen_min(lambda).
// Below the noise variance the selection overfits (df close to n); above it
// df collapses. The estimate is the smallest C on a geometric grid where
// df(lambda0(C)) drops below n/2.

#include "minpen/kernel.hpp"

#include <optional>

namespace minpen {

/// Response of a single-task problem (or a projection Y z).
class ResponseVector {
public:
  explicit ResponseVector(Vector values) : values_(std::move(values)) {
    if (!values_.allFinite()) throw input_error("response vector contains non-finite values");
  }
  [[nodiscard]] Index n() const noexcept { return values_.size(); }
  [[nodiscard]] const Vector& values() const noexcept { return values_; }

private:
  Vector values_;
};

/// Per-lambda spectral quantities over a ridge grid, shared by every
/// response that uses the same kernel.
struct PenaltyGrid {
  std::vector<Ridge> lambdas;
  Matrix factors;           // s_i(lambda_k), n x G
  Matrix residual_weights;  // (1 - s_i(lambda_k))^2
  Vector dfs;               // df(lambda_k)
  Vector pen_mins;          // pen_min(lambda_k)

  PenaltyGrid(const KernelSpectrum& spec, std::vector<Ridge> grid) : lambdas(std::move(grid)) {
    if (lambdas.empty()) throw input_error("penalty grid is empty");
    const auto g = static_cast<Index>(lambdas.size());
    factors.resize(spec.n(), g);
    residual_weights.resize(spec.n(), g);
    dfs.resize(g);
    pen_mins.resize(g);
    for (Index k = 0; k < g; ++k) {
      const Vector s = shrinkage_factors(spec, lambdas[static_cast<std::size_t>(k)]);
      factors.col(k) = s;
      residual_weights.col(k) = (1.0 - s.array()).square().matrix();
      dfs(k) = s.sum();
      pen_mins(k) = (2.0 * s.sum() - s.squaredNorm()) / static_cast<double>(spec.n());
    }
  }

  /// The default grid: df-inversion targets 0..rank(K) (+inf included).
  static PenaltyGrid from_df_targets(const KernelSpectrum& spec, int refinement = 1) {
    return PenaltyGrid(spec, df_grid(spec, refinement));
  }

  [[nodiscard]] Index size() const noexcept { return static_cast<Index>(lambdas.size()); }

  /// (1/n)||A_lambda y - y||^2 for every grid lambda, from Q y.
  [[nodiscard]] Vector residuals(const Vector& spectral_y) const {
    return residual_weights.transpose() * spectral_y.cwiseAbs2() / static_cast<double>(spectral_y.size());
  }

  /// argmin_k residual_k + c pen_k; ties go to the larger lambda.
  [[nodiscard]] Index argmin(const Vector& residual, double c) const {
    Index best = 0;
    double best_value = residual(0) + c * pen_mins(0);
    for (Index k = 1; k < size(); ++k) {
      const double value = residual(k) + c * pen_mins(k);
      const auto& lk = lambdas[static_cast<std::size_t>(k)];
      const auto& lb = lambdas[static_cast<std::size_t>(best)];
      if (value < best_value || (value == best_value && lk > lb)) {
        best = k;
        best_value = value;
      }
    }
    return best;
  }
};

struct CalibrationPath {
  std::vector<double> c_grid;
  std::vector<Ridge> lambda_at_c;
  std::vector<double> df_at_c;
  double c_hat = 0.0;
  double df_at_c_hat = 0.0;
  /// The jump was already below n/2 at the first grid point (includes y = 0).
  bool degenerate = false;
  /// Smallest C with df(lambda0(C)) in [n/10, n/3], if any. Diagnostic only.
  std::optional<double> window_c_hat;
};

struct VarianceEstimate {
  double c_hat = 0.0;
  CalibrationPath path;
};

struct CalibrationOptions {
  int c_points = 200;
  double c_min_factor = 1e-4;  ///< c_min = factor * v_hat
  double c_max_factor = 1e2;   ///< c_max = factor * v_hat
  double jump_fraction = 0.5;  ///< jump when df < fraction * n
};

/// Selected lambda for one penalty level C over an explicit grid.
inline Ridge lambda_path_point(const KernelSpectrum& spec, const ResponseVector& y, double c,
                               const std::vector<Ridge>& lambda_grid) {
  if (!(c > 0.0)) throw input_error("lambda_path_point: C must be > 0");
  if (y.n() != spec.n()) throw input_error("lambda_path_point: response length does not match kernel size");
  const bool has_infinity =
      std::any_of(lambda_grid.begin(), lambda_grid.end(), [](Ridge r) { return r.is_infinite(); });
  if (!has_infinity) throw input_error("lambda_path_point: grid must contain the +inf sentinel");
  const PenaltyGrid grid(spec, lambda_grid);
  const Vector residual = grid.residuals(spec.to_spectral(y.values()));
  return grid.lambdas[static_cast<std::size_t>(grid.argmin(residual, c))];
}

/// Crude data scale (1/n)||y - mean(y)||^2, falling back to (1/n)||y||^2
/// for constant responses.
inline double variance_scale(const Vector& y) {
  const auto n = static_cast<double>(y.size());
  const double centered = (y.array() - y.mean()).square().sum() / n;
  return centered > 0.0 ? centered : y.squaredNorm() / n;
}

/// Minimal-penalty estimate a(y) of the noise variance, on a precomputed grid.
inline VarianceEstimate estimate_variance(const KernelSpectrum& spec, const ResponseVector& y, const PenaltyGrid& grid,
                                          const CalibrationOptions& opts = {}) {
  const Index n = spec.n();
  if (n < 4) throw input_error("estimate_variance: needs n >= 4");
  if (y.n() != n) throw input_error("estimate_variance: response length does not match kernel size");
  if (opts.c_points < 2) throw input_error("estimate_variance: C-grid needs >= 2 points");

  VarianceEstimate out;
  CalibrationPath& path = out.path;
  const double scale = variance_scale(y.values());
  if (scale == 0.0) {
    path.c_grid = {0.0};
    path.lambda_at_c = {Ridge::infinite()};
    path.df_at_c = {0.0};
    path.degenerate = true;
    return out;
  }

  const double c_min = opts.c_min_factor * scale;
  const double c_max = opts.c_max_factor * scale;
  const double log_step = std::log(c_max / c_min) / (opts.c_points - 1);
  const Vector residual = grid.residuals(spec.to_spectral(y.values()));
  const double threshold = opts.jump_fraction * static_cast<double>(n);
  const double window_lo = static_cast<double>(n) / 10.0, window_hi = static_cast<double>(n) / 3.0;

  std::optional<std::size_t> jump;
  for (int k = 0; k < opts.c_points; ++k) {
    const double c = k + 1 == opts.c_points ? c_max : c_min * std::exp(log_step * k);
    const Index best = grid.argmin(residual, c);
    const double d = grid.dfs(best);
    path.c_grid.push_back(c);
    path.lambda_at_c.push_back(grid.lambdas[static_cast<std::size_t>(best)]);
    path.df_at_c.push_back(d);
    if (!jump && d < threshold) jump = path.c_grid.size() - 1;
    if (!path.window_c_hat && d >= window_lo && d <= window_hi) path.window_c_hat = c;
  }
  if (!jump) {
    throw calibration_error("minimal-penalty calibration failed: df(lambda0(C)) >= n/2 on the whole C-grid [" +
                                std::to_string(c_min) + ", " + std::to_string(c_max) + "]",
                            {});
  }
  path.c_hat = path.c_grid[*jump];
  path.df_at_c_hat = path.df_at_c[*jump];
  path.degenerate = *jump == 0;
  out.c_hat = path.c_hat;
  return out;
}

inline VarianceEstimate estimate_variance(const KernelSpectrum& spec, const ResponseVector& y,
                                          const CalibrationOptions& opts = {}) {
  return estimate_variance(spec, y, PenaltyGrid::from_df_targets(spec), opts);
}

/// Y z: the single-task problem whose noise variance is z^T Sigma z.
inline ResponseVector project_responses(const Matrix& y, const Vector& z) {
  if (y.cols() != z.size())
    throw input_error("project_responses: Y has " + std::to_string(y.cols()) + " columns but z has length " +
                      std::to_string(z.size()));
  return ResponseVector(y * z);
}

}  // namespace minpen
