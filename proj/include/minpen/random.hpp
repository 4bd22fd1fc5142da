#pragma once

#include "minpen/types.hpp"

#include <cstdint>
#include <random>

namespace minpen {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent stream seeds from a master seed.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) { return Rng(split_seed(master, stream)); }

inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Row-major fill order so that row i only depends on draws up to row i.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// Left factor L with L L^T = sigma: Cholesky, or the symmetric square root
/// with clamped eigenvalues when sigma is only semidefinite.
inline Matrix covariance_factor(const Matrix& sigma) {
  if (!is_symmetric(sigma, 1e-12)) throw input_error("covariance must be symmetric");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma);
  const Vector& ev = solver.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  if (ev.minCoeff() < -1e-10 * scale)
    throw input_error("covariance is not PSD (min eigenvalue " + std::to_string(ev.minCoeff()) + ")");
  return solver.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

/// n x p matrix whose rows are i.i.d. N(0, sigma).
inline Matrix draw_noise(const Matrix& sigma, Index n, Rng& rng) {
  const Matrix factor = covariance_factor(sigma);
  return standard_normal(n, sigma.rows(), rng) * factor.transpose();
}

/// Wishart W(scale, dof) by the Bartlett decomposition: W = L A A^T L^T with
/// A lower triangular, A_ii^2 ~ chi2(dof - i), A_ij ~ N(0,1) below the diagonal.
inline Matrix draw_wishart(const Matrix& scale, int dof, Rng& rng) {
  const Index p = scale.rows();
  if (scale.cols() != p) throw input_error("draw_wishart: scale must be square");
  if (dof < p) throw input_error("draw_wishart: dof (" + std::to_string(dof) + ") must be >= p (" + std::to_string(p) + ")");
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success) throw input_error("draw_wishart: scale must be positive definite");
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) {
    std::chi_squared_distribution<double> chi2(static_cast<double>(dof - i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Matrix la = l * a;
  Matrix w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

}  // namespace minpen
