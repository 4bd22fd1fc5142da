#pragma once

// Kernel evaluation, kernel-matrix spectra and the single-task spectral
// smoother A_lambda = K (K + n lambda I)^{-1}.
//
// Everything downstream works in the eigenbasis of K. With K = Q^T diag(mu) Q
// the smoother is diagonal with shrinkage factors mu_i / (mu_i + n lambda),
// so df, pen_min and the residual of any response are O(n) sums once Q y is
// known.

#include "minpen/types.hpp"

#include <algorithm>
#include <functional>
#include <span>
#include <sstream>

namespace minpen {

/// Design points, one per row (n x d).
class DesignMatrix {
public:
  explicit DesignMatrix(Matrix points) : points_(std::move(points)) {
    if (points_.rows() < 2) throw input_error("design needs n >= 2 points (got " + std::to_string(points_.rows()) + ")");
    if (points_.cols() < 1) throw input_error("design needs dimension d >= 1");
    if (!points_.allFinite()) throw input_error("design contains non-finite coordinates");
  }

  [[nodiscard]] Index n() const noexcept { return points_.rows(); }
  [[nodiscard]] Index d() const noexcept { return points_.cols(); }
  [[nodiscard]] const Matrix& points() const noexcept { return points_; }
  [[nodiscard]] auto point(Index i) const { return points_.row(i); }

private:
  Matrix points_;
};

/// k(x, y) = prod_j exp(-|x_j - y_j|).
template <typename A, typename B>
double kernel_eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  if (x.size() != y.size())
    throw input_error("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  double l1 = 0.0;
  for (Index j = 0; j < x.size(); ++j) l1 += std::abs(x(j) - y(j));
  return std::exp(-l1);
}

/// Plug-in point for other kernels. Arguments are row vectors of the design.
using KernelFunction = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&,
                                            const Eigen::Ref<const Eigen::RowVectorXd>&)>;

inline KernelFunction product_laplace_kernel() {
  return [](const Eigen::Ref<const Eigen::RowVectorXd>& x, const Eigen::Ref<const Eigen::RowVectorXd>& y) {
    return kernel_eval(x, y);
  };
}

/// Cross-kernel matrix (k(a_i, b_l)) between two point sets.
inline Matrix kernel_cross(const Matrix& a, const Matrix& b, const KernelFunction& k = product_laplace_kernel()) {
  if (a.cols() != b.cols()) throw input_error("kernel_cross: dimension mismatch");
  Matrix out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index l = 0; l < b.rows(); ++l) out(i, l) = k(a.row(i), b.row(l));
  return out;
}

inline Matrix kernel_gram(const DesignMatrix& design, const KernelFunction& k = product_laplace_kernel()) {
  const Index n = design.n();
  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i) {
    gram(i, i) = k(design.point(i), design.point(i));
    for (Index l = i + 1; l < n; ++l) gram(i, l) = gram(l, i) = k(design.point(i), design.point(l));
  }
  return gram;
}

/// Eigendecomposition K = Q^T diag(mu) Q with mu sorted descending. Rows of
/// Q are the eigenvectors. Immutable after construction.
class KernelSpectrum {
public:
  /// Relative threshold below which negative eigenvalues are an error
  /// rather than round-off.
  static constexpr double kNegativeTolerance = 1e-8;

  /// Decomposes a symmetric PSD matrix. If eigenvalues below
  /// -tol * mu_max appear and `jitter` > 0, K + jitter*I is decomposed instead.
  static KernelSpectrum decompose(const Matrix& k, double jitter = 0.0) {
    if (k.rows() != k.cols()) throw input_error("kernel matrix must be square");
    if (k.rows() < 1) throw input_error("kernel matrix is empty");
    if (!k.allFinite()) throw numeric_error("kernel matrix contains non-finite entries");

    auto attempt = [](const Matrix& m) {
      Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
      if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "eigendecomposition failed (n=" << m.rows() << ", max|K_ij|=" << m.cwiseAbs().maxCoeff() << ")";
        throw numeric_error(msg.str());
      }
      return solver;
    };

    auto solver = attempt(k);
    double applied = 0.0;
    const auto too_negative = [](const Vector& ev) {
      const double top = std::max(ev.maxCoeff(), 0.0);
      return ev.minCoeff() < -kNegativeTolerance * std::max(top, 1e-300);
    };
    if (too_negative(solver.eigenvalues()) && jitter > 0.0) {
      solver = attempt(k + jitter * Matrix::Identity(k.rows(), k.cols()));
      applied = jitter;
    }
    const Vector& ev = solver.eigenvalues();
    if (too_negative(ev)) {
      std::ostringstream msg;
      msg << "kernel matrix is not PSD: min eigenvalue " << ev.minCoeff() << ", max eigenvalue " << ev.maxCoeff()
          << ", condition diagnostic |min/max| = " << std::abs(ev.minCoeff() / ev.maxCoeff());
      throw numeric_error(msg.str());
    }

    // Eigen returns ascending eigenvalues with eigenvectors in columns.
    const Index n = k.rows();
    Vector mu(n);
    Matrix q(n, n);
    for (Index i = 0; i < n; ++i) {
      mu(i) = std::max(ev(n - 1 - i), 0.0);
      q.row(i) = solver.eigenvectors().col(n - 1 - i).transpose();
    }
    return KernelSpectrum(std::move(mu), std::move(q), applied);
  }

  /// Builds a spectrum from given eigenvalues and eigenvector rows.
  KernelSpectrum(Vector eigenvalues, Matrix q, double jitter_applied = 0.0)
      : mu_(std::move(eigenvalues)), q_(std::move(q)), jitter_(jitter_applied) {
    if (q_.rows() != mu_.size() || q_.cols() != mu_.size()) throw input_error("spectrum: Q must be n x n");
    if (mu_.size() < 1) throw input_error("spectrum: empty");
    for (Index i = 0; i < mu_.size(); ++i) {
      if (!(mu_(i) >= 0.0)) throw input_error("spectrum: eigenvalues must be >= 0");
      if (i > 0 && mu_(i) > mu_(i - 1)) throw input_error("spectrum: eigenvalues must be sorted descending");
    }
    rank_ = static_cast<Index>((mu_.array() > 0.0).count());
  }

  /// Diagonal spectrum (Q = I) with eigenvalues sorted descending.
  static KernelSpectrum diagonal(std::vector<double> eigenvalues) {
    std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
    Vector mu = Eigen::Map<Vector>(eigenvalues.data(), static_cast<Index>(eigenvalues.size()));
    return KernelSpectrum(mu, Matrix::Identity(mu.size(), mu.size()));
  }

  [[nodiscard]] Index n() const noexcept { return mu_.size(); }
  [[nodiscard]] Index rank() const noexcept { return rank_; }
  [[nodiscard]] const Vector& eigenvalues() const noexcept { return mu_; }
  [[nodiscard]] const Matrix& eigenvectors() const noexcept { return q_; }
  [[nodiscard]] double jitter_applied() const noexcept { return jitter_; }

  /// Q v (coordinates in the eigenbasis); works column-wise on matrices.
  [[nodiscard]] Matrix to_spectral(const Matrix& v) const {
    if (v.rows() != n()) throw input_error("to_spectral: row count mismatch");
    return q_ * v;
  }
  [[nodiscard]] Matrix from_spectral(const Matrix& v) const {
    if (v.rows() != n()) throw input_error("from_spectral: row count mismatch");
    return q_.transpose() * v;
  }

  [[nodiscard]] Matrix reconstruct() const { return q_.transpose() * mu_.asDiagonal() * q_; }

private:
  Vector mu_;
  Matrix q_;
  double jitter_ = 0.0;
  Index rank_ = 0;
};

inline KernelSpectrum kernel_matrix(const DesignMatrix& design, double jitter = 0.0,
                                    const KernelFunction& k = product_laplace_kernel()) {
  return KernelSpectrum::decompose(kernel_gram(design, k), jitter);
}

/// Shrinkage factors s_i = mu_i / (mu_i + n lambda). At lambda = 0 the
/// factor is 1 on the range of K and 0 on its null space.
inline Vector shrinkage_factors(const KernelSpectrum& spec, Ridge lambda) {
  const double scale = lambda.is_infinite() ? lambda.value() : static_cast<double>(spec.n()) * lambda.value();
  Vector s(spec.n());
  for (Index i = 0; i < spec.n(); ++i) s(i) = shrink(spec.eigenvalues()(i), scale);
  return s;
}

/// Effective degrees of freedom tr(A_lambda). df(0) = rank(K).
inline double df(const KernelSpectrum& spec, Ridge lambda) { return shrinkage_factors(spec, lambda).sum(); }

/// Minimal penalty (2 tr A - tr A^T A) / n.
inline double pen_min(const KernelSpectrum& spec, Ridge lambda) {
  const Vector s = shrinkage_factors(spec, lambda);
  return (2.0 * s.sum() - s.squaredNorm()) / static_cast<double>(spec.n());
}

/// A_lambda v computed spectrally.
inline Vector apply_smoother(const KernelSpectrum& spec, Ridge lambda, const Vector& v) {
  const Vector coords = spec.to_spectral(v);
  return spec.from_spectral(shrinkage_factors(spec, lambda).cwiseProduct(coords));
}

/// Inverts the strictly decreasing map lambda -> df(lambda) by bisection in
/// log(lambda). target = rank(K) gives 0, target = 0 gives +inf.
inline Ridge lambda_for_df(const KernelSpectrum& spec, double target_df, double tol = 1e-9) {
  const auto rank = static_cast<double>(spec.rank());
  if (!(target_df >= 0.0)) throw input_error("lambda_for_df: target must be >= 0");
  if (target_df > rank + 1e-12)
    throw input_error("lambda_for_df: target df " + std::to_string(target_df) + " exceeds rank(K) = " + std::to_string(spec.rank()));
  if (target_df <= 0.0) return Ridge::infinite();
  if (target_df >= rank) return Ridge::zero();

  const auto n = static_cast<double>(spec.n());
  const Vector& mu = spec.eigenvalues();
  const double mu_min = mu(spec.rank() - 1);
  // df(lo) >= target >= df(hi), from df <= sum(mu)/(n lambda) and
  // df >= r mu_min / (mu_min + n lambda).
  double lo = mu_min * (rank - target_df) / (target_df * n);
  double hi = mu.sum() / (n * target_df);
  double log_lo = std::log(lo), log_hi = std::log(hi);
  double mid = 0.5 * (log_lo + log_hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (log_lo + log_hi);
    const double value = df(spec, Ridge(std::exp(mid)));
    if (std::abs(value - target_df) <= tol) break;
    if (value > target_df)
      log_lo = mid;
    else
      log_hi = mid;
    if (log_hi - log_lo < 1e-15) break;
  }
  return Ridge(std::exp(mid));
}

/// Ridge values whose df hits every multiple of 1/refinement in [0, rank],
/// ordered by increasing df (so +inf first, 0 last).
inline std::vector<Ridge> df_grid(const KernelSpectrum& spec, int refinement = 1) {
  if (refinement < 1) throw input_error("df_grid: refinement must be >= 1");
  const Index steps = spec.rank() * refinement;
  std::vector<Ridge> grid;
  grid.reserve(static_cast<std::size_t>(steps + 1));
  for (Index k = 0; k <= steps; ++k)
    grid.push_back(lambda_for_df(spec, static_cast<double>(k) / refinement));
  return grid;
}

}  // namespace minpen
