#pragma once

// Dense reference implementations used as test oracles. Everything here
// materializes the np x np operators that the library avoids.

#include "minpen/multitask.hpp"
#include "minpen/random.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace minpen::testing {

/// vec stacks the task columns: [Y^1; Y^2; ...; Y^p].
inline Vector vec(const Matrix& y) { return Eigen::Map<const Vector>(y.data(), y.size()); }

inline Matrix unvec(const Vector& v, Index n, Index p) { return Eigen::Map<const Matrix>(v.data(), n, p); }

/// A_M = (M^{-1} (x) K)((M^{-1} (x) K) + np I)^{-1} for finite, positive d.
inline Matrix dense_smoother(const Matrix& k, const Matrix& m) {
  const Index n = k.rows(), p = m.rows();
  const Matrix b = Eigen::kroneckerProduct(Matrix(m.inverse()), k).eval();
  const Matrix shifted = b + static_cast<double>(n * p) * Matrix::Identity(n * p, n * p);
  return b * shifted.inverse();
}

inline double dense_penalty(const Matrix& a, const Matrix& s, Index n) {
  const Index p = s.rows();
  const Matrix sk = Eigen::kroneckerProduct(s, Matrix::Identity(n, n)).eval();
  return 2.0 * (a * sk).trace() / static_cast<double>(n * p);
}

/// ||(A - I) f||^2 and tr(A^T A (Sigma (x) I_n)).
inline BiasVariance dense_bias_variance(const Matrix& a, const Matrix& f, const Matrix& sigma) {
  const Index n = f.rows();
  const Vector fv = vec(f);
  const Matrix sk = Eigen::kroneckerProduct(sigma, Matrix::Identity(n, n)).eval();
  BiasVariance out;
  out.bias = (a * fv - fv).squaredNorm();
  out.variance = (a.transpose() * a * sk).trace();
  return out;
}

inline Matrix random_orthogonal(Index p, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(standard_normal(p, p, rng));
  return qr.householderQ();
}

inline Vector random_positive(Index p, Rng& rng, double lo = 0.05, double hi = 2.0) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  Vector d(p);
  for (Index j = 0; j < p; ++j) d(j) = std::exp(u(rng));
  return d;
}

inline Matrix random_spd(Index p, Rng& rng) {
  const Matrix a = standard_normal(p, p, rng);
  return a * a.transpose() + 0.1 * Matrix::Identity(p, p);
}

/// Random design and its spectrum; Laplace Gram matrices are nonsingular
/// for distinct points.
struct Instance {
  Matrix design;
  Matrix gram;
  KernelSpectrum spec;
};

inline Instance random_instance(Index n, Index d, Rng& rng) {
  Matrix x = standard_normal(n, d, rng);
  Matrix k = kernel_gram(DesignMatrix(x));
  auto spec = KernelSpectrum::decompose(k);
  return {std::move(x), std::move(k), std::move(spec)};
}

/// Smooth truth used in several Monte-Carlo tests: 4 unit-weight centers.
inline Matrix smooth_truth(const Matrix& design, Index p, Rng& rng) {
  const Matrix centers = standard_normal(4, design.cols(), rng);
  return kernel_cross(design, centers) * Matrix::Ones(4, p);
}

}  // namespace minpen::testing
