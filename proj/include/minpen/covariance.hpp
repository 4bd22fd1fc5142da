#pragma once

// Noise covariance reconstruction from one-dimensional variance estimates.
//
// a(e_i) estimates Sigma_ii and a(e_i + e_j) estimates
// Sigma_ii + Sigma_jj + 2 Sigma_ij, so the J map below rebuilds Sigma from
// p(p+1)/2 minimal-penalty runs. When an eigenbasis P of the relevant
// matrices is known, p runs along the rows of P are enough.

#include "minpen/minimal_penalty.hpp"

#include <map>

namespace minpen {

enum class CovarianceMethod { full, simple, hm };

inline std::string to_string(CovarianceMethod m) {
  switch (m) {
    case CovarianceMethod::full: return "full";
    case CovarianceMethod::simple: return "simple";
    case CovarianceMethod::hm: return "hm";
  }
  return "unknown";
}

/// Ordered projection directions with printable labels.
struct ProjectionSet {
  std::vector<Vector> directions;
  std::vector<std::string> labels;

  /// e_1..e_p, then e_i + e_j for i < j in lexicographic order: the
  /// argument order of j_map.
  static ProjectionSet canonical(Index p) {
    ProjectionSet set;
    for (Index i = 0; i < p; ++i) {
      set.directions.push_back(Vector::Unit(p, i));
      set.labels.push_back("e" + std::to_string(i + 1));
    }
    for (Index i = 0; i < p; ++i)
      for (Index j = i + 1; j < p; ++j) {
        set.directions.push_back(Vector::Unit(p, i) + Vector::Unit(p, j));
        set.labels.push_back("e" + std::to_string(i + 1) + "+e" + std::to_string(j + 1));
      }
    return set;
  }

  /// u_j = P^T e_j, i.e. the rows of P.
  static ProjectionSet basis(const Matrix& p) {
    ProjectionSet set;
    for (Index j = 0; j < p.rows(); ++j) {
      set.directions.push_back(p.row(j).transpose());
      set.labels.push_back("u" + std::to_string(j + 1));
    }
    return set;
  }

  [[nodiscard]] std::size_t size() const noexcept { return directions.size(); }
};

struct CovarianceEstimate {
  Matrix matrix;
  CovarianceMethod method = CovarianceMethod::full;
  std::map<std::string, double> raw_a_values;
  std::optional<Matrix> psd_projected;
  std::vector<std::string> degenerate_directions;
};

/// J: R^{p(p+1)/2} -> S_p. Diagonal from the first p entries, off-diagonal
/// (a_ij - a_i - a_j) / 2 from the pairwise entries.
inline Matrix j_map(const Vector& a, Index p) {
  if (p < 1) throw input_error("j_map: p must be >= 1");
  if (a.size() != p * (p + 1) / 2)
    throw input_error("j_map: expected " + std::to_string(p * (p + 1) / 2) + " values, got " + std::to_string(a.size()));
  Matrix s(p, p);
  for (Index i = 0; i < p; ++i) s(i, i) = a(i);
  Index k = p;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j, ++k) s(i, j) = s(j, i) = (a(k) - a(i) - a(j)) / 2.0;
  return s;
}

inline Vector j_inverse(const Matrix& s) {
  if (!is_symmetric(s)) throw input_error("j_inverse: matrix must be symmetric");
  const Index p = s.rows();
  Vector a(p * (p + 1) / 2);
  for (Index i = 0; i < p; ++i) a(i) = s(i, i);
  Index k = p;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j, ++k) a(k) = s(i, i) + s(j, j) + 2.0 * s(i, j);
  return a;
}

namespace detail {

struct DirectionRun {
  double value = 0.0;
  bool degenerate = false;
};

inline std::vector<DirectionRun> run_directions(const KernelSpectrum& spec, const Matrix& y, const ProjectionSet& set,
                                                const PenaltyGrid& grid, const CalibrationOptions& opts) {
  std::vector<DirectionRun> runs(set.size());
  std::vector<std::string> failed;
  std::string first_message;
  for (std::size_t k = 0; k < set.size(); ++k) {
    try {
      const auto est = estimate_variance(spec, project_responses(y, set.directions[k]), grid, opts);
      runs[k] = {est.c_hat, est.path.degenerate};
    } catch (const calibration_error& e) {
      if (first_message.empty()) first_message = e.what();
      failed.push_back(set.labels[k]);
    }
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    throw calibration_error("covariance estimation failed along direction(s) " + names + ": " + first_message,
                            std::move(failed));
  }
  return runs;
}

inline void check_orthogonal(const Matrix& p, double tol = 1e-8) {
  if (p.rows() != p.cols()) throw input_error("basis P must be square");
  const double err = (p.transpose() * p - Matrix::Identity(p.rows(), p.cols())).cwiseAbs().maxCoeff();
  if (err > tol) throw input_error("basis P is not orthogonal (max |P^T P - I| = " + std::to_string(err) + ")");
}

}  // namespace detail

/// Full estimator J(a(e_1), ..., a(e_p), a(e_1 + e_2), ..., a(e_{p-1} + e_p)).
/// Calibration failures in any direction are collected and rethrown together.
inline CovarianceEstimate estimate_sigma_full(const KernelSpectrum& spec, const Matrix& y, const PenaltyGrid& grid,
                                              const CalibrationOptions& opts = {}) {
  const Index p = y.cols();
  if (p < 1) throw input_error("estimate_sigma_full: Y has no columns");
  if (y.rows() != spec.n()) throw input_error("estimate_sigma_full: Y rows do not match kernel size");
  const auto set = ProjectionSet::canonical(p);
  const auto runs = detail::run_directions(spec, y, set, grid, opts);

  CovarianceEstimate out;
  out.method = CovarianceMethod::full;
  Vector a(static_cast<Index>(runs.size()));
  for (std::size_t k = 0; k < runs.size(); ++k) {
    a(static_cast<Index>(k)) = runs[k].value;
    out.raw_a_values[set.labels[k]] = runs[k].value;
    if (runs[k].degenerate) out.degenerate_directions.push_back(set.labels[k]);
  }
  out.matrix = j_map(a, p);
  return out;
}

inline CovarianceEstimate estimate_sigma_full(const KernelSpectrum& spec, const Matrix& y,
                                              const CalibrationOptions& opts = {}) {
  return estimate_sigma_full(spec, y, PenaltyGrid::from_df_targets(spec), opts);
}

/// Known-basis estimator P^T diag(a(u_1), ..., a(u_p)) P with u_j the rows of
/// P, so that P S P^T is exactly diagonal. `method` only labels the result
/// (simple: P diagonalizes Sigma; hm: P diagonalizes the similarity family).
inline CovarianceEstimate estimate_sigma_basis(const KernelSpectrum& spec, const Matrix& y, const Matrix& p,
                                               const PenaltyGrid& grid, const CalibrationOptions& opts = {},
                                               CovarianceMethod method = CovarianceMethod::hm) {
  detail::check_orthogonal(p);
  if (p.rows() != y.cols()) throw input_error("estimate_sigma_basis: P size does not match the number of tasks");
  if (y.rows() != spec.n()) throw input_error("estimate_sigma_basis: Y rows do not match kernel size");
  const auto set = ProjectionSet::basis(p);
  const auto runs = detail::run_directions(spec, y, set, grid, opts);

  CovarianceEstimate out;
  out.method = method;
  Vector a(p.rows());
  for (std::size_t k = 0; k < runs.size(); ++k) {
    a(static_cast<Index>(k)) = runs[k].value;
    out.raw_a_values[set.labels[k]] = runs[k].value;
    if (runs[k].degenerate) out.degenerate_directions.push_back(set.labels[k]);
  }
  const Index dim = p.rows();
  out.matrix.resize(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index k = i; k < dim; ++k) {
      double v = 0.0;
      for (Index j = 0; j < dim; ++j) v += p(j, i) * a(j) * p(j, k);
      out.matrix(i, k) = out.matrix(k, i) = v;
    }
  return out;
}

inline CovarianceEstimate estimate_sigma_basis(const KernelSpectrum& spec, const Matrix& y, const Matrix& p,
                                               const CalibrationOptions& opts = {},
                                               CovarianceMethod method = CovarianceMethod::hm) {
  return estimate_sigma_basis(spec, y, p, PenaltyGrid::from_df_targets(spec), opts, method);
}

/// S_+: negative eigenvalues thresholded at 0.
inline Matrix psd_threshold(const Matrix& s) {
  if (!is_symmetric(s, 1e-12)) throw input_error("psd_threshold: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  if (solver.info() != Eigen::Success) throw numeric_error("psd_threshold: eigendecomposition failed");
  const Vector clamped = solver.eigenvalues().cwiseMax(0.0);
  Matrix out = solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

struct MatrixDiagnostics {
  double op_norm = 0.0;  ///< max |eigenvalue|
  double cond = 0.0;     ///< max/min eigenvalue, +inf unless positive definite
  double min_eig = 0.0;
  double max_eig = 0.0;
};

inline MatrixDiagnostics matrix_diagnostics(const Matrix& s) {
  if (!is_symmetric(s, 1e-12)) throw input_error("matrix_diagnostics: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
  const Vector& ev = solver.eigenvalues();
  MatrixDiagnostics d;
  d.min_eig = ev.minCoeff();
  d.max_eig = ev.maxCoeff();
  d.op_norm = ev.cwiseAbs().maxCoeff();
  d.cond = d.min_eig > 0.0 ? d.max_eig / d.min_eig : std::numeric_limits<double>::infinity();
  return d;
}

}  // namespace minpen
