#pragma once

// Jointly diagonalizable similarity-matrix families M = P^T diag(d) P.
//
// Each member fixes an orthogonal basis P (rows are eigen-directions) and
// ties directions into groups that share one eigenvalue. The selection grid
// is a list of eigenvalues applied independently per group, so a member's
// grid is the Cartesian product of that list over its groups.

#include "minpen/kernel.hpp"

#include <algorithm>
#include <set>

namespace minpen {

enum class FamilyKind { independent, similar, cluster, cluster_union, segmentation_union };

inline std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::independent: return "independent";
    case FamilyKind::similar: return "similar";
    case FamilyKind::cluster: return "cluster";
    case FamilyKind::cluster_union: return "cluster_union";
    case FamilyKind::segmentation_union: return "segmentation_union";
  }
  return "unknown";
}

/// One set {P^T diag(d) P} with a fixed basis.
struct FamilyMember {
  std::string label;
  Matrix basis;                          ///< P, p x p orthogonal
  std::vector<int> group_of;             ///< direction -> group
  std::vector<std::string> group_names;  ///< one per group

  [[nodiscard]] Index p() const noexcept { return basis.rows(); }
  [[nodiscard]] int groups() const noexcept { return static_cast<int>(group_names.size()); }

  /// Per-direction eigenvalues from per-group values.
  [[nodiscard]] Vector expand(const std::vector<double>& group_values) const {
    if (static_cast<int>(group_values.size()) != groups()) throw input_error("expand: wrong number of group values");
    Vector d(p());
    for (Index j = 0; j < p(); ++j) d(j) = group_values[static_cast<std::size_t>(group_of[static_cast<std::size_t>(j)])];
    return d;
  }
};

struct SimilarityFamily {
  FamilyKind kind = FamilyKind::similar;
  std::string name;
  std::vector<FamilyMember> members;
  /// Eigenvalues d tried for every group, sorted descending (+inf first).
  std::vector<double> parameter_grid;
};

/// (P, d) for a concrete parameter value.
struct EigenParametrization {
  Matrix basis;
  Vector d;
};

/// P^T diag(d) P. Requires finite d.
inline Matrix reconstruct(const Matrix& basis, const Vector& d) {
  if (!d.allFinite()) throw input_error("reconstruct: eigenvalues must be finite");
  return basis.transpose() * d.asDiagonal() * basis;
}

namespace detail {

/// Orthonormal Helmert contrasts of the coordinates in `idx`, embedded in R^p.
inline std::vector<Vector> helmert_contrasts(const std::vector<Index>& idx, Index p) {
  std::vector<Vector> rows;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    Vector v = Vector::Zero(p);
    const double norm = std::sqrt(static_cast<double>(k * (k + 1)));
    for (std::size_t l = 0; l < k; ++l) v(idx[l]) = 1.0 / norm;
    v(idx[k]) = -static_cast<double>(k) / norm;
    rows.push_back(v);
  }
  return rows;
}

inline Vector normalized_indicator(const std::vector<Index>& idx, Index p) {
  Vector v = Vector::Zero(p);
  for (Index i : idx) v(i) = 1.0 / std::sqrt(static_cast<double>(idx.size()));
  return v;
}

inline std::string subset_label(const std::vector<Index>& idx) {
  std::string s = "{";
  for (std::size_t k = 0; k < idx.size(); ++k) s += (k ? "," : "") + std::to_string(idx[k] + 1);
  return s + "}";
}

}  // namespace detail

/// P = I, one group per task.
inline FamilyMember independent_member(Index p) {
  if (p < 1) throw input_error("independent family needs p >= 1");
  FamilyMember m;
  m.label = "independent";
  m.basis = Matrix::Identity(p, p);
  for (Index j = 0; j < p; ++j) {
    m.group_of.push_back(static_cast<int>(j));
    m.group_names.push_back("task" + std::to_string(j + 1));
  }
  return m;
}

/// First row 1/sqrt(p) (group "mean"), remaining rows Helmert contrasts
/// (group "contrast").
inline FamilyMember similar_member(Index p) {
  if (p < 1) throw input_error("similar family needs p >= 1");
  FamilyMember m;
  m.label = "similar";
  m.basis.resize(p, p);
  std::vector<Index> all(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
  m.basis.row(0) = detail::normalized_indicator(all, p).transpose();
  const auto contrasts = detail::helmert_contrasts(all, p);
  for (std::size_t k = 0; k < contrasts.size(); ++k) m.basis.row(static_cast<Index>(k + 1)) = contrasts[k].transpose();
  m.group_names.push_back("mean");
  m.group_of.push_back(0);
  if (p > 1) {
    m.group_names.push_back("contrast");
    for (Index j = 1; j < p; ++j) m.group_of.push_back(1);
  }
  return m;
}

/// Two-cluster member for I (0-based task indices, 1 <= |I| <= p-1).
/// Rows: 1_I/sqrt(k), 1_{I^c}/sqrt(p-k) (group "mean"), contrasts within I,
/// contrasts within I^c. With `tie_contrasts` both contrast sets share one
/// group (the mu = nu case), otherwise they are "contrast_I" / "contrast_Ic".
inline FamilyMember cluster_member(Index p, std::vector<Index> subset, bool tie_contrasts = true) {
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  const auto k = static_cast<Index>(subset.size());
  if (k < 1 || k > p - 1)
    throw input_error("cluster family needs 1 <= |I| <= p-1 (got |I| = " + std::to_string(k) + ", p = " + std::to_string(p) + ")");
  if (subset.front() < 0 || subset.back() >= p) throw input_error("cluster subset index out of range");
  std::vector<Index> complement;
  for (Index j = 0; j < p; ++j)
    if (!std::binary_search(subset.begin(), subset.end(), j)) complement.push_back(j);

  FamilyMember m;
  m.label = "cluster" + detail::subset_label(subset);
  m.basis.resize(p, p);
  Index row = 0;
  m.basis.row(row++) = detail::normalized_indicator(subset, p).transpose();
  m.basis.row(row++) = detail::normalized_indicator(complement, p).transpose();
  m.group_names.push_back("mean");
  m.group_of = {0, 0};
  const auto inside = detail::helmert_contrasts(subset, p);
  const auto outside = detail::helmert_contrasts(complement, p);
  int inside_group = -1, outside_group = -1;
  if (tie_contrasts) {
    if (!inside.empty() || !outside.empty()) {
      m.group_names.push_back("contrast");
      inside_group = outside_group = 1;
    }
  } else {
    if (!inside.empty()) {
      inside_group = static_cast<int>(m.group_names.size());
      m.group_names.push_back("contrast_I");
    }
    if (!outside.empty()) {
      outside_group = static_cast<int>(m.group_names.size());
      m.group_names.push_back("contrast_Ic");
    }
  }
  for (const auto& v : inside) {
    m.basis.row(row++) = v.transpose();
    m.group_of.push_back(inside_group);
  }
  for (const auto& v : outside) {
    m.basis.row(row++) = v.transpose();
    m.group_of.push_back(outside_group);
  }
  return m;
}

/// M_ind(lambda) = (1/p) diag(lambda_1, ..., lambda_p).
inline EigenParametrization independent_eigenvalues(const std::vector<double>& lambdas) {
  const auto p = static_cast<Index>(lambdas.size());
  if (p < 1) throw input_error("independent family needs p >= 1");
  EigenParametrization out{Matrix::Identity(p, p), Vector(p)};
  for (Index j = 0; j < p; ++j) {
    const double l = lambdas[static_cast<std::size_t>(j)];
    if (!(l > 0.0)) throw input_error("independent family parameters must be > 0");
    out.d(j) = l / static_cast<double>(p);
  }
  return out;
}

/// M_similar(lambda, mu) = (lambda + p mu) I - mu 11^T: eigenvalue lambda on
/// 1/sqrt(p), lambda + p mu on the contrasts.
inline EigenParametrization similar_eigenvalues(Index p, double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw input_error("similar family parameters must be > 0");
  const auto member = similar_member(p);
  return {member.basis, member.expand(p > 1 ? std::vector<double>{lambda, lambda + static_cast<double>(p) * mu}
                                            : std::vector<double>{lambda})};
}

/// Dense (lambda + p mu) I - mu 11^T.
inline Matrix similar_matrix(Index p, double lambda, double mu) {
  return (lambda + static_cast<double>(p) * mu) * Matrix::Identity(p, p) - mu * Matrix::Ones(p, p);
}

/// M_I(lambda, mu, nu): eigenvalue lambda on 1_I and 1_{I^c}, lambda + mu on
/// contrasts within I, lambda + nu on contrasts within I^c.
inline EigenParametrization cluster_eigenvalues(Index p, const std::vector<Index>& subset, double lambda, double mu,
                                                double nu) {
  if (!(lambda > 0.0) || !(mu > 0.0) || !(nu > 0.0)) throw input_error("cluster family parameters must be > 0");
  const auto member = cluster_member(p, subset, false);
  std::vector<double> values{lambda};
  for (std::size_t g = 1; g < member.group_names.size(); ++g)
    values.push_back(member.group_names[g] == "contrast_I" ? lambda + mu : lambda + nu);
  return {member.basis, member.expand(values)};
}

/// Dense lambda I + mu diag(I) + nu diag(I^c) - (mu/k) 1_I 1_I^T - (nu/(p-k)) 1_Ic 1_Ic^T.
inline Matrix cluster_matrix(Index p, const std::vector<Index>& subset, double lambda, double mu, double nu) {
  Vector in = Vector::Zero(p);
  for (Index i : subset) in(i) = 1.0;
  const Vector out = Vector::Ones(p) - in;
  const double k = in.sum();
  if (k < 1 || k > static_cast<double>(p - 1)) throw input_error("cluster family needs 1 <= |I| <= p-1");
  return lambda * Matrix::Identity(p, p) + mu * Matrix(in.asDiagonal()) + nu * Matrix(out.asDiagonal()) -
         (mu / k) * in * in.transpose() - (nu / (static_cast<double>(p) - k)) * out * out.transpose();
}

/// Eigenvalue grid d = lambda / p for lambda on the df-inversion grid, so
/// that every group's df tr(A_{p d}) takes the values 0, 1/r, ..., rank(K).
inline std::vector<double> eigenvalue_grid(const KernelSpectrum& spec, Index p, int refinement = 1) {
  std::vector<double> grid;
  for (Ridge r : df_grid(spec, refinement)) grid.push_back(r.value() / static_cast<double>(p));
  return grid;
}

inline SimilarityFamily make_family(FamilyKind kind, Index p, std::vector<double> grid,
                                    const std::vector<Index>& cluster_subset = {}) {
  if (grid.empty()) throw input_error("family parameter grid is empty");
  std::sort(grid.begin(), grid.end(), std::greater<>());
  SimilarityFamily f;
  f.kind = kind;
  f.name = to_string(kind);
  f.parameter_grid = std::move(grid);
  switch (kind) {
    case FamilyKind::independent: f.members.push_back(independent_member(p)); break;
    case FamilyKind::similar: f.members.push_back(similar_member(p)); break;
    case FamilyKind::cluster: f.members.push_back(cluster_member(p, cluster_subset)); break;
    case FamilyKind::cluster_union: {
      if (p < 2) throw input_error("cluster_union needs p >= 2");
      if (p > 12) throw input_error("cluster_union enumerates 2^p subsets and is limited to p <= 12");
      // I and its complement give the same matrices; keep the subsets that
      // contain task 1.
      for (std::uint32_t mask = 1; mask < (1u << p) - 1; ++mask) {
        if (!(mask & 1u)) continue;
        std::vector<Index> subset;
        for (Index j = 0; j < p; ++j)
          if (mask & (1u << j)) subset.push_back(j);
        f.members.push_back(cluster_member(p, subset));
      }
      f.members.push_back(similar_member(p));
      break;
    }
    case FamilyKind::segmentation_union: {
      if (p < 2) throw input_error("segmentation_union needs p >= 2");
      for (Index k = 1; k <= p - 1; ++k) {
        std::vector<Index> prefix;
        for (Index j = 0; j < k; ++j) prefix.push_back(j);
        f.members.push_back(cluster_member(p, prefix));
        f.members.back().label = "segment" + detail::subset_label(prefix);
      }
      f.members.push_back(similar_member(p));
      break;
    }
  }
  return f;
}

inline SimilarityFamily make_family(FamilyKind kind, const KernelSpectrum& spec, Index p, int refinement = 1,
                                    const std::vector<Index>& cluster_subset = {}) {
  return make_family(kind, p, eigenvalue_grid(spec, p, refinement), cluster_subset);
}

}  // namespace minpen
