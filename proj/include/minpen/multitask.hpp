#pragma once

// Multi-task kernel ridge smoother f_M = A_M y with
//   A_M = (M^{-1} (x) K) ((M^{-1} (x) K) + np I)^{-1},
// evaluated without forming any np x np matrix. For M = P^T diag(d) P and
// K = Q^T diag(mu) Q, A_M is diagonal in the basis P (x) Q with entries
// mu_i / (mu_i + n p d_j). In matrix form, with Y~ = Q Y P^T:
//   f_M = Q^T (S o Y~) P,   S_ij = mu_i / (mu_i + n p d_j).

#include "minpen/families.hpp"
#include "minpen/minimal_penalty.hpp"

#include <functional>
#include <type_traits>

namespace minpen {

namespace detail {

inline void check_shapes(const KernelSpectrum& spec, const Matrix& basis, const Vector& d, Index rows, Index cols,
                         const char* what) {
  if (basis.rows() != basis.cols()) throw input_error(std::string(what) + ": basis must be square");
  if (d.size() != basis.rows()) throw input_error(std::string(what) + ": need one eigenvalue per basis row");
  if (rows != spec.n()) throw input_error(std::string(what) + ": row count does not match kernel size");
  if (cols != basis.rows()) throw input_error(std::string(what) + ": column count does not match number of tasks");
  for (Index j = 0; j < d.size(); ++j)
    if (!(d(j) >= 0.0)) throw input_error(std::string(what) + ": eigenvalues must be >= 0 or +inf");
}

/// n p d_j, with +inf preserved.
inline double direction_scale(Index n, Index p, double d) {
  return std::isinf(d) ? d : static_cast<double>(n) * static_cast<double>(p) * d;
}

inline Matrix shrinkage_matrix(const KernelSpectrum& spec, const Vector& d) {
  const Index n = spec.n(), p = d.size();
  Matrix s(n, p);
  for (Index j = 0; j < p; ++j) {
    const double scale = direction_scale(n, p, d(j));
    for (Index i = 0; i < n; ++i) s(i, j) = shrink(spec.eigenvalues()(i), scale);
  }
  return s;
}

}  // namespace detail

/// A_M applied to Y (n x p); d_j = 0 interpolates, d_j = +inf returns 0 in
/// that direction.
inline Matrix multitask_smoother_apply(const KernelSpectrum& spec, const Matrix& basis, const Vector& d,
                                       const Matrix& y) {
  detail::check_shapes(spec, basis, d, y.rows(), y.cols(), "multitask_smoother_apply");
  const Matrix rotated = spec.to_spectral(y) * basis.transpose();
  const Matrix shrunk = detail::shrinkage_matrix(spec, d).cwiseProduct(rotated);
  return spec.from_spectral(shrunk) * basis;
}

/// tr(A_{p d_j}) for every direction.
inline Vector per_direction_df(const KernelSpectrum& spec, const Vector& d) {
  return detail::shrinkage_matrix(spec, d).colwise().sum().transpose();
}

/// tr(A_M) = sum_j df(p d_j).
inline double total_df(const KernelSpectrum& spec, const Vector& d) { return per_direction_df(spec, d).sum(); }

/// (2/np) sum_j tr(A_{p d_j}) (P S P^T)_jj, i.e. 2 tr(A_M (S (x) I_n)) / np.
/// S need not be PSD.
inline double penalty(const KernelSpectrum& spec, const Matrix& basis, const Vector& d, const Matrix& s) {
  if (s.rows() != basis.rows() || s.cols() != basis.rows()) throw input_error("penalty: S must be p x p");
  detail::check_shapes(spec, basis, d, spec.n(), basis.rows(), "penalty");
  const Matrix rotated = basis * s * basis.transpose();
  const Vector dfs = per_direction_df(spec, d);
  const auto np = static_cast<double>(spec.n() * basis.rows());
  return 2.0 * dfs.dot(rotated.diagonal()) / np;
}

/// (1/np)||Y - f_M||^2 + penalty.
inline double criterion(const KernelSpectrum& spec, const Matrix& y, const Matrix& basis, const Vector& d,
                        const Matrix& s) {
  const Matrix fitted = multitask_smoother_apply(spec, basis, d, y);
  const auto np = static_cast<double>(y.size());
  return (fitted - y).squaredNorm() / np + penalty(spec, basis, d, s);
}

struct BiasVariance {
  double bias = 0.0;
  double variance = 0.0;
};

/// E||f_M - f||^2 = ||(A_M - I) f||^2 + tr(A_M^T A_M (Sigma (x) I_n)), computed
/// spectrally (unnormalized).
inline BiasVariance oracle_bias_variance(const KernelSpectrum& spec, const Matrix& f, const Matrix& sigma,
                                         const Matrix& basis, const Vector& d) {
  detail::check_shapes(spec, basis, d, f.rows(), f.cols(), "oracle_bias_variance");
  if (sigma.rows() != basis.rows() || sigma.cols() != basis.rows()) throw input_error("oracle_bias_variance: Sigma must be p x p");
  const Matrix g = spec.to_spectral(f) * basis.transpose();
  const Matrix s = detail::shrinkage_matrix(spec, d);
  const Vector sigma_rot = (basis * sigma * basis.transpose()).diagonal();
  BiasVariance out;
  out.bias = ((1.0 - s.array()).square() * g.array().square()).sum();
  out.variance = (s.array().square().colwise().sum().transpose() * sigma_rot.array()).sum();
  return out;
}

struct MultiTaskFit {
  Matrix fitted;
  std::string family;
  std::string member;
  Matrix basis;
  Vector d;
  std::vector<std::string> group_names;
  std::vector<double> group_values;
  Vector per_direction_df;
  double criterion_value = 0.0;  ///< normalized by 1/(np)
  double penalty_value = 0.0;    ///< normalized by 1/(np)
  double residual_value = 0.0;   ///< (1/np)||Y - f||^2
};

/// One evaluated grid point of the selection criterion.
struct CriterionRow {
  std::string family;
  std::string member;
  std::vector<std::string> group_names;
  std::vector<double> group_values;
  Vector df;
  double residual = 0.0;
  double penalty = 0.0;
  double criterion = 0.0;
};

/// Supplies the covariance used in the penalty for a given member. A fixed
/// Sigma-hat ignores the argument; the HM estimator depends on the basis.
using PenaltyCovariance = std::function<Matrix(const FamilyMember&)>;

namespace detail {

struct GroupSearch {
  std::vector<std::size_t> best;  // per group, index into the parameter grid
  double residual = 0.0;          // unnormalized
  double penalty = 0.0;           // unnormalized (2 sum df Sigma~_jj)
  double total_df = 0.0;
};

/// Per-direction cost profiles over the grid. The criterion splits as a sum
/// over groups of terms that depend only on that group's eigenvalue, so the
/// argmin over the Cartesian grid is the per-group argmin.
struct MemberProfiles {
  std::vector<Vector> residual;  // per group: sum_{j in g} ||(A - I) y~_j||^2
  std::vector<Vector> penalty;   // per group: 2 df sum_{j in g} Sigma~_jj
};

inline MemberProfiles member_profiles(const PenaltyGrid& grid, const FamilyMember& member, const Matrix& spectral_y,
                                      const Matrix& s) {
  const Matrix rotated = spectral_y * member.basis.transpose();
  const Vector sigma_rot = (member.basis * s * member.basis.transpose()).diagonal();
  MemberProfiles out;
  out.residual.assign(static_cast<std::size_t>(member.groups()), Vector::Zero(grid.size()));
  out.penalty.assign(static_cast<std::size_t>(member.groups()), Vector::Zero(grid.size()));
  for (Index j = 0; j < member.p(); ++j) {
    const auto g = static_cast<std::size_t>(member.group_of[static_cast<std::size_t>(j)]);
    out.residual[g] += grid.residual_weights.transpose() * rotated.col(j).cwiseAbs2();
    out.penalty[g] += 2.0 * sigma_rot(j) * grid.dfs;
  }
  return out;
}

/// Grid is ordered by decreasing eigenvalue, so keeping the first strict
/// minimum breaks ties toward more regularization.
inline GroupSearch search_groups(const PenaltyGrid& grid, const FamilyMember& member, const MemberProfiles& prof) {
  GroupSearch out;
  for (int g = 0; g < member.groups(); ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const Vector total = prof.residual[gi] + prof.penalty[gi];
    Index best = 0;
    for (Index k = 1; k < grid.size(); ++k)
      if (total(k) < total(best)) best = k;
    out.best.push_back(static_cast<std::size_t>(best));
    out.residual += prof.residual[gi](best);
    out.penalty += prof.penalty[gi](best);
    const auto dirs = std::count(member.group_of.begin(), member.group_of.end(), g);
    out.total_df += static_cast<double>(dirs) * grid.dfs(best);
  }
  return out;
}

inline PenaltyGrid family_penalty_grid(const KernelSpectrum& spec, const SimilarityFamily& family, Index p) {
  if (family.parameter_grid.empty()) throw input_error("family '" + family.name + "' has an empty parameter grid");
  std::vector<Ridge> ridges;
  for (std::size_t k = 0; k < family.parameter_grid.size(); ++k) {
    const double d = family.parameter_grid[k];
    if (k > 0 && d > family.parameter_grid[k - 1]) throw input_error("family parameter grid must be sorted descending");
    ridges.emplace_back(std::isinf(d) ? d : d * static_cast<double>(p));
  }
  return PenaltyGrid(spec, std::move(ridges));
}

inline MultiTaskFit finish_fit(const KernelSpectrum& spec, const Matrix& y, const SimilarityFamily& family,
                               const FamilyMember& member, const std::vector<std::size_t>& best) {
  MultiTaskFit fit;
  fit.family = family.name;
  fit.member = member.label;
  fit.basis = member.basis;
  fit.group_names = member.group_names;
  for (auto k : best) fit.group_values.push_back(family.parameter_grid[k]);
  fit.d = member.expand(fit.group_values);
  fit.fitted = multitask_smoother_apply(spec, fit.basis, fit.d, y);
  fit.per_direction_df = per_direction_df(spec, fit.d);
  return fit;
}

inline void check_families(const std::vector<SimilarityFamily>& families, Index p) {
  if (families.empty()) throw input_error("no similarity family given");
  for (const auto& f : families) {
    if (f.members.empty()) throw input_error("family '" + f.name + "' has no members");
    for (const auto& m : f.members)
      if (m.p() != p) throw input_error("family '" + f.name + "' member '" + m.label + "' has the wrong number of tasks");
  }
}

}  // namespace detail

struct SelectionOptions {
  /// Collect a criterion table: for each member, group and grid value, the
  /// grid point with that value and every other group at its optimum.
  bool record_table = false;
};

struct Selection {
  MultiTaskFit fit;
  std::vector<CriterionRow> table;
};

/// argmin over all grid points of all families of
///   (1/np)||f_M - Y||^2 + (2/np) tr(A_M (S (x) I_n)).
/// Ties: smaller criterion, then smaller total df, then family/member order.
inline Selection select_model_detailed(const KernelSpectrum& spec, const Matrix& y,
                                       const std::vector<SimilarityFamily>& families, const PenaltyCovariance& cov,
                                       const SelectionOptions& opts = {}) {
  const Index n = y.rows(), p = y.cols();
  if (n != spec.n()) throw input_error("select_model: Y rows do not match kernel size");
  detail::check_families(families, p);
  const auto np = static_cast<double>(n * p);
  const Matrix spectral_y = spec.to_spectral(y);

  Selection out;
  const SimilarityFamily* best_family = nullptr;
  const FamilyMember* best_member = nullptr;
  detail::GroupSearch best_search;
  double best_crit = std::numeric_limits<double>::infinity();

  for (const auto& family : families) {
    const PenaltyGrid grid = detail::family_penalty_grid(spec, family, p);
    for (const auto& member : family.members) {
      const Matrix s = cov(member);
      if (s.rows() != p || s.cols() != p) throw input_error("select_model: covariance must be p x p");
      const auto prof = detail::member_profiles(grid, member, spectral_y, s);
      const auto search = detail::search_groups(grid, member, prof);
      const double crit = (search.residual + search.penalty) / np;
      if (crit < best_crit || (crit == best_crit && search.total_df < best_search.total_df)) {
        best_crit = crit;
        best_search = search;
        best_family = &family;
        best_member = &member;
      }
      if (opts.record_table) {
        for (int g = 0; g < member.groups(); ++g) {
          const auto gi = static_cast<std::size_t>(g);
          for (Index k = 0; k < grid.size(); ++k) {
            auto idx = search.best;
            idx[gi] = static_cast<std::size_t>(k);
            CriterionRow row;
            row.family = family.name;
            row.member = member.label;
            row.group_names = member.group_names;
            row.df.resize(member.p());
            for (int h = 0; h < member.groups(); ++h) {
              const auto hi = static_cast<std::size_t>(h);
              row.group_values.push_back(family.parameter_grid[idx[hi]]);
              row.residual += prof.residual[hi](static_cast<Index>(idx[hi]));
              row.penalty += prof.penalty[hi](static_cast<Index>(idx[hi]));
            }
            for (Index j = 0; j < member.p(); ++j)
              row.df(j) = grid.dfs(static_cast<Index>(idx[static_cast<std::size_t>(member.group_of[static_cast<std::size_t>(j)])]));
            row.residual /= np;
            row.penalty /= np;
            row.criterion = row.residual + row.penalty;
            out.table.push_back(std::move(row));
          }
        }
      }
    }
  }

  out.fit = detail::finish_fit(spec, y, *best_family, *best_member, best_search.best);
  const Matrix s = cov(*best_member);
  out.fit.penalty_value = penalty(spec, out.fit.basis, out.fit.d, s);
  out.fit.residual_value = (out.fit.fitted - y).squaredNorm() / np;
  out.fit.criterion_value = criterion(spec, y, out.fit.basis, out.fit.d, s);
  return out;
}

template <typename F>
  requires(!std::is_base_of_v<Eigen::EigenBase<F>, F> && std::is_invocable_r_v<Matrix, const F&, const FamilyMember&>)
inline MultiTaskFit select_model(const KernelSpectrum& spec, const Matrix& y,
                                 const std::vector<SimilarityFamily>& families, const F& cov) {
  return select_model_detailed(spec, y, families, PenaltyCovariance(cov)).fit;
}

inline MultiTaskFit select_model(const KernelSpectrum& spec, const Matrix& y,
                                 const std::vector<SimilarityFamily>& families, const Matrix& s) {
  if (!is_symmetric(s, 1e-12)) throw input_error("select_model: S must be symmetric");
  return select_model(spec, y, families, [&s](const FamilyMember&) { return s; });
}

/// Empirical oracle: grid argmin of the realized error ||f_M - f||^2 for this
/// sample. criterion_value holds (1/np)||f_M - f||^2.
inline MultiTaskFit oracle_selector(const KernelSpectrum& spec, const Matrix& y, const Matrix& f,
                                    const std::vector<SimilarityFamily>& families) {
  const Index n = y.rows(), p = y.cols();
  if (n != spec.n() || f.rows() != n || f.cols() != p) throw input_error("oracle_selector: shape mismatch");
  detail::check_families(families, p);
  const auto np = static_cast<double>(n * p);
  const Matrix spectral_y = spec.to_spectral(y);
  const Matrix spectral_f = spec.to_spectral(f);

  const SimilarityFamily* best_family = nullptr;
  const FamilyMember* best_member = nullptr;
  std::vector<std::size_t> best_idx;
  double best_err = std::numeric_limits<double>::infinity();
  double best_df = std::numeric_limits<double>::infinity();

  for (const auto& family : families) {
    const PenaltyGrid grid = detail::family_penalty_grid(spec, family, p);
    const Matrix& sfac = grid.factors;
    const Matrix sfac2 = sfac.cwiseAbs2();
    for (const auto& member : family.members) {
      const Matrix ry = spectral_y * member.basis.transpose();
      const Matrix rf = spectral_f * member.basis.transpose();
      std::vector<Vector> err(static_cast<std::size_t>(member.groups()), Vector::Zero(grid.size()));
      for (Index j = 0; j < p; ++j) {
        auto& e = err[static_cast<std::size_t>(member.group_of[static_cast<std::size_t>(j)])];
        e += sfac2.transpose() * ry.col(j).cwiseAbs2() - 2.0 * sfac.transpose() * ry.col(j).cwiseProduct(rf.col(j));
        e.array() += rf.col(j).squaredNorm();
      }
      std::vector<std::size_t> idx;
      double total = 0.0, tdf = 0.0;
      for (int g = 0; g < member.groups(); ++g) {
        const auto& e = err[static_cast<std::size_t>(g)];
        Index best = 0;
        for (Index k = 1; k < grid.size(); ++k)
          if (e(k) < e(best)) best = k;
        idx.push_back(static_cast<std::size_t>(best));
        total += e(best);
        tdf += static_cast<double>(std::count(member.group_of.begin(), member.group_of.end(), g)) * grid.dfs(best);
      }
      if (total < best_err || (total == best_err && tdf < best_df)) {
        best_err = total;
        best_df = tdf;
        best_family = &family;
        best_member = &member;
        best_idx = idx;
      }
    }
  }
  auto fit = detail::finish_fit(spec, y, *best_family, *best_member, best_idx);
  fit.residual_value = (fit.fitted - y).squaredNorm() / np;
  fit.criterion_value = (fit.fitted - f).squaredNorm() / np;
  return fit;
}

}  // namespace minpen
