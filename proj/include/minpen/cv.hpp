#pragma once

// K-fold cross-validation over the same eigenvalue grids used by the
// penalized selector. For fixed (P, d) the held-out prediction is
//   Y_te = K_te,tr Q^T [ (Q Y_tr P^T)_ij / (mu_i + n_tr p d_j) ] P,
// so the held-out error also splits over directions and each group can be
// scanned independently.

#include "minpen/multitask.hpp"
#include "minpen/random.hpp"

#include <numeric>

namespace minpen {

/// Balanced random partition of 0..n-1 into `folds` parts (sizes differ by at most 1).
inline std::vector<std::vector<Index>> make_folds(Index n, int folds, Rng& rng) {
  if (folds < 2) throw input_error("cross-validation needs at least 2 folds");
  if (n < folds) throw input_error("cross-validation needs n >= folds (n = " + std::to_string(n) + ", folds = " + std::to_string(folds) + ")");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  for (std::size_t k = 0; k < order.size(); ++k) out[k % static_cast<std::size_t>(folds)].push_back(order[k]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace detail {

inline Matrix take_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

inline Matrix take_block(const Matrix& m, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(static_cast<Index>(a), static_cast<Index>(b)) = m(rows[a], cols[b]);
  return out;
}

}  // namespace detail

/// Predictions at test points for a smoother trained on (K_tr, Y_tr).
inline Matrix multitask_predict(const KernelSpectrum& train_spec, const Matrix& cross_kernel, const Matrix& basis,
                                const Vector& d, const Matrix& y_train) {
  detail::check_shapes(train_spec, basis, d, y_train.rows(), y_train.cols(), "multitask_predict");
  const Index n = train_spec.n(), p = basis.rows();
  Matrix coef = train_spec.to_spectral(y_train) * basis.transpose();
  for (Index j = 0; j < p; ++j) {
    const double scale = detail::direction_scale(n, p, d(j));
    for (Index i = 0; i < n; ++i) {
      const double denom = train_spec.eigenvalues()(i) + scale;
      coef(i, j) = (std::isinf(denom) || denom == 0.0) ? 0.0 : coef(i, j) / denom;
    }
  }
  return cross_kernel * train_spec.from_spectral(coef) * basis;
}

/// Selects (family, member, eigenvalues) by K-fold CV on the families' grids
/// and refits on all data. criterion_value is the CV squared error summed
/// over folds and tasks, divided by np.
inline MultiTaskFit cv_select(const Matrix& gram, const KernelSpectrum& spec, const Matrix& y,
                              const std::vector<SimilarityFamily>& families, int folds, Rng& rng) {
  const Index n = y.rows(), p = y.cols();
  if (gram.rows() != n || gram.cols() != n || spec.n() != n) throw input_error("cv_select: kernel size does not match Y");
  detail::check_families(families, p);
  const auto parts = make_folds(n, folds, rng);

  // errors[family][member][group] : Vector over that family's grid
  std::vector<std::vector<std::vector<Vector>>> errors;
  for (const auto& f : families) {
    auto& fam = errors.emplace_back();
    for (const auto& m : f.members)
      fam.emplace_back(static_cast<std::size_t>(m.groups()), Vector::Zero(static_cast<Index>(f.parameter_grid.size())));
  }

  for (const auto& test : parts) {
    std::vector<Index> train;
    for (Index i = 0; i < n; ++i)
      if (!std::binary_search(test.begin(), test.end(), i)) train.push_back(i);
    const auto n_tr = static_cast<Index>(train.size());
    const auto tr_spec = KernelSpectrum::decompose(detail::take_block(gram, train, train));
    const Matrix g = detail::take_block(gram, test, train) * tr_spec.eigenvectors().transpose();
    const Matrix y_tr = detail::take_rows(y, train);
    const Matrix y_te = detail::take_rows(y, test);
    const Matrix spectral_tr = tr_spec.to_spectral(y_tr);

    for (std::size_t fi = 0; fi < families.size(); ++fi) {
      const auto& family = families[fi];
      const auto grid_size = static_cast<Index>(family.parameter_grid.size());
      for (std::size_t mi = 0; mi < family.members.size(); ++mi) {
        const auto& member = family.members[mi];
        const Matrix rot = spectral_tr * member.basis.transpose();
        const Matrix target = y_te * member.basis.transpose();
        for (Index j = 0; j < p; ++j) {
          Matrix w(n_tr, grid_size);
          for (Index k = 0; k < grid_size; ++k) {
            const double scale = detail::direction_scale(n_tr, p, family.parameter_grid[static_cast<std::size_t>(k)]);
            for (Index i = 0; i < n_tr; ++i) {
              const double denom = tr_spec.eigenvalues()(i) + scale;
              w(i, k) = (std::isinf(denom) || denom == 0.0) ? 0.0 : rot(i, j) / denom;
            }
          }
          const Matrix pred = g * w;
          auto& acc = errors[fi][mi][static_cast<std::size_t>(member.group_of[static_cast<std::size_t>(j)])];
          acc += (pred.colwise() - target.col(j)).colwise().squaredNorm().transpose();
        }
      }
    }
  }

  const SimilarityFamily* best_family = nullptr;
  const FamilyMember* best_member = nullptr;
  std::vector<std::size_t> best_idx;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    for (std::size_t mi = 0; mi < families[fi].members.size(); ++mi) {
      const auto& member = families[fi].members[mi];
      std::vector<std::size_t> idx;
      double total = 0.0;
      for (int gi = 0; gi < member.groups(); ++gi) {
        const Vector& e = errors[fi][mi][static_cast<std::size_t>(gi)];
        Index best = 0;
        for (Index k = 1; k < e.size(); ++k)
          if (e(k) < e(best)) best = k;
        idx.push_back(static_cast<std::size_t>(best));
        total += e(best);
      }
      if (total < best_err) {
        best_err = total;
        best_family = &families[fi];
        best_member = &member;
        best_idx = idx;
      }
    }
  }
  auto fit = detail::finish_fit(spec, y, *best_family, *best_member, best_idx);
  const auto np = static_cast<double>(n * p);
  fit.residual_value = (fit.fitted - y).squaredNorm() / np;
  fit.criterion_value = best_err / np;
  return fit;
}

}  // namespace minpen
