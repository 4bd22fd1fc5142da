#include "support.hpp"

#include "minpen/covariance.hpp"
#include "minpen/cv.hpp"

#include <gtest/gtest.h>

using namespace minpen;
using namespace minpen::testing;

namespace {

struct Problem {
  Instance inst;
  Matrix basis;
  Vector d;
  Matrix y;
};

Problem random_problem(Rng& rng, Index n, Index p) {
  Problem pr{random_instance(n, 2, rng), random_orthogonal(p, rng), random_positive(p, rng), {}};
  pr.y = standard_normal(n, p, rng);
  return pr;
}

/// Every Cartesian grid point of every member, evaluated independently.
double brute_force_min(const KernelSpectrum& spec, const Matrix& y, const std::vector<SimilarityFamily>& families,
                       const Matrix& s) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& family : families)
    for (const auto& member : family.members) {
      const auto g = family.parameter_grid.size();
      std::vector<std::size_t> idx(static_cast<std::size_t>(member.groups()), 0);
      while (true) {
        std::vector<double> values;
        for (auto k : idx) values.push_back(family.parameter_grid[k]);
        best = std::min(best, criterion(spec, y, member.basis, member.expand(values), s));
        std::size_t pos = 0;
        while (pos < idx.size() && ++idx[pos] == g) idx[pos++] = 0;
        if (pos == idx.size()) break;
      }
    }
  return best;
}

}  // namespace

TEST(Families, IndependentEigenvalues) {
  const auto par = independent_eigenvalues({0.3, 0.3, 0.3});
  EXPECT_EQ(par.basis, Matrix::Identity(3, 3));
  EXPECT_LT((reconstruct(par.basis, par.d) - 0.1 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(independent_eigenvalues({1.0, 0.0}), input_error);
}

TEST(Families, SimilarMatchesDisplayedMatrix) {
  const double l = 0.7, mu = 0.2;
  const auto par = similar_eigenvalues(2, l, mu);
  Matrix expected(2, 2);
  expected << l + mu, -mu, -mu, l + mu;
  EXPECT_LT((reconstruct(par.basis, par.d) - expected).cwiseAbs().maxCoeff(), 1e-14);
  for (Index p = 1; p <= 6; ++p) {
    const auto q = similar_eigenvalues(p, l, mu);
    EXPECT_LT((reconstruct(q.basis, q.d) - similar_matrix(p, l, mu)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((q.basis * q.basis.transpose() - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_THROW(similar_eigenvalues(3, 0.0, 1.0), input_error);
}

TEST(Families, ClusterMatchesDenseDefinition) {
  const std::vector<Index> subset{0, 2, 3};
  const auto par = cluster_eigenvalues(6, subset, 0.4, 0.9, 1.7);
  const Matrix m = reconstruct(par.basis, par.d);
  EXPECT_LT((m - cluster_matrix(6, subset, 0.4, 0.9, 1.7)).cwiseAbs().maxCoeff(), 1e-13);
  Eigen::LLT<Matrix> llt(m);
  EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Families, ClusterOfSingletonInTwoTasks) {
  const auto par = cluster_eigenvalues(2, {0}, 0.5, 3.0, 7.0);
  EXPECT_LT((par.basis.cwiseAbs() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(par.d, Vector::Constant(2, 0.5));
  const Matrix m = reconstruct(par.basis, par.d);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  EXPECT_NEAR(es.eigenvalues()(0), 0.5, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(1), 0.5, 1e-15);
  EXPECT_EQ(Eigen::LLT<Matrix>(m).info(), Eigen::Success);
}

TEST(Families, ClusterRejectsEmptyOrFullSubset) {
  EXPECT_THROW(cluster_member(3, {}), input_error);
  EXPECT_THROW(cluster_member(3, {0, 1, 2}), input_error);
  EXPECT_THROW(cluster_member(3, {5}), input_error);
}

TEST(Families, UnionSizesAndBases) {
  const std::vector<double> grid{std::numeric_limits<double>::infinity(), 1.0, 0.1};
  const auto clus = make_family(FamilyKind::cluster_union, 5, grid);
  EXPECT_EQ(clus.members.size(), 16u);  // 2^4 - 1 subsets containing task 1, plus similar
  const auto seg = make_family(FamilyKind::segmentation_union, 5, grid);
  EXPECT_EQ(seg.members.size(), 5u);
  for (const auto* fam : {&clus, &seg})
    for (const auto& m : fam->members) {
      EXPECT_LT((m.basis * m.basis.transpose() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-14) << m.label;
      EXPECT_EQ(m.group_of.size(), 5u);
    }
  EXPECT_THROW(make_family(FamilyKind::cluster_union, 13, grid), input_error);
  EXPECT_THROW(make_family(FamilyKind::cluster_union, 1, grid), input_error);
  EXPECT_THROW(make_family(FamilyKind::similar, 3, {}), input_error);
}

TEST(Families, ComplementGivesSameMatrix) {
  const auto a = cluster_eigenvalues(5, {0, 1}, 0.3, 0.8, 0.8);
  const auto b = cluster_eigenvalues(5, {2, 3, 4}, 0.3, 0.8, 0.8);
  EXPECT_LT((reconstruct(a.basis, a.d) - reconstruct(b.basis, b.d)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Families, GridIsDescendingAndHitsIntegerDf) {
  auto rng = make_rng(9, 0);
  const auto inst = random_instance(15, 3, rng);
  const auto fam = make_family(FamilyKind::similar, inst.spec, 4);
  ASSERT_EQ(fam.parameter_grid.size(), 16u);
  EXPECT_TRUE(std::isinf(fam.parameter_grid.front()));
  for (std::size_t k = 1; k < fam.parameter_grid.size(); ++k) EXPECT_LT(fam.parameter_grid[k], fam.parameter_grid[k - 1]);
  for (std::size_t k = 0; k < fam.parameter_grid.size(); ++k) {
    Vector d = Vector::Constant(1, fam.parameter_grid[k]);
    EXPECT_NEAR(per_direction_df(inst.spec, Vector::Constant(4, fam.parameter_grid[k]))(0), static_cast<double>(k), 1e-6);
  }
}

TEST(Smoother, MatchesDenseKroneckerOnRandomInstances) {
  auto rng = make_rng(100, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + rep % 5, p = 1 + rep % 3;
    const auto pr = random_problem(rng, n, p);
    const Matrix a = dense_smoother(pr.inst.gram, reconstruct(pr.basis, pr.d));
    const Matrix fast = multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, pr.y);
    EXPECT_LT((vec(fast) - a * vec(pr.y)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(total_df(pr.inst.spec, pr.d), a.trace(), 1e-8);
    Vector per_dir(p);
    for (Index j = 0; j < p; ++j) per_dir(j) = df(pr.inst.spec, Ridge(static_cast<double>(p) * pr.d(j)));
    EXPECT_LT((per_direction_df(pr.inst.spec, pr.d) - per_dir).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Smoother, InfinityShrinksToZeroAndZeroInterpolates) {
  auto rng = make_rng(100, 1);
  const auto pr = random_problem(rng, 5, 3);
  const Vector inf = Vector::Constant(3, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(multitask_smoother_apply(pr.inst.spec, pr.basis, inf, pr.y).isZero());
  const Matrix interp = multitask_smoother_apply(pr.inst.spec, pr.basis, Vector::Zero(3), pr.y);
  EXPECT_LT((interp - pr.y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Smoother, IndependentFamilyIsColumnwiseSingleTask) {
  auto rng = make_rng(100, 2);
  const auto inst = random_instance(8, 2, rng);
  const Matrix y = standard_normal(8, 3, rng);
  const std::vector<double> lambdas{0.3, 0.01, 2.0};
  const auto par = independent_eigenvalues(lambdas);
  const Matrix fit = multitask_smoother_apply(inst.spec, par.basis, par.d, y);
  for (Index j = 0; j < 3; ++j)
    EXPECT_LT((fit.col(j) - apply_smoother(inst.spec, Ridge(lambdas[static_cast<std::size_t>(j)]), y.col(j))).cwiseAbs().maxCoeff(),
              1e-13);
}

TEST(Smoother, IsLinear) {
  auto rng = make_rng(100, 3);
  const auto pr = random_problem(rng, 6, 3);
  const Matrix y2 = standard_normal(6, 3, rng);
  const Matrix lhs = multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, pr.y + y2);
  const Matrix rhs = multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, pr.y) +
                     multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, y2);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Smoother, ShapeErrors) {
  auto rng = make_rng(100, 4);
  const auto pr = random_problem(rng, 5, 2);
  EXPECT_THROW(multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, Matrix::Zero(4, 2)), input_error);
  EXPECT_THROW(multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, Matrix::Zero(5, 3)), input_error);
  EXPECT_THROW(multitask_smoother_apply(pr.inst.spec, pr.basis, Vector::Ones(3), pr.y), input_error);
}

TEST(Penalty, MatchesDenseTrace) {
  auto rng = make_rng(101, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 3 + rep % 4, p = 1 + rep % 3;
    const auto pr = random_problem(rng, n, p);
    const Matrix s = random_spd(p, rng);
    const Matrix a = dense_smoother(pr.inst.gram, reconstruct(pr.basis, pr.d));
    EXPECT_NEAR(penalty(pr.inst.spec, pr.basis, pr.d, s), dense_penalty(a, s, n), 1e-10);
    const double expected = (vec(pr.y) - a * vec(pr.y)).squaredNorm() / static_cast<double>(n * p) + dense_penalty(a, s, n);
    EXPECT_NEAR(criterion(pr.inst.spec, pr.y, pr.basis, pr.d, s), expected, 1e-10);
  }
}

TEST(Penalty, ZeroCovarianceAndSingleTaskReduction) {
  auto rng = make_rng(101, 1);
  const auto pr = random_problem(rng, 6, 2);
  EXPECT_EQ(penalty(pr.inst.spec, pr.basis, pr.d, Matrix::Zero(2, 2)), 0.0);
  const auto inst = random_instance(7, 3, rng);
  const double lambda = 0.2, sigma2 = 3.0;
  const double pen = penalty(inst.spec, Matrix::Identity(1, 1), Vector::Constant(1, lambda), Matrix::Constant(1, 1, sigma2));
  EXPECT_NEAR(pen, 2.0 * sigma2 * df(inst.spec, Ridge(lambda)) / 7.0, 1e-14);
  EXPECT_THROW(penalty(inst.spec, Matrix::Identity(1, 1), Vector::Ones(1), Matrix::Ones(2, 2)), input_error);
}

TEST(BiasVariance, MatchesDenseFormula) {
  auto rng = make_rng(102, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 3 + rep % 4, p = 1 + rep % 3;
    const auto pr = random_problem(rng, n, p);
    const Matrix f = standard_normal(n, p, rng);
    const Matrix sigma = random_spd(p, rng);
    const auto fast = oracle_bias_variance(pr.inst.spec, f, sigma, pr.basis, pr.d);
    const auto dense = dense_bias_variance(dense_smoother(pr.inst.gram, reconstruct(pr.basis, pr.d)), f, sigma);
    EXPECT_NEAR(fast.bias, dense.bias, 1e-9);
    EXPECT_NEAR(fast.variance, dense.variance, 1e-9);
  }
}

TEST(BiasVariance, BiasVanishesWhenInterpolating) {
  auto rng = make_rng(102, 1);
  const auto pr = random_problem(rng, 5, 2);
  const Matrix f = standard_normal(5, 2, rng);
  EXPECT_LT(oracle_bias_variance(pr.inst.spec, f, Matrix::Identity(2, 2), pr.basis, Vector::Constant(2, 1e-14)).bias, 1e-12);
}

TEST(BiasVariance, SimilarBiasDoesNotDependOnContrastWhenTasksEqual) {
  auto rng = make_rng(102, 2);
  const auto inst = random_instance(6, 2, rng);
  const Vector g = standard_normal(6, 1, rng).col(0);
  const Matrix f = g.replicate(1, 3);
  const auto member = similar_member(3);
  const double b0 = oracle_bias_variance(inst.spec, f, Matrix::Identity(3, 3), member.basis, member.expand({0.1, 0.05})).bias;
  for (double contrast : {0.2, 3.0, 1e6, std::numeric_limits<double>::infinity()})
    EXPECT_EQ(oracle_bias_variance(inst.spec, f, Matrix::Identity(3, 3), member.basis, member.expand({0.1, contrast})).bias, b0);
}

TEST(BiasVariance, MonteCarloMean) {
  auto rng = make_rng(103, 0);
  const auto pr = random_problem(rng, 4, 2);
  const Matrix f = standard_normal(4, 2, rng);
  Matrix sigma(2, 2);
  sigma << 1.5, 0.4, 0.4, 0.8;
  const auto bv = oracle_bias_variance(pr.inst.spec, f, sigma, pr.basis, pr.d);
  const int draws = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const Matrix y = f + draw_noise(sigma, 4, rng);
    const double e = (multitask_smoother_apply(pr.inst.spec, pr.basis, pr.d, y) - f).squaredNorm();
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / draws, se = std::sqrt((sum2 / draws - mean * mean) / draws);
  EXPECT_LT(std::abs(mean - (bv.bias + bv.variance)), 3.0 * se);
}

class SelectionTest : public ::testing::Test {
protected:
  Rng rng = make_rng(104, 0);
  Instance inst = random_instance(6, 2, rng);
  Matrix f = smooth_truth(inst.design, 3, rng);
  Matrix y = f + draw_noise(0.05 * Matrix::Identity(3, 3), 6, rng);
  std::vector<double> grid = eigenvalue_grid(inst.spec, 3);
};

TEST_F(SelectionTest, MatchesBruteForceForEveryFamily) {
  Matrix s(3, 3);
  s << 0.05, 0.01, 0, 0.01, 0.04, 0.005, 0, 0.005, 0.06;
  for (auto kind : {FamilyKind::independent, FamilyKind::similar, FamilyKind::cluster_union, FamilyKind::segmentation_union}) {
    const std::vector<SimilarityFamily> families{make_family(kind, 3, grid)};
    const auto fit = select_model(inst.spec, y, families, s);
    EXPECT_DOUBLE_EQ(fit.criterion_value, brute_force_min(inst.spec, y, families, s)) << to_string(kind);
    EXPECT_NEAR(fit.criterion_value, fit.residual_value + fit.penalty_value, 1e-14);
  }
  const std::vector<SimilarityFamily> all{make_family(FamilyKind::independent, 3, grid),
                                          make_family(FamilyKind::similar, 3, grid)};
  EXPECT_DOUBLE_EQ(select_model(inst.spec, y, all, s).criterion_value, brute_force_min(inst.spec, y, all, s));
}

TEST_F(SelectionTest, NoiselessSelectsMaximalDf) {
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, 3, grid)};
  const Matrix generic = standard_normal(6, 3, rng);
  const auto fit = select_model(inst.spec, generic, families, Matrix::Zero(3, 3));
  EXPECT_NEAR(fit.per_direction_df.sum(), 18.0, 1e-9);
  // Identical columns: contrast residuals vanish everywhere, so ties keep d = inf there.
  const auto tied = select_model(inst.spec, f, families, Matrix::Zero(3, 3));
  EXPECT_NEAR(tied.per_direction_df.sum(), 6.0, 1e-9);
}

TEST_F(SelectionTest, SingleTaskReduction) {
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::independent, 1, eigenvalue_grid(inst.spec, 1))};
  const double c = 0.05;
  const auto fit = select_model(inst.spec, y.col(0), families, Matrix::Constant(1, 1, c));
  double best = std::numeric_limits<double>::infinity();
  for (Ridge r : df_grid(inst.spec)) {
    const Vector fitted = apply_smoother(inst.spec, r, y.col(0));
    best = std::min(best, (fitted - y.col(0)).squaredNorm() / 6.0 + 2.0 * c * df(inst.spec, r) / 6.0);
  }
  EXPECT_NEAR(fit.criterion_value, best, 1e-14);
}

TEST_F(SelectionTest, CriterionTableContainsChosenPoint) {
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, 3, grid)};
  const auto sel = select_model_detailed(inst.spec, y, families,
                                         [](const FamilyMember&) { return Matrix(0.05 * Matrix::Identity(3, 3)); }, {true});
  EXPECT_EQ(sel.table.size(), 2 * grid.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : sel.table) best = std::min(best, row.criterion);
  EXPECT_NEAR(best, sel.fit.criterion_value, 1e-14);
}

TEST_F(SelectionTest, OracleIsNoWorseThanAnyGridPoint) {
  for (auto kind : {FamilyKind::independent, FamilyKind::similar, FamilyKind::cluster_union}) {
    const std::vector<SimilarityFamily> families{make_family(kind, 3, grid)};
    const auto oracle = oracle_selector(inst.spec, y, f, families);
    const double oracle_risk = (oracle.fitted - f).squaredNorm() / 18.0;
    EXPECT_NEAR(oracle.criterion_value, oracle_risk, 1e-14);
    const auto chosen = select_model(inst.spec, y, families, Matrix(0.05 * Matrix::Identity(3, 3)));
    EXPECT_LE(oracle_risk, (chosen.fitted - f).squaredNorm() / 18.0 + 1e-15);
    for (const auto& member : families[0].members)
      for (double a : grid)
        for (double b : grid) {
          std::vector<double> values{a};
          if (member.groups() > 1) values.push_back(b);
          if (member.groups() > 2) values.push_back(a);
          const Matrix fit = multitask_smoother_apply(inst.spec, member.basis, member.expand(values), y);
          EXPECT_LE(oracle_risk, (fit - f).squaredNorm() / 18.0 + 1e-15);
        }
  }
}

TEST_F(SelectionTest, NoiselessOracleInterpolates) {
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, 3, grid)};
  const auto oracle = oracle_selector(inst.spec, f, f, families);
  EXPECT_LT(oracle.criterion_value, 1e-20);
}

TEST_F(SelectionTest, Errors) {
  EXPECT_THROW(select_model(inst.spec, y, {}, Matrix::Identity(3, 3)), input_error);
  const std::vector<SimilarityFamily> wrong_p{make_family(FamilyKind::similar, 2, grid)};
  EXPECT_THROW(select_model(inst.spec, y, wrong_p, Matrix::Identity(3, 3)), input_error);
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, 3, grid)};
  EXPECT_THROW(select_model(inst.spec, y, families, Matrix::Identity(2, 2)), input_error);
  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1.0;
  EXPECT_THROW(select_model(inst.spec, y, families, asym), input_error);
}

TEST(CrossValidation, FoldsAreBalancedPartition) {
  auto rng = make_rng(105, 0);
  for (Index n : {5, 11, 23, 100}) {
    const auto folds = make_folds(n, 5, rng);
    std::vector<int> seen(static_cast<std::size_t>(n), 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (Index i : f) ++seen[static_cast<std::size_t>(i)];
    }
    EXPECT_LE(hi - lo, 1u);
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  EXPECT_THROW(make_folds(4, 5, rng), input_error);
  EXPECT_THROW(make_folds(10, 1, rng), input_error);
}

TEST(CrossValidation, PredictionMatchesDenseRefit) {
  auto rng = make_rng(105, 1);
  const auto inst = random_instance(9, 2, rng);
  const std::vector<Index> train{0, 1, 2, 4, 5, 7}, test{3, 6, 8};
  const Matrix k_tr = detail::take_block(inst.gram, train, train);
  const Matrix k_te = detail::take_block(inst.gram, test, train);
  const auto spec = KernelSpectrum::decompose(k_tr);
  const Matrix y = standard_normal(6, 2, rng);
  const Matrix basis = random_orthogonal(2, rng);
  const Vector d = random_positive(2, rng);
  // Representer form: coefficients C solve (M^{-1} (x) K + np I) vec(C) = vec(Y).
  const Matrix m_inv = reconstruct(basis, d).inverse();
  const Matrix big = Eigen::kroneckerProduct(m_inv, k_tr).eval() + 12.0 * Matrix::Identity(12, 12);
  const Matrix coef = unvec(big.partialPivLu().solve(vec(y)), 6, 2);
  const Matrix expected = k_te * coef * m_inv.transpose();
  EXPECT_LT((multitask_predict(spec, k_te, basis, d, y) - expected).cwiseAbs().maxCoeff(), 1e-9);
  // On the training points the prediction is the smoother itself.
  EXPECT_LT((multitask_predict(spec, k_tr, basis, d, y) - multitask_smoother_apply(spec, basis, d, y)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(CrossValidation, SelectionMatchesBruteForceCvError) {
  auto rng = make_rng(105, 2);
  const auto inst = random_instance(12, 3, rng);
  const Matrix y = smooth_truth(inst.design, 2, rng) + 0.1 * standard_normal(12, 2, rng);
  const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, inst.spec, 2)};
  auto fold_rng = make_rng(7, 7);
  const auto fit = cv_select(inst.gram, inst.spec, y, families, 4, fold_rng);
  auto replay = make_rng(7, 7);
  const auto folds = make_folds(12, 4, replay);
  double best = std::numeric_limits<double>::infinity();
  const auto& member = families[0].members[0];
  for (double a : families[0].parameter_grid)
    for (double b : families[0].parameter_grid) {
      double err = 0.0;
      for (const auto& te : folds) {
        std::vector<Index> tr;
        for (Index i = 0; i < 12; ++i)
          if (!std::binary_search(te.begin(), te.end(), i)) tr.push_back(i);
        const auto spec = KernelSpectrum::decompose(detail::take_block(inst.gram, tr, tr));
        const Matrix pred = multitask_predict(spec, detail::take_block(inst.gram, te, tr), member.basis,
                                              member.expand({a, b}), detail::take_rows(y, tr));
        err += (pred - detail::take_rows(y, te)).squaredNorm();
      }
      best = std::min(best, err / 24.0);
    }
  EXPECT_NEAR(fit.criterion_value, best, 1e-10);
}

TEST(CrossValidation, PrefersSignalOverShrinkToZero) {
  int ok = 0;
  for (int rep = 0; rep < 20; ++rep) {
    auto rng = make_rng(106, static_cast<std::uint64_t>(rep));
    const auto inst = random_instance(50, 2, rng);
    const Matrix f = 5.0 * smooth_truth(inst.design, 2, rng);
    const Matrix y = f + 0.01 * standard_normal(50, 2, rng);
    const std::vector<SimilarityFamily> families{make_family(FamilyKind::similar, inst.spec, 2)};
    const auto fit = cv_select(inst.gram, inst.spec, y, families, 5, rng);
    ok += (fit.fitted - f).squaredNorm() < f.squaredNorm() ? 1 : 0;
  }
  EXPECT_GE(ok, 18);
}
