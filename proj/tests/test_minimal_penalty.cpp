#include "support.hpp"

#include "minpen/minimal_penalty.hpp"

#include <gtest/gtest.h>

using namespace minpen;
using namespace minpen::testing;

TEST(ResponseVector, RejectsNonFinite) {
  Vector y = Vector::Zero(4);
  y(2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ResponseVector{y}, input_error);
}

TEST(PenaltyGrid, ResidualsMatchDirectComputation) {
  auto rng = make_rng(21, 0);
  const auto inst = random_instance(10, 3, rng);
  const Vector y = standard_normal(10, 1, rng).col(0);
  const auto grid = PenaltyGrid::from_df_targets(inst.spec);
  const Vector r = grid.residuals(inst.spec.to_spectral(y));
  for (Index k = 0; k < grid.size(); ++k) {
    const Vector fit = apply_smoother(inst.spec, grid.lambdas[static_cast<std::size_t>(k)], y);
    EXPECT_NEAR(r(k), (fit - y).squaredNorm() / 10.0, 1e-12);
    EXPECT_NEAR(grid.pen_mins(k), pen_min(inst.spec, grid.lambdas[static_cast<std::size_t>(k)]), 1e-14);
  }
}

TEST(PenaltyGrid, EmptyGridThrows) {
  const auto spec = KernelSpectrum::diagonal({1.0, 0.5});
  EXPECT_THROW(PenaltyGrid(spec, {}), input_error);
}

TEST(PenaltyGrid, ArgminTiesGoToLargerLambda) {
  const auto spec = KernelSpectrum::diagonal({1.0, 0.5});
  const PenaltyGrid grid(spec, {Ridge(1.0), Ridge(2.0), Ridge(0.5)});
  const Vector zero = Vector::Zero(3);
  // Zero residuals everywhere and c = 0: every point ties.
  EXPECT_EQ(grid.lambdas[static_cast<std::size_t>(grid.argmin(zero, 0.0))], Ridge(2.0));
}

TEST(LambdaPath, ZeroResponseSelectsInfinity) {
  auto rng = make_rng(2, 0);
  const auto inst = random_instance(8, 2, rng);
  const ResponseVector y(Vector::Zero(8));
  EXPECT_TRUE(lambda_path_point(inst.spec, y, 1.0, df_grid(inst.spec)).is_infinite());
}

TEST(LambdaPath, SmallCOverfits) {
  auto rng = make_rng(2, 1);
  const auto inst = random_instance(8, 2, rng);
  const ResponseVector y(standard_normal(8, 1, rng).col(0));
  const auto grid = df_grid(inst.spec);
  EXPECT_EQ(lambda_path_point(inst.spec, y, 1e-12, grid), grid.back());
}

TEST(LambdaPath, Preconditions) {
  auto rng = make_rng(2, 2);
  const auto inst = random_instance(8, 2, rng);
  const ResponseVector y(Vector::Ones(8));
  EXPECT_THROW(lambda_path_point(inst.spec, y, 0.0, df_grid(inst.spec)), input_error);
  EXPECT_THROW(lambda_path_point(inst.spec, y, 1.0, {Ridge(1.0), Ridge(0.1)}), input_error);
  EXPECT_THROW(lambda_path_point(inst.spec, ResponseVector(Vector::Ones(7)), 1.0, df_grid(inst.spec)), input_error);
}

// Pure noise N(0, 4 I), n = 50: C = 2 overfits (df > n/3), C = 8 collapses
// (df < n/10), in at least 90 of 100 seeded draws.
TEST(LambdaPath, JumpAroundNoiseVarianceOnPureNoise) {
  int ok = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto rng = make_rng(77, static_cast<std::uint64_t>(rep));
    const auto inst = random_instance(50, 4, rng);
    const ResponseVector y(2.0 * standard_normal(50, 1, rng).col(0));
    const auto grid = df_grid(inst.spec);
    const double low = df(inst.spec, lambda_path_point(inst.spec, y, 0.5 * 4.0, grid));
    const double high = df(inst.spec, lambda_path_point(inst.spec, y, 2.0 * 4.0, grid));
    ok += (low > 50.0 / 3.0 && high < 5.0) ? 1 : 0;
  }
  EXPECT_GE(ok, 90);
}

TEST(EstimateVariance, PathInvariants) {
  auto rng = make_rng(8, 0);
  const auto inst = random_instance(60, 4, rng);
  const Vector y = smooth_truth(inst.design, 1, rng).col(0) + std::sqrt(3.0) * standard_normal(60, 1, rng).col(0);
  const auto est = estimate_variance(inst.spec, ResponseVector(y));
  const auto& path = est.path;
  ASSERT_EQ(path.c_grid.size(), 200u);
  for (std::size_t k = 1; k < path.c_grid.size(); ++k) {
    EXPECT_GT(path.c_grid[k], path.c_grid[k - 1]);
    EXPECT_LE(path.df_at_c[k], path.df_at_c[k - 1] + 1e-9);
  }
  EXPECT_NE(std::find(path.c_grid.begin(), path.c_grid.end(), est.c_hat), path.c_grid.end());
  EXPECT_LT(path.df_at_c_hat, 30.0);
  EXPECT_FALSE(path.degenerate);
  EXPECT_GT(est.c_hat, 0.0);
}

TEST(EstimateVariance, ZeroResponseIsDegenerate) {
  auto rng = make_rng(8, 1);
  const auto inst = random_instance(10, 2, rng);
  const auto est = estimate_variance(inst.spec, ResponseVector(Vector::Zero(10)));
  EXPECT_TRUE(est.path.degenerate);
  EXPECT_EQ(est.c_hat, 0.0);
}

TEST(EstimateVariance, ScalesQuadratically) {
  auto rng = make_rng(8, 2);
  const auto inst = random_instance(40, 3, rng);
  const Vector y = smooth_truth(inst.design, 1, rng).col(0) + standard_normal(40, 1, rng).col(0);
  const auto grid = PenaltyGrid::from_df_targets(inst.spec);
  const double base = estimate_variance(inst.spec, ResponseVector(y), grid).c_hat;
  for (double s : {0.1, 3.0, 250.0}) {
    const double scaled = estimate_variance(inst.spec, ResponseVector(s * y), grid).c_hat;
    EXPECT_NEAR(scaled / (s * s * base), 1.0, 1e-9) << "s = " << s;
  }
}

TEST(EstimateVariance, NeedsFourPoints) {
  const auto spec = KernelSpectrum::diagonal({1.0, 0.5, 0.2});
  EXPECT_THROW(estimate_variance(spec, ResponseVector(Vector::Ones(3))), input_error);
}

TEST(EstimateVariance, LengthMismatchThrows) {
  auto rng = make_rng(8, 3);
  const auto inst = random_instance(10, 2, rng);
  EXPECT_THROW(estimate_variance(inst.spec, ResponseVector(Vector::Ones(9))), input_error);
}

TEST(EstimateVariance, CalibrationFailureWhenGridNeverJumps) {
  auto rng = make_rng(8, 4);
  const auto inst = random_instance(20, 2, rng);
  const Vector y = standard_normal(20, 1, rng).col(0);
  CalibrationOptions opts;
  opts.c_min_factor = 1e-12;
  opts.c_max_factor = 1e-10;
  EXPECT_THROW(estimate_variance(inst.spec, ResponseVector(y), opts), calibration_error);
}

TEST(EstimateVariance, WindowDiagnosticIsConsistentWithPath) {
  for (int rep = 0; rep < 10; ++rep) {
    auto rng = make_rng(8, 5 + static_cast<std::uint64_t>(rep));
    const auto inst = random_instance(80, 4, rng);
    const Vector y = smooth_truth(inst.design, 1, rng).col(0) + standard_normal(80, 1, rng).col(0);
    const auto est = estimate_variance(inst.spec, ResponseVector(y));
    const auto& path = est.path;
    const auto in_window = [](double d) { return d >= 8.0 && d <= 80.0 / 3.0; };
    const auto first = std::find_if(path.df_at_c.begin(), path.df_at_c.end(), in_window);
    if (first == path.df_at_c.end()) {
      // The path jumped straight across the window.
      EXPECT_FALSE(path.window_c_hat.has_value());
    } else {
      ASSERT_TRUE(path.window_c_hat.has_value());
      EXPECT_EQ(*path.window_c_hat, path.c_grid[static_cast<std::size_t>(first - path.df_at_c.begin())]);
    }
  }
}

TEST(ProjectResponses, CanonicalDirections) {
  Matrix y(3, 2);
  y << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(project_responses(y, Vector::Unit(2, 1)).values(), y.col(1));
  EXPECT_EQ(project_responses(y, Vector::Ones(2)).values(), y.col(0) + y.col(1));
  EXPECT_THROW(project_responses(y, Vector::Ones(3)), input_error);
}

TEST(ProjectResponses, ProjectedNoiseVariance) {
  auto rng = make_rng(31, 0);
  Matrix sigma(3, 3);
  sigma << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 3.0;
  Vector z(3);
  z << 1.0, -2.0, 0.5;
  const Matrix e = draw_noise(sigma, 10000, rng);
  const Vector proj = project_responses(e, z).values();
  const double var = proj.squaredNorm() / 10000.0;
  EXPECT_NEAR(var / z.dot(sigma * z), 1.0, 0.05);
}
