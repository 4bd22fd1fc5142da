#pragma once

// Synthetic multi-task experiments: product-Laplace kernel on standard
// Gaussian designs in R^d, target functions built from m kernel centers,
// Gaussian task-correlated noise. Each replication compares estimators by
// the quadratic error (np)^{-1} ||f_hat - f||^2.

#include "minpen/covariance.hpp"
#include "minpen/cv.hpp"
#include "minpen/multitask.hpp"
#include "minpen/random.hpp"

#include <atomic>
#include <cstdio>
#include <thread>

namespace minpen {

/// Which estimators a replication computes.
enum class Protocol {
  /// multi-task (similar) vs single-task (independent), Sigma known or HM-estimated.
  compare,
  /// clustering / segmentation unions vs single-task, full Sigma-hat.
  clustering,
  /// HM-penalized selection vs K-fold cross-validation on the similar family.
  cross_validation,
};

inline std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::compare: return "compare";
    case Protocol::clustering: return "clustering";
    case Protocol::cross_validation: return "cross_validation";
  }
  return "unknown";
}

/// How the target functions are built from the kernel centers.
enum class TargetFunctions {
  /// alpha = 1, centers fixed across replications: every task is f_A.
  shared,
  /// alpha ~ N(0, I) and fresh centers per replication; the first half of
  /// the tasks is f_D, the second half -f_D.
  opposed,
};

struct SigmaSpec {
  enum class Kind { scaled_identity, wishart, explicit_matrix };
  Kind kind = Kind::scaled_identity;
  double scale = 10.0;  ///< scaled_identity: Sigma = scale * I_p
  int dof = 0;          ///< wishart: Sigma ~ W(I_p, dof), drawn once per seed
  Matrix matrix;        ///< explicit_matrix

  static SigmaSpec scaled_identity(double s) { return {Kind::scaled_identity, s, 0, {}}; }
  static SigmaSpec wishart(int dof) { return {Kind::wishart, 0.0, dof, {}}; }
  static SigmaSpec explicit_matrix(Matrix m) { return {Kind::explicit_matrix, 0.0, 0, std::move(m)}; }
};

struct ExperimentConfig {
  std::string experiment_id = "custom";
  Protocol protocol = Protocol::compare;
  TargetFunctions functions = TargetFunctions::shared;
  Index n = 100;
  Index p = 5;
  Index d = 4;
  Index m = 4;
  SigmaSpec sigma;
  int replications = 100;
  std::uint64_t seed = 1;
  int df_refinement = 1;
  int cv_folds = 5;
  /// Optional parameter sweep: key is one of n, p, t, sigma_scale.
  std::string sweep_key;
  std::vector<double> sweep_values;

  void validate() const {
    if (n < 4) throw input_error("config: n must be >= 4");
    if (p < 1) throw input_error("config: p must be >= 1");
    if (d < 1) throw input_error("config: d must be >= 1");
    if (m < 1) throw input_error("config: m must be >= 1");
    if (replications < 1) throw input_error("config: replications must be >= 1");
    if (df_refinement < 1) throw input_error("config: df_refinement must be >= 1");
    if (sigma.kind == SigmaSpec::Kind::scaled_identity && !(sigma.scale >= 0.0))
      throw input_error("config: sigma scale must be >= 0");
    if (sigma.kind == SigmaSpec::Kind::wishart && sigma.dof < p) throw input_error("config: wishart dof must be >= p");
    if (sigma.kind == SigmaSpec::Kind::explicit_matrix && (sigma.matrix.rows() != p || sigma.matrix.cols() != p))
      throw input_error("config: explicit sigma must be p x p");
    if (protocol == Protocol::cross_validation && n < cv_folds) throw input_error("config: n must be >= cv_folds");
    if (protocol == Protocol::clustering && (p < 2 || p > 12)) throw input_error("config: clustering needs 2 <= p <= 12");
  }
};

/// Applies a single numeric override (sweep values and CLI flags).
inline void apply_override(ExperimentConfig& cfg, const std::string& key, double value) {
  if (key == "n") {
    cfg.n = static_cast<Index>(value);
  } else if (key == "p") {
    cfg.p = static_cast<Index>(value);
  } else if (key == "t") {
    cfg.sigma = SigmaSpec::scaled_identity(5.0 * value);
  } else if (key == "sigma_scale") {
    cfg.sigma = SigmaSpec::scaled_identity(value);
  } else {
    throw input_error("unknown override key '" + key + "' (valid: n, p, t, sigma_scale)");
  }
}

inline constexpr const char* kPresetNames = "A, B, C, D, E";

/// Desk-scale versions of the five reference experiments.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.experiment_id = name;
  c.replications = 100;
  if (name == "A") {  // various numbers of tasks
    c.n = 10;
    c.p = 10;
    c.sigma = SigmaSpec::scaled_identity(10.0);
    c.sweep_key = "p";
    for (int k = 1; k <= 25; ++k) c.sweep_values.push_back(2.0 * k);
  } else if (name == "B") {  // various sample sizes
    c.n = 200;
    c.p = 5;
    c.sigma = SigmaSpec::wishart(10);
    c.sweep_key = "n";
    for (int k = 1; k <= 20; ++k) c.sweep_values.push_back(50.0 * k);
  } else if (name == "C") {  // various noise levels, Sigma = 5t I
    c.n = 100;
    c.p = 5;
    c.sigma = SigmaSpec::scaled_identity(5.0);
    c.sweep_key = "t";
    c.sweep_values.push_back(0.01);
    for (int k = 1; k <= 50; ++k) c.sweep_values.push_back(0.2 * k);
    c.sweep_values.push_back(100.0);
  } else if (name == "D") {  // two opposed groups of tasks
    c.protocol = Protocol::clustering;
    c.functions = TargetFunctions::opposed;
    c.n = 100;
    c.p = 10;
    c.sigma = SigmaSpec::wishart(20);
  } else if (name == "E") {  // comparison with cross-validation
    c.protocol = Protocol::cross_validation;
    c.n = 100;
    c.p = 5;
    c.sigma = SigmaSpec::scaled_identity(10.0);
    c.sweep_key = "n";
    c.sweep_values = {10, 50, 100, 250};
  } else {
    throw input_error(std::string("unknown preset '") + name + "' (valid presets: " + kPresetNames + ")");
  }
  return c;
}

namespace streams {
inline constexpr std::uint64_t sigma = 1;
inline constexpr std::uint64_t centers = 2;
inline constexpr std::uint64_t replication_base = 1000;
}  // namespace streams

inline Matrix resolve_sigma(const ExperimentConfig& cfg) {
  switch (cfg.sigma.kind) {
    case SigmaSpec::Kind::scaled_identity: return cfg.sigma.scale * Matrix::Identity(cfg.p, cfg.p);
    case SigmaSpec::Kind::wishart: {
      auto rng = make_rng(cfg.seed, streams::sigma);
      return draw_wishart(Matrix::Identity(cfg.p, cfg.p), cfg.sigma.dof, rng);
    }
    case SigmaSpec::Kind::explicit_matrix:
      if (!is_symmetric(cfg.sigma.matrix, 1e-12)) throw input_error("explicit sigma must be symmetric");
      return cfg.sigma.matrix;
  }
  throw input_error("invalid sigma setting");
}

inline Matrix draw_centers(const ExperimentConfig& cfg) {
  auto rng = make_rng(cfg.seed, streams::centers);
  return standard_normal(cfg.m, cfg.d, rng);
}

struct SampleTruth {
  Matrix design;   ///< n x d
  Matrix centers;  ///< m x d
  Matrix alpha;    ///< m x p
  Matrix f;        ///< n x p, F_ij = sum_k alpha_kj k(X_i, z_k)
};

/// Draws the design (always fresh) and the target functions.
inline SampleTruth draw_design_and_functions(const ExperimentConfig& cfg, const Matrix& shared_centers, Rng& rng) {
  SampleTruth s;
  s.design = standard_normal(cfg.n, cfg.d, rng);
  if (cfg.functions == TargetFunctions::opposed) {
    s.centers = standard_normal(cfg.m, cfg.d, rng);
    const Matrix a = standard_normal(cfg.m, 1, rng);
    s.alpha.resize(cfg.m, cfg.p);
    const Index half = (cfg.p + 1) / 2;
    for (Index j = 0; j < cfg.p; ++j) s.alpha.col(j) = j < half ? a.col(0) : Vector(-a.col(0));
  } else {
    s.centers = shared_centers;
    s.alpha = Matrix::Ones(cfg.m, cfg.p);
  }
  s.f = kernel_cross(s.design, s.centers) * s.alpha;
  return s;
}

struct EstimatorOutcome {
  std::string name;
  double error = 0.0;  ///< (np)^{-1} ||f_hat - f||^2
  std::string params;
};

struct ReplicationResult {
  int replication = 0;
  bool failed = false;
  std::string failure;
  std::vector<EstimatorOutcome> estimators;
  /// NaN marks a degenerate ratio (zero denominator).
  std::vector<std::pair<std::string, double>> ratios;
  std::vector<std::pair<std::string, double>> diagnostics;

  [[nodiscard]] double error(const std::string& name) const {
    for (const auto& e : estimators)
      if (e.name == name) return e.error;
    throw input_error("no estimator named '" + name + "'");
  }
  [[nodiscard]] double ratio(const std::string& name) const {
    for (const auto& [k, v] : ratios)
      if (k == name) return v;
    throw input_error("no ratio named '" + name + "'");
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string describe(const MultiTaskFit& fit) {
  std::string s = fit.member;
  for (std::size_t g = 0; g < fit.group_names.size(); ++g) s += ";" + fit.group_names[g] + "=" + format_number(fit.group_values[g]);
  return s;
}

namespace detail {

inline double safe_ratio(double num, double den, double scale) {
  const double floor = 1e-20 * std::max(1.0, scale);
  if (den <= floor) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

inline void add_fit(ReplicationResult& r, const std::string& name, const MultiTaskFit& fit, const Matrix& f) {
  r.estimators.push_back({name, (fit.fitted - f).squaredNorm() / static_cast<double>(f.size()), describe(fit)});
}

}  // namespace detail

/// One replication: draw data, run every estimator of the protocol.
inline ReplicationResult run_replication(const ExperimentConfig& cfg, const Matrix& sigma, const Matrix& centers,
                                         int replication) {
  ReplicationResult out;
  out.replication = replication;
  auto rng = make_rng(cfg.seed, streams::replication_base + static_cast<std::uint64_t>(replication));
  const auto truth = draw_design_and_functions(cfg, centers, rng);
  const Matrix y = truth.f + draw_noise(sigma, cfg.n, rng);
  const Matrix gram = kernel_gram(DesignMatrix(truth.design));
  const auto spec = KernelSpectrum::decompose(gram);
  const auto vgrid = PenaltyGrid::from_df_targets(spec);
  const auto dgrid = eigenvalue_grid(spec, cfg.p, cfg.df_refinement);
  const double scale = truth.f.squaredNorm() / static_cast<double>(truth.f.size());
  const Matrix& f = truth.f;

  switch (cfg.protocol) {
    case Protocol::compare: {
      const std::vector<SimilarityFamily> multi{make_family(FamilyKind::similar, cfg.p, dgrid)};
      const std::vector<SimilarityFamily> single{make_family(FamilyKind::independent, cfg.p, dgrid)};
      const Matrix sigma_multi = estimate_sigma_basis(spec, y, multi[0].members[0].basis, vgrid).matrix;
      const Matrix sigma_single = estimate_sigma_basis(spec, y, single[0].members[0].basis, vgrid).matrix;
      detail::add_fit(out, "multitask_hat", select_model(spec, y, multi, sigma_multi), f);
      detail::add_fit(out, "multitask_true", select_model(spec, y, multi, sigma), f);
      detail::add_fit(out, "singletask_hat", select_model(spec, y, single, sigma_single), f);
      detail::add_fit(out, "singletask_true", select_model(spec, y, single, sigma), f);
      detail::add_fit(out, "oracle_multitask", oracle_selector(spec, y, f, multi), f);
      detail::add_fit(out, "oracle_singletask", oracle_selector(spec, y, f, single), f);
      out.ratios.emplace_back("multitask_hat/singletask_hat",
                              detail::safe_ratio(out.error("multitask_hat"), out.error("singletask_hat"), scale));
      out.ratios.emplace_back("multitask_true/singletask_true",
                              detail::safe_ratio(out.error("multitask_true"), out.error("singletask_true"), scale));
      out.ratios.emplace_back("multitask_hat/oracle_multitask",
                              detail::safe_ratio(out.error("multitask_hat"), out.error("oracle_multitask"), scale));
      const double sn = matrix_diagnostics(sigma).op_norm;
      out.diagnostics.emplace_back("sigma_hm_relative_error",
                                   sn > 0 ? matrix_diagnostics(sigma_multi - sigma).op_norm / sn
                                          : std::numeric_limits<double>::quiet_NaN());
      break;
    }
    case Protocol::clustering: {
      const std::vector<SimilarityFamily> clus{make_family(FamilyKind::cluster_union, cfg.p, dgrid)};
      const std::vector<SimilarityFamily> seg{make_family(FamilyKind::segmentation_union, cfg.p, dgrid)};
      const std::vector<SimilarityFamily> single{make_family(FamilyKind::independent, cfg.p, dgrid)};
      const auto est = estimate_sigma_full(spec, y, vgrid);
      detail::add_fit(out, "clustering", select_model(spec, y, clus, est.matrix), f);
      detail::add_fit(out, "segmentation", select_model(spec, y, seg, est.matrix), f);
      detail::add_fit(out, "singletask", select_model(spec, y, single, est.matrix), f);
      detail::add_fit(out, "oracle_clustering", oracle_selector(spec, y, f, clus), f);
      out.ratios.emplace_back("clustering/singletask",
                              detail::safe_ratio(out.error("clustering"), out.error("singletask"), scale));
      out.ratios.emplace_back("segmentation/singletask",
                              detail::safe_ratio(out.error("segmentation"), out.error("singletask"), scale));
      out.ratios.emplace_back("segmentation/clustering",
                              detail::safe_ratio(out.error("segmentation"), out.error("clustering"), scale));
      const double sn = matrix_diagnostics(sigma).op_norm;
      out.diagnostics.emplace_back("sigma_full_relative_error",
                                   sn > 0 ? matrix_diagnostics(est.matrix - sigma).op_norm / sn
                                          : std::numeric_limits<double>::quiet_NaN());
      out.diagnostics.emplace_back("sigma_full_min_eigenvalue", matrix_diagnostics(est.matrix).min_eig);
      break;
    }
    case Protocol::cross_validation: {
      const std::vector<SimilarityFamily> multi{make_family(FamilyKind::similar, cfg.p, dgrid)};
      const Matrix sigma_hm = estimate_sigma_basis(spec, y, multi[0].members[0].basis, vgrid).matrix;
      detail::add_fit(out, "multitask_hm", select_model(spec, y, multi, sigma_hm), f);
      detail::add_fit(out, "multitask_cv", cv_select(gram, spec, y, multi, cfg.cv_folds, rng), f);
      detail::add_fit(out, "oracle_multitask", oracle_selector(spec, y, f, multi), f);
      out.ratios.emplace_back("multitask_hm/multitask_cv",
                              detail::safe_ratio(out.error("multitask_hm"), out.error("multitask_cv"), scale));
      break;
    }
  }
  return out;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots so the outcome is order independent.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) body(i);
    });
}

struct Summary {
  std::string name;
  std::string kind;  ///< "error", "ratio" or "diagnostic"
  int count = 0;
  int degenerate = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();  ///< 1.96 std / sqrt(count)
  /// One-sided Gaussian test of H0 {q > 1} (ratios only).
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

inline Summary summarize(const std::string& name, const std::string& kind, const std::vector<double>& values) {
  Summary s{name, kind};
  std::vector<double> finite;
  for (double v : values) (std::isfinite(v) ? finite.push_back(v) : void(++s.degenerate));
  s.count = static_cast<int>(finite.size());
  if (s.count == 0) return s;
  double sum = 0.0;
  for (double v : finite) sum += v;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : finite) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (s.count - 1));
    s.ci_halfwidth = 1.96 * s.std / std::sqrt(static_cast<double>(s.count));
    if (kind == "ratio") {
      const double se = s.std / std::sqrt(static_cast<double>(s.count));
      s.p_value = se > 0 ? 0.5 * std::erfc(-((s.mean - 1.0) / se) / std::sqrt(2.0)) : (s.mean > 1.0 ? 1.0 : 0.0);
    }
  }
  return s;
}

struct SettingResult {
  std::string label;  ///< e.g. "n=100" or "base"
  std::string sweep_key;
  double sweep_value = std::numeric_limits<double>::quiet_NaN();
  ExperimentConfig config;
  Matrix sigma;
  std::vector<ReplicationResult> replications;
  std::vector<Summary> summaries;
  int failures = 0;

  [[nodiscard]] const Summary& summary(const std::string& name) const {
    for (const auto& s : summaries)
      if (s.name == name) return s;
    throw input_error("no summary named '" + name + "'");
  }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SettingResult> settings;
};

inline std::vector<Summary> aggregate(const std::vector<ReplicationResult>& reps) {
  std::vector<Summary> out;
  const ReplicationResult* first = nullptr;
  for (const auto& r : reps)
    if (!r.failed) {
      first = &r;
      break;
    }
  if (!first) return out;
  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : reps)
      if (!r.failed) v.push_back(getter(r));
    return v;
  };
  for (std::size_t k = 0; k < first->estimators.size(); ++k)
    out.push_back(summarize(first->estimators[k].name, "error", collect([k](const ReplicationResult& r) { return r.estimators[k].error; })));
  for (std::size_t k = 0; k < first->ratios.size(); ++k)
    out.push_back(summarize(first->ratios[k].first, "ratio", collect([k](const ReplicationResult& r) { return r.ratios[k].second; })));
  for (std::size_t k = 0; k < first->diagnostics.size(); ++k)
    out.push_back(summarize(first->diagnostics[k].first, "diagnostic", collect([k](const ReplicationResult& r) { return r.diagnostics[k].second; })));
  return out;
}

/// Runs every replication of one (non-sweep) setting.
inline SettingResult run_setting(const ExperimentConfig& cfg, int threads = 1) {
  cfg.validate();
  SettingResult s;
  s.config = cfg;
  s.sigma = resolve_sigma(cfg);
  const Matrix centers = draw_centers(cfg);
  s.replications.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(cfg.replications, threads, [&](int r) {
    try {
      s.replications[static_cast<std::size_t>(r)] = run_replication(cfg, s.sigma, centers, r);
    } catch (const std::exception& e) {
      auto& slot = s.replications[static_cast<std::size_t>(r)];
      slot = ReplicationResult{};
      slot.replication = r;
      slot.failed = true;
      slot.failure = e.what();
    }
  });
  for (const auto& r : s.replications) s.failures += r.failed ? 1 : 0;
  s.summaries = aggregate(s.replications);
  return s;
}

/// Runs the configuration, once per sweep value if a sweep is set.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  ExperimentResult out;
  out.config = cfg;
  if (cfg.sweep_values.empty()) {
    auto s = run_setting(cfg, threads);
    s.label = "base";
    out.settings.push_back(std::move(s));
    return out;
  }
  for (double v : cfg.sweep_values) {
    ExperimentConfig c = cfg;
    c.sweep_values.clear();
    apply_override(c, cfg.sweep_key, v);
    auto s = run_setting(c, threads);
    s.label = cfg.sweep_key + "=" + format_number(v);
    s.sweep_key = cfg.sweep_key;
    s.sweep_value = v;
    out.settings.push_back(std::move(s));
  }
  return out;
}

}  // namespace minpen
