// minpen: command-line front end.
//
//   minpen fit            --data D.csv --family similar --cov hm --out DIR
//   minpen estimate-cov   --data D.csv --method full --out S.txt [--verify S.txt]
//   minpen run-experiment --preset C --t 100 --n-reps 20 --out DIR
//   minpen make-grids     --data D.csv --p 5 --out grids.csv
//
// Exit codes: 0 success, 1 verification mismatch or unexpected error,
// 2 usage/parse/config error, 3 numeric or calibration failure.

#include "minpen/io.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace minpen;

constexpr const char* kDataHelp =
    "Data CSV: header row with columns x1..xd (design) and y1..yp (responses), "
    "one observation per line, '.' as decimal separator.";

struct FitArgs {
  std::string data, out = "fit_out", family = "similar", cov = "hm", sigma, basis, cluster;
  int refinement = 1;
};

struct CovArgs {
  std::string data, out, method = "full", basis, verify, family = "similar";
};

struct ExpArgs {
  std::string config, preset, out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<int> n_reps, threads, n, p;
  std::optional<double> t;
  bool no_sweep = false;
};

struct GridArgs {
  std::string data, out;
  int p = 1, refinement = 1;
};

std::vector<Index> parse_subset(const std::string& text, Index p) {
  std::vector<Index> subset;
  for (const auto& item : detail::split(text, ',')) {
    auto v = detail::parse_integer(item);
    if (!v || *v < 1 || *v > p) throw input_error("--cluster entries must be task indices in 1.." + std::to_string(p));
    subset.push_back(static_cast<Index>(*v - 1));
  }
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  return subset;
}

std::vector<SimilarityFamily> build_families(const std::string& name, const KernelSpectrum& spec, Index p, int refinement,
                                             const std::string& cluster) {
  const auto grid = eigenvalue_grid(spec, p, refinement);
  if (name == "ind") return {make_family(FamilyKind::independent, p, grid)};
  if (name == "similar") return {make_family(FamilyKind::similar, p, grid)};
  if (name == "cluster") {
    if (cluster.empty()) throw input_error("--family cluster needs --cluster i,j,...");
    return {make_family(FamilyKind::cluster, p, grid, parse_subset(cluster, p))};
  }
  if (name == "segmentation") return {make_family(FamilyKind::segmentation_union, p, grid)};
  if (name == "union") return {make_family(FamilyKind::cluster_union, p, grid)};
  throw input_error("unknown family '" + name + "' (valid: ind, similar, cluster, segmentation, union)");
}

std::string join_values(const std::vector<std::string>& names, const std::vector<double>& values) {
  std::string s;
  for (std::size_t g = 0; g < names.size(); ++g) s += (g ? " " : "") + names[g] + "=" + format_exact(values[g]);
  return s;
}

std::string vector_text(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_exact(v(i));
  return s;
}

int cmd_fit(const FitArgs& a) {
  const auto ds = read_dataset_file(a.data);
  const Index p = ds.y.cols();
  const DesignMatrix design(ds.x);
  const Matrix gram = kernel_gram(design);
  const auto spec = KernelSpectrum::decompose(gram);
  const auto families = build_families(a.family, spec, p, a.refinement, a.cluster);
  const auto vgrid = PenaltyGrid::from_df_targets(spec);

  // One covariance per basis; a fixed one for known/full.
  std::optional<Matrix> fixed;
  if (a.cov == "known") {
    if (a.sigma.empty()) throw input_error("--cov known needs --sigma FILE");
    fixed = read_matrix_file(a.sigma);
    if (fixed->rows() != p) throw input_error("--sigma dimension does not match the number of tasks");
  } else if (a.cov == "full") {
    fixed = estimate_sigma_full(spec, ds.y, vgrid).matrix;
  } else if (a.cov == "simple") {
    const Matrix basis = a.basis.empty() ? Matrix(Matrix::Identity(p, p)) : read_matrix_file(a.basis);
    fixed = estimate_sigma_basis(spec, ds.y, basis, vgrid, {}, CovarianceMethod::simple).matrix;
  } else if (a.cov != "hm") {
    throw input_error("unknown --cov '" + a.cov + "' (valid: known, full, hm, simple)");
  }
  std::map<std::string, Matrix> per_member;
  PenaltyCovariance cov = [&](const FamilyMember& m) -> Matrix {
    if (fixed) return *fixed;
    auto it = per_member.find(m.label);
    if (it == per_member.end())
      it = per_member.emplace(m.label, estimate_sigma_basis(spec, ds.y, m.basis, vgrid).matrix).first;
    return it->second;
  };
  const auto sel = select_model_detailed(spec, ds.y, families, cov, {true});
  const auto& fit = sel.fit;

  const std::filesystem::path dir(a.out);
  std::filesystem::create_directories(dir);
  write_file(dir / "fitted.csv", write_dataset(ds.x, fit.fitted));
  Matrix sigma_used = fixed ? *fixed : per_member.at(fit.member);
  write_file(dir / "sigma_hat.txt", write_matrix_text(sigma_used));
  write_file(dir / "basis.txt", write_matrix_text(fit.basis));

  std::ostringstream sel_text;
  sel_text << "family = " << fit.family << "\nmember = " << fit.member << "\n";
  sel_text << "groups = " << join_values(fit.group_names, fit.group_values) << "\n";
  sel_text << "eigenvalues = " << vector_text(fit.d) << "\n";
  sel_text << "df = " << vector_text(fit.per_direction_df) << "\n";
  sel_text << "criterion = " << format_exact(fit.criterion_value) << "\n";
  sel_text << "residual = " << format_exact(fit.residual_value) << "\n";
  sel_text << "penalty = " << format_exact(fit.penalty_value) << "\n";
  sel_text << "covariance = " << a.cov << "\n";
  write_file(dir / "selection.txt", sel_text.str());
  if (fit.d.allFinite() && fit.d.minCoeff() > 0.0) write_file(dir / "M_hat.txt", write_matrix_text(reconstruct(fit.basis, fit.d)));

  std::ostringstream table;
  table << "family,member,groups,df,residual,penalty,criterion\n";
  for (const auto& row : sel.table)
    table << row.family << "," << row.member << "," << join_values(row.group_names, row.group_values) << ","
          << vector_text(row.df) << "," << format_exact(row.residual) << "," << format_exact(row.penalty) << ","
          << format_exact(row.criterion) << "\n";
  write_file(dir / "criterion_table.csv", table.str());

  std::cout << sel_text.str();
  return 0;
}

int cmd_estimate_cov(const CovArgs& a) {
  const auto ds = read_dataset_file(a.data);
  const Index p = ds.y.cols();
  const auto spec = KernelSpectrum::decompose(kernel_gram(DesignMatrix(ds.x)));
  const auto vgrid = PenaltyGrid::from_df_targets(spec);
  CovarianceEstimate est;
  if (a.method == "full") {
    est = estimate_sigma_full(spec, ds.y, vgrid);
  } else if (a.method == "hm" || a.method == "simple") {
    Matrix basis;
    if (!a.basis.empty()) basis = read_matrix_file(a.basis);
    else if (a.method == "simple") basis = Matrix::Identity(p, p);
    else basis = build_families(a.family, spec, p, 1, "").front().members.front().basis;
    est = estimate_sigma_basis(spec, ds.y, basis, vgrid, {},
                               a.method == "hm" ? CovarianceMethod::hm : CovarianceMethod::simple);
  } else {
    throw input_error("unknown --method '" + a.method + "' (valid: full, hm, simple)");
  }

  const auto diag = matrix_diagnostics(est.matrix);
  std::cout << "method = " << to_string(est.method) << "\n";
  for (const auto& [label, v] : est.raw_a_values) std::cout << "a(" << label << ") = " << format_exact(v) << "\n";
  for (const auto& label : est.degenerate_directions) std::cout << "degenerate direction: " << label << "\n";
  std::cout << "min_eigenvalue = " << format_exact(diag.min_eig) << "\ncondition = " << format_exact(diag.cond) << "\n";
  std::cout << write_matrix_text(est.matrix);
  if (!a.out.empty()) write_file(a.out, write_matrix_text(est.matrix));

  if (!a.verify.empty()) {
    const Matrix ref = read_matrix_file(a.verify);
    if (ref.rows() != est.matrix.rows()) {
      std::cerr << "verify: dimension mismatch\n";
      return 1;
    }
    const double err = (ref - est.matrix).cwiseAbs().maxCoeff();
    std::cout << "verify max_abs_diff = " << format_exact(err) << "\n";
    if (err > 1e-12) {
      std::cerr << "verify: mismatch (max |diff| = " << format_exact(err) << " > 1e-12)\n";
      return 1;
    }
    std::cout << "verify: OK\n";
  }
  return 0;
}

int cmd_run_experiment(const ExpArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty() && !a.preset.empty()) throw input_error("give either --config or --preset, not both");
  if (!a.config.empty()) cfg = load_config(a.config);
  else if (!a.preset.empty()) cfg = preset(a.preset);
  else throw input_error(std::string("run-experiment needs --config FILE or --preset {") + kPresetNames + "}");

  auto override_key = [&](const std::string& key, double v) {
    if (cfg.sweep_key == key) {
      cfg.sweep_key.clear();
      cfg.sweep_values.clear();
    }
    apply_override(cfg, key, v);
  };
  if (a.n) override_key("n", *a.n);
  if (a.p) override_key("p", *a.p);
  if (a.t) override_key("t", *a.t);
  if (a.seed) cfg.seed = *a.seed;
  if (a.n_reps) cfg.replications = *a.n_reps;
  if (a.no_sweep) {
    cfg.sweep_key.clear();
    cfg.sweep_values.clear();
  }

  int threads = 0;
  if (a.threads) {
    threads = *a.threads;
  } else if (const char* env = std::getenv("MINPEN_THREADS")) {
    auto v = detail::parse_integer(env);
    if (!v || *v < 1) throw input_error("MINPEN_THREADS must be a positive integer");
    threads = static_cast<int>(*v);
  } else {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  if (threads < 1) throw input_error("--threads must be >= 1");

  const auto result = run_experiment(cfg, threads);
  const auto files = write_experiment(result, a.out);
  std::cout << summary_text(result);
  int failures = 0;
  for (const auto& s : result.settings) failures += s.failures;
  if (failures > 0) {
    std::cerr << failures << " replication(s) failed; first failure: ";
    for (const auto& s : result.settings)
      for (const auto& r : s.replications)
        if (r.failed) {
          std::cerr << "[" << s.label << " #" << r.replication << "] " << r.failure << "\n";
          goto done;
        }
  }
done:
  std::cout << "wrote";
  for (const auto& f : files) std::cout << " " << f;
  std::cout << " to " << a.out << "\n";
  return 0;
}

int cmd_make_grids(const GridArgs& a) {
  const auto ds = read_dataset_file(a.data);
  const auto spec = KernelSpectrum::decompose(kernel_gram(DesignMatrix(ds.x)));
  if (a.p < 1) throw input_error("--p must be >= 1");
  const auto lambdas = df_grid(spec, a.refinement);
  std::ostringstream os;
  os << "lambda,df,pen_min,eigenvalue_d\n";
  for (Ridge r : lambdas)
    os << format_exact(r.value()) << "," << format_exact(df(spec, r)) << "," << format_exact(pen_min(spec, r)) << ","
       << format_exact(r.value() / a.p) << "\n";
  if (a.out.empty()) std::cout << os.str();
  else write_file(a.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task kernel ridge regression with minimal-penalty covariance calibration"};
  app.require_subcommand(1);
  app.footer(kDataHelp);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Select and fit a multi-task smoother");
  fit_cmd->add_option("--data", fit.data, "Data CSV (x1..xd, y1..yp)")->required();
  fit_cmd->add_option("--out", fit.out, "Output directory");
  fit_cmd->add_option("--family", fit.family, "ind, similar, cluster, segmentation or union")
      ->check(CLI::IsMember({"ind", "similar", "cluster", "segmentation", "union"}));
  fit_cmd->add_option("--cov", fit.cov, "Covariance source: known, full, hm or simple")
      ->check(CLI::IsMember({"known", "full", "hm", "simple"}));
  fit_cmd->add_option("--sigma", fit.sigma, "Covariance file for --cov known");
  fit_cmd->add_option("--basis", fit.basis, "Orthogonal basis file for --cov simple (default identity)");
  fit_cmd->add_option("--cluster", fit.cluster, "Task indices of the cluster for --family cluster, e.g. 1,2");
  fit_cmd->add_option("--df-refinement", fit.refinement, "Grid points per unit of degrees of freedom")
      ->check(CLI::PositiveNumber);

  CovArgs cov;
  auto* cov_cmd = app.add_subcommand("estimate-cov", "Estimate the noise covariance by minimal penalties");
  cov_cmd->add_option("--data", cov.data, "Data CSV (x1..xd, y1..yp)")->required();
  cov_cmd->add_option("--method", cov.method, "full, hm or simple")->check(CLI::IsMember({"full", "hm", "simple"}));
  cov_cmd->add_option("--cov", cov.method, "Alias of --method")->check(CLI::IsMember({"full", "hm", "simple"}));
  cov_cmd->add_option("--basis", cov.basis, "Orthogonal basis file (hm, simple)");
  cov_cmd->add_option("--family", cov.family, "Family whose basis is used by hm when --basis is absent")
      ->check(CLI::IsMember({"ind", "similar"}));
  cov_cmd->add_option("--out", cov.out, "Write the estimate to this file");
  cov_cmd->add_option("--verify", cov.verify, "Compare the estimate with this file (max |diff| <= 1e-12)");

  ExpArgs exp;
  auto* exp_cmd = app.add_subcommand("run-experiment", "Run a simulation experiment");
  exp_cmd->add_option("--config", exp.config, "Experiment configuration file");
  exp_cmd->add_option("--preset", exp.preset, "Built-in experiment: A, B, C, D or E");
  exp_cmd->add_option("--out", exp.out, "Output directory");
  exp_cmd->add_option("--seed", exp.seed, "Master seed");
  exp_cmd->add_option("--n-reps", exp.n_reps, "Number of replications")->check(CLI::PositiveNumber);
  exp_cmd->add_option("--threads", exp.threads, "Worker threads (default: MINPEN_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--n", exp.n, "Sample size override (replaces a sweep over n)");
  exp_cmd->add_option("--p", exp.p, "Number of tasks override (replaces a sweep over p)");
  exp_cmd->add_option("--t", exp.t, "Noise level override, Sigma = 5t I (replaces a sweep over t)");
  exp_cmd->add_flag("--no-sweep", exp.no_sweep, "Run the base setting only");

  GridArgs grids;
  auto* grid_cmd = app.add_subcommand("make-grids", "Print the degrees-of-freedom grid of a design");
  grid_cmd->add_option("--data", grids.data, "Data CSV (x1..xd, y1..yp)")->required();
  grid_cmd->add_option("--p", grids.p, "Number of tasks for the eigenvalue column");
  grid_cmd->add_option("--df-refinement", grids.refinement, "Grid points per unit of degrees of freedom")
      ->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", grids.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*cov_cmd) return cmd_estimate_cov(cov);
    if (*exp_cmd) return cmd_run_experiment(exp);
    if (*grid_cmd) return cmd_make_grids(grids);
  } catch (const calibration_error& e) {
    std::cerr << "calibration failure: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
