#pragma once

// File formats.
//
// Covariance text file:
//   p=<p>
//   <p rows of p whitespace-separated numbers, %.17g>
//
// Data CSV: header row naming columns x1..xd then y1..yp (any order of the
// two blocks), one observation per row, '.' as decimal point.

#include "minpen/config.hpp"

#include <filesystem>
#include <map>

namespace minpen {

inline std::string write_matrix_text(const Matrix& m) {
  std::ostringstream os;
  os << "p=" << m.rows() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_exact(m(i, j));
    os << "\n";
  }
  return os.str();
}

inline Matrix read_matrix_text(std::istream& in, const std::string& source) {
  std::string header;
  if (!std::getline(in, header)) throw input_error(source + ": empty covariance file");
  header = detail::trim(header);
  if (header.rfind("p=", 0) != 0) throw input_error(source + ":1: expected header 'p=<int>'");
  const auto p = detail::parse_integer(header.substr(2));
  if (!p || *p < 1) throw input_error(source + ":1: bad dimension in header");
  Matrix m(*p, *p);
  std::string line;
  for (Index i = 0; i < *p; ++i) {
    if (!std::getline(in, line)) throw input_error(source + ": expected " + std::to_string(*p) + " rows");
    std::istringstream row(line);
    std::string tok;
    Index j = 0;
    while (row >> tok) {
      if (j >= *p) throw input_error(source + ":" + std::to_string(i + 2) + ": too many entries");
      auto v = detail::parse_double(tok);
      if (!v || !std::isfinite(*v)) throw input_error(source + ":" + std::to_string(i + 2) + ": bad number '" + tok + "'");
      m(i, j++) = *v;
    }
    if (j != *p) throw input_error(source + ":" + std::to_string(i + 2) + ": expected " + std::to_string(*p) + " entries");
  }
  return m;
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open covariance file '" + path + "'");
  return read_matrix_text(in, path);
}

struct Dataset {
  Matrix x;  ///< n x d
  Matrix y;  ///< n x p
};

inline Dataset read_dataset(std::istream& in, const std::string& source) {
  std::string header;
  if (!std::getline(in, header)) throw input_error(source + ": empty data file");
  const auto names = detail::split(detail::trim(header), ',');
  std::map<long long, std::size_t> xcols, ycols;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& name = names[c];
    auto idx = name.size() > 1 ? detail::parse_integer(name.substr(1)) : std::nullopt;
    if (!idx || *idx < 1 || (name[0] != 'x' && name[0] != 'y'))
      throw input_error(source + ":1: column '" + name + "' is not of the form x<k> or y<k>");
    auto& target = name[0] == 'x' ? xcols : ycols;
    if (!target.emplace(*idx, c).second) throw input_error(source + ":1: duplicate column '" + name + "'");
  }
  auto check_contiguous = [&](const std::map<long long, std::size_t>& cols, char prefix) {
    if (cols.empty()) throw input_error(source + ":1: no " + std::string(1, prefix) + " columns");
    long long expect = 1;
    for (const auto& [k, _] : cols)
      if (k != expect++) throw input_error(source + ":1: " + std::string(1, prefix) + " columns must be numbered 1..k");
  };
  check_contiguous(xcols, 'x');
  check_contiguous(ycols, 'y');

  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != names.size())
      throw input_error(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(names.size()) + " fields");
    auto& row = rows.emplace_back();
    for (const auto& cell : cells) {
      auto v = detail::parse_double(cell);
      if (!v || !std::isfinite(*v)) throw input_error(source + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      row.push_back(*v);
    }
  }
  Dataset ds;
  const auto n = static_cast<Index>(rows.size());
  ds.x.resize(n, static_cast<Index>(xcols.size()));
  ds.y.resize(n, static_cast<Index>(ycols.size()));
  for (Index i = 0; i < n; ++i) {
    for (const auto& [k, c] : xcols) ds.x(i, k - 1) = rows[static_cast<std::size_t>(i)][c];
    for (const auto& [k, c] : ycols) ds.y(i, k - 1) = rows[static_cast<std::size_t>(i)][c];
  }
  return ds;
}

inline Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open data file '" + path + "'");
  return read_dataset(in, path);
}

inline std::string write_dataset(const Matrix& x, const Matrix& y) {
  std::ostringstream os;
  for (Index j = 0; j < x.cols(); ++j) os << (j ? "," : "") << "x" << j + 1;
  for (Index j = 0; j < y.cols(); ++j) os << ",y" << j + 1;
  os << "\n";
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) os << (j ? "," : "") << format_exact(x(i, j));
    for (Index j = 0; j < y.cols(); ++j) os << "," << format_exact(y(i, j));
    os << "\n";
  }
  return os.str();
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
  return out + "\"";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write '" + path.string() + "'");
  out << content;
}

/// Per-replication rows: estimator rows carry an error, ratio rows a ratio.
inline std::string replications_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "setting,replication,estimator,error,ratio,params\n";
  for (const auto& s : r.settings)
    for (const auto& rep : s.replications) {
      if (rep.failed) {
        os << s.label << "," << rep.replication << ",FAILED,,," << csv_quote(rep.failure) << "\n";
        continue;
      }
      for (const auto& e : rep.estimators)
        os << s.label << "," << rep.replication << "," << e.name << "," << format_number(e.error) << ",,"
           << csv_quote(e.params) << "\n";
      for (const auto& [name, v] : rep.ratios)
        os << s.label << "," << rep.replication << "," << name << ",," << format_number(v) << ","
           << (std::isnan(v) ? "degenerate" : "") << "\n";
      for (const auto& [name, v] : rep.diagnostics)
        os << s.label << "," << rep.replication << "," << name << ",,," << "value=" << format_number(v) << "\n";
    }
  return os.str();
}

inline std::string aggregate_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "setting,statistic,kind,count,degenerate,failures,mean,std,ci_halfwidth,p_value\n";
  for (const auto& s : r.settings)
    for (const auto& a : s.summaries)
      os << s.label << "," << a.name << "," << a.kind << "," << a.count << "," << a.degenerate << "," << s.failures << ","
         << format_number(a.mean) << "," << format_number(a.std) << "," << format_number(a.ci_halfwidth) << ","
         << format_number(a.p_value) << "\n";
  return os.str();
}

/// Human-readable table; every number is printed exactly as in the aggregate CSV.
inline std::string summary_text(const ExperimentResult& r) {
  std::ostringstream os;
  os << "experiment " << r.config.experiment_id << " (" << to_string(r.config.protocol) << "), seed "
     << r.config.seed << ", N = " << r.config.replications << "\n";
  char line[512];
  for (const auto& s : r.settings) {
    os << "[" << s.label << "] failures: " << s.failures << "\n";
    std::snprintf(line, sizeof line, "  %-34s %-10s %6s %5s %18s %18s %18s %18s\n", "statistic", "kind", "count", "degen",
                  "mean", "std", "ci_halfwidth", "p_value");
    os << line;
    for (const auto& a : s.summaries) {
      std::snprintf(line, sizeof line, "  %-34s %-10s %6d %5d %18s %18s %18s %18s\n", a.name.c_str(), a.kind.c_str(),
                    a.count, a.degenerate, format_number(a.mean).c_str(), format_number(a.std).c_str(),
                    format_number(a.ci_halfwidth).c_str(), format_number(a.p_value).c_str());
      os << line;
    }
  }
  return os.str();
}

/// Gnuplot-ready series over the sweep: x mean halfwidth per statistic.
inline std::string series_dat(const ExperimentResult& r, const std::vector<std::string>& stats, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << "\n# " << (r.config.sweep_key.empty() ? "setting" : r.config.sweep_key);
  for (const auto& s : stats) os << " " << s << "_mean " << s << "_ci";
  os << "\n";
  for (std::size_t k = 0; k < r.settings.size(); ++k) {
    const auto& s = r.settings[k];
    os << (std::isnan(s.sweep_value) ? format_number(static_cast<double>(k)) : format_number(s.sweep_value));
    for (const auto& name : stats) {
      const Summary* found = nullptr;
      for (const auto& a : s.summaries)
        if (a.name == name) found = &a;
      os << " " << (found ? format_number(found->mean) : "nan") << " " << (found ? format_number(found->ci_halfwidth) : "nan");
    }
    os << "\n";
  }
  return os.str();
}

/// Table rows for ratio statistics: setting mean std p_value.
inline std::string ratio_table_dat(const ExperimentResult& r, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << "\n# setting statistic mean std p_value\n";
  for (const auto& s : r.settings)
    for (const auto& a : s.summaries)
      if (a.kind == "ratio")
        os << s.label << " " << a.name << " " << format_number(a.mean) << " " << format_number(a.std) << " "
           << format_number(a.p_value) << "\n";
  return os.str();
}

/// Writes every artifact of an experiment run into `dir`; returns the file names.
inline std::vector<std::string> write_experiment(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const std::string id = r.config.experiment_id;
  auto put = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files.push_back(name);
  };
  put(id + "_replications.csv", replications_csv(r));
  put(id + "_aggregate.csv", aggregate_csv(r));
  put(id + "_summary.txt", summary_text(r));

  std::string resolved = "# resolved configuration\n" + write_config(r.config);
  for (const auto& s : r.settings) {
    resolved += "# setting " + s.label + ", frozen sigma:\n";
    std::istringstream lines(write_config(s.config, &s.sigma));
    std::string l;
    while (std::getline(lines, l)) resolved += "#   " + l + "\n";
  }
  put(id + "_resolved.cfg", resolved);

  switch (r.config.protocol) {
    case Protocol::compare:
      put(id + "_ratio.dat", series_dat(r, {"multitask_hat/singletask_hat", "multitask_true/singletask_true"},
                                        "mean error ratio multi-task / single-task"));
      put(id + "_multitask.dat", series_dat(r, {"multitask_hat", "multitask_true", "oracle_multitask"},
                                            "multi-task quadratic errors (estimated / true covariance)"));
      put(id + "_singletask.dat", series_dat(r, {"singletask_hat", "singletask_true", "oracle_singletask"},
                                             "single-task quadratic errors (estimated / true covariance)"));
      break;
    case Protocol::clustering:
      put(id + "_table.dat", ratio_table_dat(r, "clustering and segmentation ratios"));
      break;
    case Protocol::cross_validation:
      put(id + "_table.dat", ratio_table_dat(r, "penalized selection / cross-validation ratios"));
      put(id + "_errors.dat", series_dat(r, {"multitask_hm", "multitask_cv", "oracle_multitask"},
                                         "quadratic errors, penalized vs cross-validation"));
      break;
  }
  return files;
}

}  // namespace minpen
