#pragma once

// Plain declarative experiment configuration:
//
//   # comment
//   preset = C
//   n = 100
//   sigma = identity 5          (or: wishart 10 | explicit 1,0;0,1)
//   sweep = t 0.01,1,100
//
// A `preset` line, wherever it appears, is applied first; the remaining
// keys override it in file order.

#include "minpen/experiments.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace minpen {

/// Configuration error carrying the offending line and field.
class config_error : public input_error {
public:
  config_error(const std::string& source, int line, const std::string& field, const std::string& message)
      : input_error(source + ":" + std::to_string(line) + ": field '" + field + "': " + message),
        line_(line),
        field_(field) {}
  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  int line_;
  std::string field_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

/// Locale-independent strict number parsing.
inline std::optional<double> parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_unsigned(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return v;
}

/// "a,b;c,d" -> rows separated by ';', entries by ','.
inline std::optional<Matrix> parse_inline_matrix(const std::string& text) {
  const auto rows = split(text, ';');
  if (rows.empty()) return std::nullopt;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto& row = values.emplace_back();
    for (const auto& e : split(r, ',')) {
      auto v = parse_double(e);
      if (!v || !std::isfinite(*v)) return std::nullopt;
      row.push_back(*v);
    }
    if (row.size() != values.front().size()) return std::nullopt;
  }
  Matrix m(static_cast<Index>(values.size()), static_cast<Index>(values.front().size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = values[i][j];
  return m;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  struct Entry {
    int line;
    std::string key, value;
  };
  std::vector<Entry> entries;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error(source, line_no, line, "expected 'key = value'");
    Entry e{line_no, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1))};
    if (e.key.empty()) throw config_error(source, line_no, "", "empty key");
    if (e.value.empty()) throw config_error(source, line_no, e.key, "empty value");
    for (const auto& prev : entries)
      if (prev.key == e.key)
        throw config_error(source, line_no, e.key, "duplicate key (first set on line " + std::to_string(prev.line) + ")");
    entries.push_back(std::move(e));
  }

  ExperimentConfig cfg;
  for (const auto& e : entries)
    if (e.key == "preset") {
      try {
        cfg = preset(e.value);
      } catch (const input_error& err) {
        throw config_error(source, e.line, e.key, err.what());
      }
    }

  for (const auto& e : entries) {
    auto fail = [&](const std::string& msg) { throw config_error(source, e.line, e.key, msg); };
    auto integer = [&](long long lo) {
      auto v = detail::parse_integer(e.value);
      if (!v) fail("expected an integer, got '" + e.value + "'");
      if (*v < lo) fail("must be >= " + std::to_string(lo));
      return *v;
    };
    auto number = [&] {
      auto v = detail::parse_double(e.value);
      if (!v) fail("expected a number, got '" + e.value + "'");
      return *v;
    };

    if (e.key == "preset") {
      continue;
    } else if (e.key == "experiment_id") {
      cfg.experiment_id = e.value;
    } else if (e.key == "protocol") {
      if (e.value == "compare") cfg.protocol = Protocol::compare;
      else if (e.value == "clustering") cfg.protocol = Protocol::clustering;
      else if (e.value == "cross_validation") cfg.protocol = Protocol::cross_validation;
      else fail("expected compare, clustering or cross_validation");
    } else if (e.key == "functions") {
      if (e.value == "shared") cfg.functions = TargetFunctions::shared;
      else if (e.value == "opposed") cfg.functions = TargetFunctions::opposed;
      else fail("expected shared or opposed");
    } else if (e.key == "n") {
      cfg.n = static_cast<Index>(integer(4));
    } else if (e.key == "p") {
      cfg.p = static_cast<Index>(integer(1));
    } else if (e.key == "d") {
      cfg.d = static_cast<Index>(integer(1));
    } else if (e.key == "m") {
      cfg.m = static_cast<Index>(integer(1));
    } else if (e.key == "replications") {
      cfg.replications = static_cast<int>(integer(1));
    } else if (e.key == "seed") {
      auto v = detail::parse_unsigned(e.value);
      if (!v) fail("expected an unsigned 64-bit integer");
      cfg.seed = *v;
    } else if (e.key == "df_refinement") {
      cfg.df_refinement = static_cast<int>(integer(1));
    } else if (e.key == "cv_folds") {
      cfg.cv_folds = static_cast<int>(integer(2));
    } else if (e.key == "t") {
      const double t = number();
      if (!(t >= 0.0) || !std::isfinite(t)) fail("must be finite and >= 0");
      cfg.sigma = SigmaSpec::scaled_identity(5.0 * t);
    } else if (e.key == "sigma") {
      const auto sp = e.value.find_first_of(" \t");
      const std::string kind = e.value.substr(0, sp);
      const std::string arg = sp == std::string::npos ? "" : detail::trim(e.value.substr(sp));
      if (kind == "identity") {
        auto v = detail::parse_double(arg);
        if (!v || !(*v >= 0.0) || !std::isfinite(*v)) fail("identity needs a finite scale >= 0");
        cfg.sigma = SigmaSpec::scaled_identity(*v);
      } else if (kind == "wishart") {
        auto v = detail::parse_integer(arg);
        if (!v || *v < 1) fail("wishart needs an integer dof >= 1");
        cfg.sigma = SigmaSpec::wishart(static_cast<int>(*v));
      } else if (kind == "explicit") {
        auto m = detail::parse_inline_matrix(arg);
        if (!m || m->rows() != m->cols()) fail("explicit needs a square matrix 'a,b;c,d'");
        cfg.sigma = SigmaSpec::explicit_matrix(*m);
      } else {
        fail("expected 'identity <scale>', 'wishart <dof>' or 'explicit <rows>'");
      }
    } else if (e.key == "sweep") {
      const auto sp = e.value.find_first_of(" \t");
      if (sp == std::string::npos) fail("expected '<key> v1,v2,...'");
      const std::string key = e.value.substr(0, sp);
      if (key != "n" && key != "p" && key != "t" && key != "sigma_scale") fail("sweep key must be n, p, t or sigma_scale");
      std::vector<double> values;
      for (const auto& item : detail::split(detail::trim(e.value.substr(sp)), ',')) {
        auto v = detail::parse_double(item);
        if (!v || !std::isfinite(*v)) fail("bad sweep value '" + item + "'");
        values.push_back(*v);
      }
      if (values.empty()) fail("sweep needs at least one value");
      cfg.sweep_key = key;
      cfg.sweep_values = std::move(values);
    } else if (e.key == "no_sweep") {
      if (e.value == "true") {
        cfg.sweep_key.clear();
        cfg.sweep_values.clear();
      } else if (e.value != "false") {
        fail("expected true or false");
      }
    } else {
      fail("unknown key (valid: preset, experiment_id, protocol, functions, n, p, d, m, replications, seed, "
           "df_refinement, cv_folds, t, sigma, sweep, no_sweep)");
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

inline std::string format_exact(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Serializes a configuration; `frozen_sigma`, when given, replaces the
/// sigma setting by the resolved matrix.
inline std::string write_config(const ExperimentConfig& cfg, const Matrix* frozen_sigma = nullptr) {
  std::ostringstream os;
  os << "experiment_id = " << cfg.experiment_id << "\n";
  os << "protocol = " << to_string(cfg.protocol) << "\n";
  os << "functions = " << (cfg.functions == TargetFunctions::shared ? "shared" : "opposed") << "\n";
  os << "n = " << cfg.n << "\np = " << cfg.p << "\nd = " << cfg.d << "\nm = " << cfg.m << "\n";
  os << "replications = " << cfg.replications << "\nseed = " << cfg.seed << "\n";
  os << "df_refinement = " << cfg.df_refinement << "\ncv_folds = " << cfg.cv_folds << "\n";
  auto matrix_text = [](const Matrix& m) {
    std::string s;
    for (Index i = 0; i < m.rows(); ++i) {
      if (i) s += ";";
      for (Index j = 0; j < m.cols(); ++j) s += (j ? "," : "") + format_exact(m(i, j));
    }
    return s;
  };
  if (frozen_sigma) {
    os << "sigma = explicit " << matrix_text(*frozen_sigma) << "\n";
  } else {
    switch (cfg.sigma.kind) {
      case SigmaSpec::Kind::scaled_identity: os << "sigma = identity " << format_exact(cfg.sigma.scale) << "\n"; break;
      case SigmaSpec::Kind::wishart: os << "sigma = wishart " << cfg.sigma.dof << "\n"; break;
      case SigmaSpec::Kind::explicit_matrix: os << "sigma = explicit " << matrix_text(cfg.sigma.matrix) << "\n"; break;
    }
  }
  if (!cfg.sweep_values.empty()) {
    os << "sweep = " << cfg.sweep_key << " ";
    for (std::size_t k = 0; k < cfg.sweep_values.size(); ++k) os << (k ? "," : "") << format_exact(cfg.sweep_values[k]);
    os << "\n";
  }
  return os.str();
}

}  // namespace minpen
