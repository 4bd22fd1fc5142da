#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace minpen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Malformed arguments: dimension mismatches, out-of-domain parameters.
class input_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Linear-algebra failures (eigensolver, indefinite matrices).
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Algorithm 1 could not locate the complexity jump on its C-grid.
/// `directions` names every projected problem that failed.
class calibration_error : public std::runtime_error {
public:
  calibration_error(const std::string& what, std::vector<std::string> directions)
      : std::runtime_error(what), directions_(std::move(directions)) {}

  [[nodiscard]] const std::vector<std::string>& directions() const noexcept { return directions_; }

private:
  std::vector<std::string> directions_;
};

/// A ridge parameter in [0, +inf]. Infinity is a first-class value (the
/// smoother that returns 0), stored as IEEE +inf so that mu / (mu + n*inf)
/// evaluates to exactly 0.
class Ridge {
public:
  constexpr Ridge() = default;
  explicit Ridge(double value) : value_(value) {
    if (!(value >= 0.0)) throw input_error("ridge parameter must be >= 0 (got " + std::to_string(value) + ")");
  }

  static Ridge zero() { return Ridge(0.0); }
  static Ridge infinite() { return Ridge(std::numeric_limits<double>::infinity()); }

  [[nodiscard]] double value() const noexcept { return value_; }
  [[nodiscard]] bool is_infinite() const noexcept { return std::isinf(value_); }
  [[nodiscard]] bool is_zero() const noexcept { return value_ == 0.0; }

  friend bool operator==(Ridge a, Ridge b) noexcept { return a.value_ == b.value_; }
  friend auto operator<=>(Ridge a, Ridge b) noexcept { return a.value_ <=> b.value_; }

private:
  double value_ = 0.0;
};

/// mu / (mu + scale), with the conventions 0/0 -> 0 (null direction at
/// scale 0) and mu/(mu+inf) -> 0.
inline double shrink(double mu, double scale) noexcept {
  if (std::isinf(scale)) return 0.0;
  if (scale == 0.0) return mu > 0.0 ? 1.0 : 0.0;
  return mu / (mu + scale);
}

inline bool is_symmetric(const Matrix& s, double tol = 0.0) {
  if (s.rows() != s.cols()) return false;
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = i + 1; j < s.cols(); ++j)
      if (std::abs(s(i, j) - s(j, i)) > tol * std::max(1.0, std::abs(s(i, j)))) return false;
  return true;
}

}  // namespace minpen
