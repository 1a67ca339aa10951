#pragma once

// Black-box objectives: the handle type, the bilinear benchmark and the
// trace-of-FIM sensor placement criterion.

#include <pbo/sampling.hpp>
#include <pbo/types.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pbo {

/// Deterministic map from a binary design of fixed dimension to a real.
class Objective {
 public:
  using Function = std::function<double(const Design&)>;

  Objective() = default;
  Objective(std::string name, std::size_t dimension, Function fn,
            std::optional<double> known_optimum = std::nullopt, bool thread_safe = true)
      : name_(std::move(name)), dimension_(dimension), fn_(std::move(fn)),
        known_optimum_(known_optimum), thread_safe_(thread_safe) {}

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return dimension_; }
  const std::optional<double>& known_optimum() const { return known_optimum_; }
  /// Whether concurrent calls are allowed.
  bool thread_safe() const { return thread_safe_; }

  double operator()(const Design& d) const {
    if (d.size() != dimension_)
      throw DomainError("objective '" + name_ + "' expects " + std::to_string(dimension_) +
                        " entries, got " + std::to_string(d.size()));
    return fn_(d);
  }

 private:
  std::string name_;
  std::size_t dimension_ = 0;
  Function fn_;
  std::optional<double> known_optimum_;
  bool thread_safe_ = true;
};

/// J(d) = sum_{i=1}^{N} (-1)^i d_i with 1-based i: even positions add, odd subtract.
inline double bilinear_eval(const Design& d) {
  double total = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k)
    if (d[k]) total += (k % 2 == 1) ? 1.0 : -1.0;
  return total;
}

inline Objective bilinear_objective(std::size_t n) {
  return Objective("bilinear", n, bilinear_eval);
}

/// Linear-Gaussian sensor placement data: forward matrix F (observations x
/// parameters), noise level sigma, and the observation rows owned by each sensor.
class TraceFIMProblem {
 public:
  TraceFIMProblem(Matrix forward, double sigma, std::vector<std::vector<std::size_t>> sensor_rows)
      : forward_(std::move(forward)), sigma_(sigma), sensor_rows_(std::move(sensor_rows)) {
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
      throw DomainError("noise standard deviation must be positive and finite");
    std::vector<int> owner(forward_.rows(), 0);
    for (const auto& rows : sensor_rows_)
      for (std::size_t r : rows) {
        if (r >= forward_.rows()) throw DomainError("sensor row index out of range");
        ++owner[r];
      }
    for (int c : owner)
      if (c != 1) throw DomainError("sensor row groups must partition the observation rows");
    row_energy_.assign(forward_.rows(), 0.0);
    for (std::size_t r = 0; r < forward_.rows(); ++r)
      for (std::size_t c = 0; c < forward_.cols(); ++c) {
        const double v = forward_(r, c);
        if (!std::isfinite(v)) throw DomainError("forward matrix has a non-finite entry");
        row_energy_[r] += v * v;
      }
  }

  /// Sensors own consecutive blocks of rows_per_sensor rows.
  static TraceFIMProblem with_row_blocks(Matrix forward, double sigma, std::size_t rows_per_sensor) {
    if (rows_per_sensor == 0 || forward.rows() % rows_per_sensor != 0)
      throw DomainError("row count is not a multiple of rows per sensor");
    std::vector<std::vector<std::size_t>> groups(forward.rows() / rows_per_sensor);
    for (std::size_t r = 0; r < forward.rows(); ++r) groups[r / rows_per_sensor].push_back(r);
    return TraceFIMProblem(std::move(forward), sigma, std::move(groups));
  }

  const Matrix& forward() const { return forward_; }
  double sigma() const { return sigma_; }
  std::size_t sensors() const { return sensor_rows_.size(); }
  const std::vector<std::vector<std::size_t>>& sensor_rows() const { return sensor_rows_; }
  /// ||F_r||^2 for every row.
  const Vector& row_energy() const { return row_energy_; }

  /// Observation-row mask m obtained by expanding d over the sensor groups.
  std::vector<std::uint8_t> row_mask(const Design& d) const {
    if (d.size() != sensors())
      throw DomainError("design has " + std::to_string(d.size()) + " entries but the problem has " +
                        std::to_string(sensors()) + " sensors");
    std::vector<std::uint8_t> m(forward_.rows(), 0);
    for (std::size_t s = 0; s < d.size(); ++s)
      if (d[s])
        for (std::size_t r : sensor_rows_[s]) m[r] = 1;
    return m;
  }

 private:
  Matrix forward_;
  double sigma_;
  std::vector<std::vector<std::size_t>> sensor_rows_;
  Vector row_energy_;
};

/// Trace of the Fisher information, sigma^-2 * sum over active rows of ||F_r||^2.
inline double trace_fim_eval(const TraceFIMProblem& problem, const Design& d) {
  const auto m = problem.row_mask(d);
  double total = 0.0;
  for (std::size_t r = 0; r < m.size(); ++r)
    if (m[r]) total += problem.row_energy()[r];
  return total / (problem.sigma() * problem.sigma());
}

inline Objective trace_fim_objective(std::shared_ptr<const TraceFIMProblem> problem) {
  const std::size_t n = problem->sensors();
  return Objective("trace-fim", n, [problem](const Design& d) { return trace_fim_eval(*problem, d); });
}

/// Synthetic forward matrix: `sensors * times` rows by `parameters` columns of
/// standard normals, row t of each sensor scaled by decay^t and each sensor
/// block by a random gain in [0.5, 1.5).
inline TraceFIMProblem synthetic_trace_fim(std::size_t sensors, std::size_t times,
                                           std::size_t parameters, double sigma, double decay,
                                           std::uint64_t seed) {
  RandomStream rng(seed);
  Matrix f(sensors * times, parameters);
  for (std::size_t s = 0; s < sensors; ++s) {
    const double gain = 0.5 + rng.uniform();
    for (std::size_t t = 0; t < times; ++t) {
      const double scale = gain * std::pow(decay, static_cast<double>(t));
      for (std::size_t c = 0; c < parameters; ++c) f(s * times + t, c) = scale * rng.normal();
    }
  }
  return TraceFIMProblem::with_row_blocks(std::move(f), sigma, times);
}

/// Whitespace-separated matrix, one row per line; blank lines and lines
/// starting with '#' are skipped.
inline Matrix load_matrix_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  std::vector<Vector> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Vector row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ConfigError("matrix file '" + path + "': bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("matrix file '" + path + "': ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("matrix file '" + path + "' is empty");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

}  // namespace pbo
