#pragma once

// Brute-force and finite-difference oracles.

#include <pbo/constraint.hpp>
#include <pbo/objectives.hpp>
#include <pbo/types.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace pbo {

inline constexpr std::size_t kDefaultEnumerationCap = 24;

enum class Direction { maximize, minimize };

/// Canonical design key 1 + sum_i d_i 2^(i-1) (1-based i), held as
/// little-endian 64-bit words of sum_i d_i 2^(i-1). Ordering is numeric.
class DesignKey {
 public:
  DesignKey() = default;
  explicit DesignKey(const Design& d) : size_(d.size()), words_((d.size() + 63) / 64, 0) {
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i]) words_[i / 64] |= std::uint64_t{1} << (i % 64);
  }

  std::size_t dimension() const { return size_; }

  /// 1 + sum d_i 2^(i-1); only representable for N <= 63.
  std::uint64_t index() const {
    if (size_ > 63) throw OverflowError("canonical index needs more than 64 bits");
    return 1 + (words_.empty() ? 0 : words_[0]);
  }

  Design design() const {
    Design d(size_, 0);
    for (std::size_t i = 0; i < size_; ++i) d[i] = (words_[i / 64] >> (i % 64)) & 1U;
    return d;
  }

  friend bool operator==(const DesignKey&, const DesignKey&) = default;
  friend std::strong_ordering operator<=>(const DesignKey& a, const DesignKey& b) {
    if (auto c = a.size_ <=> b.size_; c != 0) return c;
    for (std::size_t w = a.words_.size(); w-- > 0;)
      if (auto c = a.words_[w] <=> b.words_[w]; c != 0) return c;
    return std::strong_ordering::equal;
  }

  std::size_t hash() const {
    std::uint64_t h = 0x243f6a8885a308d3ULL ^ size_;
    for (std::uint64_t w : words_) {
      h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct DesignKeyHash {
  std::size_t operator()(const DesignKey& k) const { return k.hash(); }
};

/// All feasible designs in ascending canonical-key order.
class FeasibleEnumeration {
 public:
  FeasibleEnumeration(ConstraintSpec constraint, std::size_t n, std::size_t cap = kDefaultEnumerationCap)
      : constraint_(std::move(constraint)), n_(n) {
    if (n > cap)
      throw EnumerationCapError("enumeration of N = " + std::to_string(n) +
                                " exceeds the cap of " + std::to_string(cap));
    if (n > 62) throw EnumerationCapError("enumeration needs N <= 62");
    constraint_.validate(n);
  }

  std::size_t dimension() const { return n_; }
  const ConstraintSpec& constraint() const { return constraint_; }

  /// Closed-form cardinality.
  std::uint64_t size() const { return constraint_.feasible_count(n_); }

  /// Calls fn(design, canonical index) for every feasible design.
  template <class Fn>
  void for_each(Fn&& fn) const {
    Design d(n_, 0);
    const std::uint64_t end = std::uint64_t{1} << n_;
    for (std::uint64_t mask = 0; mask < end; ++mask) {
      if (!constraint_.admits(static_cast<std::size_t>(std::popcount(mask)))) continue;
      for (std::size_t i = 0; i < n_; ++i) d[i] = (mask >> i) & 1U;
      fn(static_cast<const Design&>(d), mask + 1);
    }
  }

  std::vector<Design> collect() const {
    std::vector<Design> out;
    for_each([&](const Design& d, std::uint64_t) { out.push_back(d); });
    return out;
  }

 private:
  ConstraintSpec constraint_;
  std::size_t n_;
};

inline FeasibleEnumeration enumerate(const ConstraintSpec& constraint, std::size_t n,
                                     std::size_t cap = kDefaultEnumerationCap) {
  return FeasibleEnumeration(constraint, n, cap);
}

inline bool better(double a, double b, Direction dir) {
  return dir == Direction::maximize ? a > b : a < b;
}

struct BruteForceResult {
  double value = 0.0;
  std::vector<Design> designs;  // every optimal design, ascending key order
  std::uint64_t evaluated = 0;
};

inline BruteForceResult brute_force_optimum(const Objective& objective, const ConstraintSpec& constraint,
                                            Direction dir = Direction::maximize,
                                            std::size_t cap = kDefaultEnumerationCap) {
  const auto feasible = enumerate(constraint, objective.dimension(), cap);
  BruteForceResult out;
  out.value = dir == Direction::maximize ? -std::numeric_limits<double>::infinity()
                                         : std::numeric_limits<double>::infinity();
  feasible.for_each([&](const Design& d, std::uint64_t) {
    const double v = objective(d);
    ++out.evaluated;
    if (better(v, out.value, dir)) {
      out.value = v;
      out.designs.clear();
      out.designs.push_back(d);
    } else if (v == out.value) {
      out.designs.push_back(d);
    }
  });
  return out;
}

struct TableRow {
  std::uint64_t index;
  double value;
};

/// (canonical index, value) for every feasible design.
inline std::vector<TableRow> brute_force_table(const Objective& objective, const ConstraintSpec& constraint,
                                               std::size_t cap = kDefaultEnumerationCap) {
  const auto feasible = enumerate(constraint, objective.dimension(), cap);
  std::vector<TableRow> rows;
  rows.reserve(feasible.size());
  feasible.for_each([&](const Design& d, std::uint64_t index) { rows.push_back({index, objective(d)}); });
  return rows;
}

//---------------------------------------------------------------------------//
// Finite differences
//---------------------------------------------------------------------------//

struct FiniteDifferenceReport {
  Vector analytic;
  Vector numeric;
  Vector error;  // |numeric_i - analytic_i| / scale
  double scale = 0.0;
  double max_error = 0.0;
  bool passed = false;
};

struct FiniteDifferenceOptions {
  /// Box for one-sided differences; central differences are used where the
  /// stencil fits.
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  /// Absolute floor for the normalizing scale.
  double floor = 1e-300;
};

/// Numeric gradient of f at x: central where possible, one-sided at the box.
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                         double step, const FiniteDifferenceOptions& opt = {}) {
  Vector g(x.size());
  Vector y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool can_down = x[i] - step >= opt.lower;
    const bool can_up = x[i] + step <= opt.upper;
    if (can_down && can_up) {
      y[i] = x[i] + step;
      const double fp = f(y);
      y[i] = x[i] - step;
      const double fm = f(y);
      g[i] = (fp - fm) / (2.0 * step);
    } else if (can_up) {
      y[i] = x[i] + step;
      g[i] = (f(y) - f(x)) / step;
    } else {
      y[i] = x[i] - step;
      g[i] = (f(x) - f(y)) / step;
    }
    y[i] = x[i];
  }
  return g;
}

/// Compares an analytic gradient against finite differences. The error of
/// each coordinate is measured relative to the larger infinity norm of the
/// two gradients.
inline FiniteDifferenceReport finite_difference_check(const std::function<double(const Vector&)>& f,
                                                      const Vector& analytic, const Vector& x,
                                                      double step, double tolerance,
                                                      const FiniteDifferenceOptions& opt = {}) {
  FiniteDifferenceReport r;
  r.analytic = analytic;
  r.numeric = finite_difference_gradient(f, x, step, opt);
  double na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    na = std::max(na, std::abs(analytic[i]));
    nn = std::max(nn, std::abs(r.numeric[i]));
  }
  r.scale = std::max({na, nn, opt.floor});
  r.error.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.error[i] = std::abs(r.numeric[i] - analytic[i]) / r.scale;
    r.max_error = std::max(r.max_error, r.error[i]);
  }
  r.passed = r.max_error <= tolerance;
  return r;
}

/// Central second difference for d^2 f / dx_i dx_j.
inline double finite_difference_second(const std::function<double(const Vector&)>& f, const Vector& x,
                                       std::size_t i, std::size_t j, double step) {
  Vector y = x;
  if (i == j) {
    y[i] = x[i] + step;
    const double fp = f(y);
    y[i] = x[i] - step;
    const double fm = f(y);
    return (fp - 2.0 * f(x) + fm) / (step * step);
  }
  auto at = [&](double si, double sj) {
    y = x;
    y[i] += si * step;
    y[j] += sj * step;
    return f(y);
  };
  return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * step * step);
}

}  // namespace pbo
