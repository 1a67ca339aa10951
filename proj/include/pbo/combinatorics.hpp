#pragma once

// Bernoulli weights, the R-function R(k, A) (sum over k-subsets of A of the
// product of their weights), its derivatives, and inclusion probabilities.

#include <pbo/types.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace pbo {

/// Nonnegative real held by its natural logarithm. Sums and products of
/// R-table cells never leave the nonnegative reals, so this is enough to
/// carry a tabulation through ranges a double cannot represent.
class LogReal {
 public:
  LogReal() = default;
  explicit LogReal(double x) : lg_(x > 0.0 ? std::log(x) : kNegInf) {}

  static LogReal from_log(double lg) {
    LogReal r;
    r.lg_ = lg;
    return r;
  }

  double log() const { return lg_; }
  double value() const { return std::exp(lg_); }
  bool is_zero() const { return lg_ == kNegInf; }

  friend LogReal operator+(LogReal a, LogReal b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const double hi = std::max(a.lg_, b.lg_);
    const double lo = std::min(a.lg_, b.lg_);
    return from_log(hi + std::log1p(std::exp(lo - hi)));
  }
  friend LogReal operator*(LogReal a, LogReal b) {
    if (a.is_zero() || b.is_zero()) return LogReal{};
    return from_log(a.lg_ + b.lg_);
  }
  LogReal& operator+=(LogReal b) { return *this = *this + b; }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double lg_ = kNegInf;
};

namespace detail {

template <class T>
T lift(double x) {
  if constexpr (std::is_same_v<T, double>)
    return x;
  else
    return T(x);
}

// a / b as a double. b must be nonzero.
inline double ratio(double a, double b) { return a / b; }
inline double ratio(LogReal a, LogReal b) {
  if (a.is_zero()) return 0.0;
  return std::exp(a.log() - b.log());
}

inline double log_of(double x) { return std::log(x); }
inline double log_of(LogReal x) { return x.log(); }

inline std::vector<double> without(std::span<const double> w, std::size_t skip) {
  std::vector<double> out;
  out.reserve(w.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    if (j != skip) out.push_back(w[j]);
  return out;
}

inline std::vector<double> without(std::span<const double> w, std::size_t a,
                                   std::size_t b) {
  std::vector<double> out;
  out.reserve(w.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    if (j != a && j != b) out.push_back(w[j]);
  return out;
}

}  // namespace detail

/// Weights w_i = p_i / (1 - p_i) over the non-degenerate entries of p.
struct BernoulliWeights {
  std::vector<double> w;
  std::vector<std::size_t> index_map;  // weight position -> trial index
  std::vector<std::size_t> ones;       // trials with p_i = 1
  std::vector<std::size_t> zeros;      // trials with p_i = 0

  std::size_t size() const { return w.size(); }
  std::span<const double> values() const { return w; }

  /// Weights given directly; every trial is non-degenerate.
  static BernoulliWeights from_weights(std::vector<double> values) {
    BernoulliWeights bw;
    bw.index_map.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i]))
        throw DomainError("Bernoulli weights must be finite and positive");
      bw.index_map[i] = i;
    }
    bw.w = std::move(values);
    return bw;
  }
};

inline bool is_degenerate_zero(double p, double tol = kDegeneracyTolerance) {
  return p <= tol;
}
inline bool is_degenerate_one(double p, double tol = kDegeneracyTolerance) {
  return p >= 1.0 - tol;
}

inline BernoulliWeights weights_from_probs(std::span<const double> p,
                                           double tol = kDegeneracyTolerance) {
  BernoulliWeights bw;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw DomainError("success probability " + std::to_string(i) +
                        " is outside [0, 1]");
    if (is_degenerate_zero(p[i], tol)) {
      bw.zeros.push_back(i);
    } else if (is_degenerate_one(p[i], tol)) {
      bw.ones.push_back(i);
    } else {
      bw.w.push_back(p[i] / (1.0 - p[i]));
      bw.index_map.push_back(i);
    }
  }
  return bw;
}

/// Diagonal of dw/dp, i.e. (1 + w_i)^2 = 1 / (1 - p_i)^2.
inline Vector weight_jacobian(std::span<const double> p) {
  Vector diag(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0))
      throw DomainError("weight Jacobian needs p_i in (0, 1)");
    const double w = p[i] / (1.0 - p[i]);
    diag[i] = (1.0 + w) * (1.0 + w);
  }
  return diag;
}

/// Tabulation is done in log space for long or badly scaled weight vectors.
inline bool prefers_log_space(std::span<const double> w) {
  if (w.size() > 64) return true;
  if (w.empty()) return false;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *hi / *lo > 1e8;
}

/// R(n, A) for n = 0..kmax, where A is the whole weight sequence. Uses the
/// recurrence R(n, A) = R(n, A\{last}) + w_last R(n-1, A\{last}) on a single
/// rolling row, so memory is O(kmax).
template <class T = double>
std::vector<T> r_column(std::span<const double> w, std::size_t kmax) {
  std::vector<T> c(kmax + 1, T{});
  c[0] = detail::lift<T>(1.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const T wj = detail::lift<T>(w[j]);
    const std::size_t top = std::min(kmax, j + 1);
    for (std::size_t n = top; n >= 1; --n) c[n] = c[n] + wj * c[n - 1];
  }
  return c;
}

inline double r_value(long k, std::span<const double> w) {
  if (k < 0 || static_cast<std::size_t>(k) > w.size()) return 0.0;
  return r_column<double>(w, static_cast<std::size_t>(k))[static_cast<std::size_t>(k)];
}
inline double r_value(long k, const BernoulliWeights& bw) { return r_value(k, bw.values()); }

/// log R(k, A); -inf when R is zero.
inline double log_r_value(long k, std::span<const double> w) {
  if (k < 0 || static_cast<std::size_t>(k) > w.size())
    return -std::numeric_limits<double>::infinity();
  return r_column<LogReal>(w, static_cast<std::size_t>(k))[static_cast<std::size_t>(k)].log();
}

/// R(k, A) from the power-sum recurrence with T(i, A) = sum_j w_j^i.
/// Numerically unstable for long or widely spread weights; kept as an
/// independent cross-check of r_value.
inline double r_value_power_sum(long k, std::span<const double> w) {
  if (k < 0 || static_cast<std::size_t>(k) > w.size()) return 0.0;
  const auto kk = static_cast<std::size_t>(k);
  std::vector<double> power_sums(kk + 1, 0.0);
  for (std::size_t i = 1; i <= kk; ++i) {
    double s = 0.0;
    for (double wj : w) s += std::pow(wj, static_cast<double>(i));
    if (!std::isfinite(s))
      throw OverflowError("power sum T(" + std::to_string(i) + ", A) overflowed");
    power_sums[i] = s;
  }
  std::vector<double> r(kk + 1, 0.0);
  r[0] = 1.0;
  for (std::size_t n = 1; n <= kk; ++n) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      const double sign = (i % 2 == 1) ? 1.0 : -1.0;
      acc += sign * power_sums[i] * r[n - i];
    }
    r[n] = acc / static_cast<double>(n);
    if (!std::isfinite(r[n])) throw OverflowError("power-sum recurrence overflowed");
  }
  return r[kk];
}
inline double r_value_power_sum(long k, const BernoulliWeights& bw) {
  return r_value_power_sum(k, bw.values());
}

/// Full table c(n, j) = R(n, {first j weights}), n = 0..kmax, j = 0..N, with
/// optional co-tabulated gradients dc(n, j)/dw. Inspection and testing aid;
/// the value functions above keep only one row.
class RTable {
 public:
  RTable(std::span<const double> w, std::size_t kmax, bool with_gradients = false)
      : kmax_(kmax), n_(w.size()), values_((kmax + 1) * (w.size() + 1), 0.0) {
    if (with_gradients) gradients_.assign((kmax + 1) * (n_ + 1), Vector(n_, 0.0));
    for (std::size_t j = 0; j <= n_; ++j) cell(0, j) = 1.0;
    for (std::size_t j = 1; j <= n_; ++j) {
      const double wj = w[j - 1];
      for (std::size_t n = 1; n <= std::min(kmax_, j); ++n) {
        cell(n, j) = cell(n, j - 1) + wj * cell(n - 1, j - 1);
        if (with_gradients) {
          Vector& g = grad(n, j);
          const Vector& left = grad(n, j - 1);
          const Vector& diag = grad(n - 1, j - 1);
          for (std::size_t m = 0; m < n_; ++m) g[m] = left[m] + wj * diag[m];
          g[j - 1] += cell(n - 1, j - 1);
        }
      }
    }
  }

  std::size_t max_count() const { return kmax_; }
  std::size_t length() const { return n_; }
  bool has_gradients() const { return !gradients_.empty(); }

  /// R(n, {first j weights}); zero outside 0 <= n <= j.
  double value(long n, std::size_t j) const {
    if (n < 0 || static_cast<std::size_t>(n) > kmax_ || static_cast<std::size_t>(n) > j)
      return 0.0;
    return values_[static_cast<std::size_t>(n) * (n_ + 1) + j];
  }
  const Vector& gradient(std::size_t n, std::size_t j) const {
    return gradients_[n * (n_ + 1) + j];
  }

 private:
  double& cell(std::size_t n, std::size_t j) { return values_[n * (n_ + 1) + j]; }
  Vector& grad(std::size_t n, std::size_t j) { return gradients_[n * (n_ + 1) + j]; }

  std::size_t kmax_;
  std::size_t n_;
  std::vector<double> values_;
  std::vector<Vector> gradients_;
};

/// dR(k, A)/dw by co-tabulation: c'(i,j) = c'(i,j-1) + w_j c'(i-1,j-1) +
/// c(i-1,j-1) e_j, with c'(0, .) = 0. Two rolling rows of values and
/// gradients.
inline Vector r_gradient(long k, std::span<const double> w) {
  const std::size_t n = w.size();
  Vector zero(n, 0.0);
  if (k < 0 || static_cast<std::size_t>(k) > n) return zero;
  const auto kk = static_cast<std::size_t>(k);
  std::vector<double> c(kk + 1, 0.0);
  std::vector<Vector> g(kk + 1, zero);
  c[0] = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double wj = w[j];
    for (std::size_t i = std::min(kk, j + 1); i >= 1; --i) {
      Vector& gi = g[i];
      const Vector& gprev = g[i - 1];
      for (std::size_t m = 0; m < n; ++m) gi[m] += wj * gprev[m];
      gi[j] += c[i - 1];
      c[i] += wj * c[i - 1];
    }
  }
  return g[kk];
}
inline Vector r_gradient(long k, const BernoulliWeights& bw) { return r_gradient(k, bw.values()); }

/// d log R(k, A)/dw. Tabulated in log space when the weights call for it.
inline Vector r_log_gradient(long k, std::span<const double> w) {
  const std::size_t n = w.size();
  if (k < 0 || static_cast<std::size_t>(k) > n)
    throw DomainError("log R is undefined where R vanishes");
  if (!prefers_log_space(w)) {
    Vector g = r_gradient(k, w);
    const double r = r_value(k, w);
    for (double& x : g) x /= r;
    return g;
  }
  // dR/dw_i = R(k-1, A\{i})
  const LogReal total = r_column<LogReal>(w, static_cast<std::size_t>(k))[static_cast<std::size_t>(k)];
  Vector g(n, 0.0);
  if (k == 0) return g;
  for (std::size_t i = 0; i < n; ++i) {
    const auto reduced = detail::without(w, i);
    const auto col = r_column<LogReal>(reduced, static_cast<std::size_t>(k - 1));
    g[i] = detail::ratio(col[static_cast<std::size_t>(k - 1)], total);
  }
  return g;
}

/// d^2 R(k, A) / dw_i dw_j. R is multilinear in w, so the diagonal vanishes.
inline double r_hessian_entry(long k, std::span<const double> w, std::size_t i,
                              std::size_t j) {
  if (i == j) return 0.0;
  return r_value(k - 2, detail::without(w, i, j));
}

struct InclusionProbabilities {
  Vector first_order;
  std::size_t budget = 0;
};

namespace detail {

template <class T>
Vector inclusion_first_impl(std::size_t z, std::span<const double> w) {
  const std::size_t n = w.size();
  Vector pi(n, 0.0);
  if (z == 0) return pi;
  const T total = r_column<T>(w, z)[z];
  for (std::size_t i = 0; i < n; ++i) {
    const auto reduced = without(w, i);
    const T partial = r_column<T>(reduced, z - 1)[z - 1];
    pi[i] = ratio(lift<T>(w[i]) * partial, total);
  }
  return pi;
}

template <class T>
double inclusion_second_impl(std::size_t z, std::span<const double> w, std::size_t i,
                             std::size_t j) {
  if (z < 2) return 0.0;
  const T total = r_column<T>(w, z)[z];
  const auto reduced = without(w, i, j);
  const T partial = r_column<T>(reduced, z - 2)[z - 2];
  return ratio(lift<T>(w[i]) * lift<T>(w[j]) * partial, total);
}

}  // namespace detail

/// pi_i = w_i R(z-1, A\{i}) / R(z, A). Each reduced R-value comes from a
/// fresh table over A\{i}; the per-index tables are independent.
inline InclusionProbabilities inclusion_first(std::size_t z, std::span<const double> w) {
  if (z > w.size())
    throw InfeasibleError("budget " + std::to_string(z) + " exceeds the " +
                          std::to_string(w.size()) + " available trials");
  InclusionProbabilities out;
  out.budget = z;
  out.first_order = prefers_log_space(w) ? detail::inclusion_first_impl<LogReal>(z, w)
                                         : detail::inclusion_first_impl<double>(z, w);
  return out;
}
inline InclusionProbabilities inclusion_first(std::size_t z, const BernoulliWeights& bw) {
  return inclusion_first(z, bw.values());
}

/// pi_{i,j} = w_i w_j R(z-2, A\{i,j}) / R(z, A), i != j.
inline double inclusion_second(std::size_t z, std::span<const double> w, std::size_t i,
                               std::size_t j) {
  if (i == j) throw IndexError("second-order inclusion probability needs i != j");
  if (i >= w.size() || j >= w.size()) throw IndexError("inclusion index out of range");
  if (z > w.size()) throw InfeasibleError("budget exceeds the number of trials");
  return prefers_log_space(w) ? detail::inclusion_second_impl<LogReal>(z, w, i, j)
                              : detail::inclusion_second_impl<double>(z, w, i, j);
}
inline double inclusion_second(std::size_t z, const BernoulliWeights& bw, std::size_t i,
                               std::size_t j) {
  return inclusion_second(z, bw.values(), i, j);
}

/// Symmetric matrix of pi_{i,j} with pi_i on the diagonal.
inline Matrix inclusion_second_matrix(std::size_t z, std::span<const double> w) {
  const std::size_t n = w.size();
  const Vector pi = inclusion_first(z, w).first_order;
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = pi[i];
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = inclusion_second(z, w, i, j);
  }
  return m;
}

/// dR(k, A)/dw_i = pi_i R(k, A) / w_i, with pi taken at budget k.
inline Vector r_gradient_via_inclusion(long k, std::span<const double> w) {
  if (k < 1) throw DomainError("gradient via inclusion needs k >= 1");
  const auto kk = static_cast<std::size_t>(k);
  Vector g(w.size(), 0.0);
  if (kk > w.size()) return g;
  const Vector pi = inclusion_first(kk, w).first_order;
  const double r = r_value(k, w);
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = pi[i] * r / w[i];
  return g;
}
inline Vector r_gradient_via_inclusion(long k, const BernoulliWeights& bw) {
  return r_gradient_via_inclusion(k, bw.values());
}

/// Variable the inclusion-probability derivatives are taken with respect to.
enum class Variable { weights, probabilities };

namespace detail {
// d w / d p for one coordinate.
inline double chain_factor(double w, Variable v) {
  return v == Variable::weights ? 1.0 : (1.0 + w) * (1.0 + w);
}
}  // namespace detail

/// J(i, j) = d pi_i / d x_j with x = w or p.
inline Matrix inclusion_first_jacobian(std::size_t z, std::span<const double> w,
                                       Variable variable = Variable::weights) {
  const std::size_t n = w.size();
  const Matrix pij = inclusion_second_matrix(z, w);
  Matrix jac(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pi_i = pij(i, i);
    for (std::size_t j = 0; j < n; ++j) {
      const double pi_j = pij(j, j);
      const double dw = (i == j) ? (pi_j - pi_j * pi_j) / w[j]
                                 : (pij(i, j) - pi_i * pi_j) / w[j];
      jac(i, j) = dw * detail::chain_factor(w[j], variable);
    }
  }
  return jac;
}

/// Derivatives of pi_{i,j} (i != j): with respect to x_i, x_j, and mixed.
struct PairInclusionDerivatives {
  double d_first = 0.0;   // d pi_{i,j} / d x_i
  double d_second = 0.0;  // d pi_{i,j} / d x_j
  double d_mixed = 0.0;   // d^2 pi_{i,j} / d x_i d x_j
};

inline PairInclusionDerivatives inclusion_second_derivatives(
    std::size_t z, std::span<const double> w, std::size_t i, std::size_t j,
    Variable variable = Variable::weights) {
  if (i == j) throw IndexError("pair derivatives need i != j");
  const Vector pi = inclusion_first(z, w).first_order;
  const double pij = inclusion_second(z, w, i, j);
  const double fi = detail::chain_factor(w[i], variable);
  const double fj = detail::chain_factor(w[j], variable);
  PairInclusionDerivatives d;
  d.d_first = pij * (1.0 - pi[i]) / w[i] * fi;
  d.d_second = pij * (1.0 - pi[j]) / w[j] * fj;
  d.d_mixed = pij / (w[i] * w[j]) *
              ((1.0 - pi[i]) * (1.0 - pi[j]) - (pij - pi[i] * pi[j])) * fi * fj;
  return d;
}

}  // namespace pbo
