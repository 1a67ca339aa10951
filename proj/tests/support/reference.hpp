#pragma once

// Independent brute-force references. Nothing here calls into the library's
// numerical code; everything is enumeration over bitmasks.

#include <pbo/types.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace ref {

using pbo::Design;
using pbo::Vector;

inline Design from_mask(std::uint64_t mask, std::size_t n) {
  Design d(n, 0);
  for (std::size_t i = 0; i < n; ++i) d[i] = (mask >> i) & 1U;
  return d;
}

inline std::uint64_t to_mask(const Design& d) {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i]) m |= std::uint64_t{1} << i;
  return m;
}

inline std::size_t ones(std::uint64_t mask) { return static_cast<std::size_t>(std::popcount(mask)); }

/// Sum over k-subsets of the product of weights.
inline double r_enum(long k, const Vector& w) {
  if (k < 0) return 0.0;
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << w.size()); ++m) {
    if (ones(m) != static_cast<std::size_t>(k)) continue;
    double prod = 1.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if ((m >> i) & 1U) prod *= w[i];
    total += prod;
  }
  return total;
}

/// Independent Bernoulli probability of the outcome `mask`.
inline double bernoulli(const Vector& p, std::uint64_t mask) {
  double prob = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) prob *= ((mask >> i) & 1U) ? p[i] : 1.0 - p[i];
  return prob;
}

inline double pb(const Vector& p, std::size_t z) {
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << p.size()); ++m)
    if (ones(m) == z) total += bernoulli(p, m);
  return total;
}

/// P(d | sum in Z) by conditioning the independent model.
inline double conditional(const Vector& p, const std::vector<std::size_t>& budgets, std::uint64_t mask) {
  auto admitted = [&](std::size_t c) {
    for (std::size_t z : budgets)
      if (z == c) return true;
    return false;
  };
  if (!admitted(ones(mask))) return 0.0;
  double den = 0.0;
  for (std::size_t z : budgets) den += pb(p, z);
  return bernoulli(p, mask) / den;
}

inline double cb(const Vector& p, std::size_t z, std::uint64_t mask) { return conditional(p, {z}, mask); }

/// pi_i under the CB model with weights w.
inline Vector inclusion(const Vector& w, std::size_t z) {
  const std::size_t n = w.size();
  Vector pi(n, 0.0);
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
    if (ones(m) != z) continue;
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      if ((m >> i) & 1U) prod *= w[i];
    total += prod;
    for (std::size_t i = 0; i < n; ++i)
      if ((m >> i) & 1U) pi[i] += prod;
  }
  for (double& v : pi) v /= total;
  return pi;
}

inline double inclusion_pair(const Vector& w, std::size_t z, std::size_t a, std::size_t b) {
  double both = 0.0, total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << w.size()); ++m) {
    if (ones(m) != z) continue;
    double prod = 1.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if ((m >> i) & 1U) prod *= w[i];
    total += prod;
    if (((m >> a) & 1U) && ((m >> b) & 1U)) both += prod;
  }
  return both / total;
}

/// E[J] under the conditional model.
inline double expectation(const Vector& p, const std::vector<std::size_t>& budgets,
                          const std::function<double(const Design&)>& f) {
  double total = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << p.size()); ++m) {
    const double prob = conditional(p, budgets, m);
    if (prob > 0.0) total += prob * f(from_mask(m, p.size()));
  }
  return total;
}

/// Central-difference gradient of a scalar function of p.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// d E[J] / dp by differencing the exhaustive expectation.
inline Vector exhaustive_gradient(const Vector& p, const std::vector<std::size_t>& budgets,
                                  const std::function<double(const Design&)>& f) {
  return numeric_gradient([&](const Vector& x) { return expectation(x, budgets, f); }, p);
}

}  // namespace ref
