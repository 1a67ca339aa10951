#pragma once

// Exact samplers for the PB, CB and GCB models.

#include <pbo/distributions.hpp>
#include <pbo/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pbo {

/// Seedable random stream, algorithm "pbo-stream-v1":
///   * engine: std::mt19937_64 seeded with splitmix64(seed);
///   * uniform(): (engine() >> 11) * 2^-53, in [0, 1);
///   * normal(): Box-Muller on two uniforms, cosine branch only;
///   * substream(k): a stream whose seed is splitmix64(seed ^ splitmix64(k + 1)),
///     so nested substreams stay distinct under index permutation.
/// Every quantity is specified bit-for-bit by the C++ standard, so a seed
/// reproduces the same draws on any conforming platform.
class RandomStream {
 public:
  static constexpr const char* kAlgorithm = "pbo-stream-v1";

  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream keyed by index.
  RandomStream substream(std::uint64_t index) const {
    return RandomStream(splitmix64(seed_ ^ splitmix64(index + 1)));
  }

  /// Reserves a contiguous block of n substream indices and returns its start.
  std::uint64_t reserve(std::uint64_t n) {
    const std::uint64_t base = next_index_;
    next_index_ += n;
    return base;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t next_index_ = 0;
};

struct SampleBatch {
  std::vector<Design> designs;
  Vector objective_values;  // empty until evaluated

  std::size_t size() const { return designs.size(); }
};

/// Draws n sums from the PB model by cumulative inversion.
inline std::vector<std::size_t> pb_sample(const PBModel& model, std::size_t n, RandomStream& rng) {
  const Vector pmf = pb_pmf_all(model);
  Vector cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t z = 0; z < pmf.size(); ++z) cdf[z] = acc += pmf[z];
  std::vector<std::size_t> out(n);
  const std::uint64_t base = rng.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    RandomStream sub = rng.substream(base + k);
    const double u = sub.uniform() * acc;
    std::size_t z = 0;
    while (z + 1 < cdf.size() && !(u < cdf[z])) ++z;
    // Never land on a zero-probability outcome through rounding.
    while (pmf[z] == 0.0 && z > 0) --z;
    out[k] = z;
  }
  return out;
}

/// Tail-sum probabilities q(i, j) = P(sum_{m >= j} d_m = i - 1) over the
/// active trials of a CB model, for i = 1..z'+1 and j = 1..N'+1 (1-based,
/// column N'+1 is the empty tail). Columns are stored scaled with a log
/// factor so long products do not underflow.
class QMatrix {
 public:
  QMatrix() = default;
  QMatrix(std::span<const double> p, std::size_t budget)
      : n_(p.size()), z_(budget), p_(p.begin(), p.end()),
        scaled_((n_ + 1) * (z_ + 1), 0.0), log_scale_(n_ + 1, 0.0) {
    // Column N'+1: the empty tail sums to 0 with certainty.
    cell(1, n_ + 1) = 1.0;
    for (std::size_t j = n_; j >= 1; --j) {
      const double pj = p_[j - 1];
      double peak = 0.0;
      for (std::size_t i = 1; i <= z_ + 1; ++i) {
        const double stay = (1.0 - pj) * cell(i, j + 1);
        const double take = i >= 2 ? pj * cell(i - 1, j + 1) : 0.0;
        cell(i, j) = stay + take;
        peak = std::max(peak, cell(i, j));
      }
      log_scale_[j - 1] = log_scale_[j];
      if (peak > 0.0) {
        for (std::size_t i = 1; i <= z_ + 1; ++i) cell(i, j) /= peak;
        log_scale_[j - 1] += std::log(peak);
      }
    }
  }

  std::size_t trials() const { return n_; }
  std::size_t budget() const { return z_; }

  /// q(i, j), 1-based.
  double operator()(std::size_t i, std::size_t j) const {
    if (i < 1 || i > z_ + 1 || j < 1 || j > n_ + 1) return 0.0;
    const double c = cell(i, j);
    return c == 0.0 ? 0.0 : c * std::exp(log_scale_[j - 1]);
  }

  /// P(d_j = 1 | r more successes are needed from trials j..N').
  double take_probability(std::size_t r, std::size_t j) const {
    const double den = cell(r + 1, j);
    if (den == 0.0) return 0.0;
    const double num = cell(r, j + 1) * p_[j - 1];
    return num / den * std::exp(log_scale_[j] - log_scale_[j - 1]);
  }

 private:
  double& cell(std::size_t i, std::size_t j) { return scaled_[(j - 1) * (z_ + 1) + (i - 1)]; }
  double cell(std::size_t i, std::size_t j) const { return scaled_[(j - 1) * (z_ + 1) + (i - 1)]; }

  std::size_t n_ = 0;
  std::size_t z_ = 0;
  Vector p_;
  Vector scaled_;     // column-major, rows 1..z+1
  Vector log_scale_;  // log_scale_[j-1] belongs to column j
};

/// q-matrix over the active trials of the model with the reduced budget.
inline QMatrix build_q(const CBModel& model) {
  const auto& sp = model.probs();
  Vector p;
  p.reserve(sp.num_active());
  for (std::size_t i : sp.active()) p.push_back(sp[i]);
  return QMatrix(p, model.reduced_budget());
}

namespace detail {

inline void cb_draw(const CBModel& model, const QMatrix& q, RandomStream& sub, Design& d) {
  const auto& sp = model.probs();
  d.assign(model.size(), 0);
  for (std::size_t i : sp.ones()) d[i] = 1;
  std::size_t remaining = model.reduced_budget();
  const std::size_t n = sp.num_active();
  for (std::size_t j = 1; j <= n && remaining > 0; ++j) {
    // Remaining slots must all be taken once the tail is exactly that long.
    const bool forced = n - j + 1 == remaining;
    const double u = sub.uniform();
    if (forced || u < q.take_probability(remaining, j)) {
      d[sp.active()[j - 1]] = 1;
      --remaining;
    }
  }
}

}  // namespace detail

/// n exact draws from the CB model (sequential q-matrix sampling).
inline SampleBatch cb_sample(const CBModel& model, std::size_t n, RandomStream& rng) {
  const QMatrix q = build_q(model);
  SampleBatch batch;
  batch.designs.resize(n);
  const std::uint64_t base = rng.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    RandomStream sub = rng.substream(base + k);
    detail::cb_draw(model, q, sub, batch.designs[k]);
  }
  return batch;
}

/// n exact draws from the GCB model: budgets by PB-weighted inversion,
/// then CB draws per distinct budget in ascending order.
inline SampleBatch gcb_sample(const GCBModel& model, std::size_t n, RandomStream& rng) {
  const auto& comps = model.components();
  Vector cdf(comps.size());
  double acc = 0.0;
  for (std::size_t c = 0; c < comps.size(); ++c) cdf[c] = acc += comps[c].mass;
  std::vector<std::size_t> counts(comps.size(), 0);
  const std::uint64_t stage_one = rng.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    RandomStream sub = rng.substream(stage_one + k);
    const double u = sub.uniform() * acc;
    std::size_t c = 0;
    while (c + 1 < cdf.size() && !(u < cdf[c])) ++c;
    while (comps[c].mass == 0.0 && c > 0) --c;
    if (comps[c].mass == 0.0) {  // only reachable when earlier components are empty
      while (comps[c].mass == 0.0) ++c;
    }
    ++counts[c];
  }
  SampleBatch batch;
  batch.designs.reserve(n);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (counts[c] == 0) continue;
    SampleBatch part = cb_sample(*comps[c].cb, counts[c], rng);
    for (auto& d : part.designs) batch.designs.push_back(std::move(d));
  }
  return batch;
}

}  // namespace pbo
