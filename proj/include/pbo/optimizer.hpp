#pragma once

// Projected stochastic gradient optimization of the Bernoulli policy.

#include <pbo/constraint.hpp>
#include <pbo/distributions.hpp>
#include <pbo/objectives.hpp>
#include <pbo/oracle.hpp>
#include <pbo/sampling.hpp>
#include <pbo/types.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

namespace pbo {

enum class LearningRateSchedule { constant, inverse };

/// diagonal: sum_k J_k ||s_k||^2 / (N_ens * score variance), fitted on the batch.
/// double_sum: sum_k sum_j J_k s_k^T s_j / (N_ens * score variance), fitted on the batch.
/// cross_fit: double_sum, with each half of the batch centred by the other half's fit.
enum class BaselineEstimate { diagonal, double_sum, cross_fit };

struct OptimizerConfig {
  double learning_rate = 0.25;
  std::size_t sample_size = 100;        // N_ens
  std::size_t max_iterations = 500;
  double pgtol = 1e-8;
  std::size_t final_sample_size = 100;  // N_opt
  Direction direction = Direction::maximize;
  std::uint64_t seed = 0;
  bool baseline = true;
  BaselineEstimate baseline_estimate = BaselineEstimate::diagonal;
  Vector initial_p;                     // empty: fill with initial_fill
  double initial_fill = 0.5;
  LearningRateSchedule schedule = LearningRateSchedule::constant;
  std::size_t threads = 1;              // concurrent objective evaluations

  void validate(std::size_t n) const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ConfigError("learning_rate must lie in (0, 1]");
    if (sample_size == 0) throw ConfigError("sample_size must be positive");
    if (max_iterations == 0) throw ConfigError("max_iterations must be positive");
    if (!(pgtol >= 0.0)) throw ConfigError("pgtol must be nonnegative");
    if (final_sample_size == 0) throw ConfigError("final_sample_size must be positive");
    if (!initial_p.empty() && initial_p.size() != n)
      throw ConfigError("initial_p has " + std::to_string(initial_p.size()) + " entries, expected " +
                        std::to_string(n));
    for (double v : initial_p)
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("initial_p entries must lie in [0, 1]");
    if (initial_p.empty() && !(initial_fill >= 0.0 && initial_fill <= 1.0))
      throw ConfigError("initial_p fill must lie in [0, 1]");
  }

  Vector start(std::size_t n) const { return initial_p.empty() ? Vector(n, initial_fill) : initial_p; }
};

struct IterationRecord {
  std::size_t iteration = 0;
  Vector p;                   // p^(n), before the step
  Vector projected_gradient;  // P(g^(n))
  double pgnorm = 0.0;
  double baseline = 0.0;
  double mean_value = 0.0;    // sample mean of J
  double best_value = 0.0;    // best J in this iteration's sample
  std::size_t new_evaluations = 0;
  std::size_t cumulative_evaluations = 0;
};

struct OptimizerTrace {
  std::vector<IterationRecord> iterations;
  Design best_design;  // best along the route
  double best_value = std::numeric_limits<double>::quiet_NaN();
  Vector optimal_p;
  SampleBatch final_sample;
  Design returned_design;
  double returned_value = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::size_t distinct_evaluations = 0;
  std::size_t cache_hits = 0;
  std::size_t final_new_evaluations = 0;
};

/// Raised when an objective evaluation fails; carries the trace so far.
struct RunAborted : ObjectiveError {
  RunAborted(const std::string& what, OptimizerTrace partial)
      : ObjectiveError(what), trace(std::move(partial)) {}
  OptimizerTrace trace;
};

/// Objective values keyed by canonical design; each design is evaluated at
/// most once. Lookups are serialized; new designs in a batch may be evaluated
/// concurrently.
class EvaluationCache {
 public:
  using Observer = std::function<void(const Design&, double)>;

  /// Values for every design in order. The observer sees each value in batch
  /// order, whether it was computed or recalled.
  Vector evaluate(const std::vector<Design>& designs, const Objective& objective, std::size_t threads = 1,
                  const Observer& observer = {}) {
    std::vector<DesignKey> keys;
    keys.reserve(designs.size());
    std::vector<std::size_t> fresh;  // first occurrence of each uncached key
    {
      std::lock_guard lock(mutex_);
      std::unordered_map<DesignKey, std::size_t, DesignKeyHash> seen;
      for (std::size_t k = 0; k < designs.size(); ++k) {
        keys.emplace_back(designs[k]);
        if (values_.count(keys.back()) == 0 && seen.emplace(keys.back(), k).second) fresh.push_back(k);
      }
    }
    Vector computed(fresh.size());
    std::vector<std::exception_ptr> errors(fresh.size());
    auto work = [&](std::size_t f) {
      try {
        computed[f] = objective(designs[fresh[f]]);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    };
    const std::size_t nthreads = objective.thread_safe() ? std::min(threads, fresh.size()) : 1;
    if (nthreads <= 1) {
      for (std::size_t f = 0; f < fresh.size(); ++f) work(f);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
          for (std::size_t f; (f = next.fetch_add(1)) < fresh.size();) work(f);
        });
      for (auto& th : pool) th.join();
    }
    // Store everything that succeeded, then report the earliest failure.
    std::exception_ptr first_error;
    {
      std::lock_guard lock(mutex_);
      for (std::size_t f = 0; f < fresh.size(); ++f) {
        if (errors[f]) {
          if (!first_error) first_error = errors[f];
          continue;
        }
        values_.emplace(keys[fresh[f]], computed[f]);
        ++misses_;
      }
    }
    if (first_error) {
      try {
        std::rethrow_exception(first_error);
      } catch (const ObjectiveError&) {
        throw;
      } catch (const std::exception& e) {
        throw ObjectiveError(std::string("objective evaluation failed: ") + e.what());
      }
    }
    Vector out(designs.size());
    std::lock_guard lock(mutex_);
    for (std::size_t k = 0; k < designs.size(); ++k) {
      out[k] = values_.at(keys[k]);
      if (observer) observer(designs[k], out[k]);
    }
    hits_ += designs.size() - fresh.size();
    return out;
  }

  std::optional<double> lookup(const Design& d) const {
    std::lock_guard lock(mutex_);
    auto it = values_.find(DesignKey(d));
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return values_.size();
  }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<DesignKey, double, DesignKeyHash> values_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// The conditional distribution induced by p and a budget constraint: CB for
/// an equality budget, GCB otherwise.
class ConditionalPolicy {
 public:
  ConditionalPolicy(const Vector& p, const ConstraintSpec& constraint) : model_(make(p, constraint)) {}

  const SuccessProbabilities& probs() const {
    return std::visit([](const auto& m) -> const SuccessProbabilities& { return m.probs(); }, model_);
  }
  std::size_t size() const { return probs().size(); }
  bool is_equality() const { return std::holds_alternative<CBModel>(model_); }
  const CBModel& cb() const { return std::get<CBModel>(model_); }
  const GCBModel& gcb() const { return std::get<GCBModel>(model_); }

  SampleBatch sample(std::size_t n, RandomStream& rng) const {
    return is_equality() ? cb_sample(cb(), n, rng) : gcb_sample(gcb(), n, rng);
  }

  double pmf(const Design& d) const { return is_equality() ? cb_pmf(cb(), d) : gcb_pmf(gcb(), d); }

  /// d log P(d | constraint)/dp.
  Vector score(const Design& d) const {
    return is_equality() ? cb_log_grad(cb(), d) : gcb_log_grad(gcb(), d);
  }

  /// E||score||^2 over active trials: sum_i (1 + w_i)^4 / w_i^2 (pi_i - pi_i^2),
  /// with pi the mixed inclusion probabilities for an inclusion constraint.
  double score_variance() const {
    return is_equality() ? cb_score_variance(cb()) : gcb_score_variance(gcb());
  }

 private:
  using Model = std::variant<CBModel, GCBModel>;

  static Model make(const Vector& p, const ConstraintSpec& constraint) {
    constraint.validate(p.size());
    SuccessProbabilities sp(p);
    if (constraint.kind() == ConstraintSpec::Kind::equality)
      return Model(std::in_place_type<CBModel>, std::move(sp), constraint.z());
    return Model(std::in_place_type<GCBModel>, std::move(sp), constraint.budgets(p.size()));
  }

  Model model_;
};

/// (1/N_ens) sum_k (J_k - b) score_k.
inline Vector stochastic_gradient(const std::vector<Vector>& scores, const Vector& values, double baseline) {
  if (scores.empty()) return {};
  Vector g(scores.front().size(), 0.0);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double c = values[k] - baseline;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * scores[k][i];
  }
  for (double& v : g) v /= static_cast<double>(scores.size());
  return g;
}

inline Vector stochastic_gradient(const ConditionalPolicy& policy, const SampleBatch& batch,
                                  const Vector& values, double baseline) {
  std::vector<Vector> scores;
  scores.reserve(batch.size());
  for (const auto& d : batch.designs) scores.push_back(policy.score(d));
  return stochastic_gradient(scores, values, baseline);
}

/// max{0, sum_i sum_j J_i s_i^T s_j / (N_ens * score variance)}, restricted to
/// non-degenerate trials; 0 when every trial is degenerate.
inline double optimal_baseline(const ConditionalPolicy& policy, const std::vector<Vector>& scores,
                               const Vector& values) {
  const auto& sp = policy.probs();
  if (sp.all_degenerate() || scores.empty()) return 0.0;
  const double variance = policy.score_variance();
  if (!(variance > 0.0)) return 0.0;
  const auto& active = sp.active();
  Vector total(active.size(), 0.0);
  for (const auto& s : scores)
    for (std::size_t a = 0; a < active.size(); ++a) total[a] += s[active[a]];
  double numerator = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    double inner = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) inner += scores[k][active[a]] * total[a];
    numerator += values[k] * inner;
  }
  return std::max(0.0, numerator / (static_cast<double>(scores.size()) * variance));
}

inline double optimal_baseline(const ConditionalPolicy& policy, const SampleBatch& batch, const Vector& values) {
  std::vector<Vector> scores;
  for (const auto& d : batch.designs) scores.push_back(policy.score(d));
  return optimal_baseline(policy, scores, values);
}

/// max{0, sum_k J_k ||s_k||^2 / (N_ens * score variance)}, norms over
/// non-degenerate trials. Same target as optimal_baseline without the k != j
/// cross terms, which have mean zero but leave O(1) noise in b.
inline double diagonal_baseline(const ConditionalPolicy& policy, const std::vector<Vector>& scores,
                                const Vector& values) {
  const auto& sp = policy.probs();
  if (sp.all_degenerate() || scores.empty()) return 0.0;
  const double variance = policy.score_variance();
  if (!(variance > 0.0)) return 0.0;
  double numerator = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    double sq = 0.0;
    for (std::size_t i : sp.active()) sq += scores[k][i] * scores[k][i];
    numerator += values[k] * sq;
  }
  return std::max(0.0, numerator / (static_cast<double>(scores.size()) * variance));
}

struct BaselineGradient {
  Vector gradient;
  double baseline = 0.0;  // mean of the two half-batch baselines
};

/// Draws at even positions are centred by the baseline fitted on the odd
/// positions and vice versa.
inline BaselineGradient cross_fit_gradient(const ConditionalPolicy& policy, const std::vector<Vector>& scores,
                                           const Vector& values) {
  if (scores.size() < 2) return {stochastic_gradient(scores, values, 0.0), 0.0};
  std::array<std::vector<Vector>, 2> half_scores;
  std::array<Vector, 2> half_values;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    half_scores[k % 2].push_back(scores[k]);
    half_values[k % 2].push_back(values[k]);
  }
  const std::array<double, 2> b{optimal_baseline(policy, half_scores[0], half_values[0]),
                                optimal_baseline(policy, half_scores[1], half_values[1])};
  Vector g(scores.front().size(), 0.0);
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const double c = values[k] - b[1 - k % 2];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * scores[k][i];
  }
  for (double& v : g) v /= static_cast<double>(scores.size());
  return {g, 0.5 * (b[0] + b[1])};
}

/// Scaling projector: s * g with s the largest factor in (0, 1] keeping
/// p + s g (ascent) or p - s g (descent) inside [0, 1]^N.
inline Vector project(const Vector& p, const Vector& g, Direction dir) {
  const double sign = dir == Direction::maximize ? 1.0 : -1.0;
  double s = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double moved = p[i] + sign * g[i];
    double si = 1.0;
    if (moved > 1.0)
      si = (1.0 - p[i]) / std::abs(g[i]);
    else if (moved < 0.0)
      si = p[i] / std::abs(g[i]);
    s = std::min(s, si);
  }
  Vector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = s * g[i];
  return out;
}

/// p +- eta * projected, clamped to [0, 1] against rounding.
inline Vector take_step(const Vector& p, const Vector& projected, double eta, Direction dir) {
  const double sign = dir == Direction::maximize ? 1.0 : -1.0;
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::clamp(p[i] + sign * eta * projected[i], 0.0, 1.0);
  return out;
}

/// Tracks the best design seen anywhere; earlier designs win ties.
class RouteBest {
 public:
  explicit RouteBest(Direction dir) : dir_(dir) {}
  void offer(const Design& d, double v) {
    if (!have_ || better(v, value_, dir_)) {
      have_ = true;
      value_ = v;
      design_ = d;
    }
  }
  bool has_value() const { return have_; }
  double value() const { return value_; }
  const Design& design() const { return design_; }

 private:
  Direction dir_;
  bool have_ = false;
  double value_ = 0.0;
  Design design_;
};

/// Best design of a sample per direction; ties go to the lowest canonical key.
inline std::size_t best_in_sample(const SampleBatch& batch, const Vector& values, Direction dir) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < batch.size(); ++k) {
    if (better(values[k], values[best], dir) ||
        (values[k] == values[best] && DesignKey(batch.designs[k]) < DesignKey(batch.designs[best])))
      best = k;
  }
  return best;
}

/// Per-iteration callback, e.g. for progress output.
using IterationObserver = std::function<void(const IterationRecord&)>;

/// Sample -> evaluate -> baseline -> gradient -> project -> step, until the
/// projected gradient norm drops to pgtol or the iteration limit is hit;
/// then a final sample from p* supplies the returned design.
inline OptimizerTrace run(const Objective& objective, const ConstraintSpec& constraint,
                          const OptimizerConfig& config, const IterationObserver& observer = {}) {
  const std::size_t n = objective.dimension();
  config.validate(n);
  constraint.validate(n);
  RandomStream master(config.seed);
  EvaluationCache cache;
  RouteBest route(config.direction);
  OptimizerTrace trace;
  Vector p = config.start(n);

  auto finish_route = [&] {
    trace.best_design = route.design();
    trace.best_value = route.has_value() ? route.value() : std::numeric_limits<double>::quiet_NaN();
    trace.distinct_evaluations = cache.size();
    trace.cache_hits = cache.hits();
  };
  auto evaluate = [&](const SampleBatch& batch) {
    try {
      return cache.evaluate(batch.designs, objective, config.threads,
                            [&](const Design& d, double v) { route.offer(d, v); });
    } catch (const ObjectiveError& e) {
      finish_route();
      trace.optimal_p = p;
      throw RunAborted(e.what(), trace);
    }
  };

  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const ConditionalPolicy policy(p, constraint);
    p.assign(policy.probs().values().begin(), policy.probs().values().end());

    RandomStream stream = master.substream(it);
    SampleBatch batch = policy.sample(config.sample_size, stream);
    const std::size_t before = cache.size();
    batch.objective_values = evaluate(batch);

    std::vector<Vector> scores;
    scores.reserve(batch.size());
    for (const auto& d : batch.designs) scores.push_back(policy.score(d));
    double b = 0.0;
    Vector g;
    if (config.baseline && config.baseline_estimate == BaselineEstimate::cross_fit) {
      auto fitted = cross_fit_gradient(policy, scores, batch.objective_values);
      b = fitted.baseline;
      g = std::move(fitted.gradient);
    } else {
      if (config.baseline)
        b = config.baseline_estimate == BaselineEstimate::diagonal
                ? diagonal_baseline(policy, scores, batch.objective_values)
                : optimal_baseline(policy, scores, batch.objective_values);
      g = stochastic_gradient(scores, batch.objective_values, b);
    }
    const Vector pg = project(p, g, config.direction);

    IterationRecord rec;
    rec.iteration = it;
    rec.p = p;
    rec.projected_gradient = pg;
    rec.pgnorm = norm2(pg);
    rec.baseline = b;
    double sum = 0.0;
    for (double v : batch.objective_values) sum += v;
    rec.mean_value = sum / static_cast<double>(batch.size());
    rec.best_value = batch.objective_values[best_in_sample(batch, batch.objective_values, config.direction)];
    rec.new_evaluations = cache.size() - before;
    rec.cumulative_evaluations = cache.size();
    trace.iterations.push_back(rec);
    if (observer) observer(trace.iterations.back());

    if (rec.pgnorm <= config.pgtol) {
      trace.converged = true;
      break;
    }
    const double eta = config.schedule == LearningRateSchedule::inverse
                           ? config.learning_rate / static_cast<double>(it + 1)
                           : config.learning_rate;
    p = take_step(p, pg, eta, config.direction);
  }

  const ConditionalPolicy final_policy(p, constraint);
  trace.optimal_p.assign(final_policy.probs().values().begin(), final_policy.probs().values().end());
  p = trace.optimal_p;
  RandomStream final_stream = master.substream(config.max_iterations);
  trace.final_sample = final_policy.sample(config.final_sample_size, final_stream);
  const std::size_t before = cache.size();
  trace.final_sample.objective_values = evaluate(trace.final_sample);
  trace.final_new_evaluations = cache.size() - before;
  const std::size_t best =
      best_in_sample(trace.final_sample, trace.final_sample.objective_values, config.direction);
  trace.returned_design = trace.final_sample.designs[best];
  trace.returned_value = trace.final_sample.objective_values[best];
  finish_route();
  return trace;
}

/// Percentage of the feasible region whose objective was evaluated.
inline double explored_percentage(std::size_t distinct_evaluations, const ConstraintSpec& constraint,
                                  std::size_t n) {
  return 100.0 * static_cast<double>(distinct_evaluations) / constraint.feasible_count_real(n);
}

}  // namespace pbo
