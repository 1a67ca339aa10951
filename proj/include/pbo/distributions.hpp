#pragma once

// Poisson-binomial (PB), conditional Bernoulli (CB) and generalized
// conditional Bernoulli (GCB) models over p in [0, 1]^N, including entries
// pinned at 0 or 1.

#include <pbo/combinatorics.hpp>
#include <pbo/types.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pbo {

/// Parameter vector of the Bernoulli policy. Entries within the degeneracy
/// tolerance of 0 or 1 are snapped to the boundary at construction.
class SuccessProbabilities {
 public:
  enum class State : std::uint8_t { active, zero, one };

  SuccessProbabilities() = default;
  explicit SuccessProbabilities(Vector p, double tol = kDegeneracyTolerance)
      : values_(std::move(p)), state_(values_.size(), State::active),
        position_(values_.size(), kNone) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double v = values_[i];
      if (!(v >= 0.0 && v <= 1.0))
        throw DomainError("success probability " + std::to_string(i) + " = " +
                          std::to_string(v) + " is outside [0, 1]");
      if (is_degenerate_zero(v, tol)) {
        values_[i] = 0.0;
        state_[i] = State::zero;
        weights_.zeros.push_back(i);
      } else if (is_degenerate_one(v, tol)) {
        values_[i] = 1.0;
        state_[i] = State::one;
        weights_.ones.push_back(i);
      } else {
        position_[i] = weights_.w.size();
        weights_.w.push_back(v / (1.0 - v));
        weights_.index_map.push_back(i);
        log_complement_ += std::log1p(-v);
      }
    }
    log_space_ = prefers_log_space(weights_.w);
  }

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  State state(std::size_t i) const { return state_[i]; }
  bool is_active(std::size_t i) const { return state_[i] == State::active; }
  /// Position of trial i within the active weight vector.
  std::size_t active_position(std::size_t i) const { return position_[i]; }

  const BernoulliWeights& weights() const { return weights_; }
  std::span<const double> active_weights() const { return weights_.w; }
  const std::vector<std::size_t>& active() const { return weights_.index_map; }
  const std::vector<std::size_t>& zeros() const { return weights_.zeros; }
  const std::vector<std::size_t>& ones() const { return weights_.ones; }
  std::size_t num_active() const { return weights_.w.size(); }
  bool all_degenerate() const { return weights_.w.empty(); }

  /// log prod_{active j} (1 - p_j)
  double log_active_complement() const { return log_complement_; }
  bool log_space() const { return log_space_; }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  Vector values_;
  std::vector<State> state_;
  std::vector<std::size_t> position_;
  BernoulliWeights weights_;
  double log_complement_ = 0.0;
  bool log_space_ = false;
};

/// Independent-Bernoulli probability of d.
inline double bernoulli_pmf(std::span<const double> p, const Design& d) {
  double prob = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) prob *= d[i] ? p[i] : 1.0 - p[i];
  return prob;
}

namespace detail {

/// R(n, S') for n = 0..kmax over the active weights, as logs.
inline std::vector<double> log_r_column(const SuccessProbabilities& sp, std::size_t kmax) {
  std::vector<double> out(kmax + 1, -std::numeric_limits<double>::infinity());
  if (sp.log_space()) {
    const auto col = r_column<LogReal>(sp.active_weights(), kmax);
    for (std::size_t n = 0; n <= kmax; ++n) out[n] = col[n].log();
  } else {
    const auto col = r_column<double>(sp.active_weights(), kmax);
    for (std::size_t n = 0; n <= kmax; ++n)
      out[n] = col[n] > 0.0 ? std::log(col[n]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

inline double safe_exp(double lg) {
  return lg == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lg);
}

inline void check_design(const Design& d, std::size_t n) {
  if (d.size() != n)
    throw DomainError("design has " + std::to_string(d.size()) + " entries, model has " +
                      std::to_string(n));
}

}  // namespace detail

//---------------------------------------------------------------------------//
// Poisson binomial
//---------------------------------------------------------------------------//

class PBModel {
 public:
  explicit PBModel(SuccessProbabilities probs)
      : probs_(std::move(probs)),
        log_r_(detail::log_r_column(probs_, probs_.num_active())) {}

  const SuccessProbabilities& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }

  /// log P(sum = z); -inf outside the support.
  double log_pmf(long z) const {
    const long shifted = z - static_cast<long>(probs_.ones().size());
    if (shifted < 0 || static_cast<std::size_t>(shifted) > probs_.num_active())
      return -std::numeric_limits<double>::infinity();
    return log_r_[static_cast<std::size_t>(shifted)] + probs_.log_active_complement();
  }

 private:
  SuccessProbabilities probs_;
  std::vector<double> log_r_;
};

/// P(sum = z) = R(z - |I|, S\{I u O}) prod_{active} (1 - p_j).
inline double pb_pmf(const PBModel& model, long z) {
  const auto& sp = model.probs();
  if (!sp.log_space()) {
    const long shifted = z - static_cast<long>(sp.ones().size());
    const double r = r_value(shifted, sp.active_weights());
    return r * std::exp(sp.log_active_complement());
  }
  return detail::safe_exp(model.log_pmf(z));
}

/// The whole PMF over z = 0..N.
inline Vector pb_pmf_all(const PBModel& model) {
  Vector out(model.size() + 1);
  for (std::size_t z = 0; z <= model.size(); ++z) out[z] = pb_pmf(model, static_cast<long>(z));
  return out;
}

enum class GradientRoute { tabulation, inclusion };

namespace detail {

// P(sum of all trials except i = k), i degenerate.
inline double pb_pmf_without(const SuccessProbabilities& sp, std::size_t i, long k) {
  long ones = static_cast<long>(sp.ones().size());
  if (sp.state(i) == SuccessProbabilities::State::one) --ones;
  const long shifted = k - ones;
  if (shifted < 0 || static_cast<std::size_t>(shifted) > sp.num_active()) return 0.0;
  if (sp.log_space())
    return safe_exp(log_r_value(shifted, sp.active_weights()) + sp.log_active_complement());
  return r_value(shifted, sp.active_weights()) * std::exp(sp.log_active_complement());
}

// Gradient of P(sum = z) given (optionally) the active inclusion
// probabilities at the reduced budget.
inline Vector pb_grad_impl(const PBModel& model, long z, GradientRoute route,
                           const Vector* active_pi) {
  const auto& sp = model.probs();
  const std::size_t n = sp.size();
  Vector g(n, 0.0);
  const long shifted = z - static_cast<long>(sp.ones().size());
  const bool in_support =
      shifted >= 0 && static_cast<std::size_t>(shifted) <= sp.num_active();
  if (in_support && sp.num_active() > 0) {
    const double prob = pb_pmf(model, z);
    const auto w = sp.active_weights();
    Vector dlogr;  // d log R / d w over the active set
    if (route == GradientRoute::tabulation) {
      dlogr = shifted == 0 ? Vector(w.size(), 0.0) : r_log_gradient(shifted, w);
    } else {
      const Vector pi = active_pi ? *active_pi
                                  : inclusion_first(static_cast<std::size_t>(shifted), w).first_order;
      dlogr.resize(w.size());
      for (std::size_t a = 0; a < w.size(); ++a) dlogr[a] = pi[a] / w[a];
    }
    for (std::size_t a = 0; a < w.size(); ++a) {
      const double one_plus = 1.0 + w[a];
      g[sp.active()[a]] = prob * (one_plus * one_plus * dlogr[a] - one_plus);
    }
  }
  // P is affine in each p_i, so dP/dp_i = P_{-i}(z-1) - P_{-i}(z) exactly.
  for (std::size_t i = 0; i < n; ++i) {
    if (sp.is_active(i)) continue;
    g[i] = pb_pmf_without(sp, i, z - 1) - pb_pmf_without(sp, i, z);
  }
  return g;
}

}  // namespace detail

/// dP(sum = z)/dp. Active coordinates use the chosen route; degenerate
/// coordinates use the boundary formula (R(z-1, S\{i}) - R(z, S\{i})) prod(1 - p_j).
inline Vector pb_grad(const PBModel& model, long z,
                      GradientRoute route = GradientRoute::tabulation) {
  return detail::pb_grad_impl(model, z, route, nullptr);
}

//---------------------------------------------------------------------------//
// Conditional Bernoulli
//---------------------------------------------------------------------------//

/// Distribution of d given ||d||_0 = z. Degenerate trials are fixed and the
/// problem is reduced to the active set S' with budget z' = z - |I|.
class CBModel {
 public:
  CBModel(SuccessProbabilities probs, std::size_t budget)
      : probs_(std::move(probs)), budget_(budget) {
    const long shifted = static_cast<long>(budget) - static_cast<long>(probs_.ones().size());
    if (shifted < 0 || static_cast<std::size_t>(shifted) > probs_.num_active())
      throw InfeasibleError("budget " + std::to_string(budget) +
                            " is unreachable: " + std::to_string(probs_.ones().size()) +
                            " trials are pinned at 1 and " +
                            std::to_string(probs_.num_active()) + " are free");
    reduced_ = static_cast<std::size_t>(shifted);
    const std::size_t top = std::min(reduced_ + 1, probs_.num_active());
    const auto col = detail::log_r_column(probs_, top);
    const auto at = [&](long k) {
      return (k < 0 || static_cast<std::size_t>(k) > top)
                 ? -std::numeric_limits<double>::infinity()
                 : col[static_cast<std::size_t>(k)];
    };
    log_r_below_ = at(static_cast<long>(reduced_) - 1);
    log_r_ = at(static_cast<long>(reduced_));
    log_r_above_ = at(static_cast<long>(reduced_) + 1);

    active_pi_ = inclusion_first(reduced_, probs_.active_weights()).first_order;
    inclusion_.assign(probs_.size(), 0.0);
    for (std::size_t i = 0; i < probs_.size(); ++i) inclusion_[i] = probs_[i];
    for (std::size_t a = 0; a < active_pi_.size(); ++a)
      inclusion_[probs_.active()[a]] = active_pi_[a];
  }

  const SuccessProbabilities& probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  std::size_t budget() const { return budget_; }
  /// z - |I|
  std::size_t reduced_budget() const { return reduced_; }

  /// First-order inclusion probabilities, indexed by trial (p_i on degenerate trials).
  const Vector& inclusion() const { return inclusion_; }
  /// Inclusion probabilities of the active trials in active order.
  const Vector& active_inclusion() const { return active_pi_; }

  /// log R(z', S'), log R(z'-1, S'), log R(z'+1, S').
  double log_normalizer() const { return log_r_; }
  double log_r_below() const { return log_r_below_; }
  double log_r_above() const { return log_r_above_; }

  /// log prod_{active j} w_j^{d_j} and the active popcount.
  std::pair<double, std::size_t> active_log_weight(const Design& d) const {
    double lw = 0.0;
    std::size_t count = 0;
    const auto w = probs_.active_weights();
    for (std::size_t a = 0; a < w.size(); ++a)
      if (d[probs_.active()[a]]) {
        lw += std::log(w[a]);
        ++count;
      }
    return {lw, count};
  }

  /// Whether d agrees with every degenerate trial other than `skip`.
  bool matches_degenerate(const Design& d, std::size_t skip = static_cast<std::size_t>(-1)) const {
    for (std::size_t i : probs_.zeros())
      if (i != skip && d[i] != 0) return false;
    for (std::size_t i : probs_.ones())
      if (i != skip && d[i] != 1) return false;
    return true;
  }

 private:
  SuccessProbabilities probs_;
  std::size_t budget_ = 0;
  std::size_t reduced_ = 0;
  double log_r_ = 0.0;
  double log_r_below_ = 0.0;
  double log_r_above_ = 0.0;
  Vector active_pi_;
  Vector inclusion_;
};

/// P(d | ||d||_0 = z).
inline double cb_pmf(const CBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  if (!model.matches_degenerate(d)) return 0.0;
  const auto [lw, count] = model.active_log_weight(d);
  if (count != model.reduced_budget()) return 0.0;
  return std::exp(lw - model.log_normalizer());
}

namespace detail {

inline double score_factor(double w) { return (1.0 + w) * (1.0 + w) / w; }

// dP/dp_i at a degenerate trial i, from the boundary case table.
inline double cb_degenerate_partial(const CBModel& model, const Design& d, std::size_t i) {
  const auto& sp = model.probs();
  if (!model.matches_degenerate(d, i)) return 0.0;
  const auto [lw, count] = model.active_log_weight(d);
  const auto m = static_cast<long>(count);
  const auto zr = static_cast<long>(model.reduced_budget());
  if (sp.state(i) == SuccessProbabilities::State::zero) {
    // z* = z - |I| = zr
    if (d[i] == 0) {
      if (m != zr) return 0.0;
      return -safe_exp(lw + model.log_r_below() - 2.0 * model.log_normalizer());
    }
    if (m != zr - 1) return 0.0;
    return safe_exp(lw - model.log_normalizer());
  }
  // p_i = 1: z* = zr + 1 once i is released from I.
  if (d[i] == 1) {
    if (m != zr) return 0.0;
    return safe_exp(lw + model.log_r_above() - 2.0 * model.log_normalizer());
  }
  if (m != zr + 1) return 0.0;
  return -safe_exp(lw - model.log_normalizer());
}

}  // namespace detail

/// dP(d | z)/dp over [0, 1]^N.
inline Vector cb_grad(const CBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  const auto& sp = model.probs();
  Vector g(model.size(), 0.0);
  const double prob = cb_pmf(model, d);
  const auto w = sp.active_weights();
  for (std::size_t a = 0; a < w.size(); ++a) {
    const std::size_t i = sp.active()[a];
    g[i] = prob * detail::score_factor(w[a]) * (d[i] - model.active_inclusion()[a]);
  }
  for (std::size_t i : sp.zeros()) g[i] = detail::cb_degenerate_partial(model, d, i);
  for (std::size_t i : sp.ones()) g[i] = detail::cb_degenerate_partial(model, d, i);
  return g;
}

/// d log P(d | z)/dp. Requires P(d | z) > 0.
inline Vector cb_log_grad(const CBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  if (cb_pmf(model, d) <= 0.0)
    throw DomainError("log-gradient requested at a design with zero probability");
  const auto& sp = model.probs();
  Vector g(model.size(), 0.0);
  const auto w = sp.active_weights();
  for (std::size_t a = 0; a < w.size(); ++a) {
    const std::size_t i = sp.active()[a];
    g[i] = detail::score_factor(w[a]) * (d[i] - model.active_inclusion()[a]);
  }
  // Boundary partials divided by P = W / R(z*, S').
  const double below = detail::safe_exp(model.log_r_below() - model.log_normalizer());
  const double above = detail::safe_exp(model.log_r_above() - model.log_normalizer());
  for (std::size_t i : sp.zeros()) g[i] = -below;
  for (std::size_t i : sp.ones()) g[i] = above;
  return g;
}

enum class HessianOf { log_pmf, pmf };

/// Second derivative d^2 / dp_i dp_j of log P(d | z) or P(d | z). All
/// probabilities must be non-degenerate.
inline double cb_hessian_entry(const CBModel& model, const Design& d, std::size_t i,
                               std::size_t j, HessianOf of = HessianOf::log_pmf) {
  detail::check_design(d, model.size());
  const auto& sp = model.probs();
  if (sp.num_active() != sp.size())
    throw DomainError("Hessian entries need non-degenerate probabilities");
  if (i >= model.size() || j >= model.size()) throw IndexError("Hessian index out of range");
  const auto w = sp.active_weights();
  const Vector& pi = model.active_inclusion();
  const double gi = (1.0 + w[i]) * (1.0 + w[i]);
  const double gj = (1.0 + w[j]) * (1.0 + w[j]);
  double log_h;
  if (i == j) {
    log_h = gi * gj / (w[i] * w[j]) *
            ((w[i] * w[i] - 1.0) / gi * (d[i] - pi[i]) + (pi[i] * pi[i] - pi[i]));
  } else {
    const double pij = inclusion_second(model.reduced_budget(), w, i, j);
    log_h = gi * gj / (w[i] * w[j]) * (pi[i] * pi[j] - pij);
  }
  if (of == HessianOf::log_pmf) return log_h;
  const double prob = cb_pmf(model, d);
  return prob * (log_h + detail::score_factor(w[i]) * detail::score_factor(w[j]) *
                             (d[i] - pi[i]) * (d[j] - pi[j]));
}

struct CBMoments {
  Vector mean;
  Matrix covariance;
  double score_variance = 0.0;
};

/// Sum over active trials of ((1 + w_i)^4 / w_i^2)(pi_i - pi_i^2).
inline double cb_score_variance(const CBModel& model) {
  const auto w = model.probs().active_weights();
  const Vector& pi = model.active_inclusion();
  double total = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    const double f = detail::score_factor(w[a]);
    total += f * f * (pi[a] - pi[a] * pi[a]);
  }
  return total;
}

inline CBMoments cb_moments(const CBModel& model) {
  const auto& sp = model.probs();
  const std::size_t n = model.size();
  CBMoments out;
  out.mean = model.inclusion();
  out.covariance = Matrix(n, n);
  const auto w = sp.active_weights();
  const Vector& pi = model.active_inclusion();
  for (std::size_t a = 0; a < w.size(); ++a) {
    const std::size_t i = sp.active()[a];
    out.covariance(i, i) = pi[a] - pi[a] * pi[a];
    for (std::size_t b = a + 1; b < w.size(); ++b) {
      const std::size_t j = sp.active()[b];
      const double pij = inclusion_second(model.reduced_budget(), w, a, b);
      out.covariance(i, j) = out.covariance(j, i) = pij - pi[a] * pi[b];
    }
  }
  out.score_variance = cb_score_variance(model);
  return out;
}

//---------------------------------------------------------------------------//
// Generalized conditional Bernoulli
//---------------------------------------------------------------------------//

/// Distribution of d given ||d||_0 in Z: a PB-weighted mixture of CB models.
class GCBModel {
 public:
  struct Component {
    std::size_t budget = 0;
    double mass = 0.0;               // P(sum = z)
    Vector mass_gradient;            // dP(sum = z)/dp
    std::optional<CBModel> cb;       // present when mass > 0
  };

  GCBModel(SuccessProbabilities probs, std::vector<std::size_t> budgets)
      : pb_(std::move(probs)) {
    std::sort(budgets.begin(), budgets.end());
    budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
    if (budgets.empty()) throw InfeasibleError("budget set is empty");
    const auto& sp = pb_.probs();
    for (std::size_t z : budgets) {
      if (z > sp.size())
        throw InfeasibleError("budget " + std::to_string(z) + " exceeds dimension " +
                              std::to_string(sp.size()));
      Component c;
      c.budget = z;
      c.mass = pb_pmf(pb_, static_cast<long>(z));
      if (c.mass > 0.0) {
        c.cb.emplace(sp, z);
        const Vector& api = c.cb->active_inclusion();
        c.mass_gradient = detail::pb_grad_impl(pb_, static_cast<long>(z),
                                               GradientRoute::inclusion, &api);
      } else {
        c.mass_gradient = pb_grad(pb_, static_cast<long>(z));
      }
      total_mass_ += c.mass;
      for (std::size_t i = 0; i < c.mass_gradient.size(); ++i) {
        if (total_mass_gradient_.empty()) total_mass_gradient_.assign(sp.size(), 0.0);
        total_mass_gradient_[i] += c.mass_gradient[i];
      }
      by_budget_[z] = components_.size();
      components_.push_back(std::move(c));
    }
    if (total_mass_gradient_.empty()) total_mass_gradient_.assign(sp.size(), 0.0);
    if (!(total_mass_ > 0.0))
      throw InfeasibleError("every admissible budget has zero Poisson-binomial probability");
  }

  const SuccessProbabilities& probs() const { return pb_.probs(); }
  const PBModel& pb() const { return pb_; }
  std::size_t size() const { return pb_.size(); }
  const std::vector<Component>& components() const { return components_; }
  double total_mass() const { return total_mass_; }
  const Vector& total_mass_gradient() const { return total_mass_gradient_; }

  const Component* component(std::size_t z) const {
    auto it = by_budget_.find(z);
    return it == by_budget_.end() ? nullptr : &components_[it->second];
  }

 private:
  PBModel pb_;
  std::vector<Component> components_;
  std::map<std::size_t, std::size_t> by_budget_;
  double total_mass_ = 0.0;
  Vector total_mass_gradient_;
};

/// P(d | ||d||_0 in Z) = sum_z P(d|z) P(z) / sum_z P(z).
inline double gcb_pmf(const GCBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  double num = 0.0;
  for (const auto& c : model.components())
    if (c.cb) num += cb_pmf(*c.cb, d) * c.mass;
  return num / model.total_mass();
}

/// d log P(d | Z)/dp via the quotient-rule expansion of the mixture.
inline Vector gcb_log_grad(const GCBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  const std::size_t n = model.size();
  Vector num(n, 0.0);
  double den = 0.0;
  for (const auto& c : model.components()) {
    if (!c.cb) continue;
    const double cond = cb_pmf(*c.cb, d);
    if (cond > 0.0) {
      for (std::size_t i = 0; i < n; ++i) num[i] += cond * c.mass_gradient[i];
      den += cond * c.mass;
    }
    const Vector dcond = cb_grad(*c.cb, d);
    for (std::size_t i = 0; i < n; ++i) num[i] += c.mass * dcond[i];
  }
  if (!(den > 0.0))
    throw DomainError("log-gradient requested at a design with zero probability");
  Vector g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = num[i] / den - model.total_mass_gradient()[i] / model.total_mass();
  return g;
}

/// dP(d | Z)/dp; defined even where P(d | Z) = 0.
inline Vector gcb_grad(const GCBModel& model, const Design& d) {
  detail::check_design(d, model.size());
  const std::size_t n = model.size();
  Vector num(n, 0.0);
  for (const auto& c : model.components()) {
    if (!c.cb) continue;
    const double cond = cb_pmf(*c.cb, d);
    const Vector dcond = cb_grad(*c.cb, d);
    for (std::size_t i = 0; i < n; ++i) num[i] += cond * c.mass_gradient[i] + c.mass * dcond[i];
  }
  const double prob = gcb_pmf(model, d);
  Vector g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = (num[i] - prob * model.total_mass_gradient()[i]) / model.total_mass();
  return g;
}

/// E||score||^2 over active trials: sum ((1 + w_i)^4 / w_i^2)(pi_i - pi_i^2)
/// with pi the P(z)-weighted mixture of the per-budget inclusion
/// probabilities. Averaging per-budget variances instead would drop the
/// spread of pi across budgets.
inline double gcb_score_variance(const GCBModel& model) {
  const auto w = model.probs().active_weights();
  Vector pi(w.size(), 0.0);
  for (const auto& c : model.components()) {
    if (!c.cb) continue;
    const Vector& api = c.cb->active_inclusion();
    for (std::size_t a = 0; a < w.size(); ++a) pi[a] += api[a] * c.mass / model.total_mass();
  }
  double total = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    const double f = detail::score_factor(w[a]);
    total += f * f * (pi[a] - pi[a] * pi[a]);
  }
  return total;
}

namespace detail {

inline constexpr std::size_t kExhaustiveCap = 24;

// E[f | sum = z] and E[f^2 | sum = z] by enumeration.
inline std::pair<double, double> cb_conditional_moments(const CBModel& cb,
                                                        const std::function<double(const Design&)>& f) {
  const std::size_t n = cb.size();
  double m1 = 0.0, m2 = 0.0;
  Design d(n, 0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != cb.budget()) continue;
    for (std::size_t i = 0; i < n; ++i) d[i] = (mask >> i) & 1U;
    const double prob = cb_pmf(cb, d);
    if (prob == 0.0) continue;
    const double v = f(d);
    m1 += prob * v;
    m2 += prob * v * v;
  }
  return {m1, m2};
}

}  // namespace detail

/// E[f(d) | ||d||_0 in Z] by exhaustive enumeration (testing aid, N <= 24).
inline double gcb_expectation(const GCBModel& model, const std::function<double(const Design&)>& f) {
  if (model.size() > detail::kExhaustiveCap)
    throw EnumerationCapError("exhaustive GCB expectation is limited to N <= 24");
  double acc = 0.0;
  for (const auto& c : model.components())
    if (c.cb) acc += detail::cb_conditional_moments(*c.cb, f).first * c.mass;
  return acc / model.total_mass();
}

/// Var[f(d) | ||d||_0 in Z] from the per-budget conditional moments.
inline double gcb_variance(const GCBModel& model, const std::function<double(const Design&)>& f) {
  if (model.size() > detail::kExhaustiveCap)
    throw EnumerationCapError("exhaustive GCB variance is limited to N <= 24");
  const double total = model.total_mass();
  double second = 0.0;
  double first = 0.0;
  for (const auto& c : model.components()) {
    if (!c.cb) continue;
    const auto [m1, m2] = detail::cb_conditional_moments(*c.cb, f);
    second += m2 * c.mass;
    first += m1 * c.mass;
  }
  // The double sum over (z_i, z_j) factorizes into the square of the single sum.
  return second / total - (first * first) / (total * total);
}

}  // namespace pbo
