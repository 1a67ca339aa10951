#pragma once

#include <pbo/types.hpp>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace pbo {

/// Budget constraint on ||d||_0: a single value z, a set Z, or no constraint
/// (Z = {0..N}).
class ConstraintSpec {
 public:
  enum class Kind { equality, inclusion, unconstrained };

  static ConstraintSpec equality(std::size_t z) {
    ConstraintSpec c;
    c.kind_ = Kind::equality;
    c.budgets_ = {z};
    return c;
  }

  static ConstraintSpec inclusion(std::vector<std::size_t> budgets) {
    std::sort(budgets.begin(), budgets.end());
    budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
    if (budgets.empty()) throw InfeasibleError("inclusion constraint has an empty budget set");
    ConstraintSpec c;
    c.kind_ = Kind::inclusion;
    c.budgets_ = std::move(budgets);
    return c;
  }

  static ConstraintSpec unconstrained() {
    ConstraintSpec c;
    c.kind_ = Kind::unconstrained;
    return c;
  }

  Kind kind() const { return kind_; }

  /// Sorted admissible sums for dimension n.
  std::vector<std::size_t> budgets(std::size_t n) const {
    if (kind_ != Kind::unconstrained) return budgets_;
    std::vector<std::size_t> all(n + 1);
    for (std::size_t z = 0; z <= n; ++z) all[z] = z;
    return all;
  }

  /// Equality budget; only meaningful for Kind::equality.
  std::size_t z() const { return budgets_.front(); }

  bool admits(std::size_t count) const {
    return kind_ == Kind::unconstrained ||
           std::binary_search(budgets_.begin(), budgets_.end(), count);
  }

  void validate(std::size_t n) const {
    for (std::size_t z : budgets_)
      if (z > n)
        throw InfeasibleError("budget " + std::to_string(z) + " exceeds dimension " +
                              std::to_string(n));
  }

  /// Number of feasible designs, sum of C(N, z) over admissible z.
  std::uint64_t feasible_count(std::size_t n) const {
    std::uint64_t total = 0;
    for (std::size_t z : budgets(n)) total += binomial(n, z);
    return total;
  }

  double feasible_count_real(std::size_t n) const {
    double total = 0.0;
    for (std::size_t z : budgets(n)) total += binomial_real(static_cast<double>(n), static_cast<double>(z));
    return total;
  }

 private:
  Kind kind_ = Kind::unconstrained;
  std::vector<std::size_t> budgets_;
};

}  // namespace pbo
