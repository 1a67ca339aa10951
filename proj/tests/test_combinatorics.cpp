#include <pbo/combinatorics.hpp>
#include <pbo/oracle.hpp>

#include <support/random.hpp>
#include <support/reference.hpp>

#include <gtest/gtest.h>

using namespace pbo;
using testing_support::max_rel;
using testing_support::Rng;

TEST(Weights, SymmetryPoint) {
  const Vector p{0.5};
  EXPECT_DOUBLE_EQ(weights_from_probs(p).w.at(0), 1.0);
}

TEST(Weights, ThreeQuarters) {
  const Vector p{0.75};
  EXPECT_DOUBLE_EQ(weights_from_probs(p).w.at(0), 3.0);
}

TEST(Weights, DegenerateEntriesAreFiltered) {
  const Vector p{0.5, 1.0, 0.2};
  const auto bw = weights_from_probs(p);
  ASSERT_EQ(bw.w.size(), 2u);
  EXPECT_DOUBLE_EQ(bw.w[0], 1.0);
  EXPECT_DOUBLE_EQ(bw.w[1], 0.25);
  EXPECT_EQ(bw.index_map, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(bw.ones, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(bw.zeros.empty());
}

TEST(Weights, OutOfRangeProbabilityThrows) {
  const Vector p{0.5, 1.5};
  EXPECT_THROW(weights_from_probs(p), DomainError);
}

TEST(Weights, JacobianDiagonal) {
  EXPECT_DOUBLE_EQ(weight_jacobian(Vector{0.5}).at(0), 4.0);
  EXPECT_DOUBLE_EQ(weight_jacobian(Vector{0.8}).at(0), 25.0);
}

TEST(Weights, JacobianMatchesFiniteDifferences) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const Vector p = rng.probs(5);
    const Vector jac = weight_jacobian(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6;
      const double fd = ((p[i] + h) / (1 - p[i] - h) - (p[i] - h) / (1 - p[i] + h)) / (2 * h);
      EXPECT_NEAR(jac[i], fd, 1e-6 * jac[i]);
    }
  }
}

TEST(RFunction, SmallExamples) {
  EXPECT_DOUBLE_EQ(r_value(2, Vector{1, 2, 3}), 11.0);
  EXPECT_DOUBLE_EQ(r_value(2, Vector{1, 1, 1, 1}), 6.0);
  EXPECT_DOUBLE_EQ(r_value(0, Vector{4, 5}), 1.0);
  EXPECT_DOUBLE_EQ(r_value(3, Vector{1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(r_value(-1, Vector{1, 2}), 0.0);
}

TEST(RFunction, MatchesEnumeration) {
  Rng rng(12);
  for (std::size_t n = 1; n <= 12; ++n) {
    const Vector w = rng.weights(n, 0.1, 10.0);
    for (long k = 0; k <= static_cast<long>(n); ++k)
      EXPECT_NEAR(r_value(k, w), ref::r_enum(k, w), 1e-12 * ref::r_enum(k, w)) << "n=" << n << " k=" << k;
  }
}

TEST(RFunction, PowerSumAgrees) {
  EXPECT_DOUBLE_EQ(r_value_power_sum(2, Vector{1, 2, 3}), 11.0);
  EXPECT_DOUBLE_EQ(r_value_power_sum(1, Vector{1, 2, 3}), 6.0);
  EXPECT_DOUBLE_EQ(r_value_power_sum(3, Vector{1, 1, 1}), 1.0);
  Rng rng(13);
  for (std::size_t n = 1; n <= 10; ++n) {
    const Vector w = rng.weights(n, 0.1, 10.0);
    for (long k = 0; k <= static_cast<long>(n); ++k) {
      const double a = r_value(k, w);
      EXPECT_NEAR(r_value_power_sum(k, w), a, 1e-9 * a);
    }
  }
}

TEST(RFunction, PowerSumOverflowIsReported) {
  const Vector w(40, 1e300);
  EXPECT_THROW(r_value_power_sum(3, w), OverflowError);
}

TEST(RFunction, LogSpaceMatchesPlainForWideWeights) {
  Vector w{1e-6, 3.0, 2e4, 0.5, 7.0};
  ASSERT_TRUE(prefers_log_space(w));
  for (long k = 0; k <= 5; ++k) {
    const double e = ref::r_enum(k, w);
    EXPECT_NEAR(std::exp(log_r_value(k, w)), e, 1e-12 * e);
  }
}

TEST(RFunction, TableRecurrence) {
  const Vector w{1, 2, 3, 4};
  const RTable t(w, 2, false);
  EXPECT_DOUBLE_EQ(t.value(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(t.value(2, 1), 0.0);
  for (std::size_t j = 1; j <= 4; ++j)
    for (std::size_t n = 1; n <= 2; ++n)
      EXPECT_DOUBLE_EQ(t.value(n, j), t.value(n, j - 1) + w[j - 1] * t.value(n - 1, j - 1));
}

TEST(RGradient, FigureExample) {
  const Vector w{1.5, 2.0, 0.3, 4.0};
  const Vector g = r_gradient(2, w);
  EXPECT_DOUBLE_EQ(g[0], w[1] + w[2] + w[3]);
  EXPECT_DOUBLE_EQ(g[1], w[0] + w[2] + w[3]);
  EXPECT_DOUBLE_EQ(g[2], w[0] + w[1] + w[3]);
  EXPECT_DOUBLE_EQ(g[3], w[0] + w[1] + w[2]);
  EXPECT_EQ(r_gradient(2, Vector{1, 1, 1, 1}), (Vector{3, 3, 3, 3}));
}

TEST(RGradient, MatchesFiniteDifferences) {
  Rng rng(14);
  for (int t = 0; t < 50; ++t) {
    const Vector w = rng.weights(6);
    const long k = 3;
    const auto rep = finite_difference_check([&](const Vector& x) { return r_value(k, x); }, r_gradient(k, w), w,
                                             1e-6, 1e-6);
    EXPECT_TRUE(rep.passed) << rep.max_error;
  }
}

TEST(RGradient, ViaInclusion) {
  EXPECT_EQ(r_gradient(2, Vector{1, 2, 3}), (Vector{5, 4, 3}));
  const Vector gi = r_gradient_via_inclusion(2, Vector{1, 2, 3});
  EXPECT_NEAR(gi[0], 5, 1e-12);
  EXPECT_NEAR(gi[1], 4, 1e-12);
  EXPECT_NEAR(gi[2], 3, 1e-12);
  const Vector g1 = r_gradient_via_inclusion(1, Vector{1, 1});
  EXPECT_NEAR(g1[0], 1, 1e-14);
  EXPECT_NEAR(g1[1], 1, 1e-14);
  Rng rng(15);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = rng.index(2, 10);
    const long k = static_cast<long>(rng.index(1, n));
    const Vector w = rng.weights(n);
    EXPECT_LT(max_rel(r_gradient(k, w), r_gradient_via_inclusion(k, w)), 1e-10);
  }
  EXPECT_THROW(r_gradient_via_inclusion(0, Vector{1, 2}), DomainError);
}

TEST(RHessian, MultilinearStructure) {
  Rng rng(16);
  for (int t = 0; t < 20; ++t) {
    const Vector w = rng.weights(6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        const long k = 3;
        const Vector x = w;
        // dR/dw_i differenced in w_j.
        const double h = 1e-5;
        Vector a = x, b = x;
        a[j] += h;
        b[j] -= h;
        const double fd = (r_gradient(k, a)[i] - r_gradient(k, b)[i]) / (2 * h);
        EXPECT_NEAR(r_hessian_entry(k, w, i, j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
  }
  EXPECT_EQ(r_hessian_entry(2, Vector{1, 2, 3}, 1, 1), 0.0);
}

TEST(Inclusion, EqualWeights) {
  const auto pi = inclusion_first(2, Vector{1, 1, 1, 1});
  for (double v : pi.first_order) EXPECT_NEAR(v, 0.5, 1e-15);
  EXPECT_EQ(pi.budget, 2u);
}

TEST(Inclusion, MatchesEnumeration) {
  const Vector w{1, 2, 3};
  EXPECT_LT(max_rel(inclusion_first(2, w).first_order, ref::inclusion(w, 2)), 1e-14);
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = rng.index(2, 10);
    const std::size_t z = rng.index(1, n);
    const Vector w2 = rng.weights(n);
    const Vector pi = inclusion_first(z, w2).first_order;
    EXPECT_LT(max_rel(pi, ref::inclusion(w2, z)), 1e-12);
    double total = 0.0;
    for (double v : pi) {
      total += v;
      EXPECT_GT(v, 0.0);
      if (z < n) EXPECT_LT(v, 1.0);
    }
    EXPECT_NEAR(total, static_cast<double>(z), 1e-10);
  }
}

TEST(Inclusion, SecondOrder) {
  EXPECT_EQ(inclusion_second(1, Vector{1, 2, 3}, 0, 1), 0.0);
  EXPECT_NEAR(inclusion_second(2, Vector{1, 1, 1}, 0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(inclusion_second(2, Vector{1, 1, 1}, 1, 1), IndexError);
  Rng rng(18);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = rng.index(3, 9);
    const std::size_t z = rng.index(2, n - 1);
    const Vector w = rng.weights(n);
    const Vector pi = inclusion_first(z, w).first_order;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double pij = inclusion_second(z, w, i, j);
        EXPECT_NEAR(pij, ref::inclusion_pair(w, z, i, j), 1e-12);
        EXPECT_DOUBLE_EQ(pij, inclusion_second(z, w, j, i));
        EXPECT_GT(pi[i] * pi[j], pij);
      }
  }
}

TEST(Inclusion, LogSpaceRoute) {
  Rng rng(19);
  Vector w = rng.weights(70, 0.2, 3.0);
  ASSERT_TRUE(prefers_log_space(w));
  const Vector pi = inclusion_first(5, w).first_order;
  double total = 0.0;
  for (double v : pi) total += v;
  EXPECT_NEAR(total, 5.0, 1e-10);
}

TEST(InclusionDerivatives, DiagonalAndOffDiagonal) {
  const Vector w{0.7, 1.3, 2.2, 0.4, 1.0};
  const std::size_t z = 2;
  const Matrix jac = inclusion_first_jacobian(z, w);
  const Vector pi = inclusion_first(z, w).first_order;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(jac(i, i), (pi[i] - pi[i] * pi[i]) / w[i], 1e-14);
    for (std::size_t j = 0; j < 5; ++j)
      if (j != i) {
        EXPECT_NEAR(jac(i, j), (inclusion_second(z, w, i, j) - pi[i] * pi[j]) / w[j], 1e-14);
        EXPECT_LT(jac(i, j), 0.0);
      }
  }
}

TEST(InclusionDerivatives, MatchFiniteDifferences) {
  Rng rng(20);
  for (int t = 0; t < 50; ++t) {
    const Vector p = rng.probs(6, 0.1, 0.9);
    const Vector w = testing_support::to_weights(p);
    const std::size_t z = 3;
    for (auto variable : {Variable::weights, Variable::probabilities}) {
      const Vector& x = variable == Variable::weights ? w : p;
      auto to_w = [&](const Vector& v) { return variable == Variable::weights ? v : testing_support::to_weights(v); };
      const Matrix jac = inclusion_first_jacobian(z, w, variable);
      for (std::size_t i = 0; i < 6; ++i) {
        Vector row(6);
        for (std::size_t j = 0; j < 6; ++j) row[j] = jac(i, j);
        const auto rep = finite_difference_check(
            [&](const Vector& v) { return inclusion_first(z, to_w(v)).first_order[i]; }, row, x, 1e-6, 1e-5);
        EXPECT_TRUE(rep.passed) << rep.max_error;
      }
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
          if (i == j) continue;
          const auto d = inclusion_second_derivatives(z, w, i, j, variable);
          auto pair = [&](const Vector& v) { return inclusion_second(z, to_w(v), i, j); };
          const Vector g = ref::numeric_gradient(pair, x);
          const double scale = std::max(std::abs(g[i]), std::abs(g[j]));
          EXPECT_NEAR(d.d_first, g[i], 1e-5 * scale);
          EXPECT_NEAR(d.d_second, g[j], 1e-5 * scale);
          const double mixed = finite_difference_second(pair, x, i, j, 1e-4);
          EXPECT_NEAR(d.d_mixed, mixed, 1e-4 * std::max(1.0, std::abs(mixed)));
        }
    }
  }
}
