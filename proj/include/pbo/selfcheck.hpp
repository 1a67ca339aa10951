#pragma once

// Randomized self-check suite: normalization against enumeration and
// closed-form derivatives against finite differences.

#include <pbo/combinatorics.hpp>
#include <pbo/distributions.hpp>
#include <pbo/oracle.hpp>
#include <pbo/sampling.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace pbo {

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest error seen
};

namespace detail {

inline Vector random_probs(RandomStream& rng, std::size_t n, double lo = 0.05, double hi = 0.95) {
  Vector p(n);
  for (double& v : p) v = lo + (hi - lo) * rng.uniform();
  return p;
}

inline Vector to_weights(const Vector& p) {
  Vector w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) w[i] = p[i] / (1.0 - p[i]);
  return w;
}

inline void record(CheckResult& r, double err, double tol) {
  ++r.instances;
  r.worst = std::max(r.worst, err);
  if (!(err <= tol)) ++r.failures;
}

}  // namespace detail

inline std::vector<CheckResult> run_selfcheck(std::size_t instances = 50, std::uint64_t seed = 2024) {
  RandomStream rng(seed);
  std::vector<CheckResult> out;
  const double fd_tol = 1e-5;
  const double h = 1e-6;
  FiniteDifferenceOptions box;
  box.lower = 0.0;
  box.upper = 1.0;

  CheckResult norm{"normalization (PB, CB, GCB)"};
  CheckResult rgrad{"R gradient"};
  CheckResult rdual{"R gradient, inclusion route agreement"};
  CheckResult pbg{"PB gradient"};
  CheckResult cbg{"CB log-gradient"};
  CheckResult gcbg{"GCB log-gradient"};
  CheckResult incl{"inclusion probability Jacobian"};
  CheckResult hess{"CB log-Hessian"};

  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform() * 6);  // 3..8
    const std::size_t z = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1));
    const Vector p = detail::random_probs(rng, n);
    const Vector w = detail::to_weights(p);

    {
      const PBModel pb{SuccessProbabilities(p)};
      double total_pb = 0.0;
      for (double v : pb_pmf_all(pb)) total_pb += v;
      const CBModel cb(SuccessProbabilities(p), z);
      const GCBModel gcb(SuccessProbabilities(p), {z - 1, z});
      double total_cb = 0.0, total_gcb = 0.0;
      enumerate(ConstraintSpec::unconstrained(), n).for_each([&](const Design& d, std::uint64_t) {
        total_cb += cb_pmf(cb, d);
        total_gcb += gcb_pmf(gcb, d);
      });
      detail::record(norm, std::max({std::abs(total_pb - 1.0), std::abs(total_cb - 1.0),
                                     std::abs(total_gcb - 1.0)}),
                     1e-10);
    }

    {
      const auto k = static_cast<long>(z);
      const auto rep = finite_difference_check([&](const Vector& x) { return r_value(k, x); },
                                               r_gradient(k, w), w, h, fd_tol);
      const Vector a = r_gradient(k, w), b = r_gradient_via_inclusion(k, w);
      double dual = 0.0;
      for (std::size_t i = 0; i < n; ++i) dual = std::max(dual, std::abs(a[i] - b[i]) / std::abs(a[i]));
      detail::record(rgrad, rep.max_error, fd_tol);
      detail::record(rdual, dual, 1e-10);
    }

    {
      const PBModel pb{SuccessProbabilities(p)};
      const auto rep = finite_difference_check(
          [&](const Vector& x) { return pb_pmf(PBModel(SuccessProbabilities(x)), static_cast<long>(z)); },
          pb_grad(pb, static_cast<long>(z)), p, h, fd_tol, box);
      detail::record(pbg, rep.max_error, fd_tol);
    }

    {
      const CBModel cb(SuccessProbabilities(p), z);
      const SampleBatch one = cb_sample(cb, 1, rng);
      const Design& d = one.designs.front();
      const auto rep = finite_difference_check(
          [&](const Vector& x) { return std::log(cb_pmf(CBModel(SuccessProbabilities(x), z), d)); },
          cb_log_grad(cb, d), p, h, fd_tol, box);
      detail::record(cbg, rep.max_error, fd_tol);

      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double a = cb_hessian_entry(cb, d, i, j);
          const double f = finite_difference_second(
              [&](const Vector& x) { return std::log(cb_pmf(CBModel(SuccessProbabilities(x), z), d)); },
              p, i, j, 1e-4);
          worst = std::max(worst, std::abs(a - f) / std::max(1.0, std::abs(a)));
        }
      detail::record(hess, worst, 1e-4);
    }

    {
      const std::vector<std::size_t> budgets{z - 1, z};
      const GCBModel gcb(SuccessProbabilities(p), budgets);
      const SampleBatch one = gcb_sample(gcb, 1, rng);
      const Design& d = one.designs.front();
      const auto rep = finite_difference_check(
          [&](const Vector& x) { return std::log(gcb_pmf(GCBModel(SuccessProbabilities(x), budgets), d)); },
          gcb_log_grad(gcb, d), p, h, fd_tol, box);
      detail::record(gcbg, rep.max_error, fd_tol);
    }

    {
      const Matrix jac = inclusion_first_jacobian(z, w, Variable::probabilities);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Vector row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = jac(i, j);
        const auto rep = finite_difference_check(
            [&](const Vector& x) { return inclusion_first(z, detail::to_weights(x)).first_order[i]; }, row, p,
            h, fd_tol, box);
        worst = std::max(worst, rep.max_error);
      }
      detail::record(incl, worst, fd_tol);
    }
  }
  out = {norm, rgrad, rdual, pbg, cbg, gcbg, incl, hess};
  return out;
}

}  // namespace pbo
