#pragma once

// Dense pseudo-inverse evaluation of the trace-of-FIM criterion (needs Eigen).

#include <pbo/objectives.hpp>

#include <Eigen/Dense>

namespace pbo {

/// Trace(F^T (diag(m) sigma^2 I diag(m))^+ F) with a dense pseudo-inverse.
inline double trace_fim_eval_pinv(const TraceFIMProblem& problem, const Design& d) {
  const auto m = problem.row_mask(d);
  const Matrix& f = problem.forward();
  const auto rows = static_cast<Eigen::Index>(f.rows());
  const auto cols = static_cast<Eigen::Index>(f.cols());
  Eigen::MatrixXd fe(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) fe(r, c) = f(static_cast<std::size_t>(r), static_cast<std::size_t>(c));

  const double s2 = problem.sigma() * problem.sigma();
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) mask(r, r) = m[static_cast<std::size_t>(r)];
  const Eigen::MatrixXd noise = Eigen::MatrixXd::Identity(rows, rows) * s2;
  const Eigen::MatrixXd weighted = mask.transpose() * noise * mask;

  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(weighted);
  const Eigen::MatrixXd pinv = cod.rank() == 0 ? Eigen::MatrixXd::Zero(rows, rows)
                                               : Eigen::MatrixXd(cod.pseudoInverse());
  return (fe.transpose() * pinv * fe).trace();
}

}  // namespace pbo
