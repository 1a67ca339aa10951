#include <pbo/bridge.hpp>
#include <pbo/fim_pinv.hpp>
#include <pbo/objectives.hpp>

#include <support/random.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace pbo;
using testing_support::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = normal(rng.engine());
  return m;
}

BridgeConfig echo(const std::string& mode, std::size_t n, std::size_t workers = 1) {
  return BridgeConfig{{PBO_ECHO_BRIDGE, mode}, n, workers};
}

}  // namespace

TEST(Bilinear, Examples) {
  EXPECT_EQ(bilinear_eval(Design(20, 0)), 0.0);
  Design even(20, 0);
  for (std::size_t k = 1; k < 20; k += 2) even[k] = 1;  // 1-based positions 2, 4, ...
  EXPECT_EQ(bilinear_eval(even), 10.0);
  EXPECT_EQ(bilinear_eval(Design(6, 1)), 0.0);
  EXPECT_EQ(bilinear_eval(Design{1, 0, 0}), -1.0);
  EXPECT_EQ(bilinear_eval(Design{0, 1, 0}), 1.0);
}

TEST(Bilinear, ObjectiveChecksDimension) {
  const Objective f = bilinear_objective(4);
  EXPECT_EQ(f.dimension(), 4u);
  EXPECT_EQ(f(Design{0, 1, 0, 1}), 2.0);
  EXPECT_THROW(f(Design{0, 1}), DomainError);
}

TEST(TraceFIM, AllOnesIsFrobeniusNorm) {
  Rng rng(1);
  const Matrix f = random_matrix(rng, 12, 5);
  double frob = 0.0;
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < 5; ++c) frob += f(r, c) * f(r, c);
  const auto problem = TraceFIMProblem::with_row_blocks(f, 1.0, 3);
  EXPECT_NEAR(trace_fim_eval(problem, Design(4, 1)), frob, 1e-12 * frob);
  EXPECT_NEAR(trace_fim_eval_pinv(problem, Design(4, 1)), frob, 1e-10 * frob);
}

TEST(TraceFIM, EmptyDesignIsZero) {
  Rng rng(2);
  const auto problem = TraceFIMProblem::with_row_blocks(random_matrix(rng, 8, 3), 0.7, 2);
  EXPECT_EQ(trace_fim_eval(problem, Design(4, 0)), 0.0);
  EXPECT_EQ(trace_fim_eval_pinv(problem, Design(4, 0)), 0.0);
}

TEST(TraceFIM, SingleSensorMatchesPseudoInverse) {
  Rng rng(3);
  const double sigma = 0.3;
  const Matrix f = random_matrix(rng, 15, 4);
  const auto problem = TraceFIMProblem::with_row_blocks(f, sigma, 3);
  for (std::size_t s = 0; s < 5; ++s) {
    Design d(5, 0);
    d[s] = 1;
    double energy = 0.0;
    for (std::size_t r = 3 * s; r < 3 * s + 3; ++r)
      for (std::size_t c = 0; c < 4; ++c) energy += f(r, c) * f(r, c);
    const double expected = energy / (sigma * sigma);
    EXPECT_NEAR(trace_fim_eval(problem, d), expected, 1e-12 * expected);
    EXPECT_NEAR(trace_fim_eval_pinv(problem, d), expected, 1e-10 * expected);
  }
}

TEST(TraceFIM, PathsAgreeOnRandomProblems) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const std::size_t sensors = rng.index(2, 8), times = rng.index(1, 4), params = rng.index(1, 6);
    const auto problem =
        TraceFIMProblem::with_row_blocks(random_matrix(rng, sensors * times, params), rng.uniform(0.1, 2.0), times);
    for (int k = 0; k < 10; ++k) {
      const Design d = rng.design(sensors);
      const double a = trace_fim_eval(problem, d);
      const double b = trace_fim_eval_pinv(problem, d);
      EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(TraceFIM, MonotoneUnderAddingSensor) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto problem = TraceFIMProblem::with_row_blocks(random_matrix(rng, 24, 3), 1.0, 3);
    Design d = rng.design(8);
    const double before = trace_fim_eval(problem, d);
    for (std::size_t i = 0; i < 8; ++i) {
      if (d[i]) continue;
      Design e = d;
      e[i] = 1;
      EXPECT_GE(trace_fim_eval(problem, e), before);
    }
  }
}

TEST(TraceFIM, ArbitrarySensorRowMap) {
  Rng rng(6);
  const Matrix f = random_matrix(rng, 6, 2);
  const TraceFIMProblem problem(f, 1.0, {{0, 5}, {1, 2, 3}, {4}});
  const Design d{1, 0, 1};
  const double expected = problem.row_energy()[0] + problem.row_energy()[5] + problem.row_energy()[4];
  EXPECT_NEAR(trace_fim_eval(problem, d), expected, 1e-14);
  EXPECT_NEAR(trace_fim_eval_pinv(problem, d), expected, 1e-10 * expected);
}

TEST(TraceFIM, Errors) {
  Rng rng(7);
  const Matrix f = random_matrix(rng, 6, 2);
  EXPECT_THROW(TraceFIMProblem(f, 1.0, {{0, 1}, {1, 2, 3, 4, 5}}), DomainError);
  EXPECT_THROW(TraceFIMProblem(f, 1.0, {{0, 1}, {2, 3}}), DomainError);
  EXPECT_THROW(TraceFIMProblem(f, 0.0, {{0, 1, 2, 3, 4, 5}}), DomainError);
  EXPECT_THROW(TraceFIMProblem::with_row_blocks(f, 1.0, 4), DomainError);
  const auto problem = TraceFIMProblem::with_row_blocks(f, 1.0, 2);
  EXPECT_THROW(trace_fim_eval(problem, Design(4, 1)), DomainError);
}

TEST(TraceFIM, SyntheticGeneratorIsSeeded) {
  const auto a = synthetic_trace_fim(20, 5, 8, 1.0, 0.8, 11);
  const auto b = synthetic_trace_fim(20, 5, 8, 1.0, 0.8, 11);
  const auto c = synthetic_trace_fim(20, 5, 8, 1.0, 0.8, 12);
  EXPECT_EQ(a.sensors(), 20u);
  EXPECT_EQ(a.forward().rows(), 100u);
  EXPECT_EQ(a.row_energy(), b.row_energy());
  EXPECT_NE(a.row_energy(), c.row_energy());
}

TEST(TraceFIM, LoadMatrixText) {
  const auto path = std::filesystem::temp_directory_path() / "pbo_matrix_test.txt";
  {
    std::ofstream out(path);
    out << "# header\n1 2\n\n3 4.5\n";
  }
  const Matrix m = load_matrix_text(path.string());
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m(1, 1), 4.5);
  {
    std::ofstream out(path);
    out << "1 2\n3\n";
  }
  EXPECT_THROW(load_matrix_text(path.string()), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_matrix_text(path.string()), ConfigError);
}

TEST(Bridge, PopcountEcho) {
  const Objective f = external_objective(echo("popcount", 7));
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const Design d = rng.design(7);
    EXPECT_EQ(f(d), static_cast<double>(popcount(d)));
  }
}

TEST(Bridge, BilinearRoundTripIsBitIdentical) {
  const Objective f = external_objective(echo("bilinear", 20));
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Design d = rng.design(20);
    EXPECT_EQ(f(d), bilinear_eval(d));
  }
}

TEST(Bridge, WorkerPoolServesConcurrentRequests) {
  const Objective f = external_objective(echo("bilinear", 12, 4));
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      Rng rng(100 + t);
      for (int k = 0; k < 50; ++k) {
        const Design d = rng.design(12);
        if (f(d) != bilinear_eval(d)) ++mismatches;
      }
    });
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Bridge, MalformedResponseReportsLine) {
  const Objective f = external_objective(echo("malformed", 3));
  try {
    f(Design{1, 0, 1});
    FAIL() << "expected a protocol error";
  } catch (const BridgeProtocolError& e) {
    EXPECT_EQ(e.offending_line, "VALUE? 101");
    EXPECT_NE(std::string(e.what()).find("VALUE? 101"), std::string::npos);
  }
}

TEST(Bridge, DistinctErrorKinds) {
  const Objective gone = external_objective(echo("exit", 3));
  EXPECT_THROW(gone(Design{1, 1, 0}), BridgeExitError);
  const Objective nan = external_objective(echo("nan", 3));
  EXPECT_THROW(nan(Design{1, 1, 0}), BridgeValueError);
  EXPECT_THROW(external_objective(echo("silent", 3)), BridgeProtocolError);
  EXPECT_THROW(external_objective(BridgeConfig{{"/nonexistent/pbo-bridge"}, 3, 1}), BridgeError);
  EXPECT_THROW(external_objective(BridgeConfig{{}, 3, 1}), ConfigError);
  // every bridge failure is an objective failure
  EXPECT_THROW(nan(Design{0, 0, 1}), ObjectiveError);
}

TEST(Bridge, DimensionMismatch) {
  const Objective f = external_objective(echo("popcount", 3));
  EXPECT_THROW(f(Design{1, 0}), DomainError);
}
