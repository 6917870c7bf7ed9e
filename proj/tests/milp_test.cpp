#include <gtest/gtest.h>

#include <random>

#include "lp_oracles.hpp"
#include "polydesc/milp.hpp"

namespace {

using namespace polydesc::milp;

TEST(Lp, SingleLowerBoundRow) {
  LinearModel m;
  auto x = m.add_variable("x", -kInf, kInf, false, 1.0);
  m.add_constraint({{x, 1.0}}, Sense::kGreaterEqual, 2.0);
  auto sol = solve_lp(m);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.values[x], 2.0, 1e-9);
  EXPECT_NEAR(sol.objective, 2.0, 1e-9);
  EXPECT_NEAR(sol.duals[0], 1.0, 1e-9);
}

TEST(Lp, CappedSum) {
  LinearModel m;
  auto x = m.add_variable("x", 0, kInf, false, -1.0);
  auto y = m.add_variable("y", 0, kInf, false, -1.0);
  m.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::kLessEqual, 1.5);
  auto sol = solve_lp(m);
  ASSERT_EQ(sol.status, LpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -1.5, 1e-9);
  EXPECT_NEAR(sol.duals[0], -1.0, 1e-9);
}

TEST(Lp, DetectsInfeasible) {
  LinearModel m;
  auto x = m.add_variable("x", 0, 1, false, 1.0);
  m.add_constraint({{x, 1.0}}, Sense::kGreaterEqual, 2.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::kInfeasible);
}

TEST(Lp, DetectsUnbounded) {
  LinearModel m;
  auto x = m.add_variable("x", 0, kInf, false, -1.0);
  auto y = m.add_variable("y", 0, kInf, false, 0.0);
  m.add_constraint({{x, 1.0}, {y, -1.0}}, Sense::kLessEqual, 1.0);
  EXPECT_EQ(solve_lp(m).status, LpStatus::kUnbounded);
}

TEST(Lp, RejectsBadInput) {
  LinearModel m;
  EXPECT_THROW(m.add_variable("x", 1, 0, false), std::invalid_argument);
  EXPECT_THROW(m.add_variable("z", 0, kInf, true), std::invalid_argument);
  auto x = m.add_variable("x", 0, 1, false);
  EXPECT_THROW(m.add_constraint({{x + 5, 1.0}}, Sense::kEqual, 0.0), std::out_of_range);
  EXPECT_THROW(m.add_constraint({{x, 1.0}}, Sense::kEqual, kInf), std::invalid_argument);
}

TEST(Lp, RandomMatchesVertexEnumeration) {
  std::mt19937_64 rng(7);
  int solved = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const std::size_t m = 2 + (trial / 3) % 4;
    LinearModel model = oracle::random_lp(rng, n, m);
    const double ref = oracle::lp_by_vertices(model);
    auto sol = solve_lp(model);
    ASSERT_EQ(sol.status, LpStatus::kOptimal) << "trial " << trial;
    ASSERT_NEAR(sol.objective, ref, 1e-6) << "trial " << trial;
    EXPECT_LE(model.max_violation(sol.values), 1e-7);
    EXPECT_NEAR(oracle::dual_objective(model, sol), sol.objective, 1e-6) << "trial " << trial;
    for (std::size_t i = 0; i < m; ++i) {
      const auto sense = model.constraints()[i].sense;
      if (sense == Sense::kGreaterEqual) {
        EXPECT_GE(sol.duals[i], -1e-9);
      } else if (sense == Sense::kLessEqual) {
        EXPECT_LE(sol.duals[i], 1e-9);
      }
    }
    ++solved;
  }
  EXPECT_EQ(solved, 150);
}

TEST(Milp, RoundsDownCappedSum) {
  LinearModel m;
  auto x = m.add_variable("x1", 0, 1, true, -1.0);
  auto y = m.add_variable("x2", 0, 1, true, -1.0);
  m.add_constraint({{x, 1.0}, {y, 1.0}}, Sense::kLessEqual, 1.5);
  auto sol = solve_milp(m);
  ASSERT_EQ(sol.status, MilpStatus::kOptimal);
  EXPECT_NEAR(sol.objective, -1.0, 1e-9);
}

TEST(Milp, InfeasibleIntegerRange) {
  LinearModel m;
  auto x = m.add_variable("x", 0, 3, true, 1.0);
  m.add_constraint({{x, 2.0}}, Sense::kEqual, 3.0);
  EXPECT_EQ(solve_milp(m).status, MilpStatus::kInfeasible);
}

TEST(Milp, RandomBinaryMatchesEnumeration) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coeff(-6, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 3 + trial % 13;
    LinearModel m;
    for (std::size_t j = 0; j < n; ++j) m.add_variable("b" + std::to_string(j), 0, 1, true, coeff(rng));
    const std::size_t rows = 1 + trial % 4;
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<Term> terms;
      for (std::size_t j = 0; j < n; ++j) terms.push_back({j, static_cast<double>(coeff(rng))});
      m.add_constraint(terms, i % 2 ? Sense::kGreaterEqual : Sense::kLessEqual,
                       std::uniform_int_distribution<int>(-4, 4)(rng) + 0.5);
    }
    const double ref = oracle::binary_by_enumeration(m);
    auto sol = solve_milp(m);
    if (std::isinf(ref)) {
      EXPECT_EQ(sol.status, MilpStatus::kInfeasible) << "trial " << trial;
    } else {
      ASSERT_EQ(sol.status, MilpStatus::kOptimal) << "trial " << trial;
      EXPECT_NEAR(sol.objective, ref, 1e-6) << "trial " << trial;
    }
  }
}

TEST(Milp, GomoryRoundsKeepOptimum) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> coeff(-6, 6);
  MilpOptions opt;
  opt.cut_rounds = 5;
  int feasible = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 4 + trial % 12;
    LinearModel m;
    for (std::size_t j = 0; j < n; ++j) m.add_variable("b" + std::to_string(j), 0, 1, true, coeff(rng));
    const std::size_t rows = 2 + trial % 5;
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<Term> terms;
      for (std::size_t j = 0; j < n; ++j) terms.push_back({j, static_cast<double>(coeff(rng))});
      m.add_constraint(terms, i % 3 ? Sense::kLessEqual : Sense::kGreaterEqual,
                       std::uniform_int_distribution<int>(-3, 6)(rng) + (trial % 2 ? 0.5 : 0.0));
    }
    const double ref = oracle::binary_by_enumeration(m);
    auto sol = solve_milp(m, opt);
    if (std::isinf(ref)) {
      EXPECT_EQ(sol.status, MilpStatus::kInfeasible) << "trial " << trial;
    } else {
      ++feasible;
      ASSERT_EQ(sol.status, MilpStatus::kOptimal) << "trial " << trial;
      EXPECT_NEAR(sol.objective, ref, 1e-6) << "trial " << trial;
      EXPECT_LE(m.max_violation(sol.values), 1e-6);
    }
  }
  EXPECT_GT(feasible, 50);
}

TEST(Milp, OracleShortCircuitsNodes) {
  LinearModel m;
  auto x = m.add_variable("x", 0, 4, true, -1.0);
  m.add_constraint({{x, 2.0}}, Sense::kLessEqual, 7.0);
  MilpOptions opt;
  int calls = 0;
  opt.oracle = [&](const NodeBounds& nb) -> std::optional<NodeResolution> {
    ++calls;
    const double best = std::min(nb.upper[0], 3.0);
    if (best < nb.lower[0]) return NodeResolution{};
    return NodeResolution{true, -best, {best}};
  };
  auto sol = solve_milp(m, opt);
  EXPECT_EQ(calls, 1);
  EXPECT_NEAR(sol.objective, -3.0, 1e-12);
}

TEST(Milp, HeuristicCandidatesAreVerified) {
  LinearModel m;
  auto x = m.add_variable("x", 0, 5, true, -1.0);
  m.add_constraint({{x, 1.0}}, Sense::kLessEqual, 2.5);
  MilpOptions opt;
  std::vector<double> seen;
  opt.heuristic = [](std::span<const double>, const NodeBounds&) { return std::optional<std::vector<double>>(std::vector<double>{5.0}); };
  opt.on_solution = [&](std::span<const double> v, double) { seen.push_back(v[0]); };
  auto sol = solve_milp(m, opt);
  EXPECT_NEAR(sol.objective, -2.0, 1e-9);
  for (double v : seen) EXPECT_LE(v, 2.0 + 1e-9);
}

}  // namespace
