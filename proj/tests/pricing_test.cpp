#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "polydesc/colgen.hpp"
#include "polydesc/grouping.hpp"
#include "polydesc/pricing.hpp"

using namespace polydesc;

namespace {

DualBundle zero_duals(const UnitSet& units) {
  DualBundle d;
  d.mu.assign(units.size(), std::vector<double>(static_cast<std::size_t>(units.k()), 0.0));
  d.gamma.assign(units.size(), 0.0);
  d.phi.assign(units.m(), 0.0);
  return d;
}

// Duals on a sparse random support, the shape column generation produces.
DualBundle random_duals(std::mt19937_64& rng, const UnitSet& units, bool with_phi) {
  DualBundle d = zero_duals(units);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (u(rng) < 0.6) d.gamma[i] = std::round(u(rng) * 8) / 4;
    for (int k = 0; k < units.k(); ++k) {
      if (k != units[i].cluster && u(rng) < 0.6) d.mu[i][static_cast<std::size_t>(k)] = std::round(u(rng) * 8) / 4;
    }
  }
  if (with_phi) {
    for (auto& p : d.phi) p = -std::round(u(rng) * 4) / 4;
  }
  return d;
}

struct Instance {
  Dataset data;
  ClusterAssignment ca;
};

// Values on a 1/8 grid inside (0, 1) so the margin never matters.
Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t m, int K) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r;
    for (std::size_t d = 0; d < m; ++d) r.push_back(static_cast<double>(1 + rng() % 7) / 8.0);
    rows.push_back(r);
    labels.push_back(static_cast<int>(i % static_cast<std::size_t>(K)));
  }
  return {Dataset::from_rows(rows), ClusterAssignment(labels, K)};
}

PricingOutcome price(int k, const DualBundle& duals, const UnitSet& units, int W, int beta, double theta1,
                     bool use_oracle = true) {
  const PricingSettings s{W, beta, theta1, 1e-4};
  PricingOptions po;
  po.use_oracle = use_oracle;
  po.max_columns = 1000;
  const PricingModel pm = build_pricing(k, duals, s, units);
  return solve_pricing(pm, duals, s, units, po);
}

}  // namespace

TEST(ReducedCost, WorkedExample) {
  const Dataset data = Dataset::from_rows({{0.0}, {1.0}});
  const ClusterAssignment ca({0, 1}, 2);
  const auto units = UnitSet::points(data, ca);
  DualBundle d = zero_duals(units);
  d.mu[1][0] = 3;
  d.gamma[0] = 0.5;
  d.phi[0] = -0.25;
  EXPECT_DOUBLE_EQ(reduced_cost(HalfSpace{{1}, 0.5}, 0, d, 1.0, units), -0.75);
}

TEST(ReducedCost, ZeroDualsGiveComplexity) {
  const Dataset data = Dataset::from_rows({{0.0, 1.0}, {1.0, 0.5}});
  const ClusterAssignment ca({0, 1}, 2);
  const auto units = UnitSet::points(data, ca);
  const auto d = zero_duals(units);
  EXPECT_DOUBLE_EQ(reduced_cost(HalfSpace{{1, -1}, 0.5}, 0, d, 1.0, units), 3.0);
  EXPECT_DOUBLE_EQ(reduced_cost(HalfSpace{{0, 2}, 0.5}, 1, d, 1.0, units), 2.0);
}

TEST(Pricing, ZeroDualsAddNothing) {
  std::mt19937_64 rng(1);
  const auto inst = random_instance(rng, 8, 2, 2);
  const auto units = UnitSet::points(inst.data, inst.ca);
  const auto out = price(0, zero_duals(units), units, 1, 1, 1.0);
  EXPECT_NEAR(out.best_objective, 2.0, 1e-9);
  EXPECT_TRUE(out.candidates.empty());
}

TEST(Pricing, RejectsBadSettings) {
  std::mt19937_64 rng(1);
  const auto inst = random_instance(rng, 4, 2, 2);
  const auto units = UnitSet::points(inst.data, inst.ca);
  const auto d = zero_duals(units);
  EXPECT_THROW(build_pricing(0, d, {1, 3, 1.0, 1e-4}, units), std::invalid_argument);
  EXPECT_THROW(build_pricing(0, d, {0, 1, 1.0, 1e-4}, units), std::invalid_argument);
}

TEST(Pricing, FirstIterationFindsSeparator) {
  const Dataset data = Dataset::from_rows({{0.0}, {0.2}, {0.8}, {1.0}});
  const ClusterAssignment ca({0, 0, 1, 1}, 2);
  const auto units = UnitSet::points(data, ca);
  // Pool with a single useless column for cluster 0: every point of cluster 1
  // needs a column that excludes it.
  CandidatePool pool(units);
  pool.add(HalfSpace{{1}, 2.0});
  MasterOptions mo;
  mo.objective = MasterObjective::kMinAlpha;
  const auto lp = solve_master(pool, mo);
  ASSERT_EQ(lp.status, MasterStatus::kOptimal);
  const auto out = price(0, *lp.duals, units, 1, 1, 0.0);
  ASSERT_FALSE(out.candidates.empty());
  const double expect = oracle::min_reduced_cost(0, *lp.duals, 0.0, units, 1, 1, 1e-4, 1.0);
  EXPECT_NEAR(out.candidates.front().rho, expect, 1e-6);
  EXPECT_LT(expect, 0.0);
  const HalfSpace& h = out.candidates.front().halfspace;
  for (std::size_t i : {0, 1}) EXPECT_TRUE(h.contains(data.row(i)));
  for (std::size_t i : {2, 3}) EXPECT_FALSE(h.contains(data.row(i)));
}

TEST(Pricing, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 80; ++t) {
    const std::size_t m = 1 + rng() % 3;
    const int K = 2 + static_cast<int>(rng() % 2);
    const int W = 1 + static_cast<int>(rng() % 2);
    const int beta = 1 + static_cast<int>(rng() % std::min<std::size_t>(m, 2));
    const auto inst = random_instance(rng, 6 + rng() % 5, m, K);
    const auto units = UnitSet::points(inst.data, inst.ca);
    const auto duals = random_duals(rng, units, t % 2 == 0);
    const double theta1 = t % 3 == 0 ? 0.0 : 0.5;
    const int k = static_cast<int>(rng() % static_cast<std::size_t>(K));
    const auto out = price(k, duals, units, W, beta, theta1);
    const double bound = W * beta * units.max_abs();
    const double expect = oracle::min_reduced_cost(k, duals, theta1, units, W, beta, 1e-4, bound);
    ASSERT_EQ(out.status, PricingStatus::kOptimal);
    EXPECT_NEAR(out.best_objective, expect, 1e-6) << "trial " << t;
    if (expect < -1e-6) {
      ASSERT_FALSE(out.candidates.empty()) << "trial " << t;
      EXPECT_NEAR(out.candidates.front().rho, expect, 1e-6) << "trial " << t;
    }
  }
}

TEST(Pricing, BranchAndBoundAloneMatchesOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 25; ++t) {
    const std::size_t m = 1 + rng() % 2;
    const auto inst = random_instance(rng, 6 + rng() % 3, m, 2);
    const auto units = UnitSet::points(inst.data, inst.ca);
    const auto duals = random_duals(rng, units, true);
    const int W = 1 + static_cast<int>(rng() % 2);
    const auto out = price(1, duals, units, W, 1, 0.5, false);
    const double expect = oracle::min_reduced_cost(1, duals, 0.5, units, W, 1, 1e-4, W * units.max_abs());
    EXPECT_NEAR(out.best_objective, expect, 1e-6) << "trial " << t;
  }
}

TEST(Pricing, CandidatesRespectBoundsAndDecodeConsistently) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = 2 + rng() % 2;
    const int W = 1 + static_cast<int>(rng() % 3);
    const int beta = 1 + static_cast<int>(rng() % 2);
    const auto inst = random_instance(rng, 10, m, 3);
    const auto units = UnitSet::points(inst.data, inst.ca);
    const auto duals = random_duals(rng, units, true);
    const auto out = price(static_cast<int>(t % 3), duals, units, W, beta, 1.0);
    for (const auto& c : out.candidates) {
      EXPECT_LE(c.halfspace.nnz(), static_cast<std::size_t>(beta));
      EXPECT_GE(c.halfspace.nnz(), 1u);
      for (int w : c.halfspace.w) EXPECT_LE(std::abs(w), W);
      EXPECT_LT(c.rho, -1e-6);
      EXPECT_NEAR(c.model_objective, c.rho, 1e-6);
      EXPECT_NEAR(reduced_cost(c.halfspace, out.cluster, duals, 1.0, units), c.rho, 1e-9);
    }
    for (std::size_t i = 1; i < out.candidates.size(); ++i) {
      EXPECT_LE(out.candidates[i - 1].rho, out.candidates[i].rho);
    }
  }
}

TEST(Pricing, SkipsColumnsAlreadyPooled) {
  std::mt19937_64 rng(5);
  const auto inst = random_instance(rng, 10, 2, 2);
  const auto units = UnitSet::points(inst.data, inst.ca);
  const auto duals = random_duals(rng, units, false);
  const auto first = price(0, duals, units, 1, 1, 0.0);
  ASSERT_FALSE(first.candidates.empty());
  CandidatePool pool(units);
  pool.add(first.candidates.front().halfspace);
  const PricingSettings s{1, 1, 0.0, 1e-4};
  const auto again = solve_pricing(build_pricing(0, duals, s, units), duals, s, units, {}, &pool);
  for (const auto& c : again.candidates) EXPECT_FALSE(pool.contains(c.halfspace));
}

TEST(Pricing, UnivariateOptimumAtMidpoints) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 40; ++t) {
    const auto inst = random_instance(rng, 9, 2, 2);
    const auto units = UnitSet::points(inst.data, inst.ca);
    const auto duals = random_duals(rng, units, t % 2 == 1);
    auto ts = midpoint_thresholds(inst.data);
    // the two sides beyond the data
    for (std::size_t d = 0; d < ts.size(); ++d) {
      double lo = 1, hi = 0;
      for (std::size_t i = 0; i < inst.data.n(); ++i) {
        lo = std::min(lo, inst.data.at(i, d));
        hi = std::max(hi, inst.data.at(i, d));
      }
      ts[d].push_back(lo - 0.5);
      ts[d].push_back(hi + 0.5);
    }
    const auto thr = price_thresholds(0, duals, 1.0, units, ts, 1000);
    const auto full = price(0, duals, units, 1, 1, 1.0);
    EXPECT_NEAR(thr.best_objective, full.best_objective, 1e-9) << "trial " << t;
    for (const auto& c : thr.candidates) {
      EXPECT_NEAR(reduced_cost(c.halfspace, 0, duals, 1.0, units), c.rho, 1e-9);
    }
  }
}

TEST(Pricing, SingletonGroupsMatchPoints) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto inst = random_instance(rng, 9, 2, 2);
    const auto points = UnitSet::points(inst.data, inst.ca);
    const auto gunits = UnitSet::groups(singleton_groups(inst.data, inst.ca), 2, 2);
    const auto duals = random_duals(rng, points, true);
    const auto a = price(1, duals, points, 2, 2, 0.5);
    const auto b = price(1, duals, gunits, 2, 2, 0.5);
    EXPECT_NEAR(a.best_objective, b.best_objective, 1e-9);
  }
}

TEST(Pricing, GroupedMatchesBoxOracle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto inst = random_instance(rng, 14, 2, 2);
    const auto groups = make_groups(inst.data, inst.ca, 0.3);
    const auto units = UnitSet::groups(groups, 2, 2);
    const auto duals = random_duals(rng, units, true);
    const auto out = price(0, duals, units, 2, 2, 0.5);
    const double expect = oracle::min_reduced_cost(0, duals, 0.5, units, 2, 2, 1e-4, 4 * units.max_abs());
    EXPECT_NEAR(out.best_objective, expect, 1e-6) << "trial " << t;
  }
}
