#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "polydesc/grouping.hpp"
#include "polydesc/io.hpp"

using namespace polydesc;

namespace {

// Naive agglomeration: recompute every complete-linkage distance each round
// and merge the closest pair (ties by smallest member index).
std::vector<std::vector<std::size_t>> naive_complete_linkage(const Dataset& data, std::vector<std::size_t> members,
                                                             double eps) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i : members) groups.push_back({i});
  while (groups.size() > 1) {
    double best = INFINITY;
    std::size_t ba = 0, bb = 0;
    std::pair<std::size_t, std::size_t> best_key{SIZE_MAX, SIZE_MAX};
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        double d = 0;
        for (std::size_t i : groups[a]) {
          for (std::size_t j : groups[b]) d = std::max(d, euclidean(data.row(i), data.row(j)));
        }
        const auto ka = *std::min_element(groups[a].begin(), groups[a].end());
        const auto kb = *std::min_element(groups[b].begin(), groups[b].end());
        const std::pair<std::size_t, std::size_t> key{std::min(ka, kb), std::max(ka, kb)};
        if (d < best || (d == best && key < best_key)) {
          best = d;
          ba = a;
          bb = b;
          best_key = key;
        }
      }
    }
    if (best > eps) break;
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

std::vector<std::vector<std::size_t>> member_sets(const std::vector<Group>& gs) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& g : gs) {
    auto m = g.members;
    std::sort(m.begin(), m.end());
    out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double brute_silhouette(const Dataset& data, const std::vector<int>& labels) {
  const std::size_t n = data.n();
  const int K = *std::max_element(labels.begin(), labels.end()) + 1;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(K), 0);
    std::vector<double> cnt(static_cast<std::size_t>(K), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[static_cast<std::size_t>(labels[j])] += std::sqrt(std::pow(data.at(i, 0) - data.at(j, 0), 2) +
                                                            (data.m() > 1 ? std::pow(data.at(i, 1) - data.at(j, 1), 2) : 0));
      cnt[static_cast<std::size_t>(labels[j])] += 1;
    }
    const auto own = static_cast<std::size_t>(labels[i]);
    if (cnt[own] == 0) continue;
    const double r = sum[own] / cnt[own];
    double q = INFINITY;
    for (std::size_t c = 0; c < sum.size(); ++c) {
      if (c != own && cnt[c] > 0) q = std::min(q, sum[c] / cnt[c]);
    }
    total += (q - r) / std::max(q, r);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST(GroupCluster, OneDimensionalPairs) {
  const Dataset data = Dataset::from_rows({{0.0}, {0.1}, {0.9}, {1.0}});
  const auto g = group_cluster({0, 1, 2, 3}, 0, data, 0.2);
  EXPECT_EQ(member_sets(g), (std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}}));
}

TEST(GroupCluster, ZeroEpsilonGivesSingletons) {
  const Dataset data = Dataset::from_rows({{0.0}, {0.1}, {0.9}, {1.0}});
  EXPECT_EQ(group_cluster({0, 1, 2, 3}, 0, data, 0.0).size(), 4u);
}

TEST(GroupCluster, DiameterEpsilonGivesOneGroup) {
  const Dataset data = Dataset::from_rows({{0.0, 0.0}, {0.3, 0.4}, {0.1, 0.1}});
  EXPECT_EQ(group_cluster({0, 1, 2}, 0, data, 0.5).size(), 1u);
}

TEST(GroupCluster, NegativeEpsilonThrows) {
  const Dataset data = Dataset::from_rows({{0.0}});
  EXPECT_THROW(group_cluster({0}, 0, data, -1), std::invalid_argument);
}

TEST(GroupCluster, MatchesNaiveAgglomeration) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 3 + rng() % 14;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({u(rng), u(rng)});
    // integer grid variant provokes distance ties
    if (t % 3 == 0) {
      for (auto& r : rows) {
        r[0] = std::floor(r[0] * 4);
        r[1] = std::floor(r[1] * 4);
      }
    }
    const Dataset data = Dataset::from_rows(rows);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (double eps : {0.0, 0.1, 0.3, 0.6, 1.0, 2.0, 5.0}) {
      const auto got = member_sets(group_cluster(all, 0, data, eps));
      EXPECT_EQ(got, naive_complete_linkage(data, all, eps)) << "trial " << t << " eps " << eps;
    }
  }
}

TEST(GroupCluster, PartitionAndDiameterInvariants) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 80; ++i) rows.push_back({g(rng), g(rng), g(rng)});
  const Dataset data = Dataset::from_rows(rows);
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) labels.push_back(i % 4);
  const ClusterAssignment ca(labels, 4);
  for (double eps : {0.0, 0.5, 1.0, 2.0}) {
    const auto groups = make_groups(data, ca, eps);
    std::set<std::size_t> seen;
    for (const auto& gr : groups) {
      for (std::size_t i : gr.members) {
        EXPECT_EQ(ca[i], gr.cluster);
        EXPECT_TRUE(seen.insert(i).second);
        for (std::size_t j : gr.members) EXPECT_LE(euclidean(data.row(i), data.row(j)), eps);
      }
    }
    EXPECT_EQ(seen.size(), 80u);
  }
}

TEST(Dendrogram, CountMatchesCut) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({u(rng), u(rng)});
  const Dataset data = Dataset::from_rows(rows);
  std::vector<std::size_t> all(40);
  std::iota(all.begin(), all.end(), 0);
  const Dendrogram tree(all, 0, data);
  for (const auto& mg : tree.merges()) {
    EXPECT_EQ(tree.count_at(mg.height), tree.cut(mg.height, data).size());
  }
}

TEST(BoundingBox, CornerExample) {
  const Dataset data = Dataset::from_rows({{0, 1}, {1, 0}});
  const std::vector<std::size_t> mem{0, 1};
  auto [lo, hi] = bounding_box(mem, data);
  EXPECT_EQ(lo, (std::vector<double>{0, 0}));
  EXPECT_EQ(hi, (std::vector<double>{1, 1}));
}

TEST(BoundingBox, SingletonAndInteriorPoint) {
  const Dataset data = Dataset::from_rows({{0.3, 0.7}, {0, 0}, {1, 1}, {0.5, 0.5}});
  const std::vector<std::size_t> one{0};
  auto [lo, hi] = bounding_box(one, data);
  EXPECT_EQ(lo, hi);
  const std::vector<std::size_t> two{1, 2}, three{1, 2, 3};
  EXPECT_EQ(bounding_box(two, data), bounding_box(three, data));
}

TEST(Silhouette, TwoPairs) {
  const Dataset data = Dataset::from_rows({{0}, {1}, {5}, {6}});
  const double expect = (4.5 / 5.5 + 3.5 / 4.5 + 3.5 / 4.5 + 4.5 / 5.5) / 4.0;
  EXPECT_NEAR(silhouette(data, std::vector<int>{0, 0, 1, 1}), expect, 1e-12);
  EXPECT_NEAR(expect, 0.79798, 1e-5);
}

TEST(Silhouette, CoincidentClustersScoreOne) {
  const Dataset data = Dataset::from_rows({{0, 0}, {0, 0}, {9, 9}, {9, 9}});
  EXPECT_DOUBLE_EQ(silhouette(data, std::vector<int>{0, 0, 1, 1}), 1.0);
}

TEST(Silhouette, LabelPermutationInvariant) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels, swapped;
    for (int i = 0; i < 20; ++i) {
      rows.push_back({u(rng), u(rng)});
      labels.push_back(static_cast<int>(rng() % 3));
    }
    labels[0] = 0;
    labels[1] = 1;
    for (int l : labels) swapped.push_back((l + 1) % 3);
    const Dataset data = Dataset::from_rows(rows);
    EXPECT_NEAR(silhouette(data, labels), silhouette(data, swapped), 1e-12);
    EXPECT_NEAR(silhouette(data, labels), brute_silhouette(data, labels), 1e-12);
  }
}

TEST(Silhouette, SingletonClusterScoresZero) {
  const Dataset data = Dataset::from_rows({{0}, {1}, {5}});
  // point 2 alone: s = 0; points 0, 1: r = 1, q = 5 and 4
  const double expect = ((5.0 - 1.0) / 5.0 + (4.0 - 1.0) / 4.0 + 0.0) / 3.0;
  EXPECT_NEAR(silhouette(data, std::vector<int>{0, 0, 1}), expect, 1e-12);
}

TEST(Silhouette, NeedsTwoClusters) {
  const Dataset data = Dataset::from_rows({{0}, {1}});
  EXPECT_THROW(silhouette(data, std::vector<int>{0, 0}), std::invalid_argument);
}

TEST(GroupingBound, GroupedOptimumWithinGmaxFactor) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 4 + rng() % 9;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({std::round(u(rng) * 8) / 8});
      labels.push_back(i < n / 2 ? 0 : 1);
    }
    const Dataset data = Dataset::from_rows(rows);
    const ClusterAssignment ca(labels, 2);
    std::vector<Group> groups;
    for (int k = 0; k < 2; ++k) {
      auto mem = ca.members(k);
      std::shuffle(mem.begin(), mem.end(), rng);
      for (std::size_t i = 0; i < mem.size();) {
        const std::size_t len = std::min<std::size_t>(1 + rng() % 3, mem.size() - i);
        std::vector<std::size_t> part(mem.begin() + static_cast<std::ptrdiff_t>(i),
                                      mem.begin() + static_cast<std::ptrdiff_t>(i + len));
        groups.push_back(make_group(part, k, data));
        i += len;
      }
    }
    const auto sols = oracle::all_two_cluster_solutions(data);
    std::size_t best = SIZE_MAX, best_g = SIZE_MAX;
    for (const auto& s : sols) {
      best = std::min(best, cost(s, data, ca));
      best_g = std::min(best_g, grouped_cost(s, groups, data, ca));
    }
    for (const auto& s : sols) {
      if (grouped_cost(s, groups, data, ca) == best_g) {
        EXPECT_LE(cost(s, data, ca), max_group_size(groups) * best);
      }
    }
  }
}

TEST(GroupsJson, RoundTrip) {
  const Dataset data = Dataset::from_rows({{0, 1}, {1, 0}, {3, 3}});
  const ClusterAssignment ca({0, 0, 1}, 2);
  const auto groups = make_groups(data, ca, 2.0);
  const auto back = groups_from_json(json::parse(groups_to_json(groups).dump()));
  ASSERT_EQ(back.size(), groups.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].members, groups[i].members);
    EXPECT_EQ(back[i].cluster, groups[i].cluster);
    EXPECT_EQ(back[i].low, groups[i].low);
    EXPECT_EQ(back[i].high, groups[i].high);
  }
}
