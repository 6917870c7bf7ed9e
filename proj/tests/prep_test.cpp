#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "polydesc/prep.hpp"

using namespace polydesc;

namespace {

RawTable ingest_str(const std::string& s, std::optional<std::string> target = std::nullopt) {
  std::istringstream in(s);
  return ingest(in, target);
}

// Two partitions are equal when the label maps are a bijection.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, fresh_x] = ab.emplace(a[i], b[i]);
    auto [y, fresh_y] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

Dataset blobs(std::uint64_t seed, std::size_t per_blob) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.03);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < per_blob; ++i) rows.push_back({0.2 + g(rng), 0.2 + g(rng)});
  for (std::size_t i = 0; i < per_blob; ++i) rows.push_back({0.8 + g(rng), 0.7 + g(rng)});
  return Dataset::from_rows(rows);
}

}  // namespace

TEST(Ingest, NumericTable) {
  const auto t = ingest_str("x,y\n1,2\n3,4.5\n-1,0\n");
  EXPECT_EQ(t.rows, 3u);
  ASSERT_EQ(t.columns.size(), 2u);
  for (const auto& c : t.columns) EXPECT_TRUE(c.numeric);
  EXPECT_EQ(t.columns[1].numbers, (std::vector<double>{2, 4.5, 0}));
}

TEST(Ingest, CategoricalColumn) {
  const auto t = ingest_str("x,c\n1,a\n2,b\n3,a\n");
  EXPECT_TRUE(t.columns[0].numeric);
  EXPECT_FALSE(t.columns[1].numeric);
  EXPECT_EQ(t.columns[1].labels, (std::vector<std::string>{"a", "b", "a"}));
}

TEST(Ingest, MixedColumnIsCategorical) {
  const auto t = ingest_str("c\n1\nx\n3\n");
  EXPECT_FALSE(t.columns[0].numeric);
}

TEST(Ingest, TargetDropped) {
  const auto t = ingest_str("x,label,y\n1,p,2\n3,q,4\n", std::string("label"));
  ASSERT_EQ(t.columns.size(), 2u);
  EXPECT_EQ(t.columns[0].name, "x");
  EXPECT_EQ(t.columns[1].name, "y");
  ASSERT_TRUE(t.target.has_value());
  EXPECT_EQ(*t.target, (std::vector<std::string>{"p", "q"}));
}

TEST(Ingest, QuotedFields) {
  const auto t = ingest_str("name,x\n\"a, b\",1\nc,2\n");
  EXPECT_EQ(t.columns[0].labels[0], "a, b");
}

TEST(Ingest, Errors) {
  EXPECT_THROW(ingest_str(""), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\n"), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\n1,2\n3\n"), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\n1,\n"), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\n1,?\n"), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\nNA,1\n"), std::invalid_argument);
  EXPECT_THROW(ingest_str("x,y\n1,2\n", std::string("z")), std::invalid_argument);
  EXPECT_THROW(ingest_file("/nonexistent/file.csv"), std::runtime_error);
}

TEST(Encode, MinMax) {
  const auto e = encode_and_scale(ingest_str("x\n2\n4\n6\n"));
  EXPECT_DOUBLE_EQ(e.data.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(e.data.at(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(e.data.at(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.scales[0].min, 2.0);
  EXPECT_DOUBLE_EQ(e.scales[0].max, 6.0);
}

TEST(Encode, OneHot) {
  const auto e = encode_and_scale(ingest_str("c\nb\na\nb\n"));
  ASSERT_EQ(e.data.m(), 2u);
  EXPECT_EQ(e.data.feature_names()[0], "c=a");
  EXPECT_EQ(e.data.feature_names()[1], "c=b");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(e.data.at(i, 0) + e.data.at(i, 1), 1.0);
  EXPECT_DOUBLE_EQ(e.data.at(1, 0), 1.0);
}

TEST(Encode, ConstantColumnIsZero) {
  const auto e = encode_and_scale(ingest_str("x,y\n5,1\n5,2\n5,3\n"));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(e.data.at(i, 0), 0.0);
}

TEST(Encode, NoFeaturesThrows) {
  const auto t = ingest_str("label\na\nb\n", std::string("label"));
  EXPECT_THROW(encode_and_scale(t), std::invalid_argument);
}

TEST(Encode, IdempotentAndInUnitBox) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 30; ++t) {
    std::ostringstream csv;
    csv << "a,b,c\n";
    for (int i = 0; i < 20; ++i) csv << u(rng) << "," << (rng() % 3 == 0 ? "red" : "blue") << "," << u(rng) << "\n";
    const auto once = encode_and_scale(ingest_str(csv.str()));
    for (std::size_t i = 0; i < once.data.n(); ++i) {
      for (std::size_t j = 0; j < once.data.m(); ++j) {
        EXPECT_GE(once.data.at(i, j), 0.0);
        EXPECT_LE(once.data.at(i, j), 1.0);
      }
    }
    const auto twice = encode_and_scale(to_raw(once.data));
    ASSERT_EQ(twice.data.m(), once.data.m());
    for (std::size_t i = 0; i < once.data.n(); ++i) {
      for (std::size_t j = 0; j < once.data.m(); ++j) EXPECT_NEAR(twice.data.at(i, j), once.data.at(i, j), 1e-12);
    }
  }
}

TEST(ReadLabels, HeaderAndErrors) {
  std::istringstream a("cluster\n0\n1\n1\n");
  EXPECT_EQ(read_labels(a), (std::vector<int>{0, 1, 1}));
  std::istringstream b("2\n0\n");
  EXPECT_EQ(read_labels(b), (std::vector<int>{2, 0}));
  std::istringstream c("0\nx\n");
  EXPECT_THROW(read_labels(c), std::invalid_argument);
  std::istringstream d("cluster\n");
  EXPECT_THROW(read_labels(d), std::invalid_argument);
}

TEST(Kmeans, PerfectSplit) {
  const Dataset data = Dataset::from_rows({{0.0}, {0.0}, {10.0}, {10.0}});
  const auto r = kmeans(data, 2, 10, 1);
  EXPECT_DOUBLE_EQ(r.inertia, 0.0);
  std::vector<double> c{r.centers[0][0], r.centers[1][0]};
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, (std::vector<double>{0.0, 10.0}));
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  EXPECT_EQ(r.restarts, 10);
  EXPECT_EQ(r.seed, 1u);
}

TEST(Kmeans, Errors) {
  const Dataset data = Dataset::from_rows({{0.0}, {0.0}, {1.0}});
  EXPECT_THROW(kmeans(data, 1, 1, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(data, 4, 1, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(data, 3, 1, 0), std::invalid_argument);
  EXPECT_THROW(kmeans(data, 2, 0, 0), std::invalid_argument);
}

TEST(Kmeans, BestOfRestartsAndCentroids) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({u(rng), u(rng)});
    const Dataset data = Dataset::from_rows(rows);
    const auto best = kmeans(data, 4, 20, 100 + t);
    // restarts under one seed form a prefix, so more restarts never hurt
    double prev = kmeans(data, 4, 1, 100 + t).inertia;
    for (int r = 2; r <= 20; ++r) {
      const double cur = kmeans(data, 4, r, 100 + t).inertia;
      EXPECT_LE(cur, prev);
      prev = cur;
    }
    EXPECT_EQ(prev, best.inertia);
    // centers are member means and inertia matches them
    double inertia = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      std::vector<double> mean(2, 0.0);
      int cnt = 0;
      for (std::size_t i = 0; i < data.n(); ++i) {
        if (best.labels[i] != static_cast<int>(c)) continue;
        ++cnt;
        for (int d = 0; d < 2; ++d) mean[static_cast<std::size_t>(d)] += rows[i][static_cast<std::size_t>(d)];
      }
      ASSERT_GT(cnt, 0);
      for (int d = 0; d < 2; ++d) EXPECT_NEAR(mean[static_cast<std::size_t>(d)] / cnt, best.centers[c][static_cast<std::size_t>(d)], 1e-7);
    }
    for (std::size_t i = 0; i < data.n(); ++i) {
      inertia += detail::sqdist(data.row(i), best.centers[static_cast<std::size_t>(best.labels[i])]);
    }
    EXPECT_NEAR(inertia, best.inertia, 1e-9);
  }
}

TEST(Kmeans, Deterministic) {
  const Dataset data = blobs(3, 30);
  const auto a = kmeans(data, 3, 15, 42);
  const auto b = kmeans(data, 3, 15, 42);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(Kmeans, PermutationInvariantPartition) {
  const Dataset data = blobs(6, 25);
  std::vector<std::size_t> perm(data.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<double>> rows;
  for (std::size_t i : perm) rows.emplace_back(data.row(i).begin(), data.row(i).end());
  const auto a = kmeans(data, 2, 20, 5);
  const auto b = kmeans(Dataset::from_rows(rows), 2, 20, 9);
  std::vector<int> back(data.n());
  for (std::size_t j = 0; j < perm.size(); ++j) back[perm[j]] = b.labels[j];
  EXPECT_TRUE(same_partition(a.labels, back));
}

TEST(SelectK, TwoBlobs) {
  const Dataset data = blobs(11, 40);
  const auto r = select_k(data, 3, 2, 10, 20);
  EXPECT_EQ(r.k, 2);
  EXPECT_EQ(r.assignment.k(), 2);
  ASSERT_EQ(r.scores.size(), 9u);
  // independent rescoring of each k picks the same argmax
  int arg = 0;
  double best = -2;
  for (int k = 2; k <= 10; ++k) {
    const auto km = kmeans(data, k, 20, 3 + static_cast<std::uint64_t>(k));
    const double s = silhouette(data, km.labels);
    EXPECT_NEAR(s, r.scores[static_cast<std::size_t>(k - 2)].second, 1e-12);
    if (s > best) {
      best = s;
      arg = k;
    }
  }
  EXPECT_EQ(arg, 2);
  for (const auto& [k, s] : r.scores) EXPECT_LE(s, r.scores[0].second);
}

TEST(SelectK, RejectsSmallInput) {
  EXPECT_THROW(select_k(blobs(1, 5), 0), std::invalid_argument);
}

TEST(SelectK, Iris) {
  const auto raw = ingest_file(std::string(POLYDESC_DATA_DIR) + "/iris.csv", std::string("class"));
  const auto enc = encode_and_scale(raw);
  EXPECT_EQ(enc.data.n(), 150u);
  EXPECT_EQ(enc.data.m(), 4u);
  const auto r = select_k(enc.data, 0);
  EXPECT_EQ(r.k, 2);
}
