#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "polydesc/data_model.hpp"

namespace polydesc {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return std::sqrt(s);
}

inline std::pair<std::vector<double>, std::vector<double>> bounding_box(std::span<const std::size_t> members,
                                                                        const Dataset& data) {
  if (members.empty()) throw std::invalid_argument("bounding box of an empty group");
  std::vector<double> lo(data.row(members[0]).begin(), data.row(members[0]).end());
  std::vector<double> hi = lo;
  for (std::size_t i : members) {
    const auto x = data.row(i);
    for (std::size_t d = 0; d < data.m(); ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
  return {std::move(lo), std::move(hi)};
}

inline Group make_group(std::vector<std::size_t> members, int cluster, const Dataset& data) {
  Group g;
  auto [lo, hi] = bounding_box(members, data);
  g.members = std::move(members);
  g.cluster = cluster;
  g.low = std::move(lo);
  g.high = std::move(hi);
  return g;
}

// Complete-linkage merge history of one cluster. Complete linkage has no
// inversions, so the grouping at any epsilon is a prefix of this history.
class Dendrogram {
 public:
  struct Merge {
    std::size_t keep;  // local index of the surviving representative
    std::size_t gone;
    double height;
  };

  Dendrogram(std::vector<std::size_t> members, int cluster, const Dataset& data)
      : members_(std::move(members)), cluster_(cluster) {
    const std::size_t n = members_.size();
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const double v = euclidean(data.row(members_[a]), data.row(members_[b]));
        dist[a * n + b] = dist[b * n + a] = v;
      }
    }
    std::vector<char> active(n, 1);
    std::vector<std::size_t> nn(n, 0);
    std::vector<double> nnd(n, std::numeric_limits<double>::infinity());
    auto refresh = [&](std::size_t a) {
      nnd[a] = std::numeric_limits<double>::infinity();
      nn[a] = a;
      for (std::size_t b = 0; b < n; ++b) {
        if (b == a || !active[b]) continue;
        if (dist[a * n + b] < nnd[a]) {
          nnd[a] = dist[a * n + b];
          nn[a] = b;
        }
      }
    };
    for (std::size_t a = 0; a < n; ++a) refresh(a);
    // Representatives are the smallest local index of their group, and the
    // local order follows global member order, so ties on distance resolve
    // to the pair with the smallest member index.
    for (std::size_t step = 0; step + 1 < n; ++step) {
      std::size_t best = n;
      for (std::size_t a = 0; a < n; ++a) {
        if (!active[a] || nn[a] == a) continue;
        if (best == n) {
          best = a;
          continue;
        }
        const auto key = [&](std::size_t x) {
          return std::make_tuple(nnd[x], std::min(x, nn[x]), std::max(x, nn[x]));
        };
        if (key(a) < key(best)) best = a;
      }
      const std::size_t keep = std::min(best, nn[best]);
      const std::size_t gone = std::max(best, nn[best]);
      merges_.push_back({keep, gone, nnd[best]});
      active[gone] = 0;
      for (std::size_t c = 0; c < n; ++c) {
        if (!active[c] || c == keep) continue;
        const double v = std::max(dist[keep * n + c], dist[gone * n + c]);
        dist[keep * n + c] = dist[c * n + keep] = v;
      }
      refresh(keep);
      for (std::size_t c = 0; c < n; ++c) {
        if (active[c] && c != keep && (nn[c] == keep || nn[c] == gone)) refresh(c);
      }
    }
  }

  std::vector<Group> cut(double epsilon, const Dataset& data) const {
    if (!(epsilon >= 0)) throw std::invalid_argument("epsilon must be >= 0");
    const std::size_t n = members_.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const Merge& mg : merges_) {
      if (mg.height > epsilon) break;
      parent[find(mg.gone)] = find(mg.keep);
    }
    std::vector<std::vector<std::size_t>> buckets(n);
    for (std::size_t a = 0; a < n; ++a) buckets[find(a)].push_back(members_[a]);
    std::vector<Group> out;
    for (std::size_t a = 0; a < n; ++a) {
      if (!buckets[a].empty()) out.push_back(make_group(std::move(buckets[a]), cluster_, data));
    }
    // Order groups by smallest member.
    std::sort(out.begin(), out.end(), [](const Group& x, const Group& y) { return x.members[0] < y.members[0]; });
    return out;
  }

  // Number of groups the cut at epsilon produces.
  std::size_t count_at(double epsilon) const {
    std::size_t merged = 0;
    for (const Merge& mg : merges_) {
      if (mg.height > epsilon) break;
      ++merged;
    }
    return members_.size() - merged;
  }

  const std::vector<Merge>& merges() const { return merges_; }
  int cluster() const { return cluster_; }

 private:
  std::vector<std::size_t> members_;
  int cluster_;
  std::vector<Merge> merges_;
};

// Groups one cluster's points so that every group's diameter is <= epsilon.
inline std::vector<Group> group_cluster(std::vector<std::size_t> members, int cluster, const Dataset& data,
                                        double epsilon) {
  if (!(epsilon >= 0)) throw std::invalid_argument("epsilon must be >= 0");
  std::sort(members.begin(), members.end());
  return Dendrogram(std::move(members), cluster, data).cut(epsilon, data);
}

// Dendrograms for every cluster, built concurrently.
inline std::vector<Dendrogram> build_dendrograms(const Dataset& data, const ClusterAssignment& ca) {
  check_consistent(data, ca);
  std::vector<std::future<Dendrogram>> jobs;
  for (int k = 0; k < ca.k(); ++k) {
    jobs.push_back(std::async(std::launch::async, [&data, &ca, k] { return Dendrogram(ca.members(k), k, data); }));
  }
  std::vector<Dendrogram> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline std::vector<Group> cut_all(std::span<const Dendrogram> trees, double epsilon, const Dataset& data) {
  std::vector<Group> out;
  for (const auto& t : trees) {
    auto g = t.cut(epsilon, data);
    out.insert(out.end(), std::make_move_iterator(g.begin()), std::make_move_iterator(g.end()));
  }
  return out;
}

inline std::vector<Group> make_groups(const Dataset& data, const ClusterAssignment& ca, double epsilon) {
  auto trees = build_dendrograms(data, ca);
  return cut_all(trees, epsilon, data);
}

inline std::vector<Group> singleton_groups(const Dataset& data, const ClusterAssignment& ca) {
  check_consistent(data, ca);
  // Point order, so the unit set lines up with point mode.
  std::vector<Group> out;
  for (std::size_t i = 0; i < data.n(); ++i) out.push_back(make_group({i}, ca[i], data));
  return out;
}

inline std::size_t max_group_size(std::span<const Group> groups) {
  std::size_t best = 0;
  for (const auto& g : groups) best = std::max(best, g.size());
  return best;
}

inline double silhouette(const Dataset& data, std::span<const int> labels) {
  if (labels.size() != data.n()) throw std::invalid_argument("one label per point required");
  int k = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("negative cluster id");
    k = std::max(k, l + 1);
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  int nonempty = 0;
  for (std::size_t s : sizes) nonempty += s > 0;
  if (nonempty < 2) throw std::invalid_argument("silhouette needs at least two clusters");

  const std::size_t n = data.n();
  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    if (sizes[own] == 1) continue;  // s = 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[static_cast<std::size_t>(labels[j])] += euclidean(data.row(i), data.row(j));
    }
    const double r = sums[own] / static_cast<double>(sizes[own] - 1);
    double q = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (c != own && sizes[c] > 0) q = std::min(q, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(q, r);
    if (denom > 0) total += (q - r) / denom;
  }
  return total / static_cast<double>(n);
}

inline double silhouette(const Dataset& data, const ClusterAssignment& ca) { return silhouette(data, ca.labels()); }

}  // namespace polydesc
