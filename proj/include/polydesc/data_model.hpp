#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace polydesc {

// n x m matrix of finite reals, row-major, with feature names.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> values, std::size_t n, std::size_t m, std::vector<std::string> names)
      : values_(std::move(values)), n_(n), m_(m), names_(std::move(names)) {
    if (n_ < 1 || m_ < 1) throw std::invalid_argument("dataset needs at least one row and one column");
    if (values_.size() != n_ * m_) throw std::invalid_argument("dataset value count does not match n*m");
    if (names_.size() != m_) throw std::invalid_argument("dataset needs one name per feature");
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("dataset entries must be finite");
    }
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw std::invalid_argument("feature names must be distinct");
  }

  static Dataset from_rows(const std::vector<std::vector<double>>& rows, std::vector<std::string> names = {}) {
    if (rows.empty()) throw std::invalid_argument("dataset needs at least one row");
    const std::size_t m = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * m);
    for (const auto& r : rows) {
      if (r.size() != m) throw std::invalid_argument("ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    if (names.empty()) {
      for (std::size_t d = 0; d < m; ++d) names.push_back("x" + std::to_string(d));
    }
    return Dataset(std::move(flat), rows.size(), m, std::move(names));
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * m_, m_}; }
  double at(std::size_t i, std::size_t d) const { return values_[i * m_ + d]; }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<double>& values() const { return values_; }

  double max_abs() const {
    double best = 0.0;
    for (double v : values_) best = std::max(best, std::abs(v));
    return best;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<double> flat;
    flat.reserve(rows.size() * m_);
    for (std::size_t i : rows) {
      auto r = row(i);
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return Dataset(std::move(flat), rows.size(), m_, names_);
  }

 private:
  std::vector<double> values_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<std::string> names_;
};

class ClusterAssignment {
 public:
  ClusterAssignment() = default;
  ClusterAssignment(std::vector<int> labels, int k) : labels_(std::move(labels)), k_(k) {
    if (k_ < 1) throw std::invalid_argument("need at least one cluster");
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k_), 0);
    for (int l : labels_) {
      if (l < 0 || l >= k_) throw std::invalid_argument("cluster id out of range: " + std::to_string(l));
      ++sizes[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < k_; ++c) {
      if (sizes[static_cast<std::size_t>(c)] == 0) {
        throw std::invalid_argument("cluster " + std::to_string(c) + " is empty");
      }
    }
  }

  // Relabels arbitrary ids to 0..K-1 in order of first appearance.
  static ClusterAssignment from_raw(std::span<const int> raw) {
    std::vector<int> ids;
    std::vector<int> labels;
    labels.reserve(raw.size());
    for (int r : raw) {
      auto it = std::find(ids.begin(), ids.end(), r);
      if (it == ids.end()) {
        ids.push_back(r);
        labels.push_back(static_cast<int>(ids.size()) - 1);
      } else {
        labels.push_back(static_cast<int>(it - ids.begin()));
      }
    }
    return ClusterAssignment(std::move(labels), static_cast<int>(ids.size()));
  }

  int k() const { return k_; }
  std::size_t n() const { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }

  std::vector<std::size_t> members(int cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == cluster) out.push_back(i);
    }
    return out;
  }

 private:
  std::vector<int> labels_;
  int k_ = 0;
};

inline void check_consistent(const Dataset& data, const ClusterAssignment& ca) {
  if (data.n() != ca.n()) {
    throw std::invalid_argument("dataset has " + std::to_string(data.n()) + " rows but " +
                                std::to_string(ca.n()) + " labels were given");
  }
}

// {x : w.x <= b}
struct HalfSpace {
  std::vector<int> w;
  double b = 0.0;

  std::size_t nnz() const {
    return static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](int v) { return v != 0; }));
  }
  int complexity() const { return static_cast<int>(nnz()) + 1; }

  // Summation runs over d ascending everywhere so that box and point
  // evaluations of the same half-space agree bit for bit.
  double dot(std::span<const double> x) const {
    if (x.size() != w.size()) {
      throw std::invalid_argument("dimension mismatch: half-space has " + std::to_string(w.size()) +
                                  " coefficients, point has " + std::to_string(x.size()));
    }
    double s = 0.0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      if (w[d] != 0) s += w[d] * x[d];
    }
    return s;
  }

  bool contains(std::span<const double> x) const { return dot(x) <= b; }

  // max of w.x over the box [lo, hi]
  double box_max(std::span<const double> lo, std::span<const double> hi) const {
    double s = 0.0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      if (w[d] > 0) s += w[d] * hi[d];
      else if (w[d] < 0) s += w[d] * lo[d];
    }
    return s;
  }

  // min of w.x over the box [lo, hi]
  double box_min(std::span<const double> lo, std::span<const double> hi) const {
    double s = 0.0;
    for (std::size_t d = 0; d < w.size(); ++d) {
      if (w[d] > 0) s += w[d] * lo[d];
      else if (w[d] < 0) s += w[d] * hi[d];
    }
    return s;
  }

  bool box_inside(std::span<const double> lo, std::span<const double> hi) const { return box_max(lo, hi) <= b; }
  bool box_outside(std::span<const double> lo, std::span<const double> hi) const { return box_min(lo, hi) > b; }

  void validate(int max_coeff, int max_nnz) const {
    if (nnz() == 0) throw std::invalid_argument("half-space with w = 0");
    if (!std::isfinite(b)) throw std::invalid_argument("half-space threshold must be finite");
    for (int v : w) {
      if (std::abs(v) > max_coeff) throw std::invalid_argument("half-space coefficient exceeds W");
    }
    if (static_cast<int>(nnz()) > max_nnz) throw std::invalid_argument("half-space support exceeds beta");
  }

  friend bool operator==(const HalfSpace&, const HalfSpace&) = default;
};

// Identity used for pool deduplication: exact w, b rounded to 1e-9.
struct HalfSpaceKey {
  std::vector<int> w;
  std::int64_t b_ticks;

  explicit HalfSpaceKey(const HalfSpace& h) : w(h.w), b_ticks(std::llround(h.b * 1e9)) {}
  friend bool operator==(const HalfSpaceKey&, const HalfSpaceKey&) = default;
};

struct HalfSpaceKeyHash {
  std::size_t operator()(const HalfSpaceKey& k) const {
    std::size_t h = std::hash<std::int64_t>{}(k.b_ticks);
    for (int v : k.w) h = h * 1000003u ^ std::hash<int>{}(v);
    return h;
  }
};

using HalfSpaceSet = std::unordered_set<HalfSpaceKey, HalfSpaceKeyHash>;

// Intersection of half-spaces. No half-spaces means the whole space.
struct Polyhedron {
  std::vector<HalfSpace> halfspaces;

  bool contains(std::span<const double> x) const {
    return std::all_of(halfspaces.begin(), halfspaces.end(), [&](const HalfSpace& h) { return h.contains(x); });
  }
  int complexity() const {
    int c = 0;
    for (const auto& h : halfspaces) c += h.complexity();
    return c;
  }
};

// A batch of same-cluster points summarized by its bounding box.
struct Group {
  std::vector<std::size_t> members;
  int cluster = 0;
  std::vector<double> low;
  std::vector<double> high;

  std::size_t size() const { return members.size(); }
};

enum class PointStatus { kCorrect, kFalseNegative, kFalsePositive, kBoth };

inline const char* to_string(PointStatus s) {
  switch (s) {
    case PointStatus::kCorrect: return "correct";
    case PointStatus::kFalseNegative: return "false_negative";
    case PointStatus::kFalsePositive: return "false_positive";
    case PointStatus::kBoth: return "both";
  }
  return "?";
}

struct Classification {
  std::vector<PointStatus> status;
  std::vector<std::size_t> misexplained;
};

inline Classification classify_points(std::span<const Polyhedron> polyhedra, const Dataset& data,
                                      const ClusterAssignment& ca) {
  check_consistent(data, ca);
  if (polyhedra.size() != static_cast<std::size_t>(ca.k())) {
    throw std::invalid_argument("need one polyhedron per cluster");
  }
  Classification out;
  out.status.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto x = data.row(i);
    const auto own = static_cast<std::size_t>(ca[i]);
    const bool fn = !polyhedra[own].contains(x);
    bool fp = false;
    for (std::size_t k = 0; k < polyhedra.size() && !fp; ++k) {
      if (k != own && polyhedra[k].contains(x)) fp = true;
    }
    PointStatus s = PointStatus::kCorrect;
    if (fn && fp) s = PointStatus::kBoth;
    else if (fn) s = PointStatus::kFalseNegative;
    else if (fp) s = PointStatus::kFalsePositive;
    out.status[i] = s;
    if (s != PointStatus::kCorrect) out.misexplained.push_back(i);
  }
  return out;
}

inline std::size_t cost(std::span<const Polyhedron> polyhedra, const Dataset& data, const ClusterAssignment& ca) {
  return classify_points(polyhedra, data, ca).misexplained.size();
}

// Size-weighted count of groups with at least one misexplained member.
inline std::size_t grouped_cost(std::span<const Polyhedron> polyhedra, std::span<const Group> groups,
                                const Dataset& data, const ClusterAssignment& ca) {
  const Classification cls = classify_points(polyhedra, data, ca);
  std::size_t total = 0;
  for (const Group& g : groups) {
    if (g.members.empty()) throw std::invalid_argument("empty group");
    bool bad = false;
    for (std::size_t i : g.members) {
      if (i >= data.n()) throw std::out_of_range("group member out of range");
      if (ca[i] != g.cluster) throw std::invalid_argument("group mixes points from different clusters");
      bad = bad || cls.status[i] != PointStatus::kCorrect;
    }
    if (bad) total += g.size();
  }
  return total;
}

struct DescriptionMetrics {
  double accuracy = 0.0;
  int sparsity = 0;
  int complexity = 0;
};

struct Selection {
  HalfSpace halfspace;
  int cluster = 0;
};

inline std::vector<Polyhedron> polyhedra_from(std::span<const Selection> selected, int k) {
  std::vector<Polyhedron> polys(static_cast<std::size_t>(k));
  for (const auto& s : selected) {
    if (s.cluster < 0 || s.cluster >= k) throw std::invalid_argument("selection cluster out of range");
    polys[static_cast<std::size_t>(s.cluster)].halfspaces.push_back(s.halfspace);
  }
  return polys;
}

inline int sparsity(std::span<const Selection> selected) {
  std::set<std::size_t> used;
  for (const auto& s : selected) {
    for (std::size_t d = 0; d < s.halfspace.w.size(); ++d) {
      if (s.halfspace.w[d] != 0) used.insert(d);
    }
  }
  return static_cast<int>(used.size());
}

inline DescriptionMetrics description_metrics(std::span<const Selection> selected, const Dataset& data,
                                              const ClusterAssignment& ca) {
  const auto polys = polyhedra_from(selected, ca.k());
  DescriptionMetrics m;
  m.accuracy = 1.0 - static_cast<double>(cost(polys, data, ca)) / static_cast<double>(data.n());
  m.sparsity = sparsity(selected);
  for (const auto& s : selected) m.complexity += s.halfspace.complexity();
  return m;
}

struct DescriptionSolution {
  std::vector<Polyhedron> polyhedra;
  std::vector<PointStatus> status;
  std::vector<std::size_t> misexplained;
  DescriptionMetrics metrics;
  // Clusters that received the fallback bounding half-space.
  std::vector<int> padded_clusters;

  std::vector<Selection> selections() const {
    std::vector<Selection> out;
    for (std::size_t k = 0; k < polyhedra.size(); ++k) {
      for (const auto& h : polyhedra[k].halfspaces) out.push_back({h, static_cast<int>(k)});
    }
    return out;
  }
};

inline DescriptionSolution make_solution(std::vector<Polyhedron> polyhedra, const Dataset& data,
                                         const ClusterAssignment& ca) {
  DescriptionSolution sol;
  sol.polyhedra = std::move(polyhedra);
  Classification cls = classify_points(sol.polyhedra, data, ca);
  sol.status = std::move(cls.status);
  sol.misexplained = std::move(cls.misexplained);
  const auto sel = sol.selections();
  sol.metrics = description_metrics(sel, data, ca);
  return sol;
}

struct PdpConfig {
  int W = 1;
  int beta = 1;
  double theta1 = 1.0;
  double theta2 = 0.0;
  // Unset means the two-stage procedure picks the budget.
  std::optional<double> alpha;
  double kappa = 0.05;
  int p = 10;
  double epsilon_strict = 1e-4;
  double colgen_time_limit_s = 300.0;
  double pricing_time_limit_s = 30.0;
  int max_iterations = 500;

  void validate() const {
    if (W < 1) throw std::invalid_argument("W must be a positive integer");
    if (beta < 1) throw std::invalid_argument("beta must be a positive integer");
    if (theta1 < 0 || theta2 < 0 || theta1 + theta2 <= 0) {
      throw std::invalid_argument("objective weights must be nonnegative with a positive sum");
    }
    if (alpha && (*alpha < 0 || !std::isfinite(*alpha))) throw std::invalid_argument("alpha must be >= 0");
    if (kappa < 0) throw std::invalid_argument("kappa must be >= 0");
    if (p < 1) throw std::invalid_argument("p must be >= 1");
    if (!(epsilon_strict > 0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(colgen_time_limit_s > 0) || !(pricing_time_limit_s > 0)) {
      throw std::invalid_argument("time limits must be positive");
    }
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  }

  static PdpConfig lc() { return PdpConfig{}; }
  static PdpConfig sp() {
    PdpConfig c;
    c.theta1 = 1e-6;
    c.theta2 = 1.0;
    return c;
  }
};

}  // namespace polydesc
