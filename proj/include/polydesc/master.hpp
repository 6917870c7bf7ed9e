#pragma once

// Master problem over an explicit candidate pool. A "unit" is either a data
// point or a group; a point is a unit whose box is degenerate.

#include <algorithm>
#include <functional>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <set>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "polydesc/data_model.hpp"
#include "polydesc/milp.hpp"

namespace polydesc {

struct Unit {
  int cluster = 0;
  double weight = 1.0;
  std::vector<double> low;
  std::vector<double> high;
  std::vector<std::size_t> members;
};

class UnitSet {
 public:
  UnitSet() = default;
  UnitSet(std::vector<Unit> units, int k, std::size_t m) : units_(std::move(units)), k_(k), m_(m) {
    if (units_.empty()) throw std::invalid_argument("no units");
    sizes_.assign(static_cast<std::size_t>(k_), 0);
    for (const Unit& u : units_) {
      if (u.cluster < 0 || u.cluster >= k_) throw std::invalid_argument("unit cluster out of range");
      if (u.low.size() != m_ || u.high.size() != m_) throw std::invalid_argument("unit box dimension mismatch");
      ++sizes_[static_cast<std::size_t>(u.cluster)];
    }
  }

  static UnitSet points(const Dataset& data, const ClusterAssignment& ca) {
    check_consistent(data, ca);
    std::vector<Unit> units;
    units.reserve(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
      std::vector<double> x(data.row(i).begin(), data.row(i).end());
      units.push_back({ca[i], 1.0, x, x, {i}});
    }
    return UnitSet(std::move(units), ca.k(), data.m());
  }

  // Points restricted to `rows` (used for subsampling); members keep their
  // original indices.
  static UnitSet points(const Dataset& data, const ClusterAssignment& ca, std::span<const std::size_t> rows) {
    check_consistent(data, ca);
    std::vector<Unit> units;
    for (std::size_t i : rows) {
      std::vector<double> x(data.row(i).begin(), data.row(i).end());
      units.push_back({ca[i], 1.0, x, x, {i}});
    }
    return UnitSet(std::move(units), ca.k(), data.m());
  }

  static UnitSet groups(std::span<const Group> groups, int k, std::size_t m) {
    std::vector<Unit> units;
    units.reserve(groups.size());
    for (const Group& g : groups) {
      units.push_back({g.cluster, static_cast<double>(g.size()), g.low, g.high, g.members});
    }
    return UnitSet(std::move(units), k, m);
  }

  std::size_t size() const { return units_.size(); }
  const Unit& operator[](std::size_t u) const { return units_[u]; }
  const std::vector<Unit>& units() const { return units_; }
  int k() const { return k_; }
  std::size_t m() const { return m_; }
  std::size_t cluster_size(int k) const { return sizes_[static_cast<std::size_t>(k)]; }
  std::size_t outside_count(int k) const { return units_.size() - cluster_size(k); }
  double max_abs() const {
    double best = 0.0;
    for (const Unit& u : units_) {
      for (std::size_t d = 0; d < m_; ++d) best = std::max({best, std::abs(u.low[d]), std::abs(u.high[d])});
    }
    return best;
  }

 private:
  std::vector<Unit> units_;
  int k_ = 0;
  std::size_t m_ = 0;
  std::vector<std::size_t> sizes_;
};

// Half-spaces plus, per half-space, the units whose box is not fully inside
// (H^+, point mode: w.x > b) and the units whose box is fully outside (H^-).
class CandidatePool {
 public:
  explicit CandidatePool(const UnitSet& units) : units_(&units) {}

  // Returns false for a duplicate (exact w, b rounded at 1e-9).
  bool add(HalfSpace h) {
    if (h.w.size() != units_->m()) throw std::invalid_argument("half-space dimension mismatch");
    if (h.nnz() == 0) throw std::invalid_argument("half-space with w = 0");
    if (!keys_.insert(HalfSpaceKey(h)).second) return false;
    std::vector<std::uint32_t> not_inside, outside;
    for (std::size_t u = 0; u < units_->size(); ++u) {
      const Unit& un = (*units_)[u];
      if (!h.box_inside(un.low, un.high)) not_inside.push_back(static_cast<std::uint32_t>(u));
      if (h.box_outside(un.low, un.high)) outside.push_back(static_cast<std::uint32_t>(u));
    }
    halfspaces_.push_back(std::move(h));
    not_inside_.push_back(std::move(not_inside));
    outside_.push_back(std::move(outside));
    return true;
  }

  std::size_t add_all(std::span<const HalfSpace> hs) {
    std::size_t added = 0;
    for (const auto& h : hs) added += add(h);
    return added;
  }

  bool contains(const HalfSpace& h) const { return keys_.count(HalfSpaceKey(h)) > 0; }

  std::size_t size() const { return halfspaces_.size(); }
  bool empty() const { return halfspaces_.empty(); }
  const HalfSpace& operator[](std::size_t h) const { return halfspaces_[h]; }
  const std::vector<HalfSpace>& halfspaces() const { return halfspaces_; }
  const std::vector<std::uint32_t>& not_inside(std::size_t h) const { return not_inside_[h]; }
  const std::vector<std::uint32_t>& outside(std::size_t h) const { return outside_[h]; }
  const UnitSet& units() const { return *units_; }

  // H_u^+ and H_u^- for one unit, as half-space indices.
  std::vector<std::size_t> violated_by(std::size_t u) const {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < size(); ++h) {
      if (std::binary_search(not_inside_[h].begin(), not_inside_[h].end(), u)) out.push_back(h);
    }
    return out;
  }
  std::vector<std::size_t> excluding(std::size_t u) const {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < size(); ++h) {
      if (std::binary_search(outside_[h].begin(), outside_[h].end(), u)) out.push_back(h);
    }
    return out;
  }
  // H_d
  std::vector<std::size_t> using_feature(std::size_t d) const {
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < size(); ++h) {
      if (halfspaces_[h].w[d] != 0) out.push_back(h);
    }
    return out;
  }

 private:
  const UnitSet* units_;
  std::vector<HalfSpace> halfspaces_;
  std::vector<std::vector<std::uint32_t>> not_inside_;
  std::vector<std::vector<std::uint32_t>> outside_;
  HalfSpaceSet keys_;
};

inline CandidatePool compute_membership_sets(std::span<const HalfSpace> halfspaces, const UnitSet& units) {
  CandidatePool pool(units);
  pool.add_all(halfspaces);
  return pool;
}

enum class MasterMode { kLp, kIp };
enum class MasterObjective { kInterpretability, kMinAlpha };

struct MasterOptions {
  MasterMode mode = MasterMode::kLp;
  MasterObjective objective = MasterObjective::kInterpretability;
  double theta1 = 1.0;
  double theta2 = 0.0;
  // Error budget for the interpretability objective.
  double alpha = 0.0;
  // Restrict to one cluster's block (valid only when the blocks decouple).
  std::optional<int> block;
};

// Variable and row indices of a built master model.
struct MasterLayout {
  std::vector<std::vector<std::ptrdiff_t>> z;    // [h][k], -1 when absent
  std::vector<std::ptrdiff_t> xi;                // [u], -1 when absent
  std::vector<std::ptrdiff_t> y;                 // [d], -1 when absent
  std::ptrdiff_t alpha = -1;
  std::vector<std::vector<std::ptrdiff_t>> fp_row;  // [u][k]: foreign unit kept out of P_k
  std::vector<std::ptrdiff_t> fn_row;               // [u]: own cluster contains the unit
  std::vector<std::ptrdiff_t> feature_row;          // [d]: feature use
  std::ptrdiff_t budget_row = -1;
};

struct MasterModel {
  milp::LinearModel model;
  MasterLayout layout;
};

// Big-M for the false-negative row of a unit: the number of units outside
// its cluster. Some optimal solution uses no redundant half-space, and an
// irredundant polyhedron has at most one half-space per excluded unit.
inline double false_negative_m(const UnitSet& units, std::size_t u) {
  return std::max<double>(1.0, static_cast<double>(units.outside_count(units[u].cluster)));
}

inline double feature_m(const UnitSet& units) {
  double total = 0.0;
  for (int k = 0; k < units.k(); ++k) total += static_cast<double>(units.outside_count(k));
  return std::max(1.0, total);
}

inline bool uses_feature_rows(const MasterOptions& opt) {
  return opt.objective == MasterObjective::kInterpretability && opt.theta2 > 0.0;
}

inline MasterModel build_master(const CandidatePool& pool, const MasterOptions& opt) {
  if (pool.empty()) throw std::invalid_argument("empty candidate pool");
  const UnitSet& units = pool.units();
  const std::size_t H = pool.size();
  const std::size_t U = units.size();
  const std::size_t m = units.m();
  const int K = units.k();
  const bool ip = opt.mode == MasterMode::kIp;
  const bool interp = opt.objective == MasterObjective::kInterpretability;
  const bool features = uses_feature_rows(opt);
  const double t1 = interp ? opt.theta1 : 0.0;
  auto in_block = [&](int k) { return !opt.block || *opt.block == k; };

  MasterModel mm;
  auto& model = mm.model;
  auto& L = mm.layout;
  L.z.assign(H, std::vector<std::ptrdiff_t>(static_cast<std::size_t>(K), -1));
  L.xi.assign(U, -1);
  L.y.assign(m, -1);
  L.fp_row.assign(U, std::vector<std::ptrdiff_t>(static_cast<std::size_t>(K), -1));
  L.fn_row.assign(U, -1);
  L.feature_row.assign(m, -1);

  // z carries no upper bound in LP mode: values above one never help, and
  // leaving the bound out keeps pooled reduced costs equal to rho.
  const double z_ub = ip ? 1.0 : milp::kInf;
  for (std::size_t h = 0; h < H; ++h) {
    for (int k = 0; k < K; ++k) {
      if (!in_block(k)) continue;
      L.z[h][static_cast<std::size_t>(k)] = static_cast<std::ptrdiff_t>(model.add_variable(
          "z_" + std::to_string(h) + "_" + std::to_string(k), 0.0, z_ub, ip, t1 * pool[h].complexity()));
    }
  }
  double total_weight = 0.0;
  for (std::size_t u = 0; u < U; ++u) total_weight += units[u].weight;
  for (std::size_t u = 0; u < U; ++u) {
    // A unit heavier than the budget can never be misexplained.
    const bool blocked = interp && units[u].weight > opt.alpha;
    if (blocked && opt.block) continue;
    L.xi[u] = static_cast<std::ptrdiff_t>(
        model.add_variable("xi_" + std::to_string(u), 0.0, blocked ? 0.0 : 1.0, ip, 0.0));
    // Everything misexplained is a feasible start for the error rows.
    if (!interp) model.set_start_at_upper(static_cast<std::size_t>(L.xi[u]), true);
  }
  if (features) {
    for (std::size_t d = 0; d < m; ++d) {
      L.y[d] = static_cast<std::ptrdiff_t>(model.add_variable("y_" + std::to_string(d), 0.0, 1.0, ip, opt.theta2));
    }
  }
  if (!interp) {
    bool integral = true;
    for (std::size_t u = 0; u < U; ++u) integral = integral && units[u].weight == std::floor(units[u].weight);
    L.alpha = static_cast<std::ptrdiff_t>(model.add_variable("alpha", 0.0, total_weight, integral && ip, 1.0));
  }

  // Column lists per row, gathered from the per-half-space unit lists.
  std::vector<std::vector<std::size_t>> excl(U), viol(U);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::uint32_t u : pool.outside(h)) excl[u].push_back(h);
    for (std::uint32_t u : pool.not_inside(h)) viol[u].push_back(h);
  }

  for (std::size_t u = 0; u < U; ++u) {
    const int own = units[u].cluster;
    for (int k = 0; k < K; ++k) {
      if (k == own || !in_block(k)) continue;
      std::vector<milp::Term> terms;
      if (L.xi[u] >= 0) terms.push_back({static_cast<std::size_t>(L.xi[u]), 1.0});
      for (std::size_t h : excl[u]) terms.push_back({static_cast<std::size_t>(L.z[h][static_cast<std::size_t>(k)]), 1.0});
      L.fp_row[u][static_cast<std::size_t>(k)] = static_cast<std::ptrdiff_t>(model.add_constraint(
          std::move(terms), milp::Sense::kGreaterEqual, 1.0, "fp_" + std::to_string(u) + "_" + std::to_string(k)));
    }
    if (!in_block(own)) continue;
    std::vector<milp::Term> terms;
    if (L.xi[u] >= 0) terms.push_back({static_cast<std::size_t>(L.xi[u]), false_negative_m(units, u)});
    for (std::size_t h : viol[u]) terms.push_back({static_cast<std::size_t>(L.z[h][static_cast<std::size_t>(own)]), -1.0});
    L.fn_row[u] = static_cast<std::ptrdiff_t>(
        model.add_constraint(std::move(terms), milp::Sense::kGreaterEqual, 0.0, "fn_" + std::to_string(u)));
  }
  if (features) {
    const double md = feature_m(units);
    for (std::size_t d = 0; d < m; ++d) {
      std::vector<milp::Term> terms;
      for (std::size_t h = 0; h < H; ++h) {
        if (pool[h].w[d] == 0) continue;
        for (int k = 0; k < K; ++k) {
          if (L.z[h][static_cast<std::size_t>(k)] >= 0) {
            terms.push_back({static_cast<std::size_t>(L.z[h][static_cast<std::size_t>(k)]), 1.0});
          }
        }
      }
      terms.push_back({static_cast<std::size_t>(L.y[d]), -md});
      L.feature_row[d] = static_cast<std::ptrdiff_t>(
          model.add_constraint(std::move(terms), milp::Sense::kLessEqual, 0.0, "feat_" + std::to_string(d)));
    }
  }
  if (!opt.block) {
    std::vector<milp::Term> terms;
    for (std::size_t u = 0; u < U; ++u) {
      if (L.xi[u] >= 0) terms.push_back({static_cast<std::size_t>(L.xi[u]), units[u].weight});
    }
    if (interp) {
      L.budget_row = static_cast<std::ptrdiff_t>(
          model.add_constraint(std::move(terms), milp::Sense::kLessEqual, opt.alpha, "budget"));
    } else {
      terms.push_back({static_cast<std::size_t>(L.alpha), -1.0});
      L.budget_row = static_cast<std::ptrdiff_t>(
          model.add_constraint(std::move(terms), milp::Sense::kLessEqual, 0.0, "budget"));
    }
  }
  return mm;
}

// Duals of the master LP that drive pricing. mu[u][k] is zero for k = k_u.
struct DualBundle {
  std::vector<std::vector<double>> mu;
  std::vector<double> gamma;
  std::vector<double> phi;
};

enum class MasterStatus { kOptimal, kFeasible, kInfeasible, kTimeLimit };

inline const char* to_string(MasterStatus s) {
  switch (s) {
    case MasterStatus::kOptimal: return "optimal";
    case MasterStatus::kFeasible: return "feasible";
    case MasterStatus::kInfeasible: return "infeasible";
    case MasterStatus::kTimeLimit: return "time_limit";
  }
  return "?";
}

struct MasterSolveResult {
  MasterStatus status = MasterStatus::kInfeasible;
  double objective = milp::kInf;
  double bound = -milp::kInf;
  std::vector<std::vector<double>> z;  // [h][k]
  std::vector<double> xi;
  std::vector<double> y;
  double alpha = 0.0;
  std::optional<DualBundle> duals;  // LP mode only

  std::vector<std::pair<std::size_t, int>> selected(double threshold = 0.5) const {
    std::vector<std::pair<std::size_t, int>> out;
    for (std::size_t h = 0; h < z.size(); ++h) {
      for (std::size_t k = 0; k < z[h].size(); ++k) {
        if (z[h][k] > threshold) out.emplace_back(h, static_cast<int>(k));
      }
    }
    return out;
  }
};

namespace detail {

inline double clamp_sign(double v, bool nonneg) {
  if (nonneg) return v < 0.0 ? (v > -1e-9 ? 0.0 : v) : v;
  return v > 0.0 ? (v < 1e-9 ? 0.0 : v) : v;
}

// Unit-level evaluation of a selection: which units are misexplained in the
// model's own (box) semantics.
inline std::vector<char> unit_errors(const CandidatePool& pool, std::span<const std::pair<std::size_t, int>> sel) {
  const UnitSet& units = pool.units();
  const int K = units.k();
  const std::size_t U = units.size();
  std::vector<char> err(U, 0);
  // covered[u][k]: some selected (h, k) has u fully outside.
  std::vector<std::vector<char>> covered(U, std::vector<char>(static_cast<std::size_t>(K), 0));
  for (auto [h, k] : sel) {
    for (std::uint32_t u : pool.outside(h)) covered[u][static_cast<std::size_t>(k)] = 1;
    for (std::uint32_t u : pool.not_inside(h)) {
      if (units[u].cluster == k) err[u] = 1;
    }
  }
  for (std::size_t u = 0; u < U; ++u) {
    for (int k = 0; k < K; ++k) {
      if (k != units[u].cluster && !covered[u][static_cast<std::size_t>(k)]) err[u] = 1;
    }
  }
  return err;
}

// Keeps a half-space only if it excludes a foreign unit that the ones kept
// before it (in the given order) do not. Dropping the others cannot add
// error, and the survivors respect the false-negative big-M.
inline std::vector<std::pair<std::size_t, int>> prune_redundant(
    const CandidatePool& pool, std::span<const std::tuple<double, std::size_t, int>> ordered) {
  const UnitSet& units = pool.units();
  std::vector<std::vector<char>> covered(static_cast<std::size_t>(units.k()), std::vector<char>(units.size(), 0));
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& [v, h, k] : ordered) {
    auto& cov = covered[static_cast<std::size_t>(k)];
    bool fresh = false;
    for (std::uint32_t u : pool.outside(h)) {
      if (units[u].cluster != k && !cov[u]) {
        cov[u] = 1;
        fresh = true;
      }
    }
    if (fresh) out.emplace_back(h, k);
  }
  return out;
}

// Completes a z selection into a full assignment of the master model.
inline std::vector<double> complete_assignment(const MasterModel& mm, const CandidatePool& pool,
                                               std::span<const std::pair<std::size_t, int>> sel,
                                               const MasterOptions& opt) {
  const auto& L = mm.layout;
  std::vector<double> x(mm.model.num_variables(), 0.0);
  for (auto [h, k] : sel) {
    const auto idx = L.z[h][static_cast<std::size_t>(k)];
    if (idx < 0) return {};
    x[static_cast<std::size_t>(idx)] = 1.0;
  }
  const auto err = unit_errors(pool, sel);
  double weight = 0.0;
  for (std::size_t u = 0; u < err.size(); ++u) {
    if (!err[u]) continue;
    if (L.xi[u] < 0) return {};
    x[static_cast<std::size_t>(L.xi[u])] = 1.0;
    weight += pool.units()[u].weight;
  }
  if (uses_feature_rows(opt)) {
    for (std::size_t d = 0; d < L.y.size(); ++d) {
      for (auto [h, k] : sel) {
        if (pool[h].w[d] != 0) x[static_cast<std::size_t>(L.y[d])] = 1.0;
      }
    }
  }
  if (L.alpha >= 0) x[static_cast<std::size_t>(L.alpha)] = weight;
  return x;
}

inline MasterSolveResult unpack(const MasterModel& mm, const CandidatePool& pool, std::span<const double> x) {
  const auto& L = mm.layout;
  MasterSolveResult r;
  r.z.assign(pool.size(), std::vector<double>(static_cast<std::size_t>(pool.units().k()), 0.0));
  for (std::size_t h = 0; h < pool.size(); ++h) {
    for (std::size_t k = 0; k < r.z[h].size(); ++k) {
      if (L.z[h][k] >= 0) r.z[h][k] = x[static_cast<std::size_t>(L.z[h][k])];
    }
  }
  r.xi.assign(L.xi.size(), 0.0);
  for (std::size_t u = 0; u < L.xi.size(); ++u) {
    if (L.xi[u] >= 0) r.xi[u] = x[static_cast<std::size_t>(L.xi[u])];
  }
  r.y.assign(L.y.size(), 0.0);
  for (std::size_t d = 0; d < L.y.size(); ++d) {
    if (L.y[d] >= 0) r.y[d] = x[static_cast<std::size_t>(L.y[d])];
  }
  if (L.alpha >= 0) {
    r.alpha = x[static_cast<std::size_t>(L.alpha)];
  } else {
    for (std::size_t u = 0; u < r.xi.size(); ++u) r.alpha += pool.units()[u].weight * r.xi[u];
  }
  return r;
}

inline DualBundle extract_duals(const MasterModel& mm, const CandidatePool& pool, std::span<const double> duals) {
  const auto& L = mm.layout;
  const UnitSet& units = pool.units();
  DualBundle db;
  db.mu.assign(units.size(), std::vector<double>(static_cast<std::size_t>(units.k()), 0.0));
  db.gamma.assign(units.size(), 0.0);
  db.phi.assign(units.m(), 0.0);
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t k = 0; k < L.fp_row[u].size(); ++k) {
      if (L.fp_row[u][k] >= 0) db.mu[u][k] = std::max(0.0, clamp_sign(duals[static_cast<std::size_t>(L.fp_row[u][k])], true));
    }
    if (L.fn_row[u] >= 0) db.gamma[u] = std::max(0.0, clamp_sign(duals[static_cast<std::size_t>(L.fn_row[u])], true));
  }
  for (std::size_t d = 0; d < units.m(); ++d) {
    if (L.feature_row[d] >= 0) db.phi[d] = std::min(0.0, clamp_sign(duals[static_cast<std::size_t>(L.feature_row[d])], false));
  }
  return db;
}

// Greedy separation of  xi_u + sum_{v in T} xi_v >= 1  for a unit u foreign
// to cluster k, where T meets the set S_h of own units that h fails to
// contain, for every pool half-space h excluding u. Keeping u out of P_k
// needs some such h, and then all of S_h is misexplained.
inline std::optional<std::vector<std::uint32_t>> separate_cover(const CandidatePool& pool, std::size_t u, int k,
                                                                std::span<const std::size_t> excl,
                                                                const std::function<double(std::size_t)>& xi) {
  const UnitSet& units = pool.units();
  const double xu = xi(u);
  if (xu >= 1.0 - 1e-6) return std::nullopt;
  std::vector<std::vector<std::uint32_t>> sets;
  for (std::size_t h : excl) {
    std::vector<std::uint32_t> sh;
    for (std::uint32_t v : pool.not_inside(h)) {
      if (units[v].cluster == k) sh.push_back(v);
    }
    if (sh.empty()) return std::nullopt;  // h costs nothing
    sets.push_back(std::move(sh));
  }
  std::vector<char> hit(sets.size(), 0);
  std::size_t left = sets.size();
  std::vector<std::uint32_t> T;
  double cost = xu;
  std::unordered_map<std::uint32_t, std::size_t> gain;
  while (left > 0) {
    gain.clear();
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (hit[s]) continue;
      for (std::uint32_t v : sets[s]) ++gain[v];
    }
    std::uint32_t best = 0;
    double best_ratio = -1.0;
    for (const auto& [v, g] : gain) {
      const double r = static_cast<double>(g) / (xi(v) + 1e-3);
      if (r > best_ratio || (r == best_ratio && v < best)) {
        best_ratio = r;
        best = v;
      }
    }
    T.push_back(best);
    cost += xi(best);
    if (cost >= 1.0 - 1e-6) return std::nullopt;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (!hit[s] && std::find(sets[s].begin(), sets[s].end(), best) != sets[s].end()) {
        hit[s] = 1;
        --left;
      }
    }
  }
  std::sort(T.begin(), T.end());
  return T;
}

// Root cutting planes  xi_u + sum_{v in T} xi_v >= 1  from separate_cover,
// added while the LP relaxation violates them. They hold at every integer
// point; the full family is too large to write out up front. The LP is
// warm started across rounds.
inline void add_root_cuts(MasterModel& mm, const CandidatePool& pool, const milp::Deadline& deadline,
                          int max_rounds = 30) {
  const UnitSet& units = pool.units();
  const auto& L = mm.layout;
  std::vector<std::vector<std::size_t>> excl(units.size());
  for (std::size_t h = 0; h < pool.size(); ++h) {
    for (std::uint32_t u : pool.outside(h)) excl[u].push_back(h);
  }
  std::set<std::vector<std::uint32_t>> covers;
  milp::detail::DenseSimplex simplex(mm.model, milp::Tolerances{});
  for (int round = 0; round < max_rounds && !deadline.expired(); ++round) {
    const milp::LpStatus status = simplex.solve(deadline);
    if (status != milp::LpStatus::kOptimal) return;
    const milp::LpSolution lp = simplex.extract(status, mm.model);
    // absent xi: the unit can never be misexplained
    const std::function<double(std::size_t)> xi = [&](std::size_t u) {
      return L.xi[u] < 0 ? 0.0 : lp.values[static_cast<std::size_t>(L.xi[u])];
    };
    std::vector<milp::Constraint> fresh;
    for (int k = 0; k < units.k(); ++k) {
      std::vector<std::size_t> ek;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].cluster == k || L.xi[u] < 0) continue;
        ek.clear();
        for (std::size_t h : excl[u]) {
          if (L.z[h][static_cast<std::size_t>(k)] >= 0) ek.push_back(h);
        }
        if (ek.empty()) continue;
        auto T = separate_cover(pool, u, k, ek, xi);
        if (!T) continue;
        std::vector<std::uint32_t> key = *T;
        key.insert(std::lower_bound(key.begin(), key.end(), static_cast<std::uint32_t>(u)), static_cast<std::uint32_t>(u));
        if (!covers.insert(key).second) continue;
        std::vector<milp::Term> terms;
        for (std::uint32_t v : key) {
          if (L.xi[v] >= 0) terms.push_back({static_cast<std::size_t>(L.xi[v]), 1.0});
        }
        mm.model.add_constraint(terms, milp::Sense::kGreaterEqual, 1.0, "cover_" + std::to_string(u));
        fresh.push_back(mm.model.constraints().back());
      }
    }
    if (fresh.empty()) return;
    simplex.add_rows(fresh);
  }
}

}  // namespace detail

struct MasterSolveOptions {
  double time_limit_s = milp::kInf;
  // Known feasible selections offered to the IP as starting incumbents.
  std::vector<std::vector<std::pair<std::size_t, int>>> warm_starts;
};

namespace detail {

inline MasterSolveResult solve_single(const CandidatePool& pool, const MasterOptions& opt,
                                      const MasterSolveOptions& sopt) {
  MasterModel mm = build_master(pool, opt);
  const milp::Deadline deadline(sopt.time_limit_s);
  MasterSolveResult res;
  if (opt.mode == MasterMode::kLp) {
    milp::LpSolution lp = milp::solve_lp(mm.model, deadline);
    if (lp.status == milp::LpStatus::kTimeLimit) {
      res.status = MasterStatus::kTimeLimit;
      return res;
    }
    if (lp.status != milp::LpStatus::kOptimal) {
      res.status = MasterStatus::kInfeasible;
      return res;
    }
    res = unpack(mm, pool, lp.values);
    res.status = MasterStatus::kOptimal;
    res.objective = res.bound = lp.objective;
    res.duals = extract_duals(mm, pool, lp.duals);
    return res;
  }

  // cut rounds get at most half of the budget
  add_root_cuts(mm, pool, milp::Deadline(0.5 * sopt.time_limit_s));

  milp::MilpOptions mo;
  mo.time_limit_s = std::max(0.0, deadline.remaining_s());
  std::vector<int> priority(mm.model.num_variables(), 0);
  for (auto idx : mm.layout.y) {
    if (idx >= 0) priority[static_cast<std::size_t>(idx)] = 1;
  }
  mo.priority = priority;
  mo.branch_until_fixed = uses_feature_rows(opt);
  mo.heuristic = [&](std::span<const double> x, const milp::NodeBounds&) -> std::optional<std::vector<double>> {
    std::optional<std::vector<double>> best;
    double best_obj = milp::kInf;
    for (double cut : {0.5, 1e-6}) {
      std::vector<std::tuple<double, std::size_t, int>> picked;
      for (std::size_t h = 0; h < pool.size(); ++h) {
        for (std::size_t k = 0; k < mm.layout.z[h].size(); ++k) {
          const auto idx = mm.layout.z[h][k];
          if (idx >= 0 && x[static_cast<std::size_t>(idx)] > cut) {
            picked.emplace_back(-x[static_cast<std::size_t>(idx)], h, static_cast<int>(k));
          }
        }
      }
      std::sort(picked.begin(), picked.end());
      auto cand = complete_assignment(mm, pool, prune_redundant(pool, picked), opt);
      if (cand.empty() || mm.model.max_violation(cand) > 1e-9) continue;
      const double obj = mm.model.evaluate_objective(cand);
      if (obj < best_obj) {
        best_obj = obj;
        best = std::move(cand);
      }
    }
    return best;
  };
  for (const auto& sel : sopt.warm_starts) {
    auto cand = complete_assignment(mm, pool, sel, opt);
    if (!cand.empty()) mo.initial_solutions.push_back(std::move(cand));
  }
  if (opt.objective == MasterObjective::kMinAlpha) {
    // selecting nothing misexplains every foreign unit but is always feasible
    auto none = complete_assignment(mm, pool, {}, opt);
    if (!none.empty() && mm.model.max_violation(none) <= 1e-9) mo.initial_solutions.push_back(std::move(none));
  }
  milp::MilpSolution ms = milp::solve_milp(mm.model, mo);
  switch (ms.status) {
    case milp::MilpStatus::kInfeasible: res.status = MasterStatus::kInfeasible; return res;
    case milp::MilpStatus::kTimeLimit: res.status = MasterStatus::kTimeLimit; return res;
    case milp::MilpStatus::kOptimal: break;
    case milp::MilpStatus::kFeasible: break;
  }
  res = unpack(mm, pool, ms.values);
  res.status = ms.status == milp::MilpStatus::kOptimal ? MasterStatus::kOptimal : MasterStatus::kFeasible;
  res.objective = ms.objective;
  res.bound = ms.bound;
  return res;
}

}  // namespace detail

// The K cluster blocks decouple when no misexplanation is allowed and the
// feature rows are absent.
inline bool decomposes(const CandidatePool& pool, const MasterOptions& opt) {
  if (opt.objective != MasterObjective::kInterpretability || uses_feature_rows(opt)) return false;
  const UnitSet& units = pool.units();
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (units[u].weight <= opt.alpha) return false;
  }
  return units.k() > 1;
}

// Solves the master; the decoupled case runs one solver per cluster
// concurrently and merges the blocks.
inline MasterSolveResult solve_master(const CandidatePool& pool, const MasterOptions& opt,
                                      const MasterSolveOptions& sopt = {}) {
  if (!decomposes(pool, opt) || opt.block) return detail::solve_single(pool, opt, sopt);
  const int K = pool.units().k();
  std::vector<std::future<MasterSolveResult>> jobs;
  for (int k = 0; k < K; ++k) {
    MasterOptions bo = opt;
    bo.block = k;
    MasterSolveOptions so = sopt;
    for (auto& sel : so.warm_starts) {
      std::erase_if(sel, [k](const auto& p) { return p.second != k; });
    }
    jobs.push_back(std::async(std::launch::async, [&pool, bo, so] { return detail::solve_single(pool, bo, so); }));
  }
  std::vector<MasterSolveResult> parts;
  for (auto& j : jobs) parts.push_back(j.get());
  MasterSolveResult res;
  res.status = MasterStatus::kOptimal;
  res.objective = 0.0;
  res.bound = 0.0;
  res.z.assign(pool.size(), std::vector<double>(static_cast<std::size_t>(K), 0.0));
  res.xi.assign(pool.units().size(), 0.0);
  res.y.assign(pool.units().m(), 0.0);
  if (opt.mode == MasterMode::kLp) {
    res.duals = DualBundle{};
    res.duals->mu.assign(pool.units().size(), std::vector<double>(static_cast<std::size_t>(K), 0.0));
    res.duals->gamma.assign(pool.units().size(), 0.0);
    res.duals->phi.assign(pool.units().m(), 0.0);
  }
  for (int k = 0; k < K; ++k) {
    const MasterSolveResult& p = parts[static_cast<std::size_t>(k)];
    if (p.status == MasterStatus::kInfeasible || p.status == MasterStatus::kTimeLimit) {
      MasterSolveResult bad;
      bad.status = p.status;
      return bad;
    }
    if (p.status == MasterStatus::kFeasible) res.status = MasterStatus::kFeasible;
    res.objective += p.objective;
    res.bound += p.bound;
    for (std::size_t h = 0; h < pool.size(); ++h) res.z[h][static_cast<std::size_t>(k)] = p.z[h][static_cast<std::size_t>(k)];
    if (p.duals) {
      for (std::size_t u = 0; u < pool.units().size(); ++u) {
        res.duals->mu[u][static_cast<std::size_t>(k)] = p.duals->mu[u][static_cast<std::size_t>(k)];
        if (pool.units()[u].cluster == k) res.duals->gamma[u] = p.duals->gamma[u];
      }
    }
  }
  return res;
}

// Polyhedra from an IP result; misexplanation is recounted on raw points.
inline DescriptionSolution extract_solution(const MasterSolveResult& res, const CandidatePool& pool,
                                            const Dataset& data, const ClusterAssignment& ca) {
  if (res.status != MasterStatus::kOptimal && res.status != MasterStatus::kFeasible) {
    throw std::invalid_argument("no master solution to extract");
  }
  std::vector<Polyhedron> polys(static_cast<std::size_t>(ca.k()));
  for (auto [h, k] : res.selected()) polys[static_cast<std::size_t>(k)].halfspaces.push_back(pool[h]);
  std::vector<int> padded;
  for (int k = 0; k < ca.k(); ++k) {
    auto& P = polys[static_cast<std::size_t>(k)];
    if (!P.halfspaces.empty()) continue;
    // Fallback: the cluster's upper bounding half-space on feature 0.
    double hi = -milp::kInf;
    for (std::size_t i : ca.members(k)) hi = std::max(hi, data.at(i, 0));
    HalfSpace h;
    h.w.assign(data.m(), 0);
    h.w[0] = 1;
    h.b = hi;
    P.halfspaces.push_back(h);
    padded.push_back(k);
  }
  DescriptionSolution sol = make_solution(std::move(polys), data, ca);
  sol.padded_clusters = std::move(padded);
  return sol;
}

}  // namespace polydesc
