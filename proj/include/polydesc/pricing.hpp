#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polydesc/data_model.hpp"
#include "polydesc/master.hpp"
#include "polydesc/milp.hpp"

namespace polydesc {

// rho of the pair (h, k). `theta1` is the complexity weight of the active
// master objective (zero in the min-alpha stage).
inline double reduced_cost(const HalfSpace& h, int k, const DualBundle& duals, double theta1, const UnitSet& units) {
  double rho = theta1 * h.complexity();
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Unit& un = units[u];
    if (un.cluster == k) {
      const double g = duals.gamma[u];
      if (g != 0.0 && !h.box_inside(un.low, un.high)) rho += g;
    } else {
      const double mu = duals.mu[u][static_cast<std::size_t>(k)];
      if (mu != 0.0 && h.box_outside(un.low, un.high)) rho -= mu;
    }
  }
  for (std::size_t d = 0; d < h.w.size(); ++d) {
    if (h.w[d] != 0) rho -= duals.phi[d];
  }
  return rho;
}

struct PricingSettings {
  int W = 1;
  int beta = 1;
  double theta1 = 1.0;
  double epsilon = 1e-4;
};

struct PricingLayout {
  std::vector<std::size_t> wp, wm, yp, ym;
  std::vector<std::size_t> delta_units;  // unit index per delta variable
  std::vector<std::size_t> delta;
  std::size_t b = 0;
  double b_bound = 0.0;
  double big_m = 0.0;
};

struct PricingModel {
  milp::LinearModel model;
  PricingLayout layout;
  int cluster = 0;
};

// Units whose dual is nonzero for cluster k; the others cannot change the
// pricing objective.
inline std::vector<std::size_t> priced_units(int k, const DualBundle& duals, const UnitSet& units) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const double v = units[u].cluster == k ? duals.gamma[u] : duals.mu[u][static_cast<std::size_t>(k)];
    if (v > 0.0) out.push_back(u);
  }
  return out;
}

inline PricingModel build_pricing(int k, const DualBundle& duals, const PricingSettings& s, const UnitSet& units) {
  const std::size_t m = units.m();
  if (s.W < 1) throw std::invalid_argument("W must be >= 1");
  if (s.beta < 1 || static_cast<std::size_t>(s.beta) > m) throw std::invalid_argument("beta must lie in 1..m");
  PricingModel pm;
  pm.cluster = k;
  auto& model = pm.model;
  auto& L = pm.layout;
  const double x_max = std::max(units.max_abs(), 1e-12);
  L.b_bound = s.W * s.beta * x_max;
  L.big_m = 2.0 * s.W * s.beta * x_max + L.b_bound + s.epsilon;

  for (std::size_t d = 0; d < m; ++d) {
    L.wp.push_back(model.add_variable("wp_" + std::to_string(d), 0, s.W, true));
    L.wm.push_back(model.add_variable("wm_" + std::to_string(d), 0, s.W, true));
  }
  for (std::size_t d = 0; d < m; ++d) {
    const double c = s.theta1 - duals.phi[d];
    L.yp.push_back(model.add_variable("yp_" + std::to_string(d), 0, 1, true, c));
    L.ym.push_back(model.add_variable("ym_" + std::to_string(d), 0, 1, true, c));
  }
  L.b = model.add_variable("b", -L.b_bound, L.b_bound, false);
  double offset = s.theta1;
  for (std::size_t u : priced_units(k, duals, units)) {
    const Unit& un = units[u];
    const bool inside_cluster = un.cluster == k;
    const double dual = inside_cluster ? duals.gamma[u] : duals.mu[u][static_cast<std::size_t>(k)];
    L.delta_units.push_back(u);
    const std::size_t dv = model.add_variable("delta_" + std::to_string(u), 0, 1, true, dual);
    L.delta.push_back(dv);
    std::vector<milp::Term> terms;
    if (inside_cluster) {
      // w+ x^H - w- x^L - b <= M delta
      for (std::size_t d = 0; d < m; ++d) {
        if (un.high[d] != 0.0) terms.push_back({L.wp[d], un.high[d]});
        if (un.low[d] != 0.0) terms.push_back({L.wm[d], -un.low[d]});
      }
      terms.push_back({L.b, -1.0});
      terms.push_back({dv, -L.big_m});
      model.add_constraint(std::move(terms), milp::Sense::kLessEqual, 0.0, "in_" + std::to_string(u));
    } else {
      // w+ x^L - w- x^H - b >= eps - M delta
      offset -= dual;
      for (std::size_t d = 0; d < m; ++d) {
        if (un.low[d] != 0.0) terms.push_back({L.wp[d], un.low[d]});
        if (un.high[d] != 0.0) terms.push_back({L.wm[d], -un.high[d]});
      }
      terms.push_back({L.b, -1.0});
      terms.push_back({dv, L.big_m});
      model.add_constraint(std::move(terms), milp::Sense::kGreaterEqual, s.epsilon, "out_" + std::to_string(u));
    }
  }
  model.set_objective_offset(offset);
  std::vector<milp::Term> support, mass;
  for (std::size_t d = 0; d < m; ++d) {
    model.add_constraint({{L.yp[d], 1.0}, {L.wp[d], -1.0}}, milp::Sense::kLessEqual, 0.0);
    model.add_constraint({{L.wp[d], 1.0}, {L.yp[d], -static_cast<double>(s.W)}}, milp::Sense::kLessEqual, 0.0);
    model.add_constraint({{L.ym[d], 1.0}, {L.wm[d], -1.0}}, milp::Sense::kLessEqual, 0.0);
    model.add_constraint({{L.wm[d], 1.0}, {L.ym[d], -static_cast<double>(s.W)}}, milp::Sense::kLessEqual, 0.0);
    model.add_constraint({{L.yp[d], 1.0}, {L.ym[d], 1.0}}, milp::Sense::kLessEqual, 1.0);
    support.push_back({L.yp[d], 1.0});
    support.push_back({L.ym[d], 1.0});
    mass.push_back({L.wp[d], 1.0});
    mass.push_back({L.wm[d], 1.0});
  }
  model.add_constraint(std::move(support), milp::Sense::kLessEqual, s.beta, "l0");
  model.add_constraint(std::move(mass), milp::Sense::kGreaterEqual, 1.0, "nonzero");
  return pm;
}

inline HalfSpace decode_pricing(const PricingModel& pm, std::span<const double> x) {
  HalfSpace h;
  const auto& L = pm.layout;
  h.w.resize(L.wp.size());
  for (std::size_t d = 0; d < L.wp.size(); ++d) {
    h.w[d] = static_cast<int>(std::lround(x[L.wp[d]] - x[L.wm[d]]));
  }
  h.b = x[L.b];
  return h;
}

struct PricingCandidate {
  HalfSpace halfspace;
  double rho = 0.0;              // reduced_cost of the decoded half-space
  double model_objective = 0.0;  // pricing-model objective of the same point
};

enum class PricingStatus { kOptimal, kFeasible, kTimeLimit };

struct PricingOutcome {
  int cluster = 0;
  PricingStatus status = PricingStatus::kOptimal;
  double best_objective = milp::kInf;  // pricing optimum (or best found)
  std::vector<PricingCandidate> candidates;  // rho < -1e-6, sorted by rho
};

struct PricingOptions {
  double time_limit_s = 30.0;
  std::size_t max_columns = 25;
  // Node oracle enumerates coefficient vectors when the node admits at
  // most this many.
  std::size_t enumeration_limit = 4'000'000;
  bool use_oracle = true;
  double negative_tol = 1e-6;
};

namespace detail {

// Exact solver for a pricing node: enumerate primitive integer w allowed by
// the node bounds, then sweep b over the breakpoints of the objective.
class PricingOracle {
 public:
  PricingOracle(const PricingModel& pm, const DualBundle& duals, const PricingSettings& s, const UnitSet& units,
                const PricingOptions& opt, const milp::Deadline& deadline)
      : pm_(pm), duals_(duals), s_(s), units_(units), opt_(opt), deadline_(deadline) {
    const auto& L = pm.layout;
    for (std::size_t j = 0; j < L.delta_units.size(); ++j) {
      const Unit& un = units[L.delta_units[j]];
      if (un.cluster == pm.cluster) {
        in_.push_back(j);
      } else {
        out_.push_back(j);
      }
    }
  }

  std::optional<milp::NodeResolution> operator()(const milp::NodeBounds& nb) {
    const auto& L = pm_.layout;
    const std::size_t m = L.wp.size();
    // Allowed coefficient values per feature.
    std::vector<std::vector<int>> allowed(m);
    for (std::size_t d = 0; d < m; ++d) {
      auto lo = [&](std::size_t v) { return static_cast<int>(std::lround(nb.lower[v])); };
      auto hi = [&](std::size_t v) { return static_cast<int>(std::lround(nb.upper[v])); };
      if (lo(L.wp[d]) == 0 && lo(L.wm[d]) == 0 && lo(L.yp[d]) == 0 && lo(L.ym[d]) == 0) allowed[d].push_back(0);
      if (hi(L.yp[d]) >= 1 && lo(L.ym[d]) == 0 && lo(L.wm[d]) == 0) {
        for (int v = std::max(1, lo(L.wp[d])); v <= std::min(s_.W, hi(L.wp[d])); ++v) allowed[d].push_back(v);
      }
      if (hi(L.ym[d]) >= 1 && lo(L.yp[d]) == 0 && lo(L.wp[d]) == 0) {
        for (int v = std::max(1, lo(L.wm[d])); v <= std::min(s_.W, hi(L.wm[d])); ++v) allowed[d].push_back(-v);
      }
      if (allowed[d].empty()) return milp::NodeResolution{};
    }
    // Count supports of size 1..beta (DP over features).
    std::vector<double> ways(static_cast<std::size_t>(s_.beta) + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t d = 0; d < m; ++d) {
      const double nz = static_cast<double>(allowed[d].size()) - (allowed[d].front() == 0 ? 1 : 0);
      const bool zero_ok = allowed[d].front() == 0;
      std::vector<double> next(ways.size(), 0.0);
      for (std::size_t c = 0; c < ways.size(); ++c) {
        if (zero_ok) next[c] += ways[c];
        if (c + 1 < ways.size()) next[c + 1] += ways[c] * nz;
      }
      ways = std::move(next);
    }
    double count = 0.0;
    for (std::size_t c = 1; c < ways.size(); ++c) count += ways[c];
    if (count > static_cast<double>(opt_.enumeration_limit)) return std::nullopt;

    b_lo_ = nb.lower[L.b];
    b_hi_ = nb.upper[L.b];
    delta_lo_.resize(L.delta.size());
    delta_hi_.resize(L.delta.size());
    for (std::size_t j = 0; j < L.delta.size(); ++j) {
      delta_lo_[j] = nb.lower[L.delta[j]] > 0.5;
      delta_hi_[j] = nb.upper[L.delta[j]] > 0.5;
    }
    node_best_ = milp::kInf;
    node_best_w_.clear();
    std::vector<int> w(m, 0);
    enumerate(allowed, w, 0, 0);
    milp::NodeResolution res;
    if (node_best_w_.empty()) return res;
    res.feasible = true;
    res.objective = node_best_;
    res.values = assignment(node_best_w_, node_best_b_);
    return res;
  }

  std::vector<PricingCandidate> take_candidates() { return std::move(found_); }
  bool truncated() const { return truncated_; }

 private:
  void enumerate(const std::vector<std::vector<int>>& allowed, std::vector<int>& w, std::size_t d, int support) {
    if (truncated_) return;
    if (d == w.size()) {
      if (support == 0) return;
      int g = 0;
      for (int v : w) g = std::gcd(g, std::abs(v));
      if (g != 1) return;
      if ((++visited_ & 1023) == 0 && deadline_.expired()) {
        truncated_ = true;
        return;
      }
      evaluate(w);
      return;
    }
    for (int v : allowed[d]) {
      if (v != 0 && support == s_.beta) continue;
      w[d] = v;
      enumerate(allowed, w, d + 1, support + (v != 0));
    }
    w[d] = 0;
  }

  void evaluate(const std::vector<int>& w) {
    const auto& L = pm_.layout;
    HalfSpace h{w, 0.0};
    double base = s_.theta1 * h.complexity();
    for (std::size_t d = 0; d < w.size(); ++d) {
      if (w[d] != 0) base -= duals_.phi[d];
    }
    double lo = b_lo_, hi = b_hi_;
    // Breakpoints: in-units cost gamma while b < P; out-units gain mu while b <= T.
    ins_.clear();
    outs_.clear();
    for (std::size_t j : in_) {
      const Unit& un = units_[L.delta_units[j]];
      const double g = duals_.gamma[L.delta_units[j]];
      const double p = h.box_max(un.low, un.high);
      if (delta_lo_[j]) {
        base += g;
      } else if (!delta_hi_[j]) {
        lo = std::max(lo, p);
      } else {
        ins_.push_back({p, g});
      }
    }
    for (std::size_t j : out_) {
      const Unit& un = units_[L.delta_units[j]];
      const double mu = duals_.mu[L.delta_units[j]][static_cast<std::size_t>(pm_.cluster)];
      const double t = h.box_min(un.low, un.high) - s_.epsilon;
      // Every out-unit's gain is taken up front and handed back while it is
      // not excluded.
      base -= mu;
      if (delta_lo_[j]) {
        base += mu;
      } else if (!delta_hi_[j]) {
        hi = std::min(hi, t);
      } else {
        outs_.push_back({t, mu});
      }
    }
    if (lo > hi) return;
    // Objective: base + sum_{in: P > b} gamma + sum_{out: T < b} mu.
    std::sort(ins_.begin(), ins_.end(), [](const Ev& a, const Ev& b) { return a.v > b.v; });
    std::sort(outs_.begin(), outs_.end(), [](const Ev& a, const Ev& b) { return a.v > b.v; });
    cands_.clear();
    cands_.push_back(lo);
    cands_.push_back(hi);
    for (const Ev& e : ins_) {
      if (e.v > lo && e.v < hi) cands_.push_back(e.v);
    }
    for (const Ev& e : outs_) {
      if (e.v > lo && e.v < hi) cands_.push_back(e.v);
    }
    std::sort(cands_.begin(), cands_.end(), std::greater<>());
    cands_.erase(std::unique(cands_.begin(), cands_.end()), cands_.end());
    double in_cost = 0.0;   // sum over P > b
    double out_lost = 0.0;  // sum over T < b
    double total_out = 0.0;
    for (const Ev& e : outs_) total_out += e.w;
    double excluded = 0.0;  // sum over T >= b
    std::size_t pi = 0, ti = 0;
    double best = milp::kInf, best_b = hi;
    for (double b : cands_) {
      while (pi < ins_.size() && ins_[pi].v > b) in_cost += ins_[pi++].w;
      while (ti < outs_.size() && outs_[ti].v >= b) excluded += outs_[ti++].w;
      out_lost = total_out - excluded;
      const double f = base + in_cost + out_lost;
      if (f < best) {
        best = f;
        best_b = b;
      }
    }
    if (best < node_best_) {
      node_best_ = best;
      node_best_w_ = w;
      node_best_b_ = best_b;
    }
    if (best < -opt_.negative_tol) record(w, best_b, best);
  }

  void record(const std::vector<int>& w, double b, double obj) {
    if (found_.size() >= opt_.max_columns && obj >= found_.back().model_objective) return;
    PricingCandidate c{HalfSpace{w, b}, 0.0, obj};
    auto pos = std::upper_bound(found_.begin(), found_.end(), obj,
                                [](double v, const PricingCandidate& x) { return v < x.model_objective; });
    found_.insert(pos, std::move(c));
    if (found_.size() > opt_.max_columns) found_.pop_back();
  }

  std::vector<double> assignment(const std::vector<int>& w, double b) const {
    const auto& L = pm_.layout;
    std::vector<double> x(pm_.model.num_variables(), 0.0);
    for (std::size_t d = 0; d < w.size(); ++d) {
      if (w[d] > 0) {
        x[L.wp[d]] = w[d];
        x[L.yp[d]] = 1;
      } else if (w[d] < 0) {
        x[L.wm[d]] = -w[d];
        x[L.ym[d]] = 1;
      }
    }
    x[L.b] = b;
    HalfSpace h{w, b};
    for (std::size_t j = 0; j < L.delta.size(); ++j) {
      const Unit& un = units_[L.delta_units[j]];
      bool on;
      if (un.cluster == pm_.cluster) {
        on = h.box_max(un.low, un.high) > b;
      } else {
        on = !(h.box_min(un.low, un.high) - s_.epsilon >= b);
      }
      if (delta_lo_[j]) on = true;
      x[L.delta[j]] = on ? 1.0 : 0.0;
    }
    return x;
  }

  struct Ev {
    double v;
    double w;
  };

  const PricingModel& pm_;
  const DualBundle& duals_;
  const PricingSettings& s_;
  const UnitSet& units_;
  const PricingOptions& opt_;
  const milp::Deadline& deadline_;
  std::vector<std::size_t> in_, out_;
  std::vector<Ev> ins_, outs_;
  std::vector<double> cands_;
  std::vector<char> delta_lo_, delta_hi_;
  double b_lo_ = 0.0, b_hi_ = 0.0;
  double node_best_ = milp::kInf;
  std::vector<int> node_best_w_;
  double node_best_b_ = 0.0;
  std::vector<PricingCandidate> found_;
  std::size_t visited_ = 0;
  bool truncated_ = false;
};

}  // namespace detail

inline PricingOutcome solve_pricing(const PricingModel& pm, const DualBundle& duals, const PricingSettings& s,
                                    const UnitSet& units, const PricingOptions& opt = {},
                                    const CandidatePool* existing = nullptr) {
  const milp::Deadline deadline(opt.time_limit_s);
  detail::PricingOracle oracle(pm, duals, s, units, opt, deadline);
  std::vector<PricingCandidate> found;
  milp::MilpOptions mo;
  mo.time_limit_s = opt.time_limit_s;
  std::vector<int> priority(pm.model.num_variables(), 0);
  for (std::size_t d = 0; d < pm.layout.yp.size(); ++d) {
    priority[pm.layout.yp[d]] = 1;
    priority[pm.layout.ym[d]] = 1;
  }
  mo.priority = priority;
  mo.branch_until_fixed = true;
  if (opt.use_oracle) {
    mo.oracle = [&oracle](const milp::NodeBounds& nb) { return oracle(nb); };
  }
  mo.on_solution = [&](std::span<const double> x, double obj) {
    if (obj < -opt.negative_tol) found.push_back({decode_pricing(pm, x), 0.0, obj});
  };
  const milp::MilpSolution ms = milp::solve_milp(pm.model, mo);

  PricingOutcome out;
  out.cluster = pm.cluster;
  if (ms.status == milp::MilpStatus::kTimeLimit) {
    out.status = PricingStatus::kTimeLimit;
  } else if (ms.status == milp::MilpStatus::kFeasible || oracle.truncated()) {
    out.status = PricingStatus::kFeasible;
  }
  if (ms.status == milp::MilpStatus::kOptimal || ms.status == milp::MilpStatus::kFeasible) {
    out.best_objective = ms.objective;
  }
  for (auto& c : oracle.take_candidates()) found.push_back(std::move(c));

  HalfSpaceSet seen;
  std::sort(found.begin(), found.end(),
            [](const PricingCandidate& a, const PricingCandidate& b) { return a.model_objective < b.model_objective; });
  for (auto& c : found) {
    if (c.halfspace.nnz() == 0) continue;
    if (existing && existing->contains(c.halfspace)) continue;
    if (!seen.insert(HalfSpaceKey(c.halfspace)).second) continue;
    c.rho = reduced_cost(c.halfspace, pm.cluster, duals, s.theta1, units);
    if (c.rho >= -opt.negative_tol) continue;
    out.candidates.push_back(std::move(c));
    if (out.candidates.size() >= opt.max_columns) break;
  }
  std::stable_sort(out.candidates.begin(), out.candidates.end(),
                   [](const PricingCandidate& a, const PricingCandidate& b) { return a.rho < b.rho; });
  return out;
}

// Pricing restricted to univariate half-spaces whose thresholds come from a
// fixed per-feature list (both orientations). Used when the candidate
// universe is an explicit split pool.
inline PricingOutcome price_thresholds(int k, const DualBundle& duals, double theta1, const UnitSet& units,
                                       const std::vector<std::vector<double>>& thresholds, std::size_t max_columns,
                                       const CandidatePool* existing = nullptr, double negative_tol = 1e-6) {
  PricingOutcome out;
  out.cluster = k;
  const std::size_t m = units.m();
  struct Ev {
    double v;
    double w;
  };
  std::vector<PricingCandidate> found;
  for (std::size_t d = 0; d < m; ++d) {
    const auto& ts = thresholds[d];
    if (ts.empty()) continue;
    const double base = theta1 * 2.0 - duals.phi[d];
    for (int sign : {1, -1}) {
      // Half-space sign*x_d <= sign*t. In-units pay gamma when
      // sign*corner_max > sign*t; out-units gain mu when sign*corner_min > sign*t.
      std::vector<Ev> ins, outs;
      for (std::size_t u = 0; u < units.size(); ++u) {
        const Unit& un = units[u];
        if (un.cluster == k) {
          if (duals.gamma[u] > 0) ins.push_back({sign > 0 ? un.high[d] : -un.low[d], duals.gamma[u]});
        } else {
          const double mu = duals.mu[u][static_cast<std::size_t>(k)];
          if (mu > 0) outs.push_back({sign > 0 ? un.low[d] : -un.high[d], mu});
        }
      }
      std::sort(ins.begin(), ins.end(), [](const Ev& a, const Ev& b) { return a.v > b.v; });
      std::sort(outs.begin(), outs.end(), [](const Ev& a, const Ev& b) { return a.v > b.v; });
      std::vector<double> bs;
      bs.reserve(ts.size());
      for (double t : ts) bs.push_back(sign > 0 ? t : -t);
      std::sort(bs.begin(), bs.end(), std::greater<>());
      double in_cost = 0.0, gain = 0.0;
      std::size_t pi = 0, oi = 0;
      for (double b : bs) {
        while (pi < ins.size() && ins[pi].v > b) in_cost += ins[pi++].w;
        while (oi < outs.size() && outs[oi].v > b) gain += outs[oi++].w;
        const double rho = base + in_cost - gain;
        out.best_objective = std::min(out.best_objective, rho);
        if (rho < -negative_tol) {
          HalfSpace h;
          h.w.assign(m, 0);
          h.w[d] = sign;
          h.b = b;
          found.push_back({std::move(h), rho, rho});
        }
      }
    }
  }
  std::sort(found.begin(), found.end(),
            [](const PricingCandidate& a, const PricingCandidate& b) { return a.rho < b.rho; });
  for (auto& c : found) {
    if (existing && existing->contains(c.halfspace)) continue;
    out.candidates.push_back(std::move(c));
    if (out.candidates.size() >= max_columns) break;
  }
  return out;
}

}  // namespace polydesc
