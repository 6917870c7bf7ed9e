#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <future>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polydesc/data_model.hpp"
#include "polydesc/master.hpp"
#include "polydesc/milp.hpp"
#include "polydesc/pricing.hpp"

namespace polydesc {

// Per cluster and feature: {x_d <= v} for the p largest distinct values v
// and {x_d >= v} for the p smallest.
inline std::vector<HalfSpace> initial_pool(const Dataset& data, const ClusterAssignment& ca, int p) {
  check_consistent(data, ca);
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  std::vector<HalfSpace> out;
  HalfSpaceSet seen;
  auto push = [&](std::size_t d, int sign, double b) {
    HalfSpace h;
    h.w.assign(data.m(), 0);
    h.w[d] = sign;
    h.b = b;
    if (seen.insert(HalfSpaceKey(h)).second) out.push_back(std::move(h));
  };
  for (int k = 0; k < ca.k(); ++k) {
    const auto members = ca.members(k);
    for (std::size_t d = 0; d < data.m(); ++d) {
      std::set<double> values;
      for (std::size_t i : members) values.insert(data.at(i, d));
      int taken = 0;
      for (auto it = values.rbegin(); it != values.rend() && taken < p; ++it, ++taken) push(d, 1, *it);
      taken = 0;
      for (auto it = values.begin(); it != values.end() && taken < p; ++it, ++taken) push(d, -1, -*it);
    }
  }
  return out;
}

// Midpoints between consecutive distinct values of each feature; together
// with both orientations these realize every univariate split.
inline std::vector<std::vector<double>> midpoint_thresholds(const Dataset& data) {
  std::vector<std::vector<double>> out(data.m());
  for (std::size_t d = 0; d < data.m(); ++d) {
    std::vector<double> v;
    v.reserve(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) v.push_back(data.at(i, d));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t j = 0; j + 1 < v.size(); ++j) out[d].push_back(0.5 * (v[j] + v[j + 1]));
  }
  return out;
}

inline std::vector<HalfSpace> univariate_splits(const Dataset& data) {
  std::vector<HalfSpace> out;
  const auto ts = midpoint_thresholds(data);
  for (std::size_t d = 0; d < data.m(); ++d) {
    for (double t : ts[d]) {
      for (int sign : {1, -1}) {
        HalfSpace h;
        h.w.assign(data.m(), 0);
        h.w[d] = sign;
        h.b = sign * t;
        out.push_back(std::move(h));
      }
    }
  }
  return out;
}

struct ColgenIteration {
  int iteration = 0;
  double objective = 0.0;
  std::vector<std::size_t> columns_added;  // per cluster
  double min_rho = 0.0;
  double seconds = 0.0;
};

enum class Termination { kPricedOut, kTimeLimit, kIterationLimit };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::kPricedOut: return "priced_out";
    case Termination::kTimeLimit: return "time_limit";
    case Termination::kIterationLimit: return "iteration_limit";
  }
  return "?";
}

struct ColgenTrace {
  std::vector<ColgenIteration> iterations;
  Termination reason = Termination::kPricedOut;
};

class AlphaInfeasible : public std::runtime_error {
 public:
  AlphaInfeasible()
      : std::runtime_error("alpha infeasible: the restricted master has no solution under this budget; "
                           "use the two-stage procedure to find a feasible alpha") {}
};

struct ColgenOptions {
  MasterObjective objective = MasterObjective::kInterpretability;
  double theta1 = 1.0;
  double theta2 = 0.0;
  double alpha = 0.0;
  int W = 1;
  int beta = 1;
  double epsilon = 1e-4;
  double time_limit_s = 300.0;
  double pricing_time_limit_s = 30.0;
  int max_iterations = 500;
  std::size_t max_columns_per_cluster = 25;
  // When set, pricing searches only these univariate thresholds.
  const std::vector<std::vector<double>>* thresholds = nullptr;
  std::function<void(const ColgenIteration&)> on_iteration;

  MasterOptions master(MasterMode mode) const {
    MasterOptions mo;
    mo.mode = mode;
    mo.objective = objective;
    mo.theta1 = theta1;
    mo.theta2 = theta2;
    mo.alpha = alpha;
    return mo;
  }
  double pricing_theta1() const { return objective == MasterObjective::kInterpretability ? theta1 : 0.0; }
};

struct ColgenResult {
  MasterSolveResult lp;
  ColgenTrace trace;
};

// Column generation on the restricted master LP. Columns are added to
// `pool` in place.
inline ColgenResult run_colgen(CandidatePool& pool, const ColgenOptions& opt) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const milp::Deadline deadline(opt.time_limit_s);
  const UnitSet& units = pool.units();
  const int K = units.k();
  const int beta = std::min<int>(opt.beta, static_cast<int>(units.m()));
  ColgenResult out;
  for (int it = 1;; ++it) {
    MasterSolveOptions so;
    so.time_limit_s = deadline.remaining_s();
    MasterSolveResult lp = solve_master(pool, opt.master(MasterMode::kLp), so);
    if (lp.status == MasterStatus::kInfeasible) throw AlphaInfeasible();
    if (lp.status == MasterStatus::kTimeLimit) {
      if (out.lp.status != MasterStatus::kOptimal) throw milp::SolverError("time limit before the first RMLP solve");
      out.trace.reason = Termination::kTimeLimit;
      break;
    }
    out.lp = lp;
    ColgenIteration rec;
    rec.iteration = it;
    rec.objective = lp.objective;
    rec.columns_added.assign(static_cast<std::size_t>(K), 0);
    rec.min_rho = milp::kInf;

    if (deadline.expired()) {
      rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
      out.trace.iterations.push_back(rec);
      if (opt.on_iteration) opt.on_iteration(rec);
      out.trace.reason = Termination::kTimeLimit;
      break;
    }

    const DualBundle& duals = *lp.duals;
    std::vector<std::future<PricingOutcome>> jobs;
    for (int k = 0; k < K; ++k) {
      jobs.push_back(std::async(std::launch::async, [&, k] {
        if (opt.thresholds) {
          return price_thresholds(k, duals, opt.pricing_theta1(), units, *opt.thresholds,
                                  opt.max_columns_per_cluster, &pool);
        }
        PricingSettings ps{opt.W, beta, opt.pricing_theta1(), opt.epsilon};
        PricingOptions po;
        po.time_limit_s = std::min(opt.pricing_time_limit_s, std::max(0.0, deadline.remaining_s()));
        po.max_columns = opt.max_columns_per_cluster;
        PricingModel pm = build_pricing(k, duals, ps, units);
        return solve_pricing(pm, duals, ps, units, po, &pool);
      }));
    }
    std::vector<PricingOutcome> outcomes;
    for (auto& j : jobs) outcomes.push_back(j.get());
    bool any_timeout = false;
    std::size_t added = 0;
    // Merge in cluster order.
    for (const auto& oc : outcomes) {
      rec.min_rho = std::min(rec.min_rho, oc.best_objective);
      if (oc.status != PricingStatus::kOptimal) any_timeout = true;
      for (const auto& c : oc.candidates) {
        rec.min_rho = std::min(rec.min_rho, c.rho);
        if (pool.add(c.halfspace)) {
          ++rec.columns_added[static_cast<std::size_t>(oc.cluster)];
          ++added;
        }
      }
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
    out.trace.iterations.push_back(rec);
    if (opt.on_iteration) opt.on_iteration(rec);
    if (added == 0) {
      out.trace.reason = any_timeout ? Termination::kTimeLimit : Termination::kPricedOut;
      break;
    }
    if (it >= opt.max_iterations) {
      out.trace.reason = Termination::kIterationLimit;
      // The last pool additions are not reflected in out.lp; re-solve once.
      MasterSolveResult last = solve_master(pool, opt.master(MasterMode::kLp), so);
      if (last.status == MasterStatus::kOptimal) out.lp = last;
      break;
    }
  }
  return out;
}

struct StageResult {
  ColgenTrace trace;
  double rmlp_objective = 0.0;
  MasterSolveResult ip;
  double seconds = 0.0;
};

struct TwoStageResult {
  DescriptionSolution solution;
  std::optional<StageResult> stage1;
  StageResult stage2;
  double alpha_star = 0.0;
  double budget = 0.0;
  std::size_t pool_size = 0;
  // Misexplained weight at the unit level used by the model.
  double unit_error = 0.0;
};

struct SolveContext {
  std::function<void(int stage, const ColgenIteration&)> on_iteration;
  // Explicit threshold universe for pricing (W = beta = 1 only).
  const std::vector<std::vector<double>>* thresholds = nullptr;
  std::vector<HalfSpace> extra_pool;
  bool use_initial_pool = true;
};

namespace detail {

inline StageResult run_stage(CandidatePool& pool, ColgenOptions opt, double budget_s,
                             const std::vector<std::vector<std::pair<std::size_t, int>>>& warm) {
  const auto start = std::chrono::steady_clock::now();
  opt.time_limit_s = budget_s;
  StageResult st;
  ColgenResult cg = run_colgen(pool, opt);
  st.trace = cg.trace;
  st.rmlp_objective = cg.lp.objective;
  const double used = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MasterSolveOptions so;
  // The final IP gets the rest of the stage budget, and never less than a
  // fifth of it.
  so.time_limit_s = std::max(budget_s - used, 0.2 * budget_s);
  so.warm_starts = warm;
  st.ip = solve_master(pool, opt.master(MasterMode::kIp), so);
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return st;
}

inline double selection_error(const CandidatePool& pool, const MasterSolveResult& ip) {
  const auto sel = ip.selected();
  const auto err = unit_errors(pool, sel);
  double w = 0.0;
  for (std::size_t u = 0; u < err.size(); ++u) {
    if (err[u]) w += pool.units()[u].weight;
  }
  return w;
}

}  // namespace detail

// Stage 1 minimizes the misexplanation budget; stage 2 optimizes the
// interpretability objective under (1 + kappa) times that budget. With a
// user-supplied alpha only stage 2 runs.
inline TwoStageResult two_stage_solve(const Dataset& data, const ClusterAssignment& ca, const UnitSet& units,
                                      const PdpConfig& cfg, const SolveContext& ctx = {}) {
  cfg.validate();
  check_consistent(data, ca);
  CandidatePool pool(units);
  if (ctx.use_initial_pool) pool.add_all(initial_pool(data, ca, cfg.p));
  pool.add_all(ctx.extra_pool);
  if (pool.empty()) throw std::invalid_argument("empty candidate pool");

  ColgenOptions base;
  base.W = cfg.W;
  base.beta = cfg.beta;
  base.theta1 = cfg.theta1;
  base.theta2 = cfg.theta2;
  base.epsilon = cfg.epsilon_strict;
  base.pricing_time_limit_s = cfg.pricing_time_limit_s;
  base.max_iterations = cfg.max_iterations;
  base.thresholds = ctx.thresholds;

  TwoStageResult out;
  std::vector<std::vector<std::pair<std::size_t, int>>> warm;
  if (cfg.alpha) {
    out.budget = *cfg.alpha;
  } else {
    ColgenOptions s1 = base;
    s1.objective = MasterObjective::kMinAlpha;
    if (ctx.on_iteration) s1.on_iteration = [&](const ColgenIteration& r) { ctx.on_iteration(1, r); };
    StageResult st = detail::run_stage(pool, s1, cfg.colgen_time_limit_s, {});
    if (st.ip.status != MasterStatus::kOptimal && st.ip.status != MasterStatus::kFeasible) {
      throw milp::SolverError("stage-1 master IP returned no solution");
    }
    out.alpha_star = detail::selection_error(pool, st.ip);
    out.budget = (1.0 + cfg.kappa) * out.alpha_star;
    warm.push_back(st.ip.selected());
    out.stage1 = std::move(st);
  }

  ColgenOptions s2 = base;
  s2.objective = MasterObjective::kInterpretability;
  s2.alpha = out.budget;
  if (ctx.on_iteration) s2.on_iteration = [&](const ColgenIteration& r) { ctx.on_iteration(2, r); };
  out.stage2 = detail::run_stage(pool, s2, cfg.colgen_time_limit_s, warm);
  if (out.stage2.ip.status == MasterStatus::kInfeasible) throw AlphaInfeasible();
  if (out.stage2.ip.status == MasterStatus::kTimeLimit) {
    throw milp::SolverError("stage-2 master IP found no solution within the time limit");
  }
  out.pool_size = pool.size();
  out.unit_error = detail::selection_error(pool, out.stage2.ip);
  out.solution = extract_solution(out.stage2.ip, pool, data, ca);
  return out;
}

}  // namespace polydesc
