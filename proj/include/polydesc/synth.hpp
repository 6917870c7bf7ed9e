#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "polydesc/colgen.hpp"
#include "polydesc/data_model.hpp"
#include "polydesc/grouping.hpp"
#include "polydesc/master.hpp"
#include "polydesc/prep.hpp"

namespace polydesc {

struct SynthConfig {
  int k = 3;
  std::size_t m = 10;
  std::size_t n = 2000;  // total points, spread evenly over the clusters
  double sigma = 0.1;    // per-coordinate standard deviation
  std::uint64_t seed = 1;

  void validate() const {
    if (k < 1 || m < 1 || n < static_cast<std::size_t>(k)) throw std::invalid_argument("synth: need k >= 1, m >= 1, n >= k");
    if (!(sigma >= 0) || !std::isfinite(sigma)) throw std::invalid_argument("synth: sigma must be finite and >= 0");
  }
};

struct SynthInstance {
  Dataset data;
  ClusterAssignment assignment;
  std::vector<std::vector<double>> centers;
};

inline SynthInstance generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(cfg.k), std::vector<double>(cfg.m));
  for (auto& c : centers) {
    for (double& v : c) v = unif(rng);
  }
  std::vector<double> flat;
  std::vector<int> labels;
  flat.reserve(cfg.n * cfg.m);
  const std::size_t K = static_cast<std::size_t>(cfg.k);
  for (std::size_t c = 0; c < K; ++c) {
    const std::size_t count = cfg.n / K + (c < cfg.n % K ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t d = 0; d < cfg.m; ++d) flat.push_back(centers[c][d] + cfg.sigma * noise(rng));
      labels.push_back(static_cast<int>(c));
    }
  }
  std::vector<std::string> names;
  for (std::size_t d = 0; d < cfg.m; ++d) names.push_back("x" + std::to_string(d));
  Dataset data(std::move(flat), cfg.n, cfg.m, std::move(names));
  return {std::move(data), ClusterAssignment(std::move(labels), cfg.k), std::move(centers)};
}

// Smallest epsilon whose per-cluster cuts give `target` groups in total, or
// the closest count reachable when merge heights tie.
inline double epsilon_for_count(std::span<const Dendrogram> trees, std::size_t n, std::size_t target) {
  std::vector<double> heights;
  for (const auto& t : trees) {
    for (const auto& mg : t.merges()) heights.push_back(mg.height);
  }
  std::sort(heights.begin(), heights.end());
  if (target >= n || heights.empty()) return 0.0;
  const std::size_t merges = std::min(n - std::max<std::size_t>(target, 1), heights.size());
  if (merges == 0) return 0.0;
  return heights[merges - 1];
}

struct MinAlphaRun {
  std::vector<Polyhedron> polyhedra;
  double unit_error = 0.0;
  MasterStatus status = MasterStatus::kInfeasible;
  std::size_t pool_size = 0;
};

// Error-minimizing solve over univariate splits at the given thresholds.
inline MinAlphaRun solve_min_alpha(const UnitSet& units, const std::vector<std::vector<double>>& thresholds,
                                   double time_limit_s) {
  const std::size_t m = units.m();
  const int K = units.k();
  CandidatePool pool(units);
  // Seed: per cluster and feature, the tightest split above the cluster's
  // maximum and below its minimum.
  for (int k = 0; k < K; ++k) {
    for (std::size_t d = 0; d < m; ++d) {
      double lo = milp::kInf, hi = -milp::kInf;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (units[u].cluster != k) continue;
        lo = std::min(lo, units[u].low[d]);
        hi = std::max(hi, units[u].high[d]);
      }
      const auto& ts = thresholds[d];
      auto up = std::lower_bound(ts.begin(), ts.end(), hi);
      if (up != ts.end()) {
        HalfSpace h;
        h.w.assign(m, 0);
        h.w[d] = 1;
        h.b = *up;
        pool.add(h);
      }
      auto down = std::upper_bound(ts.begin(), ts.end(), lo);
      if (down != ts.begin()) {
        HalfSpace h;
        h.w.assign(m, 0);
        h.w[d] = -1;
        h.b = -*std::prev(down);
        pool.add(h);
      }
    }
  }
  MinAlphaRun out;
  if (pool.empty()) {
    out.polyhedra.assign(static_cast<std::size_t>(K), Polyhedron{});
    out.unit_error = 0.0;
    for (const Unit& u : units.units()) out.unit_error += u.weight;
    out.status = MasterStatus::kOptimal;
    return out;
  }
  ColgenOptions opt;
  opt.objective = MasterObjective::kMinAlpha;
  opt.theta1 = 0.0;
  opt.thresholds = &thresholds;
  opt.max_columns_per_cluster = 50;
  StageResult st = detail::run_stage(pool, opt, time_limit_s, {});
  out.status = st.ip.status;
  out.pool_size = pool.size();
  out.polyhedra.assign(static_cast<std::size_t>(K), Polyhedron{});
  if (st.ip.status == MasterStatus::kOptimal || st.ip.status == MasterStatus::kFeasible) {
    for (auto [h, k] : st.ip.selected()) out.polyhedra[static_cast<std::size_t>(k)].halfspaces.push_back(pool[h]);
    out.unit_error = detail::selection_error(pool, st.ip);
  }
  return out;
}

struct ExperimentOptions {
  std::vector<std::size_t> sample_sizes{100, 200, 400, 800};
  int trials = 10;
  int subsample_draws = 5;
  double solve_time_limit_s = 60.0;
  std::function<void(const std::string&)> log;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;
  std::size_t groups = 0;  // achieved group count
  double epsilon = 0.0;
  double grouped_error = 0.0;
  std::vector<double> subsampled_errors;  // one per draw
};

struct ExperimentRow {
  double sigma = 0.0;
  std::size_t sample_size = 0;
  std::string method;
  double mean_error = 0.0;
  double std_error = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<ExperimentRow> rows;
};

inline double full_error(std::span<const Polyhedron> polys, const Dataset& data, const ClusterAssignment& ca) {
  return static_cast<double>(cost(polys, data, ca)) / static_cast<double>(data.n());
}

inline std::vector<TrialRecord> run_trial(const SynthConfig& cfg, int trial, const ExperimentOptions& opt) {
  SynthConfig c = cfg;
  c.seed = detail::splitmix64(cfg.seed + static_cast<std::uint64_t>(trial) * 0x9e3779b97f4a7c15ULL);
  const SynthInstance inst = generate(c);
  const auto thresholds = midpoint_thresholds(inst.data);
  const auto trees = build_dendrograms(inst.data, inst.assignment);
  std::mt19937_64 rng(detail::splitmix64(c.seed ^ 0x5eedULL));
  std::vector<TrialRecord> out;
  for (std::size_t size : opt.sample_sizes) {
    TrialRecord rec;
    rec.trial = trial;
    rec.seed = c.seed;
    rec.sample_size = size;
    rec.epsilon = epsilon_for_count(trees, inst.data.n(), size);
    const auto groups = cut_all(trees, rec.epsilon, inst.data);
    rec.groups = groups.size();
    const UnitSet gu = UnitSet::groups(groups, inst.assignment.k(), inst.data.m());
    const MinAlphaRun g = solve_min_alpha(gu, thresholds, opt.solve_time_limit_s);
    rec.grouped_error = full_error(g.polyhedra, inst.data, inst.assignment);
    // Subsamples match the achieved group count.
    std::vector<std::size_t> all(inst.data.n());
    std::iota(all.begin(), all.end(), 0);
    for (int draw = 0; draw < opt.subsample_draws; ++draw) {
      std::vector<std::size_t> rows;
      std::sample(all.begin(), all.end(), std::back_inserter(rows), rec.groups, rng);
      // Every cluster must be represented for the unit set to be valid.
      std::vector<char> seen(static_cast<std::size_t>(inst.assignment.k()), 0);
      for (std::size_t i : rows) seen[static_cast<std::size_t>(inst.assignment[i])] = 1;
      for (int k = 0; k < inst.assignment.k(); ++k) {
        if (!seen[static_cast<std::size_t>(k)]) rows.push_back(inst.assignment.members(k).front());
      }
      const UnitSet su = UnitSet::points(inst.data, inst.assignment, rows);
      const MinAlphaRun s = solve_min_alpha(su, thresholds, opt.solve_time_limit_s);
      rec.subsampled_errors.push_back(full_error(s.polyhedra, inst.data, inst.assignment));
    }
    if (opt.log) {
      std::string line = "trial " + std::to_string(trial) + " size " + std::to_string(size) + " groups " +
                         std::to_string(rec.groups) + " grouped " + std::to_string(rec.grouped_error) + " subsampled";
      for (double e : rec.subsampled_errors) line += " " + std::to_string(e);
      opt.log(line);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline ExperimentResult group_vs_subsample_experiment(const SynthConfig& cfg, const ExperimentOptions& opt) {
  cfg.validate();
  if (opt.trials < 1 || opt.subsample_draws < 1) throw std::invalid_argument("trials and draws must be >= 1");
  for (std::size_t s : opt.sample_sizes) {
    if (s < static_cast<std::size_t>(cfg.k) || s > cfg.n) {
      throw std::invalid_argument("sample size " + std::to_string(s) + " outside [k, n]");
    }
  }
  ExperimentResult res;
  const unsigned width = std::max(1u, std::thread::hardware_concurrency());
  for (int first = 0; first < opt.trials; first += static_cast<int>(width)) {
    std::vector<std::future<std::vector<TrialRecord>>> jobs;
    for (int t = first; t < std::min(opt.trials, first + static_cast<int>(width)); ++t) {
      jobs.push_back(std::async(std::launch::async, [&, t] { return run_trial(cfg, t, opt); }));
    }
    for (auto& j : jobs) {
      auto recs = j.get();
      res.trials.insert(res.trials.end(), recs.begin(), recs.end());
    }
  }
  auto stats = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  for (std::size_t s : opt.sample_sizes) {
    std::vector<double> g, sub;
    for (const auto& r : res.trials) {
      if (r.sample_size != s) continue;
      g.push_back(r.grouped_error);
      // Draws are averaged within a trial first.
      sub.push_back(std::accumulate(r.subsampled_errors.begin(), r.subsampled_errors.end(), 0.0) /
                    static_cast<double>(r.subsampled_errors.size()));
    }
    auto [gm, gs] = stats(g);
    auto [sm, ss] = stats(sub);
    res.rows.push_back({cfg.sigma, s, "grouped", gm, gs});
    res.rows.push_back({cfg.sigma, s, "subsampled", sm, ss});
  }
  return res;
}

inline void write_experiment_csv(std::ostream& os, std::span<const ExperimentRow> rows) {
  os << "sigma,sample_size,method,mean_error,std_error\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.sigma << ',' << r.sample_size << ',' << r.method << ',' << r.mean_error << ',' << r.std_error << '\n';
  }
}

}  // namespace polydesc
