#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polydesc/colgen.hpp"
#include "polydesc/data_model.hpp"
#include "polydesc/grouping.hpp"
#include "polydesc/io.hpp"
#include "polydesc/master.hpp"
#include "polydesc/prep.hpp"
#include "polydesc/synth.hpp"

namespace polydesc {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DescribeOptions {
  std::string input;
  std::optional<std::string> target;
  std::optional<std::string> labels;
  bool select_k = false;
  std::string preset = "lc";
  int W = 1;
  int beta = 1;
  int p = 10;
  double kappa = 0.05;
  std::optional<double> alpha;
  std::optional<double> group_eps;
  double time_limit_s = 300.0;
  double pricing_time_limit_s = 30.0;
  std::uint64_t seed = 1;
  std::optional<std::string> out;
  std::optional<std::string> report_out;
};

struct StageSummary {
  bool ran = false;
  double rmlp_objective = 0.0;
  double ip_objective = 0.0;
  double ip_bound = 0.0;
  std::string ip_status;
  std::size_t iterations = 0;
  std::size_t columns = 0;
  std::string termination;
  double seconds = 0.0;
};

struct RunReport {
  DescribeOptions options;
  PdpConfig config;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::string> feature_names;
  std::vector<FeatureScale> scales;
  // clustering
  std::string clustering_source;  // "labels" or "kmeans"
  int k = 0;
  double silhouette = 0.0;
  std::vector<std::pair<int, double>> k_scores;
  std::vector<int> labels;
  std::vector<std::size_t> cluster_sizes;
  // grouping
  std::optional<double> group_eps;
  std::size_t group_count = 0;
  std::size_t max_group = 0;
  // solve
  StageSummary stage1, stage2;
  double alpha_star = 0.0;
  double budget = 0.0;
  double unit_error = 0.0;
  std::size_t pool_size = 0;
  DescriptionSolution solution;
  std::vector<std::pair<std::string, double>> timings;

  json description_json() const {
    json j = description_to_json(solution.polyhedra, feature_names, scales, config_to_json(config));
    j["labels"] = labels;
    return j;
  }

  json to_json() const {
    json clusters = json::array();
    for (std::size_t k = 0; k < solution.polyhedra.size(); ++k) {
      json hs = json::array();
      for (const auto& h : solution.polyhedra[k].halfspaces) hs.push_back(format_halfspace(h, feature_names));
      clusters.push_back({{"id", k}, {"size", cluster_sizes[k]}, {"halfspaces", hs}});
    }
    auto stage = [](const StageSummary& s) {
      if (!s.ran) return json(nullptr);
      return json{{"rmlp_objective", s.rmlp_objective}, {"ip_objective", s.ip_objective},
                  {"ip_bound", s.ip_bound},             {"ip_status", s.ip_status},
                  {"iterations", s.iterations},         {"columns_added", s.columns},
                  {"termination", s.termination},       {"seconds", s.seconds}};
    };
    json timing = json::object();
    for (const auto& [name, s] : timings) timing[name] = s;
    json scores = json::array();
    for (const auto& [k, s] : k_scores) scores.push_back({{"k", k}, {"silhouette", s}});
    return {{"input", options.input},
            {"n", n},
            {"m", m},
            {"seed", options.seed},
            {"preset", options.preset},
            {"config", config_to_json(config)},
            {"clustering", {{"source", clustering_source}, {"k", k}, {"silhouette", silhouette}, {"scores", scores}}},
            {"grouping", group_eps ? json{{"epsilon", *group_eps}, {"groups", group_count}, {"max_group_size", max_group}}
                                   : json(nullptr)},
            {"stage1", stage(stage1)},
            {"stage2", stage(stage2)},
            {"alpha_star", alpha_star},
            {"budget", budget},
            {"unit_error", unit_error},
            {"pool_size", pool_size},
            {"clusters", clusters},
            {"padded_clusters", solution.padded_clusters},
            {"metrics",
             {{"accuracy", solution.metrics.accuracy},
              {"sparsity", solution.metrics.sparsity},
              {"complexity", solution.metrics.complexity},
              {"misexplained", solution.misexplained.size()}}},
            {"timings_s", timing}};
  }

  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed;
    os << "input        " << options.input << " (" << n << " rows, " << m << " features)\n";
    os << "clustering   " << clustering_source << ", K=" << k << ", silhouette " << std::setprecision(4) << silhouette;
    if (clustering_source == "kmeans") os << " (seed " << options.seed << ", 100 restarts)";
    os << "\n";
    os << "config       preset " << options.preset << ", W=" << config.W << " beta=" << config.beta
       << std::setprecision(6) << std::defaultfloat << " theta1=" << config.theta1 << " theta2=" << config.theta2
       << " kappa=" << config.kappa << " p=" << config.p << "\n";
    if (group_eps) {
      os << "grouping     epsilon " << *group_eps << ", " << group_count << " groups, |G_max| " << max_group << "\n";
    }
    auto stage = [&](const char* name, const StageSummary& s) {
      if (!s.ran) return;
      os << name << "rmlp " << s.rmlp_objective << ", ip " << s.ip_objective << " (" << s.ip_status << ", bound "
         << s.ip_bound << "), " << s.iterations << " iterations (" << s.termination << "), " << s.columns
         << " columns, " << std::setprecision(3) << std::fixed << s.seconds << " s\n"
         << std::defaultfloat << std::setprecision(6);
    };
    stage("stage 1      ", stage1);
    if (stage1.ran) os << "alpha*       " << alpha_star << ", budget " << budget << "\n";
    else os << "budget       " << budget << " (user alpha)\n";
    stage("stage 2      ", stage2);
    os << "pool         " << pool_size << " half-spaces\n";
    for (std::size_t c = 0; c < solution.polyhedra.size(); ++c) {
      os << "cluster " << c << " (" << cluster_sizes[c] << " points)";
      for (int pc : solution.padded_clusters) {
        if (static_cast<std::size_t>(pc) == c) os << " [fallback half-space]";
      }
      os << "\n";
      for (const auto& h : solution.polyhedra[c].halfspaces) os << "  " << format_halfspace(h, feature_names) << "\n";
    }
    os << "metrics      accuracy " << std::fixed << std::setprecision(2) << 100.0 * solution.metrics.accuracy
       << " %, sparsity " << solution.metrics.sparsity << ", complexity " << solution.metrics.complexity
       << ", misexplained " << solution.misexplained.size() << "\n";
    if (group_eps) os << "             unit-level error " << std::defaultfloat << unit_error << " (model count)\n";
    os << "timings      ";
    for (const auto& [name, s] : timings) os << name << " " << std::fixed << std::setprecision(3) << s << " s  ";
    os << "\n";
    return os.str();
  }
};

namespace detail {

inline StageSummary summarize(const StageResult& st) {
  StageSummary s;
  s.ran = true;
  s.rmlp_objective = st.rmlp_objective;
  s.ip_objective = st.ip.objective;
  s.ip_bound = st.ip.bound + 0.0;
  s.ip_status = to_string(st.ip.status);
  s.iterations = st.trace.iterations.size();
  for (const auto& it : st.trace.iterations) {
    for (std::size_t c : it.columns_added) s.columns += c;
  }
  s.termination = to_string(st.trace.reason);
  s.seconds = st.seconds;
  return s;
}

inline ClusterAssignment load_labels(const std::string& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const auto raw = read_labels(in);
  if (raw.size() != n) {
    throw std::invalid_argument("labels file has " + std::to_string(raw.size()) + " labels for " + std::to_string(n) +
                                " data rows");
  }
  return ClusterAssignment::from_raw(raw);
}

}  // namespace detail

inline PdpConfig config_for(const DescribeOptions& o) {
  PdpConfig cfg;
  if (o.preset == "lc") {
    cfg = PdpConfig::lc();
  } else if (o.preset == "sp") {
    cfg = PdpConfig::sp();
  } else {
    throw UsageError("unknown preset '" + o.preset + "' (expected lc or sp)");
  }
  cfg.W = o.W;
  cfg.beta = o.beta;
  cfg.p = o.p;
  cfg.kappa = o.kappa;
  cfg.alpha = o.alpha;
  cfg.colgen_time_limit_s = o.time_limit_s;
  cfg.pricing_time_limit_s = o.pricing_time_limit_s;
  cfg.validate();
  return cfg;
}

inline RunReport run_describe(const DescribeOptions& o, std::ostream* trace = nullptr) {
  using clock = std::chrono::steady_clock;
  if (o.labels && o.select_k) throw UsageError("--labels and --select-k are mutually exclusive");
  if (o.group_eps && !(*o.group_eps >= 0)) throw UsageError("--group-eps must be >= 0");
  RunReport rep;
  rep.options = o;
  rep.config = config_for(o);
  auto lap = clock::now();
  auto tick = [&](const char* name) {
    const auto now = clock::now();
    rep.timings.emplace_back(name, std::chrono::duration<double>(now - lap).count());
    lap = now;
  };

  const RawTable raw = ingest_file(o.input, o.target);
  EncodedData enc = encode_and_scale(raw);
  const Dataset& data = enc.data;
  rep.n = data.n();
  rep.m = data.m();
  rep.feature_names = data.feature_names();
  rep.scales = enc.scales;
  tick("ingest");

  ClusterAssignment ca;
  if (o.labels) {
    ca = detail::load_labels(*o.labels, data.n());
    rep.clustering_source = "labels";
    rep.k = ca.k();
    rep.silhouette = ca.k() >= 2 ? silhouette(data, ca) : 0.0;
  } else {
    SelectKResult sk = select_k(data, o.seed);
    ca = sk.assignment;
    rep.clustering_source = "kmeans";
    rep.k = sk.k;
    rep.k_scores = sk.scores;
    for (const auto& [k, s] : sk.scores) {
      if (k == sk.k) rep.silhouette = s;
    }
  }
  rep.labels = ca.labels();
  for (int k = 0; k < ca.k(); ++k) rep.cluster_sizes.push_back(ca.members(k).size());
  tick("cluster");

  UnitSet units;
  if (o.group_eps) {
    const auto groups = make_groups(data, ca, *o.group_eps);
    rep.group_eps = o.group_eps;
    rep.group_count = groups.size();
    rep.max_group = max_group_size(groups);
    units = UnitSet::groups(groups, ca.k(), data.m());
  } else {
    units = UnitSet::points(data, ca);
  }
  tick("group");

  SolveContext ctx;
  const int level = log_level();
  if (trace && level >= 1) {
    ctx.on_iteration = [trace](int stage, const ColgenIteration& r) {
      *trace << "colgen stage=" << stage << " iteration=" << r.iteration << " objective=" << r.objective
             << " columns_added=";
      for (std::size_t c = 0; c < r.columns_added.size(); ++c) *trace << (c ? "," : "") << r.columns_added[c];
      *trace << " min_rho=" << r.min_rho << " seconds=" << r.seconds << "\n";
    };
  }
  TwoStageResult res = two_stage_solve(data, ca, units, rep.config, ctx);
  if (res.stage1) rep.stage1 = detail::summarize(*res.stage1);
  rep.stage2 = detail::summarize(res.stage2);
  rep.alpha_star = res.alpha_star;
  rep.budget = res.budget;
  rep.unit_error = res.unit_error;
  rep.pool_size = res.pool_size;
  rep.solution = std::move(res.solution);
  tick("solve");

  if (o.out) {
    std::ofstream f(*o.out);
    if (!f) throw std::runtime_error("cannot write '" + *o.out + "'");
    f << rep.description_json().dump(2) << "\n";
  }
  if (o.report_out) {
    std::ofstream f(*o.report_out);
    if (!f) throw std::runtime_error("cannot write '" + *o.report_out + "'");
    f << rep.to_json().dump(2) << "\n";
  }
  tick("report");
  if (trace && level >= 2) {
    for (const auto& [name, s] : rep.timings) *trace << "phase " << name << " " << s << " s\n";
  }
  return rep;
}

struct SynthOptions {
  SynthConfig config;
  ExperimentOptions experiment;
  std::optional<std::string> out;
  std::optional<std::string> trials_out;
};

inline ExperimentResult run_synth(const SynthOptions& o, std::ostream& fallback, std::ostream* trace = nullptr) {
  std::ofstream f, tf;
  if (o.out) {
    f.open(*o.out);
    if (!f) throw std::runtime_error("cannot write '" + *o.out + "'");
  }
  if (o.trials_out) {
    tf.open(*o.trials_out);
    if (!tf) throw std::runtime_error("cannot write '" + *o.trials_out + "'");
  }
  ExperimentOptions eo = o.experiment;
  if (trace && log_level() >= 1) eo.log = [trace](const std::string& s) { *trace << s << "\n"; };
  ExperimentResult r = group_vs_subsample_experiment(o.config, eo);
  write_experiment_csv(o.out ? static_cast<std::ostream&>(f) : fallback, r.rows);
  if (o.trials_out) {
    tf << "trial,seed,sample_size,groups,epsilon,grouped_error,subsampled_errors\n";
    tf.precision(10);
    for (const auto& t : r.trials) {
      tf << t.trial << ',' << t.seed << ',' << t.sample_size << ',' << t.groups << ',' << t.epsilon << ','
         << t.grouped_error << ',';
      for (std::size_t i = 0; i < t.subsampled_errors.size(); ++i) tf << (i ? ";" : "") << t.subsampled_errors[i];
      tf << '\n';
    }
  }
  return r;
}

struct EvalOptions {
  std::string description;
  std::string input;
  std::optional<std::string> target;
  std::optional<std::string> labels;
};

struct EvalResult {
  DescriptionSolution solution;
  std::size_t n = 0;

  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << "accuracy " << 100.0 * solution.metrics.accuracy << " %\n"
       << "sparsity " << solution.metrics.sparsity << "\n"
       << "complexity " << solution.metrics.complexity << "\n"
       << "misexplained " << solution.misexplained.size() << " of " << n << "\n";
    return os.str();
  }
};

inline EvalResult run_eval(const EvalOptions& o) {
  const json desc = read_json_file(o.description);
  const RawTable raw = ingest_file(o.input, o.target);
  const EncodedData enc = encode_and_scale(raw);
  const auto& names = enc.data.feature_names();
  auto polys = description_from_json(desc, names);
  const auto recorded = scales_from_json(desc, names);
  const Dataset data = recorded.empty() ? enc.data : rescale(enc.data, enc.scales, recorded);
  ClusterAssignment ca;
  if (o.labels) {
    ca = detail::load_labels(*o.labels, data.n());
  } else if (desc.contains("labels") && desc["labels"].is_array() && !desc["labels"].empty()) {
    const auto raw_labels = desc["labels"].get<std::vector<int>>();
    if (raw_labels.size() != data.n()) throw std::invalid_argument("description labels do not match the data rows");
    ca = ClusterAssignment(raw_labels, *std::max_element(raw_labels.begin(), raw_labels.end()) + 1);
  } else {
    throw UsageError("no labels: pass --labels or use a description that records them");
  }
  if (polys.size() > static_cast<std::size_t>(ca.k())) {
    throw std::invalid_argument("description has more clusters than the labels");
  }
  polys.resize(static_cast<std::size_t>(ca.k()));
  EvalResult r;
  r.n = data.n();
  r.solution = make_solution(std::move(polys), data, ca);
  return r;
}

}  // namespace polydesc
