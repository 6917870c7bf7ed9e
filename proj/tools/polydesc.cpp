#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polydesc/cli.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInfeasible = 2;

}  // namespace

int main(int argc, char** argv) {
  using namespace polydesc;
  CLI::App app{"polydesc: describe clusters with integer-coefficient polyhedra"};
  app.require_subcommand(1);

  DescribeOptions d;
  std::string target, labels, out, report_out;
  double alpha = -1.0, group_eps = -1.0;
  auto* describe = app.add_subcommand("describe", "explain a clustering of a CSV table");
  describe->add_option("--input", d.input, "data CSV with a header row")->required();
  describe->add_option("--target", target, "column to drop before clustering");
  auto* labels_opt = describe->add_option("--labels", labels, "CSV with one cluster id per data row");
  auto* selk = describe->add_flag("--select-k", d.select_k, "pick k in 2..10 by silhouette (default without --labels)");
  describe->add_option("--preset", d.preset, "lc (complexity) or sp (sparsity)")->check(CLI::IsMember({"lc", "sp"}));
  describe->add_option("--w", d.W, "coefficient bound W")->check(CLI::PositiveNumber);
  describe->add_option("--beta", d.beta, "nonzero bound beta")->check(CLI::PositiveNumber);
  describe->add_option("--p", d.p, "splits per feature in the initial pool")->check(CLI::PositiveNumber);
  describe->add_option("--kappa", d.kappa, "stage-2 budget slack")->check(CLI::NonNegativeNumber);
  describe->add_option("--alpha", alpha, "error budget; skips stage 1")->check(CLI::NonNegativeNumber);
  describe->add_option("--group-eps", group_eps, "group points with complete linkage up to this distance")
      ->check(CLI::NonNegativeNumber);
  describe->add_option("--time-limit", d.time_limit_s, "column generation seconds per stage")
      ->check(CLI::PositiveNumber);
  describe->add_option("--pricing-time-limit", d.pricing_time_limit_s, "seconds per pricing problem")
      ->check(CLI::PositiveNumber);
  describe->add_option("--seed", d.seed, "k-means seed");
  describe->add_option("--out", out, "write the description JSON here");
  describe->add_option("--report-out", report_out, "write the run report JSON here");
  labels_opt->excludes(selk);

  SynthOptions s;
  std::string sizes = "100,200,400,800";
  std::string synth_out, trials_out;
  auto* synth = app.add_subcommand("synth", "grouping versus subsampling on Gaussian mixtures");
  synth->add_option("--k", s.config.k, "clusters")->check(CLI::PositiveNumber);
  synth->add_option("--m", s.config.m, "dimensions")->check(CLI::PositiveNumber);
  synth->add_option("--n", s.config.n, "total points")->check(CLI::PositiveNumber);
  synth->add_option("--sigma", s.config.sigma, "per-coordinate standard deviation")->check(CLI::NonNegativeNumber);
  synth->add_option("--trials", s.experiment.trials, "instances")->check(CLI::PositiveNumber);
  synth->add_option("--draws", s.experiment.subsample_draws, "subsample draws per size")->check(CLI::PositiveNumber);
  synth->add_option("--sizes", sizes, "comma-separated sample sizes");
  synth->add_option("--time-limit", s.experiment.solve_time_limit_s, "seconds per solve")->check(CLI::PositiveNumber);
  synth->add_option("--seed", s.config.seed, "base seed");
  synth->add_option("--out", synth_out, "CSV path (default stdout)");
  synth->add_option("--trials-out", trials_out, "per-trial CSV path");

  EvalOptions e;
  std::string eval_target, eval_labels;
  auto* eval = app.add_subcommand("eval", "score a stored description against data");
  eval->add_option("--description", e.description, "description JSON")->required();
  eval->add_option("--input", e.input, "data CSV")->required();
  eval->add_option("--target", eval_target, "column to drop");
  eval->add_option("--labels", eval_labels, "cluster ids (default: those recorded in the description)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kError;
  }

  try {
    if (describe->parsed()) {
      if (!target.empty()) d.target = target;
      if (!labels.empty()) d.labels = labels;
      if (!out.empty()) d.out = out;
      if (!report_out.empty()) d.report_out = report_out;
      if (alpha >= 0) d.alpha = alpha;
      if (group_eps >= 0) d.group_eps = group_eps;
      const RunReport rep = run_describe(d, &std::cerr);
      std::cout << rep.to_text();
    } else if (synth->parsed()) {
      s.experiment.sample_sizes.clear();
      for (const auto& tok : CLI::detail::split(sizes, ',')) {
        const long v = std::stol(tok);
        if (v <= 0) throw UsageError("sample sizes must be positive");
        s.experiment.sample_sizes.push_back(static_cast<std::size_t>(v));
      }
      if (!synth_out.empty()) s.out = synth_out;
      if (!trials_out.empty()) s.trials_out = trials_out;
      run_synth(s, std::cout, &std::cerr);
    } else if (eval->parsed()) {
      if (!eval_target.empty()) e.target = eval_target;
      if (!eval_labels.empty()) e.labels = eval_labels;
      std::cout << run_eval(e).to_text();
    }
  } catch (const AlphaInfeasible& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kError;
  }
  return kOk;
}
