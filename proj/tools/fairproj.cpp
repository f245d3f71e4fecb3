// fairproj: fit base models, project scores onto fairness constraints,
// sweep tolerance grids and evaluate score files.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fairproj/commands.hpp"
#include "fairproj/error.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

struct Shared {
  std::string divergence = "kl";
  std::string metric = "eo";
  double alpha = 0.05;
  std::string alpha_grid;
  double rho = 2.0;
  std::string zeta = "auto";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out_dir = ".";
};

void add_solver_flags(CLI::App* cmd, Shared& s, fairproj::ProjectOptions& p) {
  cmd->add_option("--divergence", s.divergence, "kl or ce")
      ->check(CLI::IsMember({"kl", "ce"}))
      ->capture_default_str();
  cmd->add_option("--metric", s.metric, "sp, eo or oae")
      ->check(CLI::IsMember({"sp", "eo", "meo", "oae"}))
      ->capture_default_str();
  cmd->add_option("--rho", s.rho, "ADMM penalty")->capture_default_str();
  cmd->add_option("--zeta", s.zeta, "regularizer, or auto for 1/sqrt(N)")->capture_default_str();
  cmd->add_option("--workers", s.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--train-scores", p.train_scores, "training score CSV");
  cmd->add_option("--test-scores", p.test_scores, "test score CSV");
  cmd->add_option("--max-iters", p.max_iters, "ADMM iteration cap");
  cmd->add_option("--tol", p.tol, "primal residual tolerance")->capture_default_str();
}

void add_common_flags(CLI::App* cmd, Shared& s) {
  cmd->add_option("--seed", s.seed, "random seed")->capture_default_str();
  cmd->add_option("--out-dir", s.out_dir, "output directory")->capture_default_str();
}

void add_synth_flags(CLI::App* cmd, fairproj::SynthOptions& o) {
  cmd->add_option("--n", o.n, "samples")->capture_default_str();
  cmd->add_option("--d", o.d, "features")->capture_default_str();
  cmd->add_option("--classes", o.classes, "classes")->capture_default_str();
  cmd->add_option("--groups", o.groups, "groups")->capture_default_str();
  cmd->add_option("--bias", o.bias, "biased or fair")
      ->check(CLI::IsMember({"biased", "fair"}))
      ->capture_default_str();
  cmd->add_option("--separation", o.separation, "class-center distance")->capture_default_str();
  cmd->add_option("--group-shift", o.group_shift, "feature shift per group index")
      ->capture_default_str();
}

void finish_project_options(const Shared& s, fairproj::ProjectOptions& p) {
  p.divergence = s.divergence;
  p.metric = s.metric;
  p.alpha = s.alpha;
  p.rho = s.rho;
  p.seed = s.seed;
  p.workers = s.workers;
  p.out_dir = s.out_dir;
  if (s.zeta == "auto") {
    p.zeta.reset();
  } else {
    try {
      p.zeta = std::stod(s.zeta);
    } catch (const std::exception&) {
      throw fairproj::InvalidArgument("--zeta must be a number or 'auto'");
    }
  }
}

void print_lines(const std::vector<std::string>& lines, const char* prefix) {
  for (const auto& l : lines) std::cerr << prefix << l << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair post-processing of classifier scores by information projection"};
  app.set_config("--config", "", "INI file with one [section] per command");
  app.require_subcommand(1);

  Shared shared;

  fairproj::FitBaseOptions fit;
  auto* fit_cmd = app.add_subcommand("fit-base", "train base label and group models");
  fit_cmd->add_option("--data", fit.data, "dataset CSV (omit to generate synthetic data)");
  fit_cmd->add_option("--label-col", fit.schema.label_col)->capture_default_str();
  fit_cmd->add_option("--group-col", fit.schema.group_col)->capture_default_str();
  fit_cmd->add_option("--feature-cols", fit.schema.feature_cols, "feature columns")
      ->delimiter(',');
  fit_cmd->add_option("--test-fraction", fit.test_fraction)->capture_default_str();
  fit_cmd->add_option("--group-in-features", fit.group_in_features)->capture_default_str();
  fit_cmd->add_option("--group-probs", fit.group_probs, "observed or model")
      ->check(CLI::IsMember({"observed", "model"}))
      ->capture_default_str();
  fit_cmd->add_option("--l2", fit.logreg.l2)->capture_default_str();
  fit_cmd->add_option("--epochs", fit.logreg.epochs)->capture_default_str();
  fit_cmd->add_option("--lr", fit.logreg.lr)->capture_default_str();
  add_synth_flags(fit_cmd, fit.synth);
  add_common_flags(fit_cmd, shared);

  fairproj::ProjectOptions proj;
  auto* proj_cmd = app.add_subcommand("project", "fit the dual and tilt train/test scores");
  proj_cmd->add_option("--alpha", shared.alpha, "fairness tolerance")->capture_default_str();
  add_solver_flags(proj_cmd, shared, proj);
  add_common_flags(proj_cmd, shared);

  fairproj::SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "trade-off curve over an alpha grid");
  sweep_cmd->add_option("--alpha-grid", shared.alpha_grid, "comma-separated increasing alphas")
      ->required();
  sweep_cmd->add_flag("--timing,!--no-timing", sweep.timing,
                      "record wall time (--no-timing writes 0 for byte-identical reruns)");
  add_solver_flags(sweep_cmd, shared, sweep.base);
  add_common_flags(sweep_cmd, shared);

  fairproj::EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "accuracy, MEO and SP of a score file");
  eval_cmd->add_option("--scores", eval.scores, "score CSV")->required();
  eval_cmd->add_option("--labels", eval.labels, "CSV with label and group columns");
  eval_cmd->add_option("--out", eval.out, "report path");
  add_common_flags(eval_cmd, shared);

  fairproj::SynthGenOptions gen;
  auto* gen_cmd = app.add_subcommand("synth-gen", "write a synthetic biased dataset");
  gen_cmd->add_option("--out", gen.out, "CSV path");
  add_synth_flags(gen_cmd, gen.synth);
  add_common_flags(gen_cmd, shared);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit_cmd->parsed()) {
      fit.seed = shared.seed;
      fit.out_dir = shared.out_dir;
      auto res = fairproj::cmd_fit_base(fit);
      print_lines(res.warnings, "warning: ");
      for (const auto& p : res.written) std::cout << p << '\n';
      return 0;
    }
    if (proj_cmd->parsed()) {
      finish_project_options(shared, proj);
      auto res = fairproj::cmd_project(proj);
      print_lines(res.notes, "note: ");
      for (const auto& p : res.written) std::cout << p << '\n';
      if (!res.converged) {
        std::cerr << "error: ADMM stopped after " << res.iterations
                  << " iterations without reaching the residual tolerance\n";
        return kExitNotConverged;
      }
      return 0;
    }
    if (sweep_cmd->parsed()) {
      finish_project_options(shared, sweep.base);
      sweep.alpha_grid = fairproj::parse_alpha_grid(shared.alpha_grid);
      auto res = fairproj::cmd_sweep(sweep);
      print_lines(res.notes, "note: ");
      for (const auto& p : res.written) std::cout << p << '\n';
      if (res.failed > 0) {
        std::cerr << "error: " << res.failed << " of " << sweep.alpha_grid.size()
                  << " alpha values failed\n";
        return kExitNotConverged;
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      eval.out_dir = shared.out_dir;
      std::cout << fairproj::cmd_evaluate(eval);
      return 0;
    }
    if (gen_cmd->parsed()) {
      gen.seed = shared.seed;
      gen.out_dir = shared.out_dir;
      std::cout << fairproj::cmd_synth_gen(gen) << '\n';
      return 0;
    }
  } catch (const fairproj::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fairproj::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fairproj::ConvergenceFailure& e) {
    std::cerr << "error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
