#include "fairproj/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairproj/constraints.hpp"
#include "fairproj/error.hpp"
#include "fairproj/metrics.hpp"
#include "fairproj/projection.hpp"

namespace fairproj {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string in_dir(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

ordered_json report_json(const EvaluationReport& r) {
  ordered_json j;
  j["accuracy"] = r.accuracy;
  j["meo"] = r.meo;
  j["statistical_parity"] = r.statistical_parity;
  auto rows = [](const Matrix& m) {
    ordered_json out = ordered_json::array();
    for (std::size_t a = 0; a < m.rows(); ++a) {
      auto row = m.row(a);
      out.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return out;
  };
  j["tpr"] = rows(r.tpr);
  j["fpr"] = rows(r.fpr);
  j["rate"] = rows(r.rate);
  return j;
}

EvaluationReport evaluate_scores(const Matrix& scores, const ScoredDataset& ds) {
  return evaluate(decide(scores), ds.labels, ds.groups, scores.cols(), ds.num_groups);
}

std::vector<double> group_probs_of(const ScoredDataset& ds) {
  if (!ds.group_probs.empty()) return ds.group_probs;
  return indicator_group_probs(ds.groups, ds.num_groups, ds.scores.classes());
}

struct SplitRun {
  Matrix projected;
  EvaluationReport base;
  EvaluationReport report;
};

struct ProjectionRun {
  ProjectedModel model;
  SplitRun train;
  std::optional<SplitRun> test;
  double criterion = 0.0;
  double base_criterion = 0.0;
};

struct Inputs {
  ScoredDataset train;
  std::optional<ScoredDataset> test;
};

Inputs load_inputs(const ProjectOptions& opts, std::vector<std::string>& notes) {
  Inputs in;
  const std::string train_path =
      opts.train_scores.empty() ? in_dir(opts.out_dir, "train_scores.csv") : opts.train_scores;
  in.train = load_scores_csv(train_path, opts.eps_clip);
  for (const auto& n : in.train.notes) notes.push_back(train_path + ": " + n);
  std::string test_path = opts.test_scores;
  if (test_path.empty() && fs::exists(in_dir(opts.out_dir, "test_scores.csv"))) {
    test_path = in_dir(opts.out_dir, "test_scores.csv");
  }
  if (!test_path.empty()) {
    in.test = load_scores_csv(test_path, opts.eps_clip);
    for (const auto& n : in.test->notes) notes.push_back(test_path + ": " + n);
    if (in.test->scores.classes() != in.train.scores.classes()) {
      throw SchemaError(test_path + ": class count differs from the training scores");
    }
    // Groups missing from one split must not shrink A.
    const std::size_t A = std::max(in.train.num_groups, in.test->num_groups);
    if (in.train.group_probs.empty()) in.train.num_groups = A;
    if (in.test->group_probs.empty()) in.test->num_groups = A;
    if (in.train.num_groups != in.test->num_groups) {
      throw SchemaError(test_path + ": group count differs from the training scores");
    }
  }
  return in;
}

ProjectionRun run_projection(const Inputs& in, const ProjectOptions& opts, double alpha) {
  const ScoredDataset& tr = in.train;
  const Metric metric = metric_from_name(opts.metric);
  const DivergenceKind kind = DivergenceKind::from_name(opts.divergence);
  const std::size_t C = tr.scores.classes(), A = tr.num_groups;

  GroupModel gm = estimate_group_model(group_probs_of(tr), tr.groups, tr.labels, A, C, metric);
  const ConstraintSet cs = build_constraints(metric, tr.scores, gm, alpha);

  SolverConfig cfg;
  cfg.divergence = kind;
  cfg.rho = opts.rho;
  cfg.zeta = opts.zeta;
  cfg.max_outer_iters = opts.max_iters;
  cfg.residual_tol = opts.tol;
  cfg.worker_count = opts.workers;
  cfg.seed = opts.seed;
  const DualSolution sol = admm_fit(tr.scores, cs, cfg);

  ProjectionRun run;
  run.model = make_projected_model(sol, cs, gm, kind, opts.eps_clip);
  run.train.projected = project_scores(run.model, tr.scores, gm, opts.workers);
  run.train.base = evaluate_scores(tr.scores.matrix(), tr);
  run.train.report = evaluate_scores(run.train.projected, tr);
  const Matrix truth = one_hot(tr.labels, C);
  run.criterion = criterion_value(metric, run.train.projected, truth, gm.group_probs, A);
  run.base_criterion = criterion_value(metric, tr.scores.matrix(), truth, gm.group_probs, A);
  if (in.test) {
    const ScoredDataset& te = *in.test;
    SplitRun s;
    const GroupModel gm_test = run.model.group_model(te.scores.samples(), group_probs_of(te));
    s.projected = project_scores(run.model, te.scores, gm_test, opts.workers);
    s.base = evaluate_scores(te.scores.matrix(), te);
    s.report = evaluate_scores(s.projected, te);
    run.test = std::move(s);
  }
  return run;
}

ordered_json split_json(const SplitRun& s) {
  ordered_json j;
  j["base"] = report_json(s.base);
  j["projected"] = report_json(s.report);
  return j;
}

std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

}  // namespace

SynthSpec SynthOptions::spec(std::uint64_t seed) const {
  SynthSpec s;
  if (bias == "biased") {
    s = biased_spec(n, classes, groups, seed);
  } else if (bias == "fair") {
    s = fair_spec(n, classes, groups, seed);
  } else {
    throw InvalidArgument("synth bias must be 'biased' or 'fair', got '" + bias + "'");
  }
  s.d = d;
  s.cluster_separation = separation;
  s.group_shift = group_shift;
  return s;
}

FitBaseResult cmd_fit_base(const FitBaseOptions& opts) {
  if (opts.group_probs != "observed" && opts.group_probs != "model") {
    throw InvalidArgument("group-probs must be 'observed' or 'model'");
  }
  const TabularDataset ds =
      opts.data.empty() ? generate_synth(opts.synth.spec(opts.seed)) : load_csv(opts.data, opts.schema);
  auto [train, test] = split(ds, opts.test_fraction, opts.seed);
  ensure_dir(opts.out_dir);

  FitBaseResult res;
  LogRegOptions lr = opts.logreg;
  lr.seed = opts.seed;
  auto label_x = [&](const TabularDataset& d) {
    return opts.group_in_features ? with_group_features(d) : d.features;
  };
  const LinearModel label_model = fit_logreg(label_x(train), train.labels, ds.classes, lr);
  for (const auto& w : label_model.warnings) res.warnings.push_back("label model: " + w);
  const GroupPredictor group_model =
      fit_group_model(train.features, train.labels, train.groups, ds.classes, ds.num_groups, lr);
  for (const auto& w : group_model.model.warnings) res.warnings.push_back("group model: " + w);

  const std::string label_path = in_dir(opts.out_dir, "label_model.txt");
  const std::string group_path = in_dir(opts.out_dir, "group_model.txt");
  save_linear_model(label_model, label_path);
  save_linear_model(group_model.model, group_path);
  res.written = {label_path, group_path};

  for (const auto* part : {&train, &test}) {
    const ScoreMatrix scores = predict_proba(label_model, label_x(*part));
    const std::vector<double> gprobs =
        opts.group_probs == "model"
            ? group_model.group_probs(part->features)
            : indicator_group_probs(part->groups, ds.num_groups, ds.classes);
    const std::string path =
        in_dir(opts.out_dir, part == &train ? "train_scores.csv" : "test_scores.csv");
    write_scores_csv(path, scores.matrix(), part->labels, part->groups, ds.num_groups, gprobs);
    res.written.push_back(path);
  }
  return res;
}

ProjectResult cmd_project(const ProjectOptions& opts) {
  ProjectResult res;
  const Inputs in = load_inputs(opts, res.notes);
  ensure_dir(opts.out_dir);
  const ProjectionRun run = run_projection(in, opts, opts.alpha);
  res.converged = run.model.converged;
  res.iterations = run.model.iterations;

  const std::string model_path = in_dir(opts.out_dir, "projected_model.json");
  save_projected_model(run.model, model_path);
  res.written.push_back(model_path);

  const std::size_t A = in.train.num_groups;
  const std::string train_path = in_dir(opts.out_dir, "train_projected.csv");
  write_scores_csv(train_path, run.train.projected, in.train.labels, in.train.groups, A,
                   group_probs_of(in.train));
  res.written.push_back(train_path);
  if (run.test) {
    const std::string test_path = in_dir(opts.out_dir, "test_projected.csv");
    write_scores_csv(test_path, run.test->projected, in.test->labels, in.test->groups, A,
                     group_probs_of(*in.test));
    res.written.push_back(test_path);
  }

  const SplitRun& headline = run.test ? *run.test : run.train;
  ordered_json j;
  j["accuracy"] = headline.report.accuracy;
  j["meo"] = headline.report.meo;
  j["statistical_parity"] = headline.report.statistical_parity;
  j["alpha"] = opts.alpha;
  j["divergence"] = run.model.divergence.name();
  j["iterations"] = run.model.iterations;
  j["metric"] = metric_name(run.model.metric);
  j["split"] = run.test ? "test" : "train";
  j["converged"] = run.model.converged;
  j["final_residual"] =
      run.model.primal_residuals.empty() ? 0.0 : run.model.primal_residuals.back();
  j["rho"] = run.model.rho;
  j["zeta"] = run.model.zeta;
  j["lambda"] = run.model.lambda;
  j["criterion_value"] = {{"base", run.base_criterion}, {"projected", run.criterion}};
  j["train"] = split_json(run.train);
  if (run.test) j["test"] = split_json(*run.test);
  j["residuals"] = run.model.primal_residuals;
  const std::string report_path = in_dir(opts.out_dir, "report.json");
  write_text(report_path, j.dump(2) + "\n");
  res.written.push_back(report_path);
  return res;
}

SweepResult cmd_sweep(const SweepOptions& opts) {
  if (opts.alpha_grid.empty()) throw InvalidArgument("sweep: alpha grid is empty");
  for (std::size_t k = 0; k < opts.alpha_grid.size(); ++k) {
    if (!(opts.alpha_grid[k] > 0.0) || (k > 0 && !(opts.alpha_grid[k] > opts.alpha_grid[k - 1]))) {
      throw InvalidArgument("sweep: alpha grid must be positive and strictly increasing");
    }
  }
  SweepResult res;
  const Inputs in = load_inputs(opts.base, res.notes);
  ensure_dir(opts.base.out_dir);
  std::ostringstream csv;
  csv << kCurveHeader << '\n';
  for (double alpha : opts.alpha_grid) {
    const auto start = std::chrono::steady_clock::now();
    std::string cells;
    try {
      const ProjectionRun run = run_projection(in, opts.base, alpha);
      if (!run.model.converged) {
        throw ConvergenceFailure("ADMM did not reach the residual tolerance",
                                 run.model.primal_residuals.back());
      }
      const EvaluationReport& r = run.test ? run.test->report : run.train.report;
      cells = fmt9(r.accuracy) + "," + fmt9(r.meo) + "," + fmt9(r.statistical_parity);
    } catch (const Error& e) {
      ++res.failed;
      res.notes.push_back("alpha=" + fmt9(alpha) + ": " + e.what());
      cells = ",,";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv << fmt9(alpha) << ',' << cells << ',' << fmt9(opts.timing ? secs : 0.0) << '\n';
  }
  const std::string path = in_dir(opts.base.out_dir, "curve.csv");
  write_text(path, csv.str());
  res.written.push_back(path);
  return res;
}

std::string cmd_evaluate(const EvaluateOptions& opts) {
  ScoredDataset ds = load_scores_csv(opts.scores);
  if (!opts.labels.empty()) {
    CsvSchema schema;
    const TabularDataset lab = load_csv(opts.labels, schema);
    if (lab.samples() != ds.scores.samples()) {
      throw SchemaError(opts.labels + ": row count differs from " + opts.scores);
    }
    ds.labels = lab.labels;
    ds.groups = lab.groups;
    ds.num_groups = std::max(ds.num_groups, lab.num_groups);
  }
  const EvaluationReport r = evaluate_scores(ds.scores.matrix(), ds);
  ordered_json j = report_json(r);
  j["samples"] = ds.scores.samples();
  j["classes"] = ds.scores.classes();
  j["groups"] = ds.num_groups;
  const std::string text = j.dump(2) + "\n";
  const std::string out = opts.out.empty() ? in_dir(opts.out_dir, "evaluation.json") : opts.out;
  if (fs::path(out).has_parent_path()) ensure_dir(fs::path(out).parent_path().string());
  write_text(out, text);
  return text;
}

std::string cmd_synth_gen(const SynthGenOptions& opts) {
  const TabularDataset ds = generate_synth(opts.synth.spec(opts.seed));
  const std::string out = opts.out.empty() ? in_dir(opts.out_dir, "synth.csv") : opts.out;
  if (fs::path(out).has_parent_path()) ensure_dir(fs::path(out).parent_path().string());
  write_csv(out, ds);
  return out;
}

std::vector<double> parse_alpha_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (used == 0 || used != item.size()) {
      throw InvalidArgument("alpha grid: cannot parse '" + item + "'");
    }
    grid.push_back(v);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 0.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw InvalidArgument("alpha grid must be positive and strictly increasing");
    }
  }
  if (grid.empty()) throw InvalidArgument("alpha grid is empty");
  return grid;
}

}  // namespace fairproj
