#pragma once

// The pipeline steps behind the command-line tool. Each step reads and
// writes files only; option parsing lives in the executable.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairproj/baseline.hpp"
#include "fairproj/data.hpp"
#include "fairproj/solver.hpp"

namespace fairproj {

struct SynthOptions {
  std::size_t n = 10000;
  std::size_t d = 4;
  std::size_t classes = 2;
  std::size_t groups = 2;
  /// "biased" or "fair".
  std::string bias = "biased";
  double separation = 1.0;
  double group_shift = 0.25;

  SynthSpec spec(std::uint64_t seed) const;
};

struct FitBaseOptions {
  /// Raw dataset; when empty a synthetic one is generated from `synth`.
  std::string data;
  CsvSchema schema;
  SynthOptions synth;
  double test_fraction = 0.3;
  bool group_in_features = true;
  /// "observed" writes indicator group probabilities, "model" the fitted
  /// group classifier's s(x, c).
  std::string group_probs = "observed";
  LogRegOptions logreg;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct FitBaseResult {
  std::vector<std::string> written;
  std::vector<std::string> warnings;
};

FitBaseResult cmd_fit_base(const FitBaseOptions& opts);

struct ProjectOptions {
  std::string train_scores;  // defaults to <out_dir>/train_scores.csv
  std::string test_scores;   // defaults to <out_dir>/test_scores.csv if present
  std::string divergence = "kl";
  std::string metric = "eo";
  double alpha = 0.05;
  double rho = 2.0;
  /// Unset is "auto" = 1/sqrt(N).
  std::optional<double> zeta;
  std::optional<int> max_iters;
  double tol = 1e-6;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  double eps_clip = kDefaultClip;
  std::string out_dir = ".";
};

struct ProjectResult {
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> written;
  std::vector<std::string> notes;
};

ProjectResult cmd_project(const ProjectOptions& opts);

struct SweepOptions {
  ProjectOptions base;
  std::vector<double> alpha_grid;
  /// Writes runtime_s as 0 so reruns are byte-identical.
  bool timing = true;
};

struct SweepResult {
  std::size_t failed = 0;
  std::vector<std::string> written;
  std::vector<std::string> notes;
};

SweepResult cmd_sweep(const SweepOptions& opts);

struct EvaluateOptions {
  std::string scores;
  /// Optional CSV with label and group columns overriding those in `scores`.
  std::string labels;
  std::string out;  // defaults to <out_dir>/evaluation.json
  std::string out_dir = ".";
};

/// Returns the report JSON text that was written.
std::string cmd_evaluate(const EvaluateOptions& opts);

struct SynthGenOptions {
  SynthOptions synth;
  std::uint64_t seed = 0;
  std::string out;  // defaults to <out_dir>/synth.csv
  std::string out_dir = ".";
};

std::string cmd_synth_gen(const SynthGenOptions& opts);

/// Parses "0.01,0.05,0.1"; must be strictly increasing and positive.
std::vector<double> parse_alpha_grid(const std::string& text);

/// Header of the trade-off curve file.
inline constexpr const char* kCurveHeader = "alpha,accuracy,meo,statistical_parity,runtime_s";

}  // namespace fairproj
