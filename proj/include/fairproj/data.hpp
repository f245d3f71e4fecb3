#pragma once

// CSV ingestion, stratified train/test splits and a seeded generator of
// group-biased synthetic classification data.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairproj/matrix.hpp"

namespace fairproj {

struct TabularDataset {
  Matrix features;  // N x d, may have zero columns
  std::vector<int> labels;
  std::vector<int> groups;
  std::size_t classes = 0;
  std::size_t num_groups = 0;
  std::vector<std::string> feature_names;
  /// Original CSV value of each id, index = id.
  std::vector<std::string> label_values;
  std::vector<std::string> group_values;

  std::size_t samples() const noexcept { return labels.size(); }
  TabularDataset subset(std::span<const std::size_t> rows) const;
};

struct CsvSchema {
  std::string label_col = "label";
  std::string group_col = "group";
  /// Empty means every remaining column.
  std::vector<std::string> feature_cols;
};

/**
 * Loads a comma-separated file with a header row. Label and group values are
 * mapped to dense ids by order of first appearance, except when a column
 * already holds exactly the integers 0..m, which are kept as they are.
 * Throws ParseError (row/column) on a missing or malformed cell and
 * SchemaError on an unknown column.
 */
TabularDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void write_csv(const std::string& path, const TabularDataset& ds);

/// Base scores plus the label/group ids and group probabilities s_a(x, c).
struct ScoredDataset {
  ScoreMatrix scores;
  std::vector<int> labels;
  std::vector<int> groups;
  std::size_t num_groups = 0;
  /// GroupModel::group_probs layout; empty when the file has no gprob columns.
  std::vector<double> group_probs;
  ClipReport clip;
  /// Rows whose raw scores did not sum to 1 within 1e-9.
  std::size_t renormalized_rows = 0;
  std::vector<std::string> notes;
};

/**
 * Score file: columns score_0..score_{C-1}, label, group and optionally
 * gprob_<a>_<c> for every (a, c). Label and group are integer ids. Rows are
 * clipped to eps and renormalized; renormalizations are noted.
 */
ScoredDataset load_scores_csv(const std::string& path, double eps = kDefaultClip);
void write_scores_csv(const std::string& path, const Matrix& scores, std::span<const int> labels,
                      std::span<const int> groups, std::size_t num_groups,
                      std::span<const double> group_probs);

/**
 * Seeded split returning (train rows, test rows), each ascending. Stratifies
 * by (label, group) cell when every non-empty cell has at least 2 samples;
 * per-cell test counts come from largest-remainder rounding of the global
 * test size round(N * test_fraction).
 */
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::span<const int> labels, std::span<const int> groups, double test_fraction,
    std::uint64_t seed);

std::pair<TabularDataset, TabularDataset> split(const TabularDataset& ds, double test_fraction,
                                                std::uint64_t seed);

struct SynthSpec {
  std::size_t n = 10000;
  std::size_t d = 4;
  std::size_t classes = 2;
  std::size_t groups = 2;
  std::vector<double> group_weights;  // length A, sums to 1
  Matrix class_bias;                  // A x C, rows sum to 1
  double cluster_separation = 1.0;
  /// Feature-mean offset per group index along the last axis.
  double group_shift = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform groups; group 0 draws class 0 with probability 0.8 and every other
/// group with 0.4, remaining mass spread evenly.
SynthSpec biased_spec(std::size_t n, std::size_t classes, std::size_t groups, std::uint64_t seed);
/// Same class distribution in every group.
SynthSpec fair_spec(std::size_t n, std::size_t classes, std::size_t groups, std::uint64_t seed);

TabularDataset generate_synth(const SynthSpec& spec);

/// Features with one-hot group columns appended.
Matrix with_group_features(const TabularDataset& ds);

}  // namespace fairproj
