#include "fairproj/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

#include "fairproj/error.hpp"

namespace fairproj {

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

CsvTable read_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ParseError(path + ": empty file");
  return t;
}

std::size_t column(const CsvTable& t, const std::string& name, const std::string& path) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw SchemaError(path + ": no column named '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

// Data rows are numbered from 1; the header is line 1 of the file.
ParseError cell_error(const std::string& path, std::size_t row, const std::string& col,
                      const std::string& why) {
  return ParseError(path + ": row " + std::to_string(row + 1) + ", column '" + col + "': " + why);
}

double parse_double(const std::string& s, const std::string& path, std::size_t row,
                    const std::string& col) {
  if (s.empty()) throw cell_error(path, row, col, "missing value");
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw cell_error(path, row, col, "not a finite number: '" + s + "'");
  }
  return v;
}

std::optional<int> as_id(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

// Dense ids for a categorical column; see load_csv for the rule.
std::vector<int> encode(const CsvTable& t, std::size_t col, const std::string& path,
                        std::vector<std::string>& values) {
  const std::string& name = t.header[col];
  std::vector<int> ids(t.rows.size());
  bool integral = true;
  int max_id = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& s = t.rows[r][col];
    if (s.empty()) throw cell_error(path, r, name, "missing value");
    auto id = as_id(s);
    if (!id || std::to_string(*id) != s) {
      integral = false;
    } else {
      max_id = std::max(max_id, *id);
    }
  }
  if (integral && max_id >= 0) {
    std::vector<char> seen(static_cast<std::size_t>(max_id) + 1, 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      ids[r] = *as_id(t.rows[r][col]);
      seen[ids[r]] = 1;
    }
    if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; })) {
      values.clear();
      for (int i = 0; i <= max_id; ++i) values.push_back(std::to_string(i));
      return ids;
    }
  }
  std::unordered_map<std::string, int> map;
  values.clear();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string& s = t.rows[r][col];
    auto [it, inserted] = map.emplace(s, static_cast<int>(values.size()));
    if (inserted) values.push_back(s);
    ids[r] = it->second;
  }
  return ids;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  return f;
}

// Uniform draw in [0, n) by rejection; independent of the standard library's
// distribution implementations.
std::size_t draw_below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_below(rng, i)]);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller, one draw per call.
double normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t categorical(std::mt19937_64& rng, std::span<const double> w) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return k;
  }
  return w.size() - 1;
}

}  // namespace

TabularDataset TabularDataset::subset(std::span<const std::size_t> rows) const {
  TabularDataset out;
  out.features = Matrix(rows.size(), features.cols());
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    if (i >= samples()) throw InvalidArgument("TabularDataset::subset: row out of range");
    auto src = features.row(i);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(labels[i]);
    out.groups.push_back(groups[i]);
  }
  out.classes = classes;
  out.num_groups = num_groups;
  out.feature_names = feature_names;
  out.label_values = label_values;
  out.group_values = group_values;
  return out;
}

TabularDataset load_csv(const std::string& path, const CsvSchema& schema) {
  const CsvTable t = read_table(path);
  const std::size_t label_col = column(t, schema.label_col, path);
  const std::size_t group_col = column(t, schema.group_col, path);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_cols.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != label_col && c != group_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_cols) feature_cols.push_back(column(t, name, path));
  }

  TabularDataset ds;
  const std::size_t N = t.rows.size();
  ds.labels = encode(t, label_col, path, ds.label_values);
  ds.groups = encode(t, group_col, path, ds.group_values);
  ds.classes = ds.label_values.size();
  ds.num_groups = ds.group_values.size();
  ds.features = Matrix(N, feature_cols.size());
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    const std::size_t c = feature_cols[j];
    ds.feature_names.push_back(t.header[c]);
    for (std::size_t r = 0; r < N; ++r) ds.features(r, j) = parse_double(t.rows[r][c], path, r, t.header[c]);
  }
  return ds;
}

void write_csv(const std::string& path, const TabularDataset& ds) {
  auto f = open_out(path);
  const std::size_t d = ds.features.cols();
  for (std::size_t j = 0; j < d; ++j) {
    f << (j < ds.feature_names.size() ? ds.feature_names[j] : "x" + std::to_string(j)) << ',';
  }
  f << "label,group\n";
  for (std::size_t i = 0; i < ds.samples(); ++i) {
    for (std::size_t j = 0; j < d; ++j) f << fmt(ds.features(i, j)) << ',';
    const auto& lv = ds.label_values;
    const auto& gv = ds.group_values;
    f << (static_cast<std::size_t>(ds.labels[i]) < lv.size() ? lv[ds.labels[i]]
                                                             : std::to_string(ds.labels[i]))
      << ','
      << (static_cast<std::size_t>(ds.groups[i]) < gv.size() ? gv[ds.groups[i]]
                                                             : std::to_string(ds.groups[i]))
      << '\n';
  }
  if (!f) throw Error("write failed: " + path);
}

ScoredDataset load_scores_csv(const std::string& path, double eps) {
  const CsvTable t = read_table(path);
  std::vector<std::size_t> score_cols;
  for (std::size_t c = 0;; ++c) {
    auto it = std::find(t.header.begin(), t.header.end(), "score_" + std::to_string(c));
    if (it == t.header.end()) break;
    score_cols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  if (score_cols.empty()) throw SchemaError(path + ": no score_0 column");
  const std::size_t C = score_cols.size();
  const std::size_t label_col = column(t, "label", path);
  const std::size_t group_col = column(t, "group", path);

  std::size_t A = 0;
  while (std::find(t.header.begin(), t.header.end(), "gprob_" + std::to_string(A) + "_0") !=
         t.header.end()) {
    ++A;
  }
  std::vector<std::size_t> gcols;
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t c = 0; c < C; ++c) {
      gcols.push_back(column(t, "gprob_" + std::to_string(a) + "_" + std::to_string(c), path));
    }
  }

  ScoredDataset out;
  const std::size_t N = t.rows.size();
  if (N == 0) throw ParseError(path + ": no data rows");
  Matrix raw(N, C);
  out.labels.resize(N);
  out.groups.resize(N);
  int max_group = -1;
  for (std::size_t r = 0; r < N; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      raw(r, c) = parse_double(t.rows[r][score_cols[c]], path, r, t.header[score_cols[c]]);
      sum += raw(r, c);
    }
    if (std::abs(sum - 1.0) > 1e-9) ++out.renormalized_rows;
    auto label = as_id(t.rows[r][label_col]);
    auto group = as_id(t.rows[r][group_col]);
    if (!label || static_cast<std::size_t>(*label) >= C) {
      throw cell_error(path, r, "label", "expected a class id below " + std::to_string(C));
    }
    if (!group) throw cell_error(path, r, "group", "expected a nonnegative integer group id");
    out.labels[r] = *label;
    out.groups[r] = *group;
    max_group = std::max(max_group, *group);
  }
  if (A == 0) {
    A = static_cast<std::size_t>(max_group) + 1;
  } else if (static_cast<std::size_t>(max_group) >= A) {
    throw SchemaError(path + ": group id " + std::to_string(max_group) + " has no gprob columns");
  }
  out.num_groups = A;
  if (!gcols.empty()) {
    out.group_probs.resize(N * C * A);
    for (std::size_t r = 0; r < N; ++r) {
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t col = gcols[a * C + c];
          out.group_probs[(r * C + c) * A + a] = parse_double(t.rows[r][col], path, r, t.header[col]);
        }
      }
    }
  }
  out.scores = ScoreMatrix::clipped(std::move(raw), eps, &out.clip);
  if (out.renormalized_rows > 0) {
    out.notes.push_back(std::to_string(out.renormalized_rows) +
                        " score rows did not sum to 1 and were renormalized");
  }
  if (out.clip.clipped_entries > 0) {
    out.notes.push_back(std::to_string(out.clip.clipped_entries) +
                        " score entries were raised to the clip floor");
  }
  return out;
}

void write_scores_csv(const std::string& path, const Matrix& scores, std::span<const int> labels,
                      std::span<const int> groups, std::size_t num_groups,
                      std::span<const double> group_probs) {
  const std::size_t N = scores.rows(), C = scores.cols(), A = num_groups;
  if (labels.size() != N || groups.size() != N) {
    throw InvalidArgument("write_scores_csv: length mismatch");
  }
  if (!group_probs.empty() && group_probs.size() != N * C * A) {
    throw InvalidArgument("write_scores_csv: group probability tensor has wrong size");
  }
  auto f = open_out(path);
  for (std::size_t c = 0; c < C; ++c) f << "score_" << c << ',';
  f << "label,group";
  if (!group_probs.empty()) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t c = 0; c < C; ++c) f << ",gprob_" << a << '_' << c;
    }
  }
  f << '\n';
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < C; ++c) f << fmt(scores(i, c)) << ',';
    f << labels[i] << ',' << groups[i];
    if (!group_probs.empty()) {
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t c = 0; c < C; ++c) f << ',' << fmt(group_probs[(i * C + c) * A + a]);
      }
    }
    f << '\n';
  }
  if (!f) throw Error("write failed: " + path);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::span<const int> labels, std::span<const int> groups, double test_fraction,
    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("split: test_fraction must lie in (0, 1)");
  }
  if (labels.size() != groups.size()) throw InvalidArgument("split: length mismatch");
  const std::size_t N = labels.size();
  const auto n_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(N) * test_fraction));
  std::mt19937_64 rng(seed);

  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < N; ++i) cells[{labels[i], groups[i]}].push_back(i);
  const bool stratify = std::all_of(cells.begin(), cells.end(),
                                    [](const auto& kv) { return kv.second.size() >= 2; });

  std::vector<std::size_t> train, test;
  if (!stratify) {
    std::vector<std::size_t> all(N);
    for (std::size_t i = 0; i < N; ++i) all[i] = i;
    shuffle(all, rng);
    test.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_test), all.end());
  } else {
    // Largest remainder: floor of each quota, then one extra to the cells with
    // the largest fractional parts (cell order breaks ties).
    std::vector<std::size_t> take;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0, k = 0;
    for (const auto& [key, members] : cells) {
      const double quota = static_cast<double>(members.size()) * static_cast<double>(n_test) /
                           static_cast<double>(N);
      const auto base = static_cast<std::size_t>(std::floor(quota));
      take.push_back(base);
      assigned += base;
      remainders.push_back({quota - static_cast<double>(base), k++});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t r = 0; assigned < n_test && r < remainders.size(); ++r, ++assigned) {
      ++take[remainders[r].second];
    }
    k = 0;
    for (auto& [key, members] : cells) {
      shuffle(members, rng);
      const std::size_t t = take[k++];
      test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(t));
      train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(t), members.end());
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<TabularDataset, TabularDataset> split(const TabularDataset& ds, double test_fraction,
                                                std::uint64_t seed) {
  auto [train, test] = split_indices(ds.labels, ds.groups, test_fraction, seed);
  return {ds.subset(train), ds.subset(test)};
}

void SynthSpec::validate() const {
  if (n == 0 || classes == 0 || groups == 0) {
    throw InvalidArgument("synth: n, classes and groups must be positive");
  }
  if (group_weights.size() != groups || class_bias.rows() != groups ||
      class_bias.cols() != classes) {
    throw InvalidArgument("synth: group_weights / class_bias shapes do not match A and C");
  }
  auto check_simplex = [](std::span<const double> w, const std::string& what) {
    double s = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw InvalidArgument("synth: " + what + " has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("synth: " + what + " must sum to 1");
  };
  check_simplex(group_weights, "group_weights");
  for (std::size_t a = 0; a < groups; ++a) {
    check_simplex(class_bias.row(a), "class_bias row " + std::to_string(a));
  }
  if (!(cluster_separation >= 0.0) || !std::isfinite(group_shift)) {
    throw InvalidArgument("synth: separation must be nonnegative");
  }
}

SynthSpec biased_spec(std::size_t n, std::size_t classes, std::size_t groups,
                      std::uint64_t seed) {
  SynthSpec s;
  s.n = n;
  s.classes = classes;
  s.groups = groups;
  s.d = std::max<std::size_t>(4, classes);
  s.seed = seed;
  s.group_weights.assign(groups, 1.0 / static_cast<double>(groups));
  s.class_bias = Matrix(groups, classes);
  for (std::size_t a = 0; a < groups; ++a) {
    const double first = classes == 1 ? 1.0 : (a == 0 ? 0.8 : 0.4);
    s.class_bias(a, 0) = first;
    for (std::size_t c = 1; c < classes; ++c) {
      s.class_bias(a, c) = (1.0 - first) / static_cast<double>(classes - 1);
    }
  }
  return s;
}

SynthSpec fair_spec(std::size_t n, std::size_t classes, std::size_t groups, std::uint64_t seed) {
  SynthSpec s = biased_spec(n, classes, groups, seed);
  for (std::size_t a = 0; a < groups; ++a) {
    for (std::size_t c = 0; c < classes; ++c) s.class_bias(a, c) = 1.0 / static_cast<double>(classes);
  }
  return s;
}

TabularDataset generate_synth(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n, d = spec.d, C = spec.classes, A = spec.groups;
  std::mt19937_64 rng(spec.seed);

  // Class centers: axis-aligned when C <= d, random unit directions otherwise.
  Matrix centers(C, d);
  for (std::size_t c = 0; c < C; ++c) {
    if (C <= d) {
      centers(c, c) = spec.cluster_separation;
    } else if (d > 0) {
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        centers(c, j) = normal(rng);
        norm += centers(c, j) * centers(c, j);
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < d; ++j) {
        centers(c, j) *= spec.cluster_separation / (norm > 0.0 ? norm : 1.0);
      }
    }
  }

  TabularDataset ds;
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.groups.resize(n);
  ds.classes = C;
  ds.num_groups = A;
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t c = 0; c < C; ++c) ds.label_values.push_back(std::to_string(c));
  for (std::size_t a = 0; a < A; ++a) ds.group_values.push_back(std::to_string(a));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = categorical(rng, spec.group_weights);
    const std::size_t c = categorical(rng, spec.class_bias.row(a));
    ds.groups[i] = static_cast<int>(a);
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = centers(c, j) + normal(rng);
    if (d > 0) ds.features(i, d - 1) += spec.group_shift * static_cast<double>(a);
  }
  return ds;
}

Matrix with_group_features(const TabularDataset& ds) {
  const std::size_t N = ds.samples(), d = ds.features.cols(), A = ds.num_groups;
  Matrix out(N, d + A);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) out(i, j) = ds.features(i, j);
    out(i, d + ds.groups[i]) = 1.0;
  }
  return out;
}

}  // namespace fairproj
