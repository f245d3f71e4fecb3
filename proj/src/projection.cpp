#include "fairproj/projection.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fairproj/error.hpp"
#include "fairproj/kernels.hpp"
#include "fairproj/parallel.hpp"

namespace fairproj {

namespace {

using nlohmann::json;

void check_block(std::size_t p, std::size_t g, std::size_t lambda, std::size_t out) {
  if (g != p * lambda || out != p) {
    throw InvalidArgument("tilt: expected a K x C block with K = lambda length and C = |p|");
  }
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* what,
                        bool optional = false) {
  if (optional && j.is_array() && j.empty()) return {};
  if (!j.is_array() || j.size() != rows) throw InvalidModel(std::string("bad ") + what);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = j[r].get<std::vector<double>>();
    if (row.size() != cols) throw InvalidModel(std::string("bad ") + what);
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

}  // namespace

GroupModel ProjectedModel::group_model(std::size_t samples, std::vector<double> group_probs) const {
  GroupModel gm;
  gm.samples = samples;
  gm.groups = groups;
  gm.classes = classes;
  gm.p_s = p_s;
  gm.p_s_given_y = p_s_given_y;
  gm.cell_counts = cell_counts;
  if (group_probs.size() != samples * classes * groups) {
    throw InvalidModel("group probabilities do not match the model's groups and classes");
  }
  gm.group_probs = std::move(group_probs);
  return gm;
}

void ProjectedModel::validate() const {
  if (classes == 0 || groups == 0) throw InvalidModel("projected model has no classes or groups");
  if (!(eps_clip > 0.0) || !(eps_clip < 1.0 / static_cast<double>(classes))) {
    throw InvalidModel("projected model: eps_clip must lie in (0, 1/C)");
  }
  if (lambda.size() != constraint_rows(metric, groups, classes)) {
    throw InvalidModel("projected model: lambda has " + std::to_string(lambda.size()) +
                       " entries, metric needs " +
                       std::to_string(constraint_rows(metric, groups, classes)));
  }
  for (double x : lambda) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidModel("projected model: lambda must be >= 0");
  }
  if (p_s.size() != groups || p_s_given_y.rows() != groups || p_s_given_y.cols() != classes) {
    throw InvalidModel("projected model: marginals have the wrong shape");
  }
  if (divergence.tag == DivergenceTag::GenericF) {
    throw InvalidModel("projected model: only kl and ce can be stored");
  }
}

ProjectedModel make_projected_model(const DualSolution& sol, const ConstraintSet& cs,
                                    const GroupModel& gm, const DivergenceKind& kind,
                                    double eps_clip) {
  ProjectedModel m;
  m.lambda = sol.lambda;
  m.metric = cs.metric();
  m.alpha = cs.alpha();
  m.divergence = kind;
  m.eps_clip = eps_clip;
  m.groups = gm.groups;
  m.classes = gm.classes;
  m.p_s = gm.p_s;
  m.p_s_given_y = gm.p_s_given_y;
  m.cell_counts = gm.cell_counts;
  m.iterations = sol.iterations;
  m.converged = sol.converged;
  m.rho = sol.rho;
  m.zeta = sol.zeta;
  m.primal_residuals = sol.primal_residuals;
  return m;
}

void tilt_argument(std::span<const double> g, std::span<const double> lambda,
                   std::span<double> v) {
  const std::size_t K = lambda.size();
  const auto& kt = kernels::active();
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = -kt.dot(g.data() + c * K, lambda.data(), K);
}

void tilt_kl(std::span<const double> p, std::span<const double> g,
             std::span<const double> lambda, std::span<double> out) {
  check_block(p.size(), g.size(), lambda.size(), out.size());
  tilt_argument(g, lambda, out);
  for (std::size_t c = 0; c < p.size(); ++c) out[c] += std::log(p[c]);
  softmax(out, out);
}

std::vector<double> tilt_kl(std::span<const double> p, std::span<const double> g,
                            std::span<const double> lambda) {
  std::vector<double> out(p.size());
  tilt_kl(p, g, lambda, out);
  return out;
}

double tilt_ce(std::span<const double> p, std::span<const double> g,
               std::span<const double> lambda, std::span<double> out) {
  check_block(p.size(), g.size(), lambda.size(), out.size());
  std::vector<double> v(p.size());
  tilt_argument(g, lambda, v);
  return conj_gradient(DivergenceKind::ce(), v, p, out);
}

std::vector<double> tilt_ce(std::span<const double> p, std::span<const double> g,
                            std::span<const double> lambda) {
  std::vector<double> out(p.size());
  tilt_ce(p, g, lambda, out);
  return out;
}

void tilt(const DivergenceKind& kind, std::span<const double> p, std::span<const double> g,
          std::span<const double> lambda, std::span<double> out) {
  switch (kind.tag) {
    case DivergenceTag::KL:
      tilt_kl(p, g, lambda, out);
      return;
    case DivergenceTag::CE:
      tilt_ce(p, g, lambda, out);
      return;
    case DivergenceTag::GenericF: {
      check_block(p.size(), g.size(), lambda.size(), out.size());
      std::vector<double> v(p.size());
      tilt_argument(g, lambda, v);
      conj_gradient(kind, v, p, out);
      return;
    }
  }
}

Matrix project_scores(const ProjectedModel& model, const ScoreMatrix& scores,
                      const GroupModel& gm_new, std::size_t workers) {
  model.validate();
  if (scores.classes() != model.classes || gm_new.classes != model.classes ||
      gm_new.groups != model.groups || gm_new.samples != scores.samples()) {
    throw InvalidModel("project_scores: scores/groups do not match the model (C=" +
                       std::to_string(model.classes) + ", A=" + std::to_string(model.groups) +
                       ")");
  }
  const ConstraintSet cs = build_constraints(model.metric, scores, gm_new, model.alpha);
  if (cs.rows() != model.lambda.size()) {
    throw InvalidModel("project_scores: constraint rows do not match lambda");
  }
  const std::size_t N = scores.samples(), C = scores.classes();
  Matrix out(N, C);
  WorkerPool pool(workers);
  pool.run(chunk_count(N), [&](std::size_t chunk) {
    const std::size_t end = std::min(N, (chunk + 1) * kChunkSamples);
    for (std::size_t i = chunk * kChunkSamples; i < end; ++i) {
      tilt(model.divergence, scores.row(i), cs.sample(i), model.lambda, out.row(i));
    }
  });
  return out;
}

void save_projected_model(const ProjectedModel& model, const std::string& path) {
  model.validate();
  json j;
  j["format"] = "fairproj-projected v1";
  j["divergence"] = model.divergence.name();
  j["metric"] = metric_name(model.metric);
  j["alpha"] = model.alpha;
  j["eps_clip"] = model.eps_clip;
  j["groups"] = model.groups;
  j["classes"] = model.classes;
  j["lambda"] = model.lambda;
  j["p_s"] = model.p_s;
  j["p_s_given_y"] = matrix_json(model.p_s_given_y);
  j["cell_counts"] = matrix_json(model.cell_counts);
  j["iterations"] = model.iterations;
  j["converged"] = model.converged;
  j["rho"] = model.rho;
  j["zeta"] = model.zeta;
  j["primal_residuals"] = model.primal_residuals;
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed: " + path);
}

ProjectedModel load_projected_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw InvalidModel(path + ": " + e.what());
  }
  if (j.value("format", "") != "fairproj-projected v1") {
    throw InvalidModel(path + ": not a projected model file");
  }
  ProjectedModel m;
  try {
    m.divergence = DivergenceKind::from_name(j.at("divergence").get<std::string>());
    m.metric = metric_from_name(j.at("metric").get<std::string>());
    m.alpha = j.at("alpha").get<double>();
    m.eps_clip = j.at("eps_clip").get<double>();
    m.groups = j.at("groups").get<std::size_t>();
    m.classes = j.at("classes").get<std::size_t>();
    m.lambda = j.at("lambda").get<std::vector<double>>();
    m.p_s = j.at("p_s").get<std::vector<double>>();
    m.p_s_given_y = matrix_from_json(j.at("p_s_given_y"), m.groups, m.classes, "p_s_given_y");
    m.cell_counts = matrix_from_json(j.at("cell_counts"), m.groups, m.classes, "cell_counts", true);
    m.iterations = j.value("iterations", 0);
    m.converged = j.value("converged", false);
    m.rho = j.value("rho", 0.0);
    m.zeta = j.value("zeta", 0.0);
    m.primal_residuals = j.value("primal_residuals", std::vector<double>{});
  } catch (const json::exception& e) {
    throw InvalidModel(path + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidModel(path + ": " + e.what());
  }
  m.validate();
  return m;
}

}  // namespace fairproj
