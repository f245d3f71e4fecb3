#include "fairproj/divergence.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "fairproj/error.hpp"

namespace fairproj {

namespace {

/// Scratch vector that stays on the stack for the class counts seen in
/// practice; per-sample updates run N times per ADMM iteration.
class Scratch {
 public:
  explicit Scratch(std::size_t n) : n_(n) {
    if (n > inline_.size()) heap_.resize(n);
  }
  double* data() { return n_ > inline_.size() ? heap_.data() : inline_.data(); }
  std::span<double> span() { return {data(), n_}; }
  double& operator[](std::size_t i) { return data()[i]; }

 private:
  std::size_t n_;
  std::array<double, 32> inline_{};
  std::vector<double> heap_;
};

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

void require_xi(double xi, const char* what) {
  if (!(xi > 0.0) || !std::isfinite(xi)) {
    throw InvalidArgument(std::string(what) + ": xi must be positive and finite");
  }
}

double checked(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw InvalidDivergence(std::string("divergence handle returned non-finite value in ") + what);
  }
  return x;
}

// sqrt(u^2 + k) - u without cancellation for large positive u.
inline double ce_term(double u, double k) {
  const double r = std::sqrt(u * u + k);
  return u > 0.0 ? k / (r + u) : r - u;
}

// d/du [sqrt(u^2 + k) - u]
inline double ce_term_deriv(double u, double k) {
  const double r = std::sqrt(u * u + k);
  return u > 0.0 ? -k / (r * (r + u)) : u / r - 1.0;
}

/**
 * Separable simplex problem: find theta so that sum_c q_c(theta) = 1, where
 * q_c(theta) = argmin_{q >= 0} F_c(q) + theta q and dF(c, q) = F_c'(q) is
 * strictly increasing in q. Writes q and returns theta.
 */
template <typename DerivFn>
double solve_separable(std::size_t classes, DerivFn&& dF, std::span<double> q) {
  // Any feasible q has entries <= 1, so the inner search never needs q > 2;
  // a clamped value just tells the outer search that theta is too small.
  constexpr double kQCap = 2.0;
  constexpr double kInnerTol = 1e-10;
  constexpr double kOuterTol = 1e-9;

  auto inner = [&](std::size_t c, double theta) {
    if (checked(dF(c, kQCap), "f'") + theta <= 0.0) return kQCap;
    double lo = 0.0;
    double hi = kQCap;
    while (hi - lo > kInnerTol) {
      const double mid = 0.5 * (lo + hi);
      if (checked(dF(c, mid), "f'") + theta < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  auto total = [&](double theta) {
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      q[c] = inner(c, theta);
      s += q[c];
    }
    return s;
  };

  // Total mass is decreasing in theta; bracket the level set {total = 1}.
  double lo = 0.0;
  double hi = 0.0;
  const double s0 = total(0.0);
  if (s0 > 1.0) {
    double step = 1.0;
    hi = step;
    while (total(hi) > 1.0) {
      lo = hi;
      step *= 2.0;
      hi = lo + step;
      if (step > 1e300) throw ConvergenceFailure("generic v-update: theta bracket not found", s0);
    }
  } else if (s0 < 1.0) {
    double step = 1.0;
    lo = -step;
    while (total(lo) < 1.0) {
      hi = lo;
      step *= 2.0;
      lo = hi - step;
      if (step > 1e300) throw ConvergenceFailure("generic v-update: theta bracket not found", s0);
    }
  } else {
    return 0.0;
  }
  while (hi - lo > kOuterTol * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    const double s = total(mid);
    if (s > 1.0) {
      lo = mid;
    } else if (s < 1.0) {
      hi = mid;
    } else {
      return mid;
    }
  }
  const double theta = 0.5 * (lo + hi);
  total(theta);
  return theta;
}

/**
 * CE tilt: q_c = p_c / (t + d_c), d_c = max(v) - v_c, with t in (0, 1] fixed
 * by sum q = 1. Working in the distance t to the pole keeps full relative
 * precision when one class dominates. Returns gamma = -max(v) - t.
 */
double ce_tilt(std::span<const double> v, std::span<const double> p, std::span<double> q) {
  const std::size_t n = v.size();
  const double vmax = *std::max_element(v.begin(), v.end());
  auto mass = [&](double t, double* deriv) {
    double s = 0.0;
    double ds = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double inv = 1.0 / (t + (vmax - v[c]));
      s += p[c] * inv;
      ds -= p[c] * inv * inv;
    }
    if (deriv) *deriv = ds;
    return s;
  };

  // mass(1) <= sum p = 1, and mass(t) >= p_argmax / t grows without bound.
  double hi = 1.0;
  double lo = 1.0;
  int halvings = 0;
  while (mass(lo, nullptr) < 1.0) {
    hi = lo;
    lo *= 0.5;
    if (++halvings > 1100) {
      throw ConvergenceFailure("ce tilt: normalization bracket not found", mass(lo, nullptr));
    }
  }
  double t = lo;
  for (int it = 0; it < 200; ++it) {
    double ds = 0.0;
    const double s = mass(t, &ds) - 1.0;
    if (std::abs(s) <= 1e-15) break;
    if (s > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    double next = t - s / ds;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
    t = next;
  }
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    q[c] = p[c] / (t + (vmax - v[c]));
    total += q[c];
  }
  for (std::size_t c = 0; c < n; ++c) q[c] /= total;
  return -vmax - t;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

}  // namespace

DivergenceKind DivergenceKind::kl() {
  DivergenceKind k;
  k.tag = DivergenceTag::KL;
  k.f = [](double t) { return t > 0.0 ? t * std::log(t) : 0.0; };
  k.fprime = [](double t) { return std::log(t) + 1.0; };
  k.phi = [](double u) { return std::exp(u - 1.0); };
  return k;
}

DivergenceKind DivergenceKind::ce() {
  DivergenceKind k;
  k.tag = DivergenceTag::CE;
  k.f = [](double t) { return -std::log(t); };
  k.fprime = [](double t) { return -1.0 / t; };
  k.phi = [](double u) { return -1.0 / u; };
  return k;
}

DivergenceKind DivergenceKind::generic(std::function<double(double)> f,
                                       std::function<double(double)> fprime,
                                       std::function<double(double)> phi) {
  if (!f || !fprime) throw InvalidArgument("generic divergence needs f and f' handles");
  DivergenceKind k;
  k.tag = DivergenceTag::GenericF;
  k.f = std::move(f);
  k.fprime = std::move(fprime);
  k.phi = std::move(phi);
  return k;
}

std::string DivergenceKind::name() const {
  switch (tag) {
    case DivergenceTag::KL:
      return "kl";
    case DivergenceTag::CE:
      return "ce";
    case DivergenceTag::GenericF:
      return "generic";
  }
  return "unknown";
}

DivergenceKind DivergenceKind::from_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "kl") return kl();
  if (n == "ce") return ce();
  throw InvalidArgument("unknown divergence '" + name + "' (expected kl or ce)");
}

void softmax(std::span<const double> z, std::span<double> out) {
  require_same_size(z.size(), out.size(), "softmax");
  if (z.empty()) throw InvalidArgument("softmax: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : z) {
    if (!std::isfinite(x)) throw InvalidArgument("softmax: non-finite input");
    m = std::max(m, x);
  }
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    out[c] = std::exp(z[c] - m);
    s += out[c];
  }
  for (double& x : out) x /= s;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  softmax(z, out);
  return out;
}

double kl_conj(std::span<const double> v, std::span<const double> p) {
  require_same_size(v.size(), p.size(), "kl_conj");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < v.size(); ++c) m = std::max(m, v[c] + std::log(p[c]));
  double s = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) s += std::exp(v[c] + std::log(p[c]) - m);
  return m + std::log(s);
}

double ce_conj(std::span<const double> v, std::span<const double> p, std::span<double> q_out) {
  require_same_size(v.size(), p.size(), "ce_conj");
  Scratch buf(v.size());
  std::span<double> q = q_out.empty() ? buf.span() : q_out;
  ce_tilt(v, p, q);
  double val = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) val += v[c] * q[c] + p[c] * std::log(q[c] / p[c]);
  return val;
}

double divergence_value(const DivergenceKind& kind, std::span<const double> q,
                        std::span<const double> p) {
  require_same_size(q.size(), p.size(), "divergence_value");
  double s = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) {
    switch (kind.tag) {
      case DivergenceTag::KL:
        s += q[c] > 0.0 ? q[c] * std::log(q[c] / p[c]) : 0.0;
        break;
      case DivergenceTag::CE:
        s -= p[c] * std::log(q[c] / p[c]);
        break;
      case DivergenceTag::GenericF:
        s += p[c] * checked(kind.f(q[c] / p[c]), "f");
        break;
    }
  }
  return s;
}

double conj_gradient(const DivergenceKind& kind, std::span<const double> v,
                     std::span<const double> p, std::span<double> q_out) {
  require_same_size(v.size(), p.size(), "conj_gradient");
  require_same_size(v.size(), q_out.size(), "conj_gradient");
  switch (kind.tag) {
    case DivergenceTag::KL: {
      Scratch z(v.size());
      for (std::size_t c = 0; c < v.size(); ++c) z[c] = v[c] + std::log(p[c]);
      softmax(z.span(), q_out);
      return 1.0 - kl_conj(v, p);
    }
    case DivergenceTag::CE:
      return ce_tilt(v, p, q_out);
    case DivergenceTag::GenericF: {
      solve_separable(
          v.size(), [&](std::size_t c, double q) { return kind.fprime(q / p[c]) - v[c]; }, q_out);
      double total = 0.0;
      for (double x : q_out) total += x;
      for (double& x : q_out) x /= total;
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
  return 0.0;
}

double conj_value(const DivergenceKind& kind, std::span<const double> v,
                  std::span<const double> p) {
  switch (kind.tag) {
    case DivergenceTag::KL:
      return kl_conj(v, p);
    case DivergenceTag::CE:
      return ce_conj(v, p);
    case DivergenceTag::GenericF: {
      Scratch q(v.size());
      conj_gradient(kind, v, p, q.span());
      double val = 0.0;
      for (std::size_t c = 0; c < v.size(); ++c) val += v[c] * q[c];
      return val - divergence_value(kind, q.span(), p);
    }
  }
  return 0.0;
}

double v_update_objective(const DivergenceKind& kind, std::span<const double> p,
                          std::span<const double> a, double xi, std::span<const double> v) {
  require_same_size(p.size(), a.size(), "v_update_objective");
  require_same_size(p.size(), v.size(), "v_update_objective");
  double val = conj_value(kind, v, p);
  for (std::size_t c = 0; c < v.size(); ++c) val += xi * v[c] * v[c] + a[c] * v[c];
  return val;
}

KlUpdateStats v_update_kl_inplace(std::span<const double> p, std::span<const double> a,
                                  double xi, std::span<double> v) {
  const std::size_t n = p.size();
  require_same_size(n, a.size(), "v_update_kl");
  require_same_size(n, v.size(), "v_update_kl");
  require_xi(xi, "v_update_kl");

  Scratch logp(n), z(n), b(n), s(n);
  for (std::size_t c = 0; c < n; ++c) {
    logp[c] = std::log(p[c]);
    z[c] = v[c] + logp[c];
    b[c] = a[c] - 2.0 * xi * logp[c];
  }
  const double inv = 1.0 / (2.0 * xi);
  KlUpdateStats stats;
  double step = std::numeric_limits<double>::infinity();
  while (step > kKlStepTol) {
    if (stats.iterations == kKlMaxIters) {
      throw ConvergenceFailure("v_update_kl: fixed point did not converge", step);
    }
    softmax(z.span(), s.span());
    step = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double next = -inv * (s[c] + b[c]);
      step = std::max(step, std::abs(next - z[c]));
      z[c] = next;
    }
    ++stats.iterations;
  }
  softmax(z.span(), s.span());
  for (std::size_t c = 0; c < n; ++c) {
    v[c] = z[c] - logp[c];
    stats.residual = std::max(stats.residual, std::abs(s[c] + 2.0 * xi * z[c] + b[c]));
  }
  return stats;
}

std::vector<double> v_update_kl(std::span<const double> p, std::span<const double> a, double xi,
                                std::span<const double> init) {
  std::vector<double> v(init.begin(), init.end());
  v_update_kl_inplace(p, a, xi, v);
  return v;
}

CeUpdateStats v_update_ce_inplace(std::span<const double> p, std::span<const double> a,
                                  double xi, double init_z, std::span<double> v,
                                  std::span<double> q_out) {
  const std::size_t n = p.size();
  require_same_size(n, a.size(), "v_update_ce");
  require_same_size(n, v.size(), "v_update_ce");
  if (!q_out.empty()) require_same_size(n, q_out.size(), "v_update_ce");
  require_xi(xi, "v_update_ce");

  Scratch k(n), h(n);
  for (std::size_t c = 0; c < n; ++c) {
    k[c] = 2.0 * p[c] * xi;
    h[c] = 0.5 * a[c];
  }
  auto g = [&](double z, double* deriv) {
    double s = -1.0;
    double ds = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      s += ce_term(z + h[c], k[c]);
      ds += ce_term_deriv(z + h[c], k[c]);
    }
    if (deriv) *deriv = ds;
    return s;
  };

  CeUpdateStats stats;
  double z = std::isfinite(init_z) ? init_z : 0.0;
  double gz = g(z, nullptr);
  // g is strictly decreasing: bracket the root by doubling away from z.
  double lo = z;
  double hi = z;
  if (gz > 0.0) {
    double step = 1.0;
    do {
      lo = hi;
      hi = z + step;
      step *= 2.0;
      if (step > 1e300) throw ConvergenceFailure("v_update_ce: bracket not found", gz);
    } while (g(hi, nullptr) > 0.0);
  } else if (gz < 0.0) {
    double step = 1.0;
    do {
      hi = lo;
      lo = z - step;
      step *= 2.0;
      if (step > 1e300) throw ConvergenceFailure("v_update_ce: bracket not found", gz);
    } while (g(lo, nullptr) < 0.0);
  }

  constexpr double kRootTol = 1e-13;
  for (; stats.iterations < 200 && gz != 0.0; ++stats.iterations) {
    double dg = 0.0;
    gz = g(z, &dg);
    if (std::abs(gz) <= kRootTol) break;
    if (gz > 0.0) {
      lo = std::max(lo, z);
    } else {
      hi = std::min(hi, z);
    }
    double next = dg < 0.0 ? z - gz / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == z || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) {
      break;
    }
    z = next;
  }
  stats.z = z;
  stats.residual = g(z, nullptr);
  if (!(std::abs(stats.residual) <= 1e-9)) {
    throw ConvergenceFailure("v_update_ce: root not resolved", stats.residual);
  }
  const double inv = 1.0 / (2.0 * xi);
  for (std::size_t c = 0; c < n; ++c) {
    const double qc = ce_term(z + h[c], k[c]);
    if (!q_out.empty()) q_out[c] = qc;
    v[c] = -inv * (qc + a[c]);
  }
  return stats;
}

std::vector<double> v_update_ce(std::span<const double> p, std::span<const double> a, double xi,
                                double init_z) {
  std::vector<double> v(p.size());
  v_update_ce_inplace(p, a, xi, init_z, v);
  return v;
}

std::vector<double> v_update_generic(const DivergenceKind& kind, std::span<const double> p,
                                     std::span<const double> a, double xi) {
  const std::size_t n = p.size();
  require_same_size(n, a.size(), "v_update_generic");
  require_xi(xi, "v_update_generic");
  if (!kind.fprime) throw InvalidArgument("v_update_generic: divergence has no f' handle");
  const double inv = 1.0 / (2.0 * xi);
  std::vector<double> q(n);
  solve_separable(
      n,
      [&](std::size_t c, double qc) {
        return kind.fprime(qc / p[c]) + (a[c] + qc) * inv;
      },
      q);
  std::vector<double> v(n);
  for (std::size_t c = 0; c < n; ++c) v[c] = -inv * (q[c] + a[c]);
  return v;
}

}  // namespace fairproj
