#include "offgrid/lpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace offgrid {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kGolden = 0.6180339887498949;

// Unit directions used to sweep offsets at a fixed Fisher-Rao radius.
std::vector<Eigen::VectorXd> sweep_directions(int d, int count) {
  std::vector<Eigen::VectorXd> dirs;
  if (d == 1) {
    dirs.push_back(Eigen::VectorXd::Ones(1));
    return dirs;
  }
  if (d == 2) {
    // Evenness of rho halves the circle.
    for (int a = 0; a < count; ++a) {
      const double th = kPi * a / count;
      Eigen::VectorXd u(2);
      u << std::cos(th), std::sin(th);
      dirs.push_back(u);
    }
    return dirs;
  }
  // d == 3: Fibonacci hemisphere.
  for (int a = 0; a < count; ++a) {
    const double z = (a + 0.5) / count;  // upper hemisphere (evenness)
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = 2.0 * kPi * a * kGolden;
    Eigen::VectorXd u(3);
    u << r * std::cos(th), r * std::sin(th), z;
    dirs.push_back(u);
  }
  return dirs;
}

// Golden-section search over [a, b]; maximizes f.
double golden_max(double a, double b, const std::function<double(double)>& f, double& arg) {
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 120 && (b - a) > 1e-14 * std::max(1.0, std::abs(b)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    }
  }
  arg = 0.5 * (a + b);
  return f(arg);
}
}  // namespace

CurvatureAudit audit_curvature(const TIKernel& kernel, double r0, const ParameterBox& box,
                               long grid_density) {
  if (!kernel.normalized())
    throw ValidationError("audit_curvature: kernel must be normalized to rho(0)=1");
  if (!(r0 > 0)) throw ValidationError("audit_curvature: r0 must be positive");
  if (box.dim() != kernel.dim())
    throw ValidationError("audit_curvature: box/kernel dimension mismatch");
  if (grid_density <= 0) grid_density = 10000;

  const int d = kernel.dim();
  const MetricTensor metric = kernel.metric();
  const Eigen::MatrixXd& G = metric.g_inv_sqrt;

  // Strata live in offset space; the box caps the largest reachable offset.
  const double box_fr = metric.distance(box.lo, box.hi);
  const double trunc = std::min(50.0, box_fr);
  if (!(trunc > r0))
    throw ValidationError("audit_curvature: far stratum is empty (box smaller than r0)");

  const int n_dirs = (d == 1) ? 1 : ((d == 2) ? 128 : 256);
  const std::vector<Eigen::VectorXd> dirs = sweep_directions(d, n_dirs);
  const long per_dir = std::max<long>(8, grid_density / static_cast<long>(dirs.size()));

  auto offset_at = [&](double dist, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return dist * (G * u);
  };

  CurvatureAudit out;
  out.truncation_fr = trunc;

  // --- far stratum: maximize K over d_g in [r0, trunc] ------------------
  {
    double best = -std::numeric_limits<double>::infinity();
    double best_dist = r0;
    int best_dir = 0;
    // Two radial bands: dense near the r0 shell where the maximum lives,
    // coarse out to the truncation radius.
    const double band_edge = std::min(3.0 * r0, trunc);
    const long n1 = (per_dir * 3) / 5, n2 = per_dir - n1;
    for (std::size_t di = 0; di < dirs.size(); ++di) {
      for (long a = 0; a < n1; ++a) {
        const double dist = r0 + (band_edge - r0) * a / std::max<long>(1, n1 - 1);
        const double v = kernel.rho(offset_at(dist, dirs[di]));
        if (v > best) best = v, best_dist = dist, best_dir = static_cast<int>(di);
      }
      for (long a = 0; a < n2; ++a) {
        const double dist = band_edge + (trunc - band_edge) * (a + 1) / n2;
        const double v = kernel.rho(offset_at(dist, dirs[di]));
        if (v > best) best = v, best_dist = dist, best_dir = static_cast<int>(di);
      }
    }
    out.far_points = static_cast<long>(dirs.size()) * per_dir;

    // Coordinate refinement around the winning (radius, direction).
    const Eigen::VectorXd u0 = dirs[best_dir];
    double dist = best_dist;
    Eigen::VectorXd u = u0;
    if (d == 1) {
      const double lo = std::max(r0, dist - (trunc - r0) * 0.05);
      const double hi = std::min(trunc, dist + (trunc - r0) * 0.05);
      best = golden_max(lo, hi, [&](double x) { return kernel.rho(offset_at(x, u)); }, dist);
    } else if (d == 2) {
      double th = std::atan2(u[1], u[0]);
      for (int round = 0; round < 4; ++round) {
        const double lo = std::max(r0, dist * 0.9), hi = std::min(trunc, dist * 1.1);
        golden_max(lo, hi,
                   [&](double x) {
                     Eigen::VectorXd uu(2);
                     uu << std::cos(th), std::sin(th);
                     return kernel.rho(offset_at(x, uu));
                   },
                   dist);
        const double w = kPi / n_dirs;
        best = golden_max(th - w, th + w,
                          [&](double t) {
                            Eigen::VectorXd uu(2);
                            uu << std::cos(t), std::sin(t);
                            return kernel.rho(offset_at(dist, uu));
                          },
                          th);
      }
      u.resize(2);
      u << std::cos(th), std::sin(th);
    } else {
      const double lo = std::max(r0, dist * 0.9), hi = std::min(trunc, dist * 1.1);
      best = golden_max(lo, hi, [&](double x) { return kernel.rho(offset_at(x, u)); }, dist);
    }
    out.eps0_hat = 0.5 * (1.0 - best);
    out.far_witness.offset = offset_at(dist, u);
    out.far_witness.value = best;
    out.far_witness.fr_distance = dist;
  }

  // --- near stratum: minimize the metric-normalized curvature over the
  // closed ball d_g in [0, r0] ------------------------------------------
  {
    double worst = std::numeric_limits<double>::infinity();
    double worst_dist = 0.0;
    int worst_dir = 0;
    Eigen::VectorXd worst_vec = Eigen::VectorXd::Unit(d, 0);

    auto curvature_min = [&](const Eigen::VectorXd& h, Eigen::VectorXd* vec) -> double {
      Eigen::MatrixXd hess(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
          Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
          alpha[a] += 1;
          alpha[b] += 1;
          hess(a, b) = hess(b, a) = kernel.rho_partial(h, alpha);
        }
      Eigen::MatrixXd M = -G * hess * G;
      if (d == 1) {
        if (vec) *vec = Eigen::VectorXd::Ones(1);
        return M(0, 0);
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
      if (vec) *vec = es.eigenvectors().col(0);
      return es.eigenvalues()[0];
    };

    for (std::size_t di = 0; di < dirs.size(); ++di) {
      for (long a = 0; a < per_dir; ++a) {
        const double dist = r0 * a / std::max<long>(1, per_dir - 1);
        const double v = curvature_min(offset_at(dist, dirs[di]), nullptr);
        if (v < worst) worst = v, worst_dist = dist, worst_dir = static_cast<int>(di);
      }
    }
    out.near_points = static_cast<long>(dirs.size()) * per_dir;

    Eigen::VectorXd u = dirs[worst_dir];
    double dist = worst_dist;
    if (d == 2) {
      double th = std::atan2(u[1], u[0]);
      for (int round = 0; round < 4; ++round) {
        golden_max(std::max(0.0, dist - 0.1 * r0), std::min(r0, dist + 0.1 * r0),
                   [&](double x) {
                     Eigen::VectorXd uu(2);
                     uu << std::cos(th), std::sin(th);
                     return -curvature_min(offset_at(x, uu), nullptr);
                   },
                   dist);
        const double w = kPi / n_dirs;
        golden_max(th - w, th + w,
                   [&](double t) {
                     Eigen::VectorXd uu(2);
                     uu << std::cos(t), std::sin(t);
                     return -curvature_min(offset_at(dist, uu), nullptr);
                   },
                   th);
      }
      u.resize(2);
      u << std::cos(th), std::sin(th);
    } else {
      golden_max(std::max(0.0, dist - 0.05 * r0), std::min(r0, dist + 0.05 * r0),
                 [&](double x) { return -curvature_min(offset_at(x, u), nullptr); }, dist);
    }
    Eigen::VectorXd vmin;
    worst = curvature_min(offset_at(dist, u), &vmin);
    out.eps2_hat = 0.25 * worst;
    out.near_witness.offset = offset_at(dist, u);
    out.near_witness.direction = vmin;
    out.near_witness.value = worst;
    out.near_witness.fr_distance = dist;
  }

  // Quartic tail beyond the truncation radius: for the sinc-4 pivot one
  // coordinate of h/(4 tau) has magnitude at least sqrt(3)/2 * d_g / sqrt(d),
  // and |sinc z|^4 <= z^{-4}.
  if (dynamic_cast<const Sinc4Kernel*>(&kernel) != nullptr) {
    const double z = 0.5 * std::sqrt(3.0) * trunc / std::sqrt(static_cast<double>(d));
    out.far_tail_bound = 1.0 / (z * z * z * z);
  } else {
    out.far_tail_bound = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

DerivativeBoundAudit derivative_bound_audit(const TIKernel& kernel, long trials,
                                            std::uint64_t seed) {
  if (trials < 1) throw ValidationError("derivative_bound_audit: trials must be >= 1");
  const int d = kernel.dim();
  const MetricTensor metric = kernel.metric();
  const Eigen::MatrixXd& G = metric.g_inv_sqrt;
  const bool sinc4 = dynamic_cast<const Sinc4Kernel*>(&kernel) != nullptr;

  DerivativeBoundAudit out;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  for (int i = 0; i <= 3; ++i)
    for (int j = 0; i + j <= 3; ++j) {
      Rng rng(seed + 977 * static_cast<std::uint64_t>(16 * i + j));
      double best = operator_norm(kernel, zero, zero, i, j, G);
      Eigen::VectorXd best_h = zero;
      for (long t = 0; t < trials; ++t) {
        Eigen::VectorXd u(d);
        for (int a = 0; a < d; ++a) u[a] = rng.normal();
        if (u.norm() == 0.0) continue;
        u.normalize();
        const double dist = rng.uniform(0.0, 8.0);
        Eigen::VectorXd h = dist * (G * u);
        const double v = operator_norm(kernel, h, zero, i, j, G);
        if (v > best) {
          best = v;
          best_h = h;
        }
      }
      // Shrinking random-walk refinement around the best sample.
      double step = 0.5;
      for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd h = best_h;
        for (int a = 0; a < d; ++a) h[a] += step * rng.normal() * G(a, a);
        const double v = operator_norm(kernel, h, zero, i, j, G);
        if (v > best) {
          best = v;
          best_h = h;
        } else {
          step *= 0.97;
        }
      }
      DerivativeBoundAudit::Entry e;
      e.i = i;
      e.j = j;
      e.estimate = best;
      e.bound = sinc4 ? sinc4_b_bound(d, i, j) : std::numeric_limits<double>::quiet_NaN();
      e.witness = best_h;
      if (sinc4 && best > e.bound) out.within_bounds = false;
      out.entries.push_back(std::move(e));
    }
  return out;
}

InterferenceCheck interference_check(const std::vector<Eigen::VectorXd>& points,
                                     const TIKernel& kernel, double eps0, double eps2, double b0,
                                     double b2) {
  if (points.size() < 2) throw ValidationError("interference_check: need at least 2 points");
  if (!(eps0 > 0) || !(eps2 > 0) || !(b0 > 0) || !(b2 > 0))
    throw ValidationError("interference_check: constants must be positive");
  const MetricTensor metric = kernel.metric();
  const Eigen::MatrixXd& G = metric.g_inv_sqrt;
  const int pairs[4][2] = {{0, 0}, {0, 2}, {1, 0}, {1, 2}};

  InterferenceCheck out;
  out.rhs = std::min(eps0 / b0, 2.0 * eps2 / b2);
  out.lhs.resize(static_cast<long>(points.size()), 4);
  out.worst = -1.0;
  for (std::size_t r = 0; r < points.size(); ++r) {
    for (int p = 0; p < 4; ++p) {
      double sum = 0.0;
      for (std::size_t l = 0; l < points.size(); ++l) {
        if (l == r) continue;
        sum += operator_norm(kernel, points[r], points[l], pairs[p][0], pairs[p][1], G);
      }
      const double lhs = 32.0 * sum;
      out.lhs(static_cast<long>(r), p) = lhs;
      if (lhs > out.worst) {
        out.worst = lhs;
        out.worst_point = static_cast<int>(r);
        out.worst_pair = p;
      }
    }
  }
  out.pass = out.worst <= out.rhs;
  return out;
}

double sinc4_b_bound(int d, int i, int j) {
  if (d < 1) throw ValidationError("sinc4_b_bound: d must be >= 1");
  if (i < 0 || j < 0 || i + j > 3) throw ValidationError("sinc4_b_bound: need i+j <= 3");
  return std::pow(12.0 * d, 0.5 * (i + j));
}

double LpcReport::b_aggregate(int i) const {
  if (i != 0 && i != 2) throw ValidationError("b_aggregate: only B_0 and B_2 are defined");
  double b0i = 0.0, b1i = 0.0;
  bool f0 = false, f1 = false;
  for (const auto& e : b) {
    if (e.i == 0 && e.j == i) b0i = e.bound, f0 = true;
    if (e.i == 1 && e.j == i) b1i = e.bound, f1 = true;
  }
  if (!f0 || !f1) throw ValidationError("b_aggregate: missing B_ij entries");
  return 1.0 + b0i + b1i;
}

void LpcReport::attach_audit(const CurvatureAudit& a) {
  audit = a;
  has_audit = true;
  failed = (a.eps0_hat < eps0_lower) || (a.eps2_hat < eps2_lower);
}

LpcReport sinc4_lpc_params(int d, int s0) {
  if (d < 1) throw ValidationError("sinc4_lpc_params: d must be >= 1");
  if (s0 < 1) throw ValidationError("sinc4_lpc_params: s0 must be >= 1");
  LpcReport r;
  r.d = d;
  r.s0 = s0;
  r.r0 = 1.0 / (4.0 * d);
  r.eps0_lower = 1.0 / (32.0 * d * d * d);
  r.eps2_lower = 23.0 / 128.0;
  r.delta0 = 42.66 * std::pow(static_cast<double>(s0), 0.25) * std::pow(static_cast<double>(d), 1.75);
  for (int i = 0; i <= 3; ++i)
    for (int j = 0; i + j <= 3; ++j) r.b.push_back({i, j, sinc4_b_bound(d, i, j)});
  // Assumption-level sanity: the near radius must clear 1/sqrt(B_02).
  if (!(r.r0 < 1.0 / std::sqrt(sinc4_b_bound(d, 0, 2))))
    throw NumericalError("sinc4_lpc_params: r0 violates the B_02 constraint");
  return r;
}

std::string LpcReport::to_json_string() const {
  nlohmann::json j;
  j["d"] = d;
  j["s0"] = s0;
  j["r0"] = r0;
  j["eps0_lower"] = eps0_lower;
  j["eps2_lower"] = eps2_lower;
  j["delta0"] = delta0;
  nlohmann::json bj = nlohmann::json::array();
  for (const auto& e : b) bj.push_back({{"i", e.i}, {"j", e.j}, {"bound", e.bound}});
  j["b"] = std::move(bj);
  if (has_audit) {
    auto wit = [](const CurvatureWitness& w) {
      nlohmann::json o;
      o["value"] = w.value;
      o["fr_distance"] = w.fr_distance;
      o["offset"] = std::vector<double>(w.offset.data(), w.offset.data() + w.offset.size());
      if (w.direction.size() > 0)
        o["direction"] =
            std::vector<double>(w.direction.data(), w.direction.data() + w.direction.size());
      return o;
    };
    nlohmann::json a;
    a["eps0_hat"] = audit.eps0_hat;
    a["eps2_hat"] = audit.eps2_hat;
    a["far_witness"] = wit(audit.far_witness);
    a["near_witness"] = wit(audit.near_witness);
    a["far_points"] = audit.far_points;
    a["near_points"] = audit.near_points;
    a["truncation_fr"] = audit.truncation_fr;
    if (std::isfinite(audit.far_tail_bound)) a["far_tail_bound"] = audit.far_tail_bound;
    j["audit"] = std::move(a);
    j["failed"] = failed;
  }
  return j.dump(2);
}

}  // namespace offgrid
