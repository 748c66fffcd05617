#include "offgrid/solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace offgrid {

namespace {

constexpr double kNearOptimalSlack = 1e-12;
// Verdict comparisons carry a small slack so bounds met with equality (the
// gamma = 0 limit) are not rejected on rounding.
constexpr double kVerdictSlack = 1e-9;

// Signed coefficient over a model-kernel column; the population residual is
// y - F mu = sum_j c_j F delta_{x_j} under the synthetic closure.
struct GramTerms {
  std::vector<double> c;
  std::vector<Eigen::VectorXd> x;
};

GramTerms residual_terms(const BlassoProblem& p, const DiscreteMeasure& mu) {
  GramTerms t;
  t.c.reserve(p.truth.size() + p.noise.size() + mu.size());
  t.x.reserve(t.c.capacity());
  for (const auto& a : p.truth.atoms) {
    t.c.push_back(a.w);
    t.x.push_back(a.x);
  }
  for (const auto& a : p.noise.atoms) {
    t.c.push_back(a.w);
    t.x.push_back(a.x);
  }
  for (const auto& a : mu.atoms) {
    t.c.push_back(-a.w);
    t.x.push_back(a.x);
  }
  return t;
}

double gram_quadratic(const TIKernel& k, const GramTerms& t) {
  const int n = static_cast<int>(t.c.size());
  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    q += t.c[i] * t.c[i] * k.rho(Eigen::VectorXd::Zero(k.dim()));
    for (int j = i + 1; j < n; ++j) q += 2.0 * t.c[i] * t.c[j] * k.rho(t.x[i] - t.x[j]);
  }
  return q;
}

void validate_problem(const BlassoProblem& p) {
  if (!(p.kappa > 0.0)) throw ValidationError("kappa must be positive");
  if (p.box.dim() <= 0) throw ValidationError("the parameter box is empty");
  if (p.mode == BlassoProblem::Mode::sketched) {
    if (!p.op) throw ValidationError("sketched mode requires a sketch operator");
    if (p.op->dim() != p.box.dim())
      throw ValidationError("sketch operator dimension does not match the box");
    if (p.z.size() != p.op->m())
      throw ValidationError("observed sketch length does not match the operator");
  } else {
    if (!p.model)
      throw ValidationError(
          "population objective requires the synthetic observation closure "
          "(a model kernel with truth/noise anchors)");
    if (p.model->dim() != p.box.dim())
      throw ValidationError("model kernel dimension does not match the box");
    if (p.truth.size() > 0 && p.truth.dim() != p.box.dim())
      throw ValidationError("truth atoms do not match the box dimension");
    if (p.noise.size() > 0 && p.noise.dim() != p.box.dim())
      throw ValidationError("noise anchors do not match the box dimension");
  }
}

void validate_measure_in_box(const BlassoProblem& p, const DiscreteMeasure& mu) {
  if (mu.size() == 0) return;
  if (mu.dim() != p.box.dim()) throw ValidationError("measure dimension does not match the box");
  for (const auto& a : mu.atoms)
    if (!p.box.contains(a.x)) throw ValidationError("measure has an atom outside the box");
}

// eta(x) = <y - F mu, F delta_x> evaluated through whichever data term the
// problem carries; grad is its x-gradient. The sketched column F delta_x is
// feature_column(x)/sqrt(m).
struct EtaEvaluator {
  const BlassoProblem* p = nullptr;
  Eigen::VectorXcd res;  // sketched residual
  GramTerms terms;       // population residual

  static EtaEvaluator make(const BlassoProblem& p, const DiscreteMeasure& mu) {
    EtaEvaluator e;
    e.p = &p;
    if (p.mode == BlassoProblem::Mode::sketched)
      e.res = p.z - forward(*p.op, mu);
    else
      e.terms = residual_terms(p, mu);
    return e;
  }

  double value(const Eigen::VectorXd& x) const {
    if (p->mode == BlassoProblem::Mode::sketched) {
      const Eigen::VectorXcd phi = p->op->feature_column(x);
      std::complex<double> dot(0.0, 0.0);
      for (int i = 0; i < phi.size(); ++i) dot += std::conj(phi[i]) * res[i];
      return dot.real() / std::sqrt(static_cast<double>(p->op->m()));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < terms.c.size(); ++j)
      s += terms.c[j] * p->model->rho(terms.x[j] - x);
    return s;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    const int d = static_cast<int>(x.size());
    Eigen::VectorXd g(d);
    if (p->mode == BlassoProblem::Mode::sketched) {
      const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(p->op->m()));
      for (int l = 0; l < d; ++l) {
        Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
        alpha[l] = 1;
        const Eigen::VectorXcd dphi = p->op->feature_column(x, alpha);
        std::complex<double> dot(0.0, 0.0);
        for (int i = 0; i < dphi.size(); ++i) dot += std::conj(dphi[i]) * res[i];
        g[l] = dot.real() * inv_sqrt_m;
      }
      return g;
    }
    for (int l = 0; l < d; ++l) {
      Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
      alpha[l] = 1;
      double s = 0.0;
      // d/dx rho(x_j - x) = -rho_l evaluated at x_j - x.
      for (std::size_t j = 0; j < terms.c.size(); ++j)
        s -= terms.c[j] * p->model->rho_partial(terms.x[j] - x, alpha);
      g[l] = s;
    }
    return g;
  }
};

// Squared norm of the forward image of a unit atom at x.
double atom_column_norm2(const BlassoProblem& p, const Eigen::VectorXd& x) {
  if (p.mode == BlassoProblem::Mode::sketched)
    return p.op->feature_column(x).squaredNorm() / static_cast<double>(p.op->m());
  return p.model->rho(Eigen::VectorXd::Zero(p.box.dim()));
}

// Golden-section maximization of f on [a, b]; deterministic fixed iteration
// count, returns the bracket midpoint.
template <typename F>
double golden_max(const F& f, double a, double b, int iters = 48) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < iters; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct LmoResult {
  Eigen::VectorXd x;
  double eta = 0.0;      // signed value at x
  double abs_eta = 0.0;  // scan-refined maximum of |eta|
};

// Grid scan of |eta| over the box (parallel, deterministic argmax: ties go to
// the smallest flat index) followed by cyclic per-axis golden-section
// refinement inside the winning cell.
LmoResult lmo_scan(const BlassoProblem& p, const EtaEvaluator& eta, int grid_n, int refine_steps) {
  const int d = p.box.dim();
  std::int64_t total = 1;
  for (int j = 0; j < d; ++j) total *= grid_n;

  auto point_at = [&](std::int64_t idx) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) {
      const std::int64_t i = idx % grid_n;
      idx /= grid_n;
      x[j] = p.box.lo[j] + (p.box.hi[j] - p.box.lo[j]) * static_cast<double>(i) /
                               static_cast<double>(grid_n - 1);
    }
    return x;
  };

  std::vector<double> best_abs(kParallelChunks, -1.0);
  std::vector<std::int64_t> best_idx(kParallelChunks, -1);
  parallel_for_chunks(total, [&](int chunk, std::int64_t lo, std::int64_t hi) {
    double ba = -1.0;
    std::int64_t bi = -1;
    for (std::int64_t idx = lo; idx < hi; ++idx) {
      const double a = std::abs(eta.value(point_at(idx)));
      if (a > ba) {
        ba = a;
        bi = idx;
      }
    }
    best_abs[chunk] = ba;
    best_idx[chunk] = bi;
  });
  double ba = -1.0;
  std::int64_t bi = 0;
  for (int c = 0; c < kParallelChunks; ++c) {
    if (best_idx[c] < 0) continue;
    if (best_abs[c] > ba || (best_abs[c] == ba && best_idx[c] < bi)) {
      ba = best_abs[c];
      bi = best_idx[c];
    }
  }

  LmoResult r;
  r.x = point_at(bi);
  for (int step = 0; step < refine_steps; ++step) {
    const int axis = step % d;
    const double h = (p.box.hi[axis] - p.box.lo[axis]) / static_cast<double>(grid_n - 1);
    const double a = std::max(p.box.lo[axis], r.x[axis] - h);
    const double b = std::min(p.box.hi[axis], r.x[axis] + h);
    Eigen::VectorXd probe = r.x;
    const double t = golden_max(
        [&](double v) {
          probe[axis] = v;
          return std::abs(eta.value(probe));
        },
        a, b);
    probe[axis] = t;
    if (std::abs(eta.value(probe)) >= std::abs(eta.value(r.x))) r.x[axis] = t;
  }
  r.eta = eta.value(r.x);
  r.abs_eta = std::abs(r.eta);
  return r;
}

// One pass of joint projected-gradient descent on (weights, positions) with
// Armijo backtracking against the exact objective. Monotone by construction;
// returns the improved objective value.
double sliding(const BlassoProblem& p, DiscreteMeasure& mu, const SolveConfig& cfg,
               double current_obj) {
  const int s = mu.size();
  if (s == 0) return current_obj;
  const int d = p.box.dim();

  for (int it = 0; it < cfg.sliding_iters; ++it) {
    const EtaEvaluator eta = EtaEvaluator::make(p, mu);
    Eigen::VectorXd gw(s);
    Eigen::MatrixXd gx(s, d);
    for (int k = 0; k < s; ++k) {
      const double sign = mu.atoms[k].w >= 0.0 ? 1.0 : -1.0;
      gw[k] = -eta.value(mu.atoms[k].x) + p.kappa * sign;
      gx.row(k) = -mu.atoms[k].w * eta.gradient(mu.atoms[k].x).transpose();
    }
    const double gnorm2 = gw.squaredNorm() + gx.squaredNorm();
    if (gnorm2 <= 1e-28 * std::max(1.0, current_obj)) break;

    bool accepted = false;
    double t = cfg.armijo_step;
    while (t >= 1e-14) {
      DiscreteMeasure cand = mu;
      double decrease = 0.0;
      for (int k = 0; k < s; ++k) {
        cand.atoms[k].w = mu.atoms[k].w - t * gw[k];
        decrease += gw[k] * (mu.atoms[k].w - cand.atoms[k].w);
        const Eigen::VectorXd xk = p.box.clamp(mu.atoms[k].x - t * gx.row(k).transpose());
        decrease += gx.row(k).dot((mu.atoms[k].x - xk).transpose());
        cand.atoms[k].x = xk;
      }
      const double cand_obj = objective(p, cand);
      if (cand_obj <= current_obj - cfg.armijo_slope * decrease) {
        mu = cand;
        current_obj = cand_obj;
        accepted = true;
        break;
      }
      t *= cfg.armijo_shrink;
    }
    if (!accepted) break;
  }
  return current_obj;
}

// Merge every atom pair closer than the merge radius and drop weights below
// the prune threshold. Each structural change is followed by a short sliding
// repair and reverted outright if the objective would increase, keeping the
// accepted trace monotone.
double merge_and_prune(const BlassoProblem& p, DiscreteMeasure& mu, const SolveConfig& cfg,
                       const MetricTensor& metric, double merge_radius, double prune_threshold,
                       double current_obj) {
  SolveConfig repair = cfg;
  repair.sliding_iters = std::min(cfg.sliding_iters, 15);

  bool changed = true;
  while (changed && mu.size() >= 2) {
    changed = false;
    for (int i = 0; i < mu.size() && !changed; ++i) {
      for (int j = i + 1; j < mu.size() && !changed; ++j) {
        if (metric.distance(mu.atoms[i].x, mu.atoms[j].x) > merge_radius) continue;
        DiscreteMeasure cand = mu;
        const double wi = cand.atoms[i].w, wj = cand.atoms[j].w;
        const double ai = std::abs(wi), aj = std::abs(wj);
        Eigen::VectorXd pos;
        if (ai + aj > 0.0)
          pos = (ai * cand.atoms[i].x + aj * cand.atoms[j].x) / (ai + aj);
        else
          pos = 0.5 * (cand.atoms[i].x + cand.atoms[j].x);
        cand.atoms[i].w = wi + wj;
        cand.atoms[i].x = pos;
        cand.atoms.erase(cand.atoms.begin() + j);
        double cand_obj = sliding(p, cand, repair, objective(p, cand));
        if (cand_obj <= current_obj) {
          mu = cand;
          current_obj = cand_obj;
          changed = true;
        }
      }
    }
  }

  DiscreteMeasure kept;
  for (const auto& a : mu.atoms)
    if (std::abs(a.w) >= prune_threshold) kept.atoms.push_back(a);
  if (kept.size() < mu.size()) {
    double kept_obj = sliding(p, kept, repair, objective(p, kept));
    if (kept_obj <= current_obj) {
      mu = kept;
      current_obj = kept_obj;
    }
  }
  return current_obj;
}

}  // namespace

BlassoProblem BlassoProblem::sketched(std::shared_ptr<const SketchOperator> op, Eigen::VectorXcd z,
                                      double kappa, ParameterBox box) {
  BlassoProblem p;
  p.mode = Mode::sketched;
  p.op = std::move(op);
  p.z = std::move(z);
  p.kappa = kappa;
  p.box = std::move(box);
  validate_problem(p);
  return p;
}

BlassoProblem BlassoProblem::population(std::shared_ptr<const TIKernel> model,
                                        DiscreteMeasure truth, DiscreteMeasure noise, double kappa,
                                        ParameterBox box) {
  BlassoProblem p;
  p.mode = Mode::population;
  p.model = std::move(model);
  p.truth = std::move(truth);
  p.noise = std::move(noise);
  p.kappa = kappa;
  p.box = std::move(box);
  validate_problem(p);
  validate_measure_in_box(p, p.truth);
  return p;
}

double BlassoProblem::population_noise_norm() const {
  if (mode != Mode::population || !model) return 0.0;
  GramTerms t;
  for (const auto& a : noise.atoms) {
    t.c.push_back(a.w);
    t.x.push_back(a.x);
  }
  return std::sqrt(std::max(0.0, gram_quadratic(*model, t)));
}

double objective(const BlassoProblem& problem, const DiscreteMeasure& mu) {
  validate_problem(problem);
  validate_measure_in_box(problem, mu);
  const double tv = mu.tv_norm();
  if (problem.mode == BlassoProblem::Mode::sketched) {
    const Eigen::VectorXcd res = problem.z - forward(*problem.op, mu);
    return 0.5 * res.squaredNorm() + problem.kappa * tv;
  }
  const GramTerms t = residual_terms(problem, mu);
  return 0.5 * gram_quadratic(*problem.model, t) + problem.kappa * tv;
}

double calibrate_kappa(double gamma_bound, int s0, double c_kappa) {
  if (!(gamma_bound > 0.0)) throw ValidationError("gamma bound must be positive");
  if (s0 < 1) throw ValidationError("sparsity level must be at least 1");
  if (!(c_kappa > 0.0)) throw ValidationError("kappa multiplier must be positive");
  return c_kappa * gamma_bound / std::sqrt(static_cast<double>(s0));
}

double kappa_preset_population(double c_switch) {
  if (!(c_switch > 0.0)) throw ValidationError("switch constant must be positive");
  return 1.0 / (std::sqrt(2.0) * c_switch);
}

double kappa_preset_sketched(double c_switch, double c_pivot_prime) {
  if (!(c_switch > 0.0)) throw ValidationError("switch constant must be positive");
  if (!(c_pivot_prime > 0.0)) throw ValidationError("pivot constant must be positive");
  return 1.0 / (c_pivot_prime * c_switch);
}

std::pair<DiscreteMeasure, SolveTrace> solve(const BlassoProblem& problem,
                                             const SolveConfig& config,
                                             const DiscreteMeasure* reference) {
  validate_problem(problem);
  const int d = problem.box.dim();
  const double r0 = 1.0 / (4.0 * d);

  if (config.max_atoms < 1 || config.lmo_refine_steps < 0 || config.sliding_iters < 0 ||
      config.max_outer < 1)
    throw ValidationError("solver budgets must be positive");
  if (!(config.armijo_step > 0.0) || !(config.armijo_shrink > 0.0) ||
      config.armijo_shrink >= 1.0 || !(config.armijo_slope > 0.0))
    throw ValidationError("backtracking parameters out of range");
  if (config.lmo_grid != 0 && config.lmo_grid < 2)
    throw ValidationError("the scan grid needs at least two points per axis");

  if (config.gap_tol < 0.0) throw ValidationError("the dual-gap tolerance must be nonnegative");
  const int grid_n = config.lmo_grid > 0 ? config.lmo_grid : (d == 1 ? (1 << 10) : (1 << 7));
  const double merge_radius = config.merge_radius >= 0.0 ? config.merge_radius : r0 / 10.0;
  const double prune_threshold =
      config.prune_threshold >= 0.0 ? config.prune_threshold : problem.kappa * 1e-3;
  if (!(merge_radius > 0.0 && merge_radius < r0))
    throw ValidationError("merge radius must stay positive and below the pivot radius");

  const MetricTensor metric = problem.mode == BlassoProblem::Mode::sketched
                                  ? MetricTensor::from_matrix(Eigen::MatrixXd::Identity(d, d) /
                                                              (12.0 * problem.op->tau() *
                                                               problem.op->tau()))
                                  : problem.model->metric();

  DiscreteMeasure mu;
  double obj = objective(problem, mu);
  SolveTrace trace;
  trace.objectives.push_back(obj);

  double gap = std::numeric_limits<double>::quiet_NaN();
  for (int outer = 0; outer < config.max_outer; ++outer) {
    const EtaEvaluator eta = EtaEvaluator::make(problem, mu);
    const LmoResult cand = lmo_scan(problem, eta, grid_n, config.lmo_refine_steps);
    gap = cand.abs_eta - problem.kappa;
    if (gap <= config.gap_tol * problem.kappa) {
      trace.converged = true;
      break;
    }

    const double prev_obj = obj;
    if (mu.size() < config.max_atoms) {
      // Exact soft-threshold step on the incoming atom: always decreases the
      // objective by (|eta| - kappa)^2 / (2 ||F delta_x||^2).
      const double col2 = atom_column_norm2(problem, cand.x);
      const double w =
          (cand.eta >= 0.0 ? 1.0 : -1.0) * std::max(0.0, cand.abs_eta - problem.kappa) / col2;
      if (w != 0.0) mu.atoms.push_back({w, cand.x});
    }
    obj = sliding(problem, mu, config, objective(problem, mu));
    obj = merge_and_prune(problem, mu, config, metric, merge_radius, prune_threshold, obj);
    trace.objectives.push_back(obj);
    trace.outer_iterations = outer + 1;

    if (mu.size() >= config.max_atoms && prev_obj - obj <= 1e-15 * std::max(1.0, prev_obj)) {
      trace.note = "atom budget reached with a residual dual gap";
      break;
    }
  }
  if (!trace.converged && trace.note.empty())
    trace.note = "outer-iteration budget exhausted before the dual gap closed";
  trace.dual_gap = gap;
  trace.estimate = mu;
  if (reference != nullptr) {
    trace.has_reference = true;
    trace.near_optimal = near_optimality(problem, mu, *reference);
  }
  return {std::move(mu), std::move(trace)};
}

bool near_optimality(const BlassoProblem& problem, const DiscreteMeasure& mu_hat,
                     const DiscreteMeasure& mu0) {
  const double a = objective(problem, mu_hat);
  const double b = objective(problem, mu0);
  return a <= b + kNearOptimalSlack * std::max(1.0, std::abs(b));
}

BoundReport bound_verdict(const DiscreteMeasure& mu_hat, const DiscreteMeasure& mu0, double r,
                          double gamma, int s0, const BoundConstants& constants) {
  const bool sketched = constants.mode == BlassoProblem::Mode::sketched;
  if (s0 < 1) throw ValidationError("sparsity level must be at least 1");
  if (mu0.size() != s0) throw ValidationError("the ground truth must carry exactly s0 atoms");
  const int d = constants.metric.dim();
  if (d <= 0) throw ValidationError("the verdict needs the Fisher-Rao metric");
  if (mu0.dim() != d) throw ValidationError("ground-truth dimension does not match the metric");
  if (mu_hat.size() > 0 && mu_hat.dim() != d)
    throw ValidationError("estimate dimension does not match the metric");
  if (!(r > 0.0)) throw ValidationError("the region radius must be positive");
  if (gamma < 0.0) throw ValidationError("the residual-norm bound must be nonnegative");
  if (!(constants.c_switch > 0.0) || !(constants.c_kappa > 0.0) || !(constants.eps0 > 0.0) ||
      !(constants.eps2 > 0.0))
    throw ValidationError("bound constants must be positive");
  if (sketched && !(constants.c_pivot_prime > 0.0))
    throw ValidationError("bound constants must be positive");

  const double r0 = 1.0 / (4.0 * d);
  const double curvature_limit =
      std::sqrt(constants.eps0 / ((sketched ? 6.0 : 1.0) * constants.eps2));
  if (!(r < std::min(r0, curvature_limit))) {
    std::ostringstream msg;
    msg << "region radius " << r << " is out of the admissible range: ";
    if (r0 <= curvature_limit)
      msg << "the pivot radius r0 = " << r0 << " binds (r0 = 1/(4d))";
    else
      msg << "the curvature ratio " << (sketched ? "sqrt(eps0/(6 eps2)) = " : "sqrt(eps0/eps2) = ")
          << curvature_limit << " binds";
    throw ValidationError(msg.str());
  }

  BoundReport rep;
  rep.mode = sketched ? "sketched" : "population";
  rep.r = r;
  rep.gamma = gamma;
  rep.s0 = s0;
  const double pivot_factor = sketched ? constants.c_pivot_prime : std::sqrt(2.0);
  const double a = pivot_factor * constants.c_switch * constants.c_kappa;
  rep.c_bar = (1.0 + a) * (1.0 + a) / (2.0 * constants.c_kappa);
  rep.c_tilde = rep.c_bar * std::max(1.0, sketched ? constants.eps0 / 4.0 : constants.eps0);
  rep.c_hat = 2.0 * pivot_factor * constants.c_switch * (1.0 + a);

  const double q = (sketched ? 2.0 / 3.0 : 1.0) * gamma / (constants.eps2 * r * r);
  const double sqrt_s0 = std::sqrt(static_cast<double>(s0));
  rep.far_bound = rep.c_bar * q * sqrt_s0;
  rep.near_bound = rep.c_tilde * q * sqrt_s0 + rep.c_hat * gamma;

  const RegionStatistics stats = region_statistics(mu_hat, mu0, r, constants.metric);
  rep.far_mass = stats.far_mass;
  rep.near_errors = Eigen::Map<const Eigen::VectorXd>(stats.near_errors.data(), s0);
  rep.far_ok = rep.far_mass <= rep.far_bound + kVerdictSlack * (1.0 + rep.far_bound);
  rep.near_ok = true;
  for (int k = 0; k < s0; ++k)
    rep.near_ok =
        rep.near_ok && rep.near_errors[k] <= rep.near_bound + kVerdictSlack * (1.0 + rep.near_bound);

  rep.detection_threshold = rep.far_bound;
  const DetectionScan det =
      detection_scan(mu_hat, mu0, r, rep.detection_threshold, constants.metric);
  rep.flagged_sets = det.flagged_sets;
  rep.detection_worst = det.worst_distance;
  rep.detection_ok = det.ok;

  rep.pass = rep.far_ok && rep.near_ok && rep.detection_ok;
  return rep;
}

DetectionScan detection_scan(const DiscreteMeasure& mu_hat, const DiscreteMeasure& mu0, double r,
                             double threshold, const MetricTensor& metric) {
  if (mu0.size() == 0) throw ValidationError("detection needs at least one true atom");
  if (mu0.dim() != metric.dim() || (mu_hat.size() > 0 && mu_hat.dim() != metric.dim()))
    throw ValidationError("measure dimensions do not match the metric");
  if (!(r > 0.0) || threshold < 0.0)
    throw ValidationError("detection radius must be positive and the threshold nonnegative");

  const int n = mu_hat.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (metric.distance(mu_hat.atoms[i].x, mu_hat.atoms[j].x) <= r) parent[find(i)] = find(j);

  std::vector<double> to_model(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : mu0.atoms)
      best = std::min(best, metric.distance(mu_hat.atoms[i].x, t.x));
    to_model[i] = best;
  }
  std::vector<double> cluster_mass(n, 0.0), cluster_dist(n, std::numeric_limits<double>::infinity());
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    cluster_mass[root] += std::abs(mu_hat.atoms[i].w);
    cluster_dist[root] = std::min(cluster_dist[root], to_model[i]);
  }
  DetectionScan scan;
  const double mass_gate = threshold + kVerdictSlack * (1.0 + threshold);
  const double dist_gate = r + kVerdictSlack * (1.0 + r);
  auto flag = [&](double mass, double dist) {
    if (mass <= mass_gate) return;
    ++scan.flagged_sets;
    scan.worst_distance = std::max(scan.worst_distance, dist);
    scan.ok = scan.ok && dist <= dist_gate;
  };
  for (int i = 0; i < n; ++i) flag(std::abs(mu_hat.atoms[i].w), to_model[i]);
  for (int i = 0; i < n; ++i)
    if (find(i) == i && cluster_mass[i] > std::abs(mu_hat.atoms[i].w))
      flag(cluster_mass[i], cluster_dist[i]);
  return scan;
}

std::string BoundReport::to_json_string(int indent) const {
  nlohmann::json j;
  j["mode"] = mode;
  j["r"] = r;
  j["gamma"] = gamma;
  j["s0"] = s0;
  j["c_bar"] = c_bar;
  j["c_tilde"] = c_tilde;
  j["c_hat"] = c_hat;
  j["far_mass"] = far_mass;
  j["far_bound"] = far_bound;
  j["far_ok"] = far_ok;
  j["near_errors"] = std::vector<double>(near_errors.data(), near_errors.data() + near_errors.size());
  j["near_bound"] = near_bound;
  j["near_ok"] = near_ok;
  j["detection_threshold"] = detection_threshold;
  j["flagged_sets"] = flagged_sets;
  j["detection_worst"] = detection_worst;
  j["detection_ok"] = detection_ok;
  j["pass"] = pass;
  return j.dump(indent);
}

RadiusSchedule RadiusSchedule::poly(double a) {
  if (!(a > 0.0 && a < 0.25))
    throw ValidationError("poly schedule exponent must lie in (0, 1/4)");
  return {"poly", a, 0.0};
}

RadiusSchedule RadiusSchedule::log_schedule() { return {"log", 0.0, 0.0}; }

RadiusSchedule RadiusSchedule::logpoly(double a, double b) {
  if (!(a > 0.0 && a < 0.25))
    throw ValidationError("logpoly schedule exponent must lie in (0, 1/4)");
  return {"logpoly", a, b};
}

EffectiveRadius effective_radius(std::int64_t n, const RadiusSchedule& schedule) {
  if (n < 1) throw ValidationError("sample count must be at least 1");
  const double x = static_cast<double>(n);
  double delta = 0.0;
  if (schedule.kind == "poly") {
    if (!(schedule.a > 0.0 && schedule.a < 0.25))
      throw ValidationError("poly schedule exponent must lie in (0, 1/4)");
    delta = std::pow(x, schedule.a);
  } else if (schedule.kind == "log") {
    delta = std::sqrt(std::log(x));
  } else if (schedule.kind == "logpoly") {
    if (!(schedule.a > 0.0 && schedule.a < 0.25))
      throw ValidationError("logpoly schedule exponent must lie in (0, 1/4)");
    delta = std::pow(x, schedule.a) * std::pow(std::log(x), schedule.b);
  } else {
    throw ValidationError("unknown radius schedule: " + schedule.kind);
  }
  EffectiveRadius out;
  out.delta = delta;
  out.r = delta * std::pow(x, -0.25);
  out.v = 1.0 / (delta * delta);
  return out;
}

}  // namespace offgrid
