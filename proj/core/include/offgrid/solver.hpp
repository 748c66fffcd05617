#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "offgrid/common.hpp"
#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"
#include "offgrid/sketching.hpp"

namespace offgrid {

// Variational objective over signed discrete measures:
//   J(mu) = 1/2 ||y - F mu||^2 + kappa |mu|(box).
// Two data terms are supported. Sketched: y is a finite sketch vector and
// F mu is computable exactly through the feature operator. Population: the
// infinite-dimensional residual norm is only available for synthetic
// observations y = F mu0 + noise with the noise expanded in the span of
// {F delta_x}; every inner product then collapses to model-kernel
// evaluations (the Gram closure), and arbitrary observations are rejected.
struct BlassoProblem {
  enum class Mode { population, sketched };

  Mode mode = Mode::sketched;
  double kappa = 0.0;
  ParameterBox box;

  // Sketched data term.
  std::shared_ptr<const SketchOperator> op;
  Eigen::VectorXcd z;

  // Population data term (synthetic closure). noise holds the coefficients
  // b_i and anchors v_i of Gamma = sum_i b_i F delta_{v_i}.
  std::shared_ptr<const TIKernel> model;
  DiscreteMeasure truth;
  DiscreteMeasure noise;

  static BlassoProblem sketched(std::shared_ptr<const SketchOperator> op, Eigen::VectorXcd z,
                                double kappa, ParameterBox box);
  static BlassoProblem population(std::shared_ptr<const TIKernel> model, DiscreteMeasure truth,
                                  DiscreteMeasure noise, double kappa, ParameterBox box);

  int dim() const { return box.dim(); }
  // ||Gamma|| under the population closure: the noise Gram quadratic form.
  double population_noise_norm() const;
};

double objective(const BlassoProblem& problem, const DiscreteMeasure& mu);

// kappa = c_kappa * gamma_bound / sqrt(s0). gamma_bound is a high-probability
// bound on the residual norm ||y - F mu0||. Passing c_kappa = sqrt(s0)
// recovers the sparsity-agnostic choice kappa = gamma_bound, at the price of
// error bounds that scale with s0 instead of sqrt(s0).
double calibrate_kappa(double gamma_bound, int s0, double c_kappa);
// Preset multipliers minimizing the leading bound constant: population
// 1/(sqrt(2) C_switch), sketched 1/(C'_pivot C_switch).
double kappa_preset_population(double c_switch);
double kappa_preset_sketched(double c_switch, double c_pivot_prime = 1.0);

struct SolveConfig {
  int max_atoms = 20;
  int lmo_grid = 0;           // points per axis; 0 picks 1<<10 (d=1) or 1<<7 (d>=2)
  int lmo_refine_steps = 20;  // golden-section line searches after the scan
  int sliding_iters = 60;     // projected-gradient steps per outer iteration
  double armijo_step = 1.0;
  double armijo_shrink = 0.5;
  double armijo_slope = 1e-4;
  double merge_radius = -1.0;     // Fisher-Rao; < 0 picks r0/10
  double prune_threshold = -1.0;  // on |weight|; < 0 picks kappa * 1e-3
  double gap_tol = 1e-6;          // stop once max|eta| - kappa <= gap_tol * kappa
  int max_outer = 200;
  std::uint64_t seed = 20240901;  // reserved; the scan and refinements are deterministic
};

struct SolveTrace {
  std::vector<double> objectives;  // value after each accepted outer step
  DiscreteMeasure estimate;
  bool converged = false;
  int outer_iterations = 0;
  double dual_gap = std::numeric_limits<double>::quiet_NaN();  // max|eta| - kappa at exit
  bool has_reference = false;
  bool near_optimal = false;  // J(estimate) <= J(reference), when a reference was given
  std::string note;
};

// Frank-Wolfe with sliding: scan the certificate gradient eta(x) =
// <residual, F delta_x> on a grid, refine the argmax locally, add the atom
// unless |eta| is already below kappa (1 + tol), then jointly re-optimize all
// weights and positions by projected gradient with Armijo backtracking,
// merging atoms closer than the merge radius and pruning negligible weights.
// Every accepted step is objective-non-increasing; steps that fail to
// decrease the objective are reverted. When a reference measure is supplied
// the trace records whether the estimate reached its objective.
std::pair<DiscreteMeasure, SolveTrace> solve(const BlassoProblem& problem,
                                             const SolveConfig& config,
                                             const DiscreteMeasure* reference = nullptr);

// True iff objective(mu_hat) <= objective(mu0) up to 1e-12 relative slack.
// Estimates satisfying this inherit the error bounds of exact minimizers.
bool near_optimality(const BlassoProblem& problem, const DiscreteMeasure& mu_hat,
                     const DiscreteMeasure& mu0);

// Constants entering the error-bound verdict. The metric converts atom
// positions to Fisher-Rao units (for the sinc-4 pivot, g = Id/(12 tau^2));
// eps0/eps2 are the curvature floor and decay coefficient of the pivot, and
// c_pivot_prime is only read in sketched mode.
struct BoundConstants {
  BlassoProblem::Mode mode = BlassoProblem::Mode::population;
  double c_switch = 0.0;
  double c_kappa = 0.0;
  double eps0 = 0.0;
  double eps2 = 0.0;
  double c_pivot_prime = 1.0;
  MetricTensor metric;
};

struct BoundReport {
  std::string mode;
  double r = 0.0;
  double gamma = 0.0;
  int s0 = 0;
  // Bound multipliers derived from c_kappa.
  double c_bar = 0.0;
  double c_tilde = 0.0;
  double c_hat = 0.0;
  // Far-region control: total |mu_hat| mass beyond Fisher-Rao r of every atom.
  double far_mass = 0.0;
  double far_bound = 0.0;
  bool far_ok = false;
  // Near-region control: |mu_hat(N_k(r)) - a0_k| per true atom, common bound.
  Eigen::VectorXd near_errors;
  double near_bound = 0.0;
  bool near_ok = false;
  // Detection: every single atom or Fisher-Rao-r-connected cluster of
  // mu_hat carrying more than the threshold must come within r of a true atom.
  double detection_threshold = 0.0;
  int flagged_sets = 0;
  double detection_worst = 0.0;  // largest distance-to-model among flagged sets
  bool detection_ok = false;
  bool pass = false;

  std::string to_json_string(int indent = 2) const;
};

// Checks the statistical error bounds for a near-optimal estimate against the
// ground truth: far mass <= c_bar * q * sqrt(s0), per-atom near error <=
// c_tilde * q * sqrt(s0) + c_hat * gamma, and atoms/clusters above the far
// bound must lie within r of the model, where q = gamma/(eps2 r^2) in
// population mode and q = 2 gamma/(3 eps2 r^2) in sketched mode. Requires
// r < min(r0, sqrt(eps0/eps2)) (population) or r < min(r0, sqrt(eps0/(6 eps2)))
// (sketched) with r0 = 1/(4d); violations name the binding constraint.
BoundReport bound_verdict(const DiscreteMeasure& mu_hat, const DiscreteMeasure& mu0, double r,
                          double gamma, int s0, const BoundConstants& constants);

// The detection clause on its own: tests every single atom of the estimate
// and every single-linkage cluster at link radius r; each tested set holding
// more than `threshold` of |mu_hat| mass must come within r of a true atom.
struct DetectionScan {
  int flagged_sets = 0;
  double worst_distance = 0.0;  // largest distance-to-model among flagged sets
  bool ok = true;
};
DetectionScan detection_scan(const DiscreteMeasure& mu_hat, const DiscreteMeasure& mu0, double r,
                             double threshold, const MetricTensor& metric);

// Effective-radius schedules: delta_n = n^a (0 < a < 1/4), sqrt(log n), or
// n^a log^b n. r_n = delta_n n^{-1/4} shrinks while the bound inflation
// v_n = delta_n^{-2} vanishes, so the near regions tighten at no asymptotic
// cost in the constants.
struct RadiusSchedule {
  std::string kind;  // "poly" | "log" | "logpoly"
  double a = 0.0;
  double b = 0.0;

  static RadiusSchedule poly(double a);
  static RadiusSchedule log_schedule();
  static RadiusSchedule logpoly(double a, double b);
};

struct EffectiveRadius {
  double delta = 0.0;
  double r = 0.0;
  double v = 0.0;
};

EffectiveRadius effective_radius(std::int64_t n, const RadiusSchedule& schedule);

}  // namespace offgrid
