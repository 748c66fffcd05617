#include "offgrid/switchconst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace offgrid {

namespace {
constexpr double kGolden = 0.6180339887498949;

long default_per_axis(int d) { return d == 1 ? 4096 : (d == 2 ? 256 : 64); }

// Half-width of the frequency cube to scan: the exact support cube when the
// pivot is band-limited, otherwise grown until the density has decayed to
// numerical irrelevance on the faces.
double scan_half_width(const TIKernel& pivot) {
  double hw = 0.0;
  if (pivot.spectral_support_cube(hw)) return hw;
  const int d = pivot.dim();
  double ref = 0.0;
  for (int i = -8; i <= 8; ++i) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 0.125 * i);
    ref = std::max(ref, pivot.spectral_density(w));
  }
  if (!(ref > 0)) throw NumericalError("switch_constant: pivot spectral density vanishes");
  hw = 1.0;
  while (hw < 1e7) {
    double face = 0.0;
    for (int j = 0; j < d; ++j) {
      face = std::max(face, pivot.spectral_density(hw * Eigen::VectorXd::Unit(d, j)));
      face = std::max(face, pivot.spectral_density(-hw * Eigen::VectorXd::Unit(d, j)));
      face = std::max(face, pivot.spectral_density(Eigen::VectorXd::Constant(d, hw)));
    }
    if (face <= 1e-13 * ref) return hw;
    hw *= 2.0;
  }
  throw NumericalError("switch_constant: pivot spectral density does not decay");
}

double golden_max(double a, double b, const std::function<double(double)>& f, double& arg) {
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 120 && (b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
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

SwitchConstant switch_constant(const TIKernel& pivot, const TIKernel& model, long per_axis) {
  const int d = pivot.dim();
  if (model.dim() != d) throw ValidationError("switch_constant: kernel dimension mismatch");
  if (per_axis <= 0) per_axis = default_per_axis(d);
  if (per_axis < 2) throw ValidationError("switch_constant: need at least 2 nodes per axis");

  const double hw = scan_half_width(pivot);
  long total = 1;
  for (int j = 0; j < d; ++j) total *= per_axis;

  auto node_at = [&](long k) -> Eigen::VectorXd {
    Eigen::VectorXd w(d);
    long rem = k;
    for (int j = 0; j < d; ++j) {
      const long idx = rem % per_axis;
      rem /= per_axis;
      w[j] = -hw + 2.0 * hw * idx / (per_axis - 1);
    }
    return w;
  };

  // Pass 1: pivot max sets the support floor for the 0/0 convention.
  double pivot_max = 0.0;
  for (long k = 0; k < total; ++k)
    pivot_max = std::max(pivot_max, pivot.spectral_density(node_at(k)));
  if (!(pivot_max > 0)) throw NumericalError("switch_constant: pivot spectral density vanishes");
  const double floor = 1e-12 * pivot_max;

  // Pass 2: ratio max over the pivot support; model must be positive there.
  double best_ratio = 0.0;
  long best_k = -1;
  for (long k = 0; k < total; ++k) {
    const Eigen::VectorXd w = node_at(k);
    const double pv = pivot.spectral_density(w);
    if (pv <= floor) continue;  // outside the (essential) pivot support
    const double mv = model.spectral_density(w);
    if (!(mv > 0)) {
      std::ostringstream os;
      os << "switch_constant: model spectral density vanishes inside the pivot support at"
            " frequency (";
      for (int j = 0; j < d; ++j) os << (j ? ", " : "") << w[j];
      os << "); the pivot RKHS does not embed into the model RKHS";
      throw EmbeddingViolation(os.str(), w);
    }
    const double ratio = pv / mv;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  if (best_k < 0)
    throw NumericalError("switch_constant: no grid node inside the pivot support");

  // Refinement around the winning node, coordinate by coordinate.
  Eigen::VectorXd w_star = node_at(best_k);
  const double step = 2.0 * hw / (per_axis - 1);
  auto ratio_at = [&](const Eigen::VectorXd& w) -> double {
    const double pv = pivot.spectral_density(w);
    if (pv <= floor) return 0.0;
    const double mv = model.spectral_density(w);
    if (!(mv > 0)) {
      std::ostringstream os;
      os << "switch_constant: model spectral density vanishes inside the pivot support"
            " (found during refinement)";
      throw EmbeddingViolation(os.str(), w);
    }
    return pv / mv;
  };
  for (int round = 0; round < 3; ++round) {
    for (int j = 0; j < d; ++j) {
      double arg = w_star[j];
      Eigen::VectorXd probe = w_star;
      const double lo = std::max(-hw, w_star[j] - step);
      const double hi = std::min(hw, w_star[j] + step);
      const double v = golden_max(lo, hi,
                                  [&](double x) {
                                    probe[j] = x;
                                    return ratio_at(probe);
                                  },
                                  arg);
      if (v >= best_ratio) {
        best_ratio = v;
        w_star[j] = arg;
      }
    }
  }

  SwitchConstant out;
  out.value = std::sqrt(best_ratio);
  out.attained_at = w_star;
  out.pivot_desc = pivot.describe();
  out.model_desc = model.describe();
  out.grid_per_axis = per_axis;
  out.pivot_floor = floor;
  return out;
}

ScalingProbe supersmooth_scaling_probe(
    const std::function<std::unique_ptr<TIKernel>(double)>& model_factory, int d, double p,
    double beta, const std::vector<double>& taus, long per_axis) {
  if (taus.size() < 4)
    throw ValidationError("scaling probe: need at least 4 tau values");
  for (std::size_t i = 1; i < taus.size(); ++i)
    if (!(taus[i] > taus[i - 1]))
      throw ValidationError("scaling probe: taus must be sorted strictly increasing");
  if (!(p > 0) || !(beta > 0)) throw ValidationError("scaling probe: p, beta must be positive");

  ScalingProbe out;
  out.taus = taus;
  for (double tau : taus) {
    Sinc4Kernel pivot(d, tau);
    std::unique_ptr<TIKernel> model = model_factory(tau);
    out.c_values.push_back(switch_constant(pivot, *model, per_axis).value);
  }

  // Supersmooth law: C(tau) ~ tau^{d/2} exp(alpha (d^{1/p}/tau)^beta), so the
  // de-trended log is affine in x = (d^{1/p}/tau)^beta.
  const std::size_t n = taus.size();
  Eigen::VectorXd x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::pow(std::pow(static_cast<double>(d), 1.0 / p) / taus[i], beta);
    y[i] = std::log(out.c_values[i]) - 0.5 * d * std::log(taus[i]);
  }
  const double xm = x.mean(), ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  if (sxx <= 0) throw NumericalError("scaling probe: degenerate tau ladder");
  out.alpha_hat = sxy / sxx;
  out.intercept = ym - out.alpha_hat * xm;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = out.intercept + out.alpha_hat * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ym) * (y[i] - ym);
  }
  out.residual = ss_res;
  out.r_squared = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 0.0;

  // A non-monotone ladder usually means the frequency grid is too coarse; a
  // flat ladder (identical kernels) makes the fit meaningless.
  bool flat = true, incr = true, decr = true;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(out.c_values[i] - out.c_values[i - 1]) > 1e-12) flat = false;
    if (out.c_values[i] > out.c_values[i - 1] * (1.0 + 1e-12)) decr = false;
    if (out.c_values[i] < out.c_values[i - 1] * (1.0 - 1e-12)) incr = false;
  }
  const bool monotone = incr || decr;
  if (flat) {
    out.warning = true;
    out.warning_message = "all switch constants are equal; the scaling fit is degenerate";
  } else if (!monotone) {
    out.warning = true;
    out.warning_message =
        "switch constants are not monotone in tau; the frequency grid may be too coarse";
  }
  return out;
}

ScalingProbe supersmooth_scaling_probe(const TemplateDistribution& tpl, double p, double beta,
                                       const std::vector<double>& taus, long per_axis) {
  const int d = tpl.d;
  return supersmooth_scaling_probe(
      [&](double tau) -> std::unique_ptr<TIKernel> {
        return std::make_unique<TemplateModelKernel>(d, tau, tpl);
      },
      d, p, beta, taus, per_axis);
}

std::string SwitchConstant::to_json_string() const {
  nlohmann::json j;
  j["value"] = value;
  j["attained_at"] =
      std::vector<double>(attained_at.data(), attained_at.data() + attained_at.size());
  j["pivot"] = pivot_desc;
  j["model"] = model_desc;
  j["grid_per_axis"] = grid_per_axis;
  j["pivot_floor"] = pivot_floor;
  return j.dump(2);
}

std::string ScalingProbe::to_json_string() const {
  nlohmann::json j;
  j["taus"] = taus;
  j["c_values"] = c_values;
  j["alpha_hat"] = alpha_hat;
  j["intercept"] = intercept;
  j["residual"] = residual;
  j["r_squared"] = r_squared;
  j["warning"] = warning;
  if (warning) j["warning_message"] = warning_message;
  return j.dump(2);
}

}  // namespace offgrid
