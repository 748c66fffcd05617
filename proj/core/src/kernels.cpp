#include "offgrid/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace offgrid {

namespace {
constexpr double kPi = 3.14159265358979323846;

// d^k/dz^k sin(z), k mod 4 cycle.
double sin_deriv(double z, int k) {
  switch (k & 3) {
    case 0: return std::sin(z);
    case 1: return std::cos(z);
    case 2: return -std::sin(z);
    default: return -std::cos(z);
  }
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}
}  // namespace

double sinc_deriv(double z, int order) {
  if (order < 0 || order > 4) throw ValidationError("sinc_deriv: order must be in 0..4");
  const double az = std::abs(z);
  if (az < 0.5) {
    // sinc(z) = sum_k (-1)^k z^{2k} / (2k+1)!  -> differentiate term-wise.
    // Truncation after 13 surviving terms leaves a remainder far below
    // double precision on this branch.
    const int k0 = (order + 1) / 2;  // first term with 2k >= order
    double inv_fact = 1.0;           // 1/(2k+1)!
    for (int i = 2; i <= 2 * k0 + 1; ++i) inv_fact /= i;
    double zpow = (order % 2 == 0) ? 1.0 : z;  // z^{2k-order}
    const double z2 = z * z;
    double acc = 0.0;
    for (int k = k0; k <= k0 + 12; ++k) {
      double fall = 1.0;  // (2k)(2k-1)...(2k-order+1)
      for (int m = 0; m < order; ++m) fall *= (2.0 * k - m);
      acc += ((k & 1) ? -1.0 : 1.0) * inv_fact * fall * zpow;
      zpow *= z2;
      inv_fact /= (2.0 * k + 2.0) * (2.0 * k + 3.0);
    }
    return acc;
  }
  // s^{(m)}(z) = sum_k C(m,k) sin^{(k)}(z) (-1)^{m-k} (m-k)! z^{-(m-k+1)}
  double acc = 0.0;
  for (int k = 0; k <= order; ++k) {
    int p = order - k;
    double fact = 1.0;
    for (int i = 2; i <= p; ++i) fact *= i;
    double sign = (p & 1) ? -1.0 : 1.0;
    acc += binom(order, k) * sin_deriv(z, k) * sign * fact / std::pow(z, p + 1);
  }
  return acc;
}

double sinc4_axis_deriv(double z, int order) {
  const double s0 = sinc_deriv(z, 0);
  if (order == 0) return s0 * s0 * s0 * s0;
  const double s1 = sinc_deriv(z, 1);
  if (order == 1) return 4.0 * s0 * s0 * s0 * s1;
  const double s2 = sinc_deriv(z, 2);
  if (order == 2) return 12.0 * s0 * s0 * s1 * s1 + 4.0 * s0 * s0 * s0 * s2;
  const double s3 = sinc_deriv(z, 3);
  if (order == 3)
    return 24.0 * s0 * s1 * s1 * s1 + 36.0 * s0 * s0 * s1 * s2 + 4.0 * s0 * s0 * s0 * s3;
  const double s4 = sinc_deriv(z, 4);
  if (order == 4)
    return 24.0 * s1 * s1 * s1 * s1 + 144.0 * s0 * s1 * s1 * s2 + 36.0 * s0 * s0 * s2 * s2 +
           48.0 * s0 * s0 * s1 * s3 + 4.0 * s0 * s0 * s0 * s4;
  throw ValidationError("sinc4_axis_deriv: order must be in 0..4");
}

// ---------------------------------------------------------------------------
// TemplateDistribution

TemplateDistribution TemplateDistribution::gaussian(const Eigen::VectorXd& sigma) {
  if (sigma.size() == 0 || (sigma.array() <= 0).any())
    throw ValidationError("gaussian template: scales must be positive");
  TemplateDistribution t;
  t.kind = Kind::gaussian;
  t.d = static_cast<int>(sigma.size());
  t.scale = sigma;
  return t;
}

TemplateDistribution TemplateDistribution::cauchy(const Eigen::VectorXd& alpha) {
  if (alpha.size() == 0 || (alpha.array() <= 0).any())
    throw ValidationError("cauchy template: scales must be positive");
  TemplateDistribution t;
  t.kind = Kind::cauchy;
  t.d = static_cast<int>(alpha.size());
  t.scale = alpha;
  return t;
}

TemplateDistribution TemplateDistribution::point_mass(int dim) {
  if (dim < 1) throw ValidationError("point_mass template: dim must be >= 1");
  TemplateDistribution t;
  t.kind = Kind::point_mass;
  t.d = dim;
  return t;
}

TemplateDistribution TemplateDistribution::custom(
    int dim, std::function<std::complex<double>(const Eigen::VectorXd&)> cf) {
  if (dim < 1) throw ValidationError("custom template: dim must be >= 1");
  if (!cf) throw ValidationError("custom template: missing characteristic function");
  std::complex<double> at0 = cf(Eigen::VectorXd::Zero(dim));
  if (std::abs(at0 - std::complex<double>(1.0, 0.0)) > 1e-9)
    throw ValidationError("custom template: characteristic function must equal 1 at the origin");
  TemplateDistribution t;
  t.kind = Kind::custom;
  t.d = dim;
  t.custom_cf = std::move(cf);
  return t;
}

double TemplateDistribution::cf_axis(int axis, double w) const {
  switch (kind) {
    case Kind::gaussian: return std::exp(-0.5 * scale[axis] * scale[axis] * w * w);
    case Kind::cauchy: return std::exp(-scale[axis] * std::abs(w));
    case Kind::point_mass: return 1.0;
    default: throw ValidationError("cf_axis: custom template is not axis-separable");
  }
}

std::complex<double> TemplateDistribution::cf(const Eigen::VectorXd& omega) const {
  if (omega.size() != d) throw ValidationError("template cf: dimension mismatch");
  if (kind == Kind::custom) return custom_cf(omega);
  double v = 1.0;
  for (int j = 0; j < d; ++j) v *= cf_axis(j, omega[j]);
  return {v, 0.0};
}

Eigen::VectorXd TemplateDistribution::sample_noise(Rng& rng) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  switch (kind) {
    case Kind::gaussian:
      for (int j = 0; j < d; ++j) x[j] = scale[j] * rng.normal();
      break;
    case Kind::cauchy:
      for (int j = 0; j < d; ++j) x[j] = rng.cauchy(scale[j]);
      break;
    case Kind::point_mass: break;
    default: throw ValidationError("sample_noise: custom template has no sampler");
  }
  return x;
}

std::string TemplateDistribution::to_json_string() const {
  nlohmann::json j;
  switch (kind) {
    case Kind::gaussian: j["kind"] = "gaussian"; break;
    case Kind::cauchy: j["kind"] = "cauchy"; break;
    case Kind::point_mass: j["kind"] = "point_mass"; break;
    default: throw ValidationError("template to_json: custom template is not serializable");
  }
  if (kind == Kind::point_mass) {
    j["dim"] = d;
  } else {
    j["scale"] = std::vector<double>(scale.data(), scale.data() + scale.size());
  }
  return j.dump();
}

TemplateDistribution TemplateDistribution::from_json_string(const std::string& s) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("template config: invalid JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  auto scale_of = [&]() {
    if (!j.contains("scale")) throw ValidationError("template config: missing 'scale'");
    std::vector<double> v = j["scale"].get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<long>(v.size())).eval();
  };
  if (kind == "gaussian") return gaussian(scale_of());
  if (kind == "cauchy") return cauchy(scale_of());
  if (kind == "point_mass") {
    if (!j.contains("dim")) throw ValidationError("template config: point_mass needs 'dim'");
    return point_mass(j["dim"].get<int>());
  }
  throw ValidationError("template config: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// TIKernel base

Eigen::MatrixXd TIKernel::metric_matrix() const {
  const int d = dim();
  Eigen::MatrixXd g(d, d);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  const double r0 = normalization();
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
      alpha[a] += 1;
      alpha[b] += 1;
      g(a, b) = g(b, a) = -rho_partial(zero, alpha) / r0;
    }
  return g;
}

// ---------------------------------------------------------------------------
// Sinc4Kernel

Sinc4Kernel::Sinc4Kernel(int d, double tau) : d_(d), tau_(tau) {
  if (d < 1 || d > 3) throw ValidationError("sinc4 kernel: dim must be in 1..3");
  if (!(tau > 0)) throw ValidationError("sinc4 kernel: tau must be positive");
}

double Sinc4Kernel::rho(const Eigen::VectorXd& h) const {
  if (h.size() != d_) throw ValidationError("sinc4 rho: dimension mismatch");
  double v = 1.0;
  for (int j = 0; j < d_; ++j) v *= sinc4_axis_deriv(h[j] / (4.0 * tau_), 0);
  return v;
}

double Sinc4Kernel::rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const {
  if (h.size() != d_ || alpha.size() != d_)
    throw ValidationError("sinc4 rho_partial: dimension mismatch");
  if (alpha.minCoeff() < 0 || alpha.sum() > 4)
    throw ValidationError("sinc4 rho_partial: multi-index order must be in 0..4");
  double v = 1.0;
  const double c = 1.0 / (4.0 * tau_);
  for (int j = 0; j < d_; ++j)
    v *= std::pow(c, alpha[j]) * sinc4_axis_deriv(h[j] * c, alpha[j]);
  return v;
}

namespace {
// Spectral profile of sinc^4 on one axis: piecewise cubic on [0,4], zero
// outside, peak 2/3 at x=2.
double ih4_profile(double x) {
  if (x <= 0.0 || x >= 4.0) return 0.0;
  double acc = 0.0;
  int kmax = static_cast<int>(std::floor(x));
  for (int k = 0; k <= kmax && k <= 4; ++k) {
    double t = x - k;
    acc += ((k & 1) ? -1.0 : 1.0) * binom(4, k) * t * t * t;
  }
  return acc / 6.0;
}
}  // namespace

double Sinc4Kernel::spectral_density(const Eigen::VectorXd& omega) const {
  if (omega.size() != d_) throw ValidationError("sinc4 spectral_density: dimension mismatch");
  double v = 1.0;
  for (int j = 0; j < d_; ++j) v *= 2.0 * tau_ * ih4_profile(2.0 * tau_ * omega[j] + 2.0);
  return v;
}

Eigen::MatrixXd Sinc4Kernel::metric_matrix() const {
  return Eigen::MatrixXd::Identity(d_, d_) / (12.0 * tau_ * tau_);
}

std::string Sinc4Kernel::describe() const {
  std::ostringstream os;
  os << "sinc4(dim=" << d_ << ", tau=" << tau_ << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// GaussianKernel

GaussianKernel::GaussianKernel(const Eigen::MatrixXd& omega) : omega_(omega) {
  if (omega.rows() != omega.cols() || omega.rows() < 1)
    throw ValidationError("gaussian kernel: omega must be square");
  if (!omega.isApprox(omega.transpose(), 1e-12))
    throw ValidationError("gaussian kernel: omega must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  if (es.eigenvalues().minCoeff() <= 0)
    throw ValidationError("gaussian kernel: omega must be positive definite");
  omega_inv_ = es.operatorInverseSqrt() * es.operatorInverseSqrt();
  det_ = es.eigenvalues().prod();
}

double GaussianKernel::rho(const Eigen::VectorXd& h) const {
  if (h.size() != dim()) throw ValidationError("gaussian rho: dimension mismatch");
  return std::exp(-0.5 * h.dot(omega_ * h));
}

double GaussianKernel::rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const {
  const int d = dim();
  if (h.size() != d || alpha.size() != d)
    throw ValidationError("gaussian rho_partial: dimension mismatch");
  const int p = alpha.sum();
  if (alpha.minCoeff() < 0 || p > 4)
    throw ValidationError("gaussian rho_partial: multi-index order must be in 0..4");
  // Expand the multi-index into an index list, then use the closed forms in
  // u = Omega h, one per derivative order.
  int idx[4];
  int n = 0;
  for (int j = 0; j < d; ++j)
    for (int r = 0; r < alpha[j]; ++r) idx[n++] = j;
  const double r = rho(h);
  const Eigen::VectorXd u = omega_ * h;
  auto U = [&](int a) { return u[idx[a]]; };
  auto W = [&](int a, int b) { return omega_(idx[a], idx[b]); };
  switch (p) {
    case 0: return r;
    case 1: return -U(0) * r;
    case 2: return (U(0) * U(1) - W(0, 1)) * r;
    case 3:
      return (-U(0) * U(1) * U(2) + U(0) * W(1, 2) + U(1) * W(0, 2) + U(2) * W(0, 1)) * r;
    default: {
      double uuuu = U(0) * U(1) * U(2) * U(3);
      double uuw = U(0) * U(1) * W(2, 3) + U(0) * U(2) * W(1, 3) + U(0) * U(3) * W(1, 2) +
                   U(1) * U(2) * W(0, 3) + U(1) * U(3) * W(0, 2) + U(2) * U(3) * W(0, 1);
      double ww = W(0, 1) * W(2, 3) + W(0, 2) * W(1, 3) + W(0, 3) * W(1, 2);
      return (uuuu - uuw + ww) * r;
    }
  }
}

double GaussianKernel::spectral_density(const Eigen::VectorXd& omega) const {
  if (omega.size() != dim()) throw ValidationError("gaussian spectral_density: dimension mismatch");
  const double d = static_cast<double>(dim());
  return std::pow(2.0 * kPi, -0.5 * d) / std::sqrt(det_) *
         std::exp(-0.5 * omega.dot(omega_inv_ * omega));
}

std::string GaussianKernel::describe() const {
  std::ostringstream os;
  os << "gaussian(dim=" << dim() << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// TemplateModelKernel

TemplateModelKernel::TemplateModelKernel(int d, double tau, TemplateDistribution tpl)
    : d_(d), tau_(tau), tpl_(std::move(tpl)) {
  if (d < 1 || d > 3) throw ValidationError("model kernel: dim must be in 1..3");
  if (!(tau > 0)) throw ValidationError("model kernel: tau must be positive");
  if (tpl_.d != d) throw ValidationError("model kernel: template dimension mismatch");
  rho0_ = rho(Eigen::VectorXd::Zero(d));
  if (!(rho0_ > 0)) throw NumericalError("model kernel: nonpositive value at the origin");
}

// One axis of the separable spectrum integral:
//   A^(k)(h) = int_0^{1/tau} cf(w)^2 w^k cos(w h + k pi/2) dw,
// composite 16-node Gauss-Legendre with about one oscillation per panel.
double TemplateModelKernel::axis_integral(int axis, double h, int order) const {
  static thread_local Eigen::VectorXd gx, gw;
  if (gx.size() == 0) gauss_legendre(16, gx, gw);
  const double upper = 1.0 / tau_;
  const double cycles = std::abs(h) * upper / (2.0 * kPi);
  const int panels = std::max(8, static_cast<int>(std::ceil(cycles)) + 2);
  const double width = upper / panels;
  const double phase = 0.5 * kPi * order;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = p * width;
    double panel = 0.0;
    for (int q = 0; q < 16; ++q) {
      const double w = lo + 0.5 * width * (gx[q] + 1.0);
      const double c = tpl_.cf_axis(axis, w);
      panel += gw[q] * c * c * std::pow(w, order) * std::cos(w * h + phase);
    }
    acc += 0.5 * width * panel;
  }
  return acc;
}

double TemplateModelKernel::rho(const Eigen::VectorXd& h) const {
  if (h.size() != d_) throw ValidationError("model rho: dimension mismatch");
  if (tpl_.separable()) {
    double v = 1.0;
    for (int j = 0; j < d_; ++j) v *= axis_integral(j, h[j], 0);
    return v;
  }
  return rho_partial(h, Eigen::VectorXi::Zero(d_));
}

double TemplateModelKernel::rho_partial(const Eigen::VectorXd& h,
                                        const Eigen::VectorXi& alpha) const {
  if (h.size() != d_ || alpha.size() != d_)
    throw ValidationError("model rho_partial: dimension mismatch");
  if (alpha.minCoeff() < 0 || alpha.sum() > 4)
    throw ValidationError("model rho_partial: multi-index order must be in 0..4");
  if (tpl_.separable()) {
    double v = 1.0;
    for (int j = 0; j < d_; ++j) v *= axis_integral(j, h[j], alpha[j]);
    return v;
  }
  // Custom joint cf: tensor quadrature of 2^{-d} |cf|^2 (i w)^alpha e^{i w.h}.
  static thread_local SpectralGrid grid;
  static thread_local double grid_tau = -1.0;
  static thread_local int grid_d = -1;
  if (grid_tau != tau_ || grid_d != d_) {
    grid = SpectralGrid::tensor_gauss_legendre(d_, tau_);
    grid_tau = tau_;
    grid_d = d_;
  }
  std::complex<double> acc(0.0, 0.0);
  for (long k = 0; k < grid.nodes.rows(); ++k) {
    const Eigen::VectorXd w = grid.nodes.row(k).transpose();
    std::complex<double> c = tpl_.cf(w);
    std::complex<double> term = grid.weights[k] * std::norm(c) *
                                std::exp(std::complex<double>(0.0, w.dot(h)));
    for (int j = 0; j < d_; ++j)
      for (int r = 0; r < alpha[j]; ++r) term *= std::complex<double>(0.0, w[j]);
    acc += term;
  }
  return std::pow(0.5, d_) * acc.real();
}

double TemplateModelKernel::spectral_density(const Eigen::VectorXd& omega) const {
  if (omega.size() != d_) throw ValidationError("model spectral_density: dimension mismatch");
  const double hw = 1.0 / tau_;
  for (int j = 0; j < d_; ++j)
    if (std::abs(omega[j]) > hw) return 0.0;
  return std::pow(0.5, d_) * std::norm(tpl_.cf(omega));
}

Eigen::MatrixXd TemplateModelKernel::metric_matrix() const { return TIKernel::metric_matrix(); }

std::string TemplateModelKernel::describe() const {
  std::ostringstream os;
  os << "model(dim=" << d_ << ", tau=" << tau_ << ")";
  return os.str();
}

std::unique_ptr<TIKernel> model_kernel_from_template(int d, double tau,
                                                     const TemplateDistribution& tpl) {
  return std::make_unique<TemplateModelKernel>(d, tau, tpl);
}

// ---------------------------------------------------------------------------
// Kernel config JSON

std::unique_ptr<TIKernel> kernel_from_json_string(const std::string& s) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(s);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("kernel config: invalid JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  if (kind == "sinc4") {
    if (!j.contains("dim") || !j.contains("tau"))
      throw ValidationError("kernel config: sinc4 needs 'dim' and 'tau'");
    return std::make_unique<Sinc4Kernel>(j["dim"].get<int>(), j["tau"].get<double>());
  }
  if (kind == "gaussian") {
    if (!j.contains("omega")) throw ValidationError("kernel config: gaussian needs 'omega'");
    auto rows = j["omega"].get<std::vector<std::vector<double>>>();
    const long d = static_cast<long>(rows.size());
    Eigen::MatrixXd om(d, d);
    for (long a = 0; a < d; ++a) {
      if (static_cast<long>(rows[a].size()) != d)
        throw ValidationError("kernel config: 'omega' must be a square matrix");
      for (long b = 0; b < d; ++b) om(a, b) = rows[a][b];
    }
    return std::make_unique<GaussianKernel>(om);
  }
  if (kind == "template") {
    if (!j.contains("dim") || !j.contains("tau") || !j.contains("template"))
      throw ValidationError("kernel config: template needs 'dim', 'tau', 'template'");
    TemplateDistribution tpl = TemplateDistribution::from_json_string(j["template"].dump());
    return std::make_unique<TemplateModelKernel>(j["dim"].get<int>(), j["tau"].get<double>(),
                                                 tpl);
  }
  throw ValidationError("kernel config: unknown kind '" + kind + "'");
}

std::string kernel_to_json_string(const TIKernel& k) {
  nlohmann::json j;
  if (const auto* s = dynamic_cast<const Sinc4Kernel*>(&k)) {
    j["kind"] = "sinc4";
    j["dim"] = s->dim();
    j["tau"] = s->tau();
  } else if (const auto* g = dynamic_cast<const GaussianKernel*>(&k)) {
    j["kind"] = "gaussian";
    Eigen::MatrixXd om = g->metric_matrix();
    std::vector<std::vector<double>> rows(om.rows());
    for (long a = 0; a < om.rows(); ++a)
      rows[a] = std::vector<double>(om.row(a).data(), om.row(a).data() + om.cols());
    j["omega"] = rows;
  } else if (const auto* m = dynamic_cast<const TemplateModelKernel*>(&k)) {
    j["kind"] = "template";
    j["dim"] = m->dim();
    j["tau"] = m->tau();
    j["template"] = nlohmann::json::parse(m->tpl().to_json_string());
  } else {
    throw ValidationError("kernel config: kernel kind is not serializable");
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Quadrature

void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (n < 1) throw ValidationError("gauss_legendre: n must be >= 1");
  nodes.resize(n);
  weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
}

SpectralGrid SpectralGrid::tensor_gauss_legendre(int d, double tau, int per_axis) {
  if (d < 1 || d > 3) throw ValidationError("spectral grid: dim must be in 1..3");
  if (!(tau > 0)) throw ValidationError("spectral grid: tau must be positive");
  if (per_axis <= 0) per_axis = (d <= 2) ? 64 : 32;
  Eigen::VectorXd x, w;
  gauss_legendre(per_axis, x, w);
  const double scale = 1.0 / tau;  // [-1,1] -> [-1/tau, 1/tau]
  long total = 1;
  for (int j = 0; j < d; ++j) total *= per_axis;
  SpectralGrid g;
  g.nodes.resize(total, d);
  g.weights.resize(total);
  for (long k = 0; k < total; ++k) {
    long rem = k;
    double wt = 1.0;
    for (int j = 0; j < d; ++j) {
      long idx = rem % per_axis;
      rem /= per_axis;
      g.nodes(k, j) = scale * x[idx];
      wt *= scale * w[idx];
    }
    g.weights[k] = wt;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Covariant derivatives and slot-normalized operator norms

double covariant_derivative(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t,
                            int i, int j, const std::vector<Eigen::VectorXd>& U,
                            const std::vector<Eigen::VectorXd>& V) {
  if (i < 0 || j < 0 || i + j > 4)
    throw ValidationError("covariant_derivative: need i,j >= 0 and i+j <= 4");
  if (static_cast<int>(U.size()) != i || static_cast<int>(V.size()) != j)
    throw ValidationError("covariant_derivative: tangent-vector counts must equal (i, j)");
  const int d = k.dim();
  const int p = i + j;
  const Eigen::VectorXd h = s - t;
  const double sign = (j & 1) ? -1.0 : 1.0;
  std::vector<const Eigen::VectorXd*> slots;
  for (const auto& u : U) slots.push_back(&u);
  for (const auto& v : V) slots.push_back(&v);
  for (const auto* w : slots)
    if (w->size() != d) throw ValidationError("covariant_derivative: tangent dimension mismatch");
  if (p == 0) return sign * k.rho(h);
  // Sum over all index tuples (a_1..a_p); at most d^4 terms.
  double acc = 0.0;
  std::vector<int> idx(p, 0);
  while (true) {
    Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
    double w = 1.0;
    for (int q = 0; q < p; ++q) {
      alpha[idx[q]] += 1;
      w *= (*slots[q])[idx[q]];
    }
    if (w != 0.0) acc += w * k.rho_partial(h, alpha);
    int q = p - 1;
    while (q >= 0 && ++idx[q] == d) idx[q--] = 0;
    if (q < 0) break;
  }
  return sign * acc;
}

DerivTensor derivative_tensor(const TIKernel& k, int i, int j, const Eigen::VectorXd& s,
                              const Eigen::VectorXd& t) {
  if (i < 0 || j < 0 || i + j > 3)
    throw ValidationError("derivative_tensor: need i,j >= 0 and i+j <= 3");
  const int d = k.dim();
  const Eigen::VectorXd h = s - t;
  const double sign = (j & 1) ? -1.0 : 1.0;
  DerivTensor out;
  out.order = i + j;
  auto part = [&](std::initializer_list<int> axes) {
    Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
    for (int a : axes) alpha[a] += 1;
    return sign * k.rho_partial(h, alpha);
  };
  switch (out.order) {
    case 0:
      out.scalar = part({});
      break;
    case 1:
      out.vec.resize(d);
      for (int a = 0; a < d; ++a) out.vec[a] = part({a});
      break;
    case 2:
      out.mat.resize(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) out.mat(a, b) = out.mat(b, a) = part({a, b});
      break;
    default:
      out.t3.assign(d, Eigen::MatrixXd(d, d));
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          for (int c = b; c < d; ++c) out.t3[a](b, c) = out.t3[a](c, b) = part({a, b, c});
      break;
  }
  return out;
}

namespace {
// Spectral norm of a symmetric order-3 tensor via symmetric power iteration
// with axis and fixed pseudo-random restarts.
double sym3_norm(const std::vector<Eigen::MatrixXd>& T) {
  const int d = static_cast<int>(T.size());
  auto apply = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd v(d);
    for (int a = 0; a < d; ++a) v[a] = u.dot(T[a] * u);
    return v;
  };
  double best = 0.0;
  std::vector<Eigen::VectorXd> starts;
  for (int a = 0; a < d; ++a) starts.push_back(Eigen::VectorXd::Unit(d, a));
  Rng rng(0x5eed5eedULL);
  for (int r = 0; r < 5; ++r) {
    Eigen::VectorXd u(d);
    for (int a = 0; a < d; ++a) u[a] = rng.normal();
    if (u.norm() > 0) starts.push_back(u.normalized());
  }
  for (auto u : starts) {
    double lam = 0.0;
    for (int it = 0; it < 300; ++it) {
      Eigen::VectorXd v = apply(u);
      double nv = v.norm();
      if (nv < 1e-300) break;
      // Sign-corrected iteration keeps convergence monotone for negative
      // leading eigenpairs.
      double cur = u.dot(v);
      Eigen::VectorXd un = (cur >= 0 ? v : -v) / nv;
      if ((un - u).norm() < 1e-14) {
        u = un;
        lam = std::abs(u.dot(apply(u)));
        break;
      }
      u = un;
      lam = std::abs(cur);
    }
    best = std::max(best, lam);
  }
  return best;
}
}  // namespace

double operator_norm(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t, int i,
                     int j, const Eigen::MatrixXd& g_inv_sqrt) {
  DerivTensor T = derivative_tensor(k, i, j, s, t);
  const Eigen::MatrixXd& G = g_inv_sqrt;
  switch (T.order) {
    case 0: return std::abs(T.scalar);
    case 1: return (G * T.vec).norm();
    case 2: {
      Eigen::MatrixXd M = G * T.mat * G;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
      return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    default: {
      const int d = k.dim();
      // Transform all three slots by G (symmetric).
      std::vector<Eigen::MatrixXd> A(d, Eigen::MatrixXd::Zero(d, d));
      for (int a = 0; a < d; ++a) {
        Eigen::MatrixXd inner = G * T.t3[a] * G;  // slots b,c
        for (int b = 0; b < d; ++b)
          for (int c = 0; c < d; ++c)
            for (int ap = 0; ap < d; ++ap) A[ap](b, c) += G(ap, a) * inner(b, c);
      }
      return sym3_norm(A);
    }
  }
}

double operator_norm(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t, int i,
                     int j) {
  MetricTensor m = k.metric();
  return operator_norm(k, s, t, i, j, m.g_inv_sqrt);
}

}  // namespace offgrid
