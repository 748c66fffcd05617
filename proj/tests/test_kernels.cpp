#include <cmath>
#include <complex>

#include "doctest.h"
#include "offgrid/kernels.hpp"

using namespace offgrid;

namespace {
constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}
Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Directional derivative check: contract (i,j) against unit directions and
// compare against a central difference of the next-lower-order contraction.
double fd_next_order(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t, int i,
                     int j, std::vector<Eigen::VectorXd> U, std::vector<Eigen::VectorXd> V,
                     double step) {
  // Differentiate in the last slot (an s-slot if i>0, else a t-slot).
  if (i > 0) {
    Eigen::VectorXd dir = U.back();
    U.pop_back();
    return (covariant_derivative(k, s + step * dir, t, i - 1, j, U, V) -
            covariant_derivative(k, s - step * dir, t, i - 1, j, U, V)) /
           (2.0 * step);
  }
  Eigen::VectorXd dir = V.back();
  V.pop_back();
  return (covariant_derivative(k, s, t + step * dir, i, j - 1, U, V) -
          covariant_derivative(k, s, t - step * dir, i, j - 1, U, V)) /
         (2.0 * step);
}
}  // namespace

TEST_CASE("pivot kernel point values") {
  Sinc4Kernel k1(1, 1.0);
  CHECK(k1.eval(vec1(0.3), vec1(0.3)) == doctest::Approx(1.0).epsilon(1e-15));
  // sinc(pi) = 0, so a 4*pi offset kills every factor.
  CHECK(k1.eval(vec1(4.0 * kPi), vec1(0.0)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(k1.rho(vec1(1.7)) == doctest::Approx(k1.rho(vec1(-1.7))).epsilon(1e-15));

  GaussianKernel kg(Eigen::MatrixXd::Identity(2, 2));
  CHECK(kg.eval(vec2(1, 0), vec2(0, 0)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("sinc bound holds on a dense grid") {
  for (int i = 0; i <= 20000; ++i) {
    const double z = -40.0 + 80.0 * i / 20000.0;
    const double s = std::abs(sinc_deriv(z, 0));
    if (std::abs(z) <= 2.0)
      CHECK(s <= 1.0 - z * z / 12.0 + 1e-12);
    else
      CHECK(s <= 0.5 + 1e-12);
  }
}

TEST_CASE("sinc derivatives agree across the series/closed-form seam") {
  // The branch switch sits at |z| = 0.5; each derivative must be continuous
  // there and consistent with a central difference of the order below.
  for (double z : {0.499999, 0.500001, -0.499999, -0.500001}) {
    for (int p = 1; p <= 4; ++p) {
      const double h = 1e-5;
      const double fd = (sinc_deriv(z + h, p - 1) - sinc_deriv(z - h, p - 1)) / (2.0 * h);
      CHECK(sinc_deriv(z, p) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
  // Values at the origin: sinc(0)=1, sinc''(0)=-1/3, sinc''''(0)=1/5.
  CHECK(sinc_deriv(0.0, 0) == doctest::Approx(1.0));
  CHECK(sinc_deriv(0.0, 1) == doctest::Approx(0.0));
  CHECK(sinc_deriv(0.0, 2) == doctest::Approx(-1.0 / 3.0));
  CHECK(sinc_deriv(0.0, 3) == doctest::Approx(0.0));
  CHECK(sinc_deriv(0.0, 4) == doctest::Approx(0.2));
}

TEST_CASE("covariant derivative conventions") {
  Sinc4Kernel k(2, 0.8);
  // grad rho(0) = 0 by evenness.
  CHECK(covariant_derivative(k, vec2(0.4, -0.1), vec2(0.4, -0.1), 1, 0,
                             {vec2(1, 0)}, {}) == doctest::Approx(0.0).epsilon(1e-15));
  // K^{(1,1)} at s=t contracted on e1 twice equals the metric entry 1/(12 tau^2).
  for (double tau : {0.5, 1.0, 2.0}) {
    Sinc4Kernel kt(1, tau);
    const double v = covariant_derivative(kt, vec1(0.2), vec1(0.2), 1, 1, {vec1(1)}, {vec1(1)});
    CHECK(v == doctest::Approx(1.0 / (12.0 * tau * tau)).epsilon(1e-12));
  }
  // Sign symmetry: K^{(2,0)} = K^{(0,2)} = -K^{(1,1)} as forms.
  Eigen::VectorXd s = vec2(0.7, 0.2), t = vec2(0.1, -0.3), u = vec2(0.6, -0.8);
  const double k20 = covariant_derivative(k, s, t, 2, 0, {u, u}, {});
  const double k02 = covariant_derivative(k, s, t, 0, 2, {}, {u, u});
  const double k11 = covariant_derivative(k, s, t, 1, 1, {u}, {u});
  CHECK(k20 == doctest::Approx(k02).epsilon(1e-13));
  CHECK(k20 == doctest::Approx(-k11).epsilon(1e-13));
  CHECK_THROWS_AS(covariant_derivative(k, s, t, 3, 2, {u, u, u}, {u, u}), ValidationError);
}

TEST_CASE("derivatives match central finite differences at random offsets") {
  Rng rng(123);
  std::vector<std::unique_ptr<TIKernel>> kernels;
  kernels.push_back(std::make_unique<Sinc4Kernel>(1, 0.7));
  kernels.push_back(std::make_unique<Sinc4Kernel>(2, 1.3));
  Eigen::MatrixXd om(2, 2);
  om << 1.4, 0.3, 0.3, 0.9;
  kernels.push_back(std::make_unique<GaussianKernel>(om));
  kernels.push_back(std::make_unique<TemplateModelKernel>(
      1, 0.9, TemplateDistribution::gaussian(vec1(1.0))));

  for (const auto& kp : kernels) {
    const TIKernel& k = *kp;
    const int d = k.dim();
    const double tau = 1.0;  // step scale; sinc4 kernels carry tau inside rho
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::VectorXd s(d), t(d);
      for (int a = 0; a < d; ++a) {
        s[a] = rng.uniform(-2, 2);
        t[a] = rng.uniform(-2, 2);
      }
      const int total = 1 + static_cast<int>(rng.uniform(0, 4));  // 1..4
      const int i = static_cast<int>(rng.uniform(0, total + 1));
      const int j = total - i;
      std::vector<Eigen::VectorXd> U, V;
      for (int q = 0; q < i; ++q) U.push_back(Eigen::VectorXd::Unit(d, q % d));
      for (int q = 0; q < j; ++q) V.push_back(Eigen::VectorXd::Unit(d, (q + 1) % d));
      const double exact = covariant_derivative(k, s, t, i, j, U, V);
      const double fd = fd_next_order(k, s, t, i, j, U, V, 1e-4 * tau);
      const double scale = std::max(std::abs(exact), 1e-2);
      CHECK(std::abs(exact - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("metric tensors match finite-difference hessians") {
  std::vector<std::unique_ptr<TIKernel>> kernels;
  kernels.push_back(std::make_unique<Sinc4Kernel>(2, 0.6));
  Eigen::MatrixXd om(2, 2);
  om << 2.0, -0.4, -0.4, 1.1;
  kernels.push_back(std::make_unique<GaussianKernel>(om));
  kernels.push_back(std::make_unique<TemplateModelKernel>(
      2, 1.0, TemplateDistribution::gaussian(vec2(0.8, 1.2))));
  for (const auto& kp : kernels) {
    const TIKernel& k = *kp;
    const int d = k.dim();
    const double h = 1e-4;
    Eigen::MatrixXd gfd(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        Eigen::VectorXd ea = Eigen::VectorXd::Unit(d, a) * h;
        Eigen::VectorXd eb = Eigen::VectorXd::Unit(d, b) * h;
        gfd(a, b) =
            -(k.rho(ea + eb) - k.rho(ea - eb) - k.rho(eb - ea) + k.rho(-ea - eb)) / (4.0 * h * h);
      }
    gfd /= k.normalization();
    const Eigen::MatrixXd g = k.metric_matrix();
    CHECK((g - gfd).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("operator norms") {
  Sinc4Kernel k(1, 1.0);
  Eigen::VectorXd z = vec1(0.0);
  // order 0: |rho|, equals 1 at s=t.
  CHECK(operator_norm(k, z, z, 0, 0) == doctest::Approx(1.0));
  // order 2 at the origin: metric-normalized hessian is -Id, norm 1.
  CHECK(operator_norm(k, z, z, 0, 2) == doctest::Approx(1.0).epsilon(1e-12));

  // d=2, order 3 at a random offset vs dense maximization over unit tangents.
  Sinc4Kernel k2(2, 1.0);
  MetricTensor m = k2.metric();
  Eigen::VectorXd s = vec2(0.9, -1.7), t = vec2(0.0, 0.0);
  const double norm3 = operator_norm(k2, s, t, 1, 2);
  double dense = 0.0;
  const int n = 720;
  for (int a = 0; a < n; ++a) {
    const double th = 2.0 * kPi * a / n;
    Eigen::VectorXd u = m.g_inv_sqrt * vec2(std::cos(th), std::sin(th));
    const double v = std::abs(covariant_derivative(k2, s, t, 1, 2, {u}, {u, u}));
    dense = std::max(dense, v);
  }
  // Dense symmetric maximization from below; power iteration should match.
  CHECK(norm3 == doctest::Approx(dense).epsilon(1e-3));
  CHECK(norm3 >= dense - 1e-9);
}

TEST_CASE("pivot spectral density: shape, support, mass") {
  // Peak value 2/3 per axis times (2 tau)^d, here normalized queries.
  Sinc4Kernel k(1, 0.5);
  CHECK(k.spectral_density(vec1(0.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(k.spectral_density(vec1(0.8)) == doctest::Approx(0.282666666666667).epsilon(1e-12));
  CHECK(k.spectral_density(vec1(2.0001)) == 0.0);
  CHECK(k.spectral_density(vec1(-2.0001)) == 0.0);

  Sinc4Kernel k1(1, 1.0);
  CHECK(k1.spectral_density(vec1(0.0)) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(k1.spectral_density(vec1(-0.45)) == doctest::Approx(0.442333333333333).epsilon(1e-12));
  Sinc4Kernel kq(1, 0.25);
  CHECK(kq.spectral_density(vec1(2.5)) == doctest::Approx(0.03515625).epsilon(1e-12));
  Sinc4Kernel k2(2, 0.7);
  CHECK(k2.spectral_density(vec2(0, 0)) == doctest::Approx(0.871111111111111).epsilon(1e-12));

  // Evenness.
  CHECK(k1.spectral_density(vec1(0.37)) == doctest::Approx(k1.spectral_density(vec1(-0.37))));

  // Total mass 1 (d=1): 2000-node composite quadrature over the support.
  for (double tau : {0.5, 1.0}) {
    Sinc4Kernel kt(1, tau);
    Eigen::VectorXd gx, gw;
    gauss_legendre(25, gx, gw);
    const double hw = 1.0 / tau;
    const int panels = 80;  // 80 * 25 = 2000 nodes
    const double width = 2.0 * hw / panels;
    double mass = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double lo = -hw + p * width;
      for (int q = 0; q < gx.size(); ++q) {
        const double w = lo + 0.5 * width * (gx[q] + 1.0);
        mass += 0.5 * width * gw[q] * kt.spectral_density(vec1(w));
      }
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("pivot kernel is the inverse transform of its spectral density") {
  // Bochner consistency at random offsets, piecewise quadrature per cubic
  // segment of the density.
  Rng rng(5);
  for (double tau : {0.7, 1.2}) {
    Sinc4Kernel k(1, tau);
    Eigen::VectorXd gx, gw;
    gauss_legendre(64, gx, gw);
    for (int rep = 0; rep < 20; ++rep) {
      const double h = rng.uniform(-3, 3);
      double acc = 0.0;
      for (int seg = 0; seg < 4; ++seg) {
        const double a = (seg - 2) / (2.0 * tau), b = (seg - 1) / (2.0 * tau);
        for (int q = 0; q < gx.size(); ++q) {
          const double w = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
          acc += 0.5 * (b - a) * gw[q] * k.spectral_density(vec1(w)) * std::cos(w * h);
        }
      }
      CHECK(acc == doctest::Approx(k.rho(vec1(h))).epsilon(1e-6));
    }
  }
}

TEST_CASE("template distributions") {
  TemplateDistribution g = TemplateDistribution::gaussian(vec1(1.5));
  TemplateDistribution c = TemplateDistribution::cauchy(vec2(0.5, 2.0));
  TemplateDistribution p = TemplateDistribution::point_mass(2);
  CHECK(std::abs(g.cf(vec1(0.0)) - std::complex<double>(1, 0)) < 1e-15);
  CHECK(std::abs(c.cf(vec2(0, 0)) - std::complex<double>(1, 0)) < 1e-15);
  CHECK(std::abs(p.cf(vec2(0, 0)) - std::complex<double>(1, 0)) < 1e-15);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd w = vec2(rng.uniform(-8, 8), rng.uniform(-8, 8));
    CHECK(std::abs(c.cf(w)) <= 1.0 + 1e-12);
    CHECK(std::abs(p.cf(w)) <= 1.0 + 1e-12);
  }
  // Gaussian sampler has roughly the right scale (smoke check, fixed seed).
  Rng srng(100);
  double ss = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = g.sample_noise(srng);
    ss += x[0] * x[0];
  }
  CHECK(std::sqrt(ss / n) == doctest::Approx(1.5).epsilon(0.05));

  // JSON round trip.
  TemplateDistribution rt = TemplateDistribution::from_json_string(c.to_json_string());
  CHECK(rt.kind == TemplateDistribution::Kind::cauchy);
  CHECK(rt.scale == c.scale);

  // Custom characteristic functions must equal 1 at the origin.
  CHECK_THROWS_AS(TemplateDistribution::custom(
                      1, [](const Eigen::VectorXd&) { return std::complex<double>(0.9, 0.0); }),
                  ValidationError);
  TemplateDistribution ok = TemplateDistribution::custom(1, [](const Eigen::VectorXd& w) {
    return std::exp(std::complex<double>(-0.5 * w[0] * w[0], 0.0));
  });
  CHECK_THROWS_AS(ok.sample_noise(rng), ValidationError);
}

TEST_CASE("model kernel from a point-mass template is the low-pass kernel") {
  for (double tau : {0.5, 1.0}) {
    TemplateModelKernel k(1, tau, TemplateDistribution::point_mass(1));
    CHECK(k.rho(vec1(0.0)) == doctest::Approx(1.0 / tau).epsilon(1e-10));
    CHECK(!k.normalized());
    CHECK(k.normalization() == doctest::Approx(1.0 / tau).epsilon(1e-10));
    // rho(h) = sinc(h/tau)/tau.
    for (double h : {0.3, 1.1, 2.7}) {
      CHECK(k.rho(vec1(h)) ==
            doctest::Approx(sinc_deriv(h / tau, 0) / tau).epsilon(1e-10));
    }
  }
  TemplateModelKernel k2(2, 0.8, TemplateDistribution::point_mass(2));
  CHECK(k2.rho(vec2(0, 0)) == doctest::Approx(1.0 / (0.8 * 0.8)).epsilon(1e-9));
  // Symmetry on random pairs.
  Rng rng(21);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd h = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    CHECK(k2.rho(h) == doctest::Approx(k2.rho(-h)).epsilon(1e-12));
  }
}

TEST_CASE("gaussian-template model kernel value at the origin") {
  // K(0,0) = int_0^1 exp(-w^2) dw = (sqrt(pi)/2) erf(1) for sigma=1, tau=1.
  TemplateModelKernel k(1, 1.0, TemplateDistribution::gaussian(vec1(1.0)));
  CHECK(k.rho(vec1(0.0)) == doctest::Approx(0.7468241328124271).epsilon(1e-10));
  // Spectral density: 2^{-d} |cf|^2 inside the cube, zero outside.
  CHECK(k.spectral_density(vec1(0.5)) == doctest::Approx(0.5 * std::exp(-0.25)).epsilon(1e-12));
  CHECK(k.spectral_density(vec1(1.0001)) == 0.0);
}

TEST_CASE("custom-template model kernel matches the separable fast path") {
  // The same gaussian cf routed through the custom (tensor-grid) path.
  TemplateDistribution custom = TemplateDistribution::custom(1, [](const Eigen::VectorXd& w) {
    return std::complex<double>(std::exp(-0.5 * w.squaredNorm()), 0.0);
  });
  TemplateModelKernel kc(1, 1.0, custom);
  TemplateModelKernel ks(1, 1.0, TemplateDistribution::gaussian(vec1(1.0)));
  Rng rng(33);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd h = vec1(rng.uniform(-2, 2));
    CHECK(kc.rho(h) == doctest::Approx(ks.rho(h)).epsilon(1e-9));
  }
}

TEST_CASE("kernel JSON configs round trip") {
  auto k1 = kernel_from_json_string(R"({"kind":"sinc4","dim":2,"tau":0.75})");
  CHECK(k1->dim() == 2);
  CHECK(k1->rho(vec2(0, 0)) == doctest::Approx(1.0));
  auto rt = kernel_from_json_string(kernel_to_json_string(*k1));
  CHECK(rt->rho(vec2(0.4, 0.6)) == doctest::Approx(k1->rho(vec2(0.4, 0.6))));

  auto kg = kernel_from_json_string(R"({"kind":"gaussian","omega":[[1.0,0.2],[0.2,2.0]]})");
  CHECK(kg->metric_matrix()(0, 1) == doctest::Approx(0.2));

  auto km = kernel_from_json_string(
      R"({"kind":"template","dim":1,"tau":1.0,"template":{"kind":"gaussian","scale":[1.0]}})");
  CHECK(km->rho(vec1(0.0)) == doctest::Approx(0.7468241328124271).epsilon(1e-9));

  CHECK_THROWS_AS(kernel_from_json_string(R"({"kind":"nope"})"), ValidationError);
  CHECK_THROWS_AS(kernel_from_json_string("not json"), ValidationError);
}

TEST_CASE("spectral grid invariants") {
  SpectralGrid g1 = SpectralGrid::tensor_gauss_legendre(1, 0.5);
  CHECK(g1.nodes.rows() == 64);
  SpectralGrid g3 = SpectralGrid::tensor_gauss_legendre(3, 1.0);
  CHECK(g3.nodes.rows() == 32 * 32 * 32);
  for (const auto* g : {&g1, &g3}) {
    CHECK((g->weights.array() > 0).all());
    const int d = static_cast<int>(g->nodes.cols());
    const double hw = (g == &g1) ? 2.0 : 1.0;
    CHECK(g->weights.sum() == doctest::Approx(std::pow(2.0 * hw, d)).epsilon(1e-12));
    CHECK(g->nodes.cwiseAbs().maxCoeff() < hw);  // strictly interior
  }
  // Quadrature sanity: integrate cos(w) over [-2,2].
  double acc = 0.0;
  for (long i = 0; i < g1.nodes.rows(); ++i) acc += g1.weights[i] * std::cos(g1.nodes(i, 0));
  CHECK(acc == doctest::Approx(2.0 * std::sin(2.0)).epsilon(1e-13));
}
