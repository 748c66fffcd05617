#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "offgrid/sketching.hpp"

using namespace offgrid;

namespace {
Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// Irwin-Hall-4 CDF on [0,4] (integral of the piecewise-cubic density).
double ih4_cdf(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 4.0) return 1.0;
  double s = 0.0;
  const double binom[5] = {1, 4, 6, 4, 1};
  for (int k = 0; k <= static_cast<int>(x); ++k)
    s += (k % 2 ? -1.0 : 1.0) * binom[k] * std::pow(x - k, 4);
  return s / 24.0;
}

Eigen::MatrixXd gaussian_cloud(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = 3.0 * rng.normal();
  return x;
}
}  // namespace

TEST_CASE("sketching laws expose the documented constants") {
  SketchingLaw ih4 = SketchingLaw::ih4(1, 0.5);
  CHECK(ih4.c_lambda == 1.0);
  CHECK(std::isinf(ih4.sup_ratio));
  Sinc4Kernel k(1, 0.5);
  for (double w : {-1.7, -0.3, 0.0, 0.9, 1.9})
    CHECK(ih4.density(vec1(w)) == doctest::Approx(k.spectral_density(vec1(w))).epsilon(1e-14));

  SketchingLaw uni = SketchingLaw::uniform_cube(2, 0.5);
  CHECK(uni.sup_ratio == doctest::Approx(std::pow(0.5, -2)).epsilon(1e-14));
  CHECK(uni.c_lambda == doctest::Approx(std::pow(8.0 / 3.0, 2)).epsilon(1e-14));
  CHECK(uni.density(Eigen::VectorXd::Zero(2)) == doctest::Approx(std::pow(0.25, 2)).epsilon(1e-14));
  CHECK(uni.density(Eigen::VectorXd::Constant(2, 2.5)) == 0.0);
  CHECK_THROWS_AS(SketchingLaw::by_name("bogus", 1, 0.5), ValidationError);
}

TEST_CASE("ih4 sampler matches its density (chi-square on the axis marginal)") {
  const double tau = 0.5;
  SketchingLaw law = SketchingLaw::ih4(1, tau);
  Rng rng(4242);
  const int n = 10000, bins = 15;
  std::vector<int> count(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double w = law.sample(rng)[0];
    REQUIRE(std::abs(w) <= 1.0 / tau);
    int b = static_cast<int>((w + 1.0 / tau) / (2.0 / tau) * bins);
    if (b == bins) b = bins - 1;
    ++count[b];
  }
  double stat = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double lo = -1.0 / tau + 2.0 / tau * b / bins, hi = lo + 2.0 / (tau * bins);
    const double p = ih4_cdf(2 * tau * hi + 2) - ih4_cdf(2 * tau * lo + 2);
    stat += std::pow(count[b] - n * p, 2) / (n * p);
  }
  CHECK(stat < 29.142);  // chi-square(14) upper 1% point
}

TEST_CASE("drawn operators are deterministic per seed and weight-correct") {
  SketchingLaw law = SketchingLaw::uniform_cube(1, 1.0);
  TemplateDistribution tpl = TemplateDistribution::gaussian(vec1(1.0));
  SketchOperator a = SketchOperator::draw(law, tpl, 64, 7);
  SketchOperator b = SketchOperator::draw(law, tpl, 64, 7);
  SketchOperator c = SketchOperator::draw(law, tpl, 64, 8);
  CHECK(a.frequencies() == b.frequencies());
  CHECK(a.weights() == b.weights());
  CHECK(a.template_cf() == b.template_cf());
  CHECK(a.frequencies() != c.frequencies());
  // Uniform law at tau=1: every weight is exactly the same constant tau^{-d/2}=1.
  for (int i = 0; i < a.m(); ++i) CHECK(a.weights()[i] == doctest::Approx(1.0).epsilon(1e-14));
  // IH4 law: weights vary but window/density stays the rule.
  SketchingLaw ih4 = SketchingLaw::ih4(1, 1.0);
  SketchOperator d = SketchOperator::draw(ih4, tpl, 32, 7);
  for (int i = 0; i < d.m(); ++i) {
    const Eigen::VectorXd w = d.frequencies().row(i).transpose();
    CHECK(d.weights()[i] ==
          doctest::Approx(std::sqrt(0.5 / ih4.density(w))).epsilon(1e-12));
  }
}

TEST_CASE("sketching a single sample at the origin gives 1/sqrt(m) entries") {
  SketchingLaw law = SketchingLaw::uniform_cube(1, 1.0);
  TemplateDistribution tpl = TemplateDistribution::point_mass(1);
  SketchOperator op = SketchOperator::draw(law, tpl, 16, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 1);
  SketchVector sk = sketch_dataset(x, op);
  for (int i = 0; i < op.m(); ++i) {
    CHECK(sk.z[i].real() == doctest::Approx(1.0 / 4.0).epsilon(1e-15));
    CHECK(sk.z[i].imag() == 0.0);
  }
  CHECK(sk.n == 1);
  CHECK(!sk.dataset_sha256.empty());
}

TEST_CASE("symmetric datasets sketch to exactly real entries") {
  SketchingLaw law = SketchingLaw::ih4(1, 0.7);
  TemplateDistribution tpl = TemplateDistribution::gaussian(vec1(1.0));
  SketchOperator op = SketchOperator::draw(law, tpl, 32, 11);
  Rng rng(5);
  Eigen::MatrixXd x(40, 1);
  for (int i = 0; i < 20; ++i) {
    x(2 * i, 0) = 4.0 * rng.normal();
    x(2 * i + 1, 0) = -x(2 * i, 0);
  }
  SketchVector sk = sketch_dataset(x, op);
  for (int i = 0; i < op.m(); ++i) CHECK(sk.z[i].imag() == 0.0);  // exact cancellation
}

TEST_CASE("sketch entries match a naive double loop") {
  SketchingLaw law = SketchingLaw::ih4(1, 0.6);
  TemplateDistribution tpl = TemplateDistribution::gaussian(vec1(0.8));
  SketchOperator op = SketchOperator::draw(law, tpl, 48, 21);
  Eigen::MatrixXd x = gaussian_cloud(1000, 1, 77);
  SketchVector sk = sketch_dataset(x, op);
  for (int i = 0; i < op.m(); ++i) {
    std::complex<double> s(0, 0);
    for (int j = 0; j < x.rows(); ++j) {
      const double th = op.frequencies()(i, 0) * x(j, 0);
      s += std::complex<double>(std::cos(th), -std::sin(th));
    }
    const std::complex<double> naive = op.weights()[i] / std::sqrt(48.0) * s / 1000.0;
    CHECK(std::abs(sk.z[i] - naive) < 1e-12);
    CHECK(std::abs(sk.z[i]) <= op.entry_scale(i) * (1 + 1e-12));
  }
}

TEST_CASE("merge law is exact against sketching the concatenation") {
  SketchingLaw law = SketchingLaw::ih4(2, 0.9);
  TemplateDistribution tpl = TemplateDistribution::gaussian(Eigen::VectorXd::Constant(2, 1.0));
  SketchOperator op = SketchOperator::draw(law, tpl, 33, 13);
  Eigen::MatrixXd a = gaussian_cloud(937, 2, 1), b = gaussian_cloud(541, 2, 2),
                  c = gaussian_cloud(64, 2, 3);
  Eigen::MatrixXd ab(a.rows() + b.rows(), 2), abc(ab.rows() + c.rows(), 2);
  ab << a, b;
  abc << a, b, c;
  SketchVector sa = sketch_dataset(a, op), sb = sketch_dataset(b, op), sc = sketch_dataset(c, op);
  SketchVector m2 = merge_sketches(op, sa, sb);
  SketchVector direct2 = sketch_dataset(ab, op);
  CHECK(m2.n == direct2.n);
  for (int i = 0; i < op.m(); ++i) {
    CHECK(m2.z[i].real() == direct2.z[i].real());  // bitwise, not approximate
    CHECK(m2.z[i].imag() == direct2.z[i].imag());
  }
  SketchVector m3 = merge_sketches(op, m2, sc);
  SketchVector direct3 = sketch_dataset(abc, op);
  for (int i = 0; i < op.m(); ++i) {
    CHECK(m3.z[i].real() == direct3.z[i].real());
    CHECK(m3.z[i].imag() == direct3.z[i].imag());
  }
}

TEST_CASE("forward operator: zero measure, unit point mass, linearity") {
  SketchingLaw law = SketchingLaw::uniform_cube(1, 1.0);
  TemplateDistribution tpl = TemplateDistribution::point_mass(1);
  SketchOperator op = SketchOperator::draw(law, tpl, 25, 2);

  DiscreteMeasure zero;
  CHECK(forward(op, zero).norm() == 0.0);

  DiscreteMeasure delta0;
  delta0.atoms.push_back({1.0, Eigen::VectorXd::Zero(1)});
  Eigen::VectorXcd f = forward(op, delta0);
  for (int i = 0; i < op.m(); ++i) CHECK(std::abs(f[i] - 0.2) < 1e-15);  // 1/sqrt(25)

  DiscreteMeasure mu, nu, combo;
  Rng rng(9);
  for (int k = 0; k < 3; ++k) {
    mu.atoms.push_back({rng.normal(), vec1(rng.uniform(-5, 5))});
    nu.atoms.push_back({rng.normal(), vec1(rng.uniform(-5, 5))});
  }
  combo = mu;
  for (auto atom : nu.atoms) {
    atom.w *= -2.5;
    combo.atoms.push_back(atom);
  }
  Eigen::VectorXcd lhs = forward(op, combo);
  Eigen::VectorXcd rhs = forward(op, mu) - 2.5 * forward(op, nu);
  CHECK((lhs - rhs).norm() < 1e-13);
}

TEST_CASE("data sketches converge to the forward image of the mixing measure") {
  const double tau = 1.0;
  SketchingLaw law = SketchingLaw::ih4(1, tau);
  TemplateDistribution tpl = TemplateDistribution::gaussian(vec1(1.0));
  SketchOperator op = SketchOperator::draw(law, tpl, 64, 6);
  DiscreteMeasure mu0;
  mu0.atoms.push_back({0.4, vec1(-2.0)});
  mu0.atoms.push_back({0.6, vec1(3.0)});
  Eigen::VectorXcd target = forward(op, mu0);

  std::vector<double> logn, logerr;
  Rng rng(31);
  for (int n : {100, 10000, 1000000}) {
    Eigen::MatrixXd x(n, 1);
    std::vector<double> w = {0.4, 0.6};
    for (int j = 0; j < n; ++j) {
      const int k = rng.categorical(w);
      x(j, 0) = mu0.atoms[k].x[0] + tpl.sample_noise(rng)[0];
    }
    const double err = (sketch_dataset(x, op).z - target).norm();
    logn.push_back(std::log(static_cast<double>(n)));
    logerr.push_back(std::log(err));
  }
  const double slope = (logerr.back() - logerr.front()) / (logn.back() - logn.front());
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.4));  // Monte-Carlo rate
}

TEST_CASE("sketched kernel: Gram diagonal, conjugate symmetry, population limit") {
  const double tau = 0.8;
  SketchingLaw law = SketchingLaw::uniform_cube(1, tau);
  TemplateDistribution tpl = TemplateDistribution::point_mass(1);
  SketchOperator op = SketchOperator::draw(law, tpl, 4096, 17);

  Eigen::VectorXd s = vec1(0.3), t = vec1(-1.1);
  std::complex<double> kst = sketched_kernel_complex(op, s, t);
  std::complex<double> kts = sketched_kernel_complex(op, t, s);
  CHECK(kst.real() == kts.real());
  CHECK(kst.imag() == -kts.imag());

  double diag = sketched_kernel(op, s, s);
  double gram = 0.0;
  for (int i = 0; i < op.m(); ++i)
    gram += std::norm(op.weights()[i] * op.template_cf()[i]) / op.m();
  CHECK(diag == doctest::Approx(gram).epsilon(1e-12));
  CHECK(diag >= 0.0);

  // Large m: close to the population model kernel (the point-mass low-pass).
  TemplateModelKernel pop(1, tau, tpl);
  double gap = 0.0;
  for (double h = -3.0; h <= 3.0; h += 0.05)
    gap = std::max(gap, std::abs(sketched_kernel(op, vec1(h), vec1(0.0)) - pop.rho(vec1(h))));
  CHECK(gap < 0.05 * pop.rho(Eigen::VectorXd::Zero(1)));
}

TEST_CASE("sketch size formulas") {
  CHECK(sketch_size(1, 1, 1.0, 0.5) == 1);
  const std::int64_t m1 = sketch_size(4, 2, 50.0, 0.1);
  const std::int64_t m2 = sketch_size(8, 2, 50.0, 0.1);
  CHECK(m2 > 2 * m1);  // superlinear in s0 through the log factor
  CHECK_THROWS_AS(sketch_size(1, 1, 1.0, 1.5), ValidationError);

  SketchSizeBreakdown b = sketch_size_sinc4(3, 1, 220.0, 0.2, 1.0);
  CHECK(b.n_grid == doctest::Approx(24685.3997).epsilon(1e-6));
  CHECK(b.c1 == doctest::Approx(79367.0847).epsilon(1e-6));
  CHECK(b.c2 == doctest::Approx(5840.0826).epsilon(1e-6));
  CHECK(b.m0 == 933020);
  CHECK(b.to_json_string().find("c_lambda") != std::string::npos);
}

TEST_CASE("noise level bound: pinned constants and the flagged limit mismatch") {
  const double tau7 = 0.5090595715;
  SketchingLaw uni = SketchingLaw::uniform_cube(1, tau7);
  NoiseLevelBound b256 = noise_level_bound(0.2, 256, 1, tau7, uni);
  CHECK(b256.c_alpha_m == doctest::Approx(5.2742551549).epsilon(1e-9));
  NoiseLevelBound b512 = noise_level_bound(0.2, 512, 1, tau7, uni);
  CHECK(b512.c_alpha_m == doctest::Approx(5.2221501025).epsilon(1e-9));
  // Exact root-n scaling.
  NoiseLevelBound b100 = noise_level_bound(0.2, 256, 100, tau7, uni);
  CHECK(b100.value == b256.c_alpha_m / 10.0);

  SketchingLaw uni1 = SketchingLaw::uniform_cube(1, 1.0);
  NoiseLevelBound blim = noise_level_bound(0.5, 1000000000000000LL, 1, 1.0, uni1);
  CHECK(blim.limit_plain == doctest::Approx(3.0895270584).epsilon(1e-9));
  CHECK(blim.limit_remark == doctest::Approx(7.0193350587).epsilon(1e-9));
  CHECK(blim.c_alpha_m == doctest::Approx(blim.limit_plain).epsilon(1e-6));
  CHECK(blim.note.find("c1=1") != std::string::npos);
  CHECK(blim.note.find("disagree") != std::string::npos);

  SketchingLaw ih4 = SketchingLaw::ih4(1, 1.0);
  NoiseLevelBound binf = noise_level_bound(0.2, 256, 1, 1.0, ih4);
  CHECK(std::isinf(binf.c_alpha_m));
  CHECK(binf.note.find("unbounded weight ratio") != std::string::npos);
  CHECK(binf.to_json_string().find("note") != std::string::npos);
}

TEST_CASE("tail envelope levels") {
  auto L = tail_bound_levels(1, 1.0);
  CHECK(L[0] == 1.0);
  CHECK(L[1] == doctest::Approx(3.4641016151).epsilon(1e-9));
  CHECK(L[2] == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(L[3] == doctest::Approx(41.5692193817).epsilon(1e-9));

  // Almost-sure check: law-normalized derivative norms never exceed the levels.
  const double tau = 0.5;
  SketchingLaw law = SketchingLaw::ih4(1, tau);
  Sinc4Kernel pivot(1, tau);
  Rng rng(88);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd w = law.sample(rng);
    const double ampl = std::sqrt(pivot.spectral_density(w) / law.density(w));
    const double gnorm = std::sqrt(12.0) * tau * w.norm();
    for (int r = 0; r < 4; ++r) REQUIRE(ampl * std::pow(gnorm, r) <= L[r] * (1 + 1e-12));
  }
}

TEST_CASE("sketch file round trip preserves the operator and the sketch") {
  SketchingLaw law = SketchingLaw::ih4(1, 0.75);
  TemplateDistribution tpl = TemplateDistribution::gaussian(vec1(1.2));
  SketchOperator op = SketchOperator::draw(law, tpl, 20, 99);
  Eigen::MatrixXd x = gaussian_cloud(500, 1, 4);
  SketchVector sk = sketch_dataset(x, op);

  const std::string text = sketch_file_json(op, sk);
  CHECK(text == sketch_file_json(op, sk));  // serialization is deterministic
  auto [op2, sk2] = sketch_file_from_json(text);
  CHECK(op2.m() == op.m());
  CHECK(op2.tau() == op.tau());
  CHECK(op2.seed() == op.seed());
  CHECK(op2.law_name() == "ih4");
  CHECK(op2.frequencies() == op.frequencies());
  CHECK(op2.weights() == op.weights());
  CHECK(op2.template_cf() == op.template_cf());
  CHECK(sk2.z == sk.z);
  CHECK(sk2.n == sk.n);
  CHECK(sk2.dataset_sha256 == sk.dataset_sha256);
  CHECK(!sk2.exact());  // accumulators do not survive serialization

  // Same-dataset forward/kernel evaluations agree after the round trip.
  Eigen::VectorXd s = vec1(0.4), t = vec1(-0.9);
  CHECK(sketched_kernel(op2, s, t) == sketched_kernel(op, s, t));

  // Corrupt an entry beyond its weight bound: load must refuse.
  std::string bad = text;
  const auto pos = bad.find("\"z\":[[");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 6, "\"z\":[[9e9,");
  // drop the original real part we displaced: find the next comma and cut to it
  const auto cut = bad.find(',', pos + 10);
  bad.erase(pos + 9, cut - (pos + 9));
  CHECK_THROWS_AS(sketch_file_from_json(bad), ValidationError);

  const std::string path = "/tmp/offgrid_sketch_test.json";
  save_sketch_file(path, op, sk);
  auto [op3, sk3] = load_sketch_file(path);
  CHECK(sk3.z == sk.z);
  std::remove(path.c_str());
}

TEST_CASE("samples CSV round trip and validation") {
  Eigen::MatrixXd x(3, 2);
  x << 1.5, -2.25, 1e-17, 3.125, -0.5, 0.75;
  const std::string path = "/tmp/offgrid_samples_test.csv";
  save_samples_csv(path, x);
  Eigen::MatrixXd y = load_samples_csv(path);
  CHECK(y.rows() == 3);
  CHECK(y.cols() == 2);
  CHECK((x - y).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(load_samples_csv(path, 3), ValidationError);

  std::ofstream bad(path);
  bad << "1.0,2.0\n3.0\n";
  bad.close();
  CHECK_THROWS_AS(load_samples_csv(path), ValidationError);
  std::ofstream junk(path);
  junk << "1.0,abc\n";
  junk.close();
  CHECK_THROWS_AS(load_samples_csv(path), ValidationError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_samples_csv("/nonexistent/offgrid.csv"), ValidationError);
}
