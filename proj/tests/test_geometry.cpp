#include <cmath>

#include "doctest.h"
#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"

using namespace offgrid;

namespace {
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
}  // namespace

TEST_CASE("parameter box validates and contains its closed boundary") {
  CHECK_THROWS_AS(ParameterBox(vec1(1.0), vec1(1.0)), ValidationError);
  CHECK_THROWS_AS(ParameterBox(vec2(0, 0), vec1(1.0)), ValidationError);
  ParameterBox box(vec2(-1, -2), vec2(1, 2));
  CHECK(box.dim() == 2);
  CHECK(box.contains(vec2(1, 2)));  // boundary atoms are valid
  CHECK(box.contains(vec2(-1, 0)));
  CHECK(!box.contains(vec2(1.0001, 0)));
  CHECK(box.clamp(vec2(5, -9)) == vec2(1, -2));
  CHECK(box.diameter() == doctest::Approx(std::sqrt(4.0 + 16.0)));
  ParameterBox rt = ParameterBox::from_json_string(box.to_json_string());
  CHECK(rt.lo == box.lo);
  CHECK(rt.hi == box.hi);
}

TEST_CASE("fisher-rao distance matches the pivot-metric closed form") {
  MetricTensor g = MetricTensor::from_matrix(Eigen::MatrixXd::Identity(2, 2) / 12.0);
  CHECK(fisher_rao_distance(g, vec2(0, 0), vec2(2.0 * std::sqrt(3.0), 0)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fisher_rao_distance(g, vec2(0.3, -0.7), vec2(0.3, -0.7)) == 0.0);
  CHECK_THROWS_AS(fisher_rao_distance(g, vec1(0.0), vec2(0, 0)), ValidationError);
}

TEST_CASE("fisher-rao distance under a finite-difference gaussian metric") {
  // Recover the metric of exp(-|h|^2/2) numerically, then check the unit step.
  GaussianKernel k(Eigen::MatrixXd::Identity(2, 2));
  const double h = 1e-4;
  Eigen::MatrixXd gfd(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Eigen::VectorXd ea = Eigen::VectorXd::Unit(2, a) * h;
      Eigen::VectorXd eb = Eigen::VectorXd::Unit(2, b) * h;
      gfd(a, b) = -(k.rho(ea + eb) - k.rho(ea - eb) - k.rho(eb - ea) + k.rho(-ea - eb)) /
                  (4.0 * h * h);
    }
  MetricTensor g = MetricTensor::from_matrix(0.5 * (gfd + gfd.transpose()));
  CHECK(fisher_rao_distance(g, vec2(1, 0), vec2(0, 0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fisher-rao distance is a metric on random triples") {
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 0.3, 0.3, 1.0;
  MetricTensor g = MetricTensor::from_matrix(m);
  Rng rng(7);
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd a = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
    Eigen::VectorXd b = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
    Eigen::VectorXd c = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const double dab = fisher_rao_distance(g, a, b);
    const double dba = fisher_rao_distance(g, b, a);
    const double dac = fisher_rao_distance(g, a, c);
    const double dcb = fisher_rao_distance(g, c, b);
    CHECK(dab >= 0.0);
    CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
    CHECK(dab <= dac + dcb + 1e-12);
    CHECK(fisher_rao_distance(g, a, a) == 0.0);
  }
}

TEST_CASE("min separation") {
  MetricTensor g = MetricTensor::from_matrix(Eigen::MatrixXd::Identity(1, 1) / 12.0);
  DiscreteMeasure mu;
  mu.atoms.push_back({1.0, vec1(0.0)});
  mu.atoms.push_back({-0.5, vec1(2.0 * std::sqrt(3.0))});
  CHECK(min_separation(mu, g) == doctest::Approx(1.0).epsilon(1e-12));

  DiscreteMeasure one;
  one.atoms.push_back({1.0, vec1(0.0)});
  CHECK_THROWS_AS(min_separation(one, g), ValidationError);

  // Three collinear, equally spaced atoms: separation h*sqrt(g11).
  Eigen::MatrixXd gm(1, 1);
  gm << 0.37;
  MetricTensor g1 = MetricTensor::from_matrix(gm);
  const double h = 1.7;
  DiscreteMeasure tri;
  tri.atoms.push_back({1.0, vec1(0.0)});
  tri.atoms.push_back({0.0, vec1(h)});  // zero weight still counts for separation
  tri.atoms.push_back({1.0, vec1(2.0 * h)});
  CHECK(min_separation(tri, g1) == doctest::Approx(h * std::sqrt(0.37)).epsilon(1e-12));

  // Random 5-atom set in d=2 against a brute-force pairwise scan.
  Eigen::MatrixXd m2(2, 2);
  m2 << 1.5, -0.2, -0.2, 0.8;
  MetricTensor g2 = MetricTensor::from_matrix(m2);
  Rng rng(42);
  DiscreteMeasure five;
  for (int i = 0; i < 5; ++i)
    five.atoms.push_back({rng.uniform(-1, 1), vec2(rng.uniform(-4, 4), rng.uniform(-4, 4))});
  double brute = 1e300;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      Eigen::VectorXd d = five.atoms[i].x - five.atoms[j].x;
      brute = std::min(brute, std::sqrt(d.dot(m2 * d)));
    }
  CHECK(min_separation(five, g2) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("model membership with monotonicity") {
  Eigen::MatrixXd gm = Eigen::MatrixXd::Identity(1, 1);
  MetricTensor g = MetricTensor::from_matrix(gm);
  DiscreteMeasure mu;
  mu.atoms.push_back({1.0, vec1(0.0)});
  mu.atoms.push_back({1.0, vec1(5.0)});
  mu.atoms.push_back({1.0, vec1(10.0)});
  CHECK(model_membership(mu, 3, 4.0, g));
  DiscreteMeasure tight;
  tight.atoms.push_back({1.0, vec1(0.0)});
  tight.atoms.push_back({1.0, vec1(3.0)});
  tight.atoms.push_back({1.0, vec1(6.0)});
  CHECK(!model_membership(tight, 3, 4.0, g));
  DiscreteMeasure single;
  single.atoms.push_back({1.0, vec1(0.0)});
  CHECK(model_membership(single, 1, 10.0, g));  // vacuous separation

  // Monotone: shrinking delta0 or growing s0 never flips true -> false.
  Rng rng(11);
  for (int it = 0; it < 50; ++it) {
    DiscreteMeasure m;
    const int n = 1 + static_cast<int>(rng.uniform(0, 4));
    for (int i = 0; i < n; ++i) m.atoms.push_back({1.0, vec1(rng.uniform(-10, 10))});
    const double d0 = rng.uniform(0, 5);
    const int s0 = 1 + static_cast<int>(rng.uniform(0, 4));
    if (model_membership(m, s0, d0, g)) {
      CHECK(model_membership(m, s0 + 1, d0, g));
      CHECK(model_membership(m, s0, 0.5 * d0, g));
    }
  }
}

TEST_CASE("classify regions covers, partitions, and resolves boundary ties") {
  MetricTensor g = MetricTensor::from_matrix(Eigen::MatrixXd::Identity(1, 1));
  std::vector<Eigen::VectorXd> spikes = {vec1(0.0), vec1(10.0)};
  const double r = 1.0;

  RegionLabeling at_spike = classify_regions({vec1(0.0)}, spikes, r, g);
  CHECK(at_spike.label[0] == 0);

  RegionLabeling far = classify_regions({vec1(2.0 * r + 0.0)}, {vec1(0.0)}, r, g);
  CHECK(far.label[0] == -1);

  // Point equidistant to both spikes at exactly radius r: smallest index wins.
  RegionLabeling tie = classify_regions({vec1(5.0)}, spikes, 5.0, g);
  CHECK(tie.label[0] == 0);
  // Boundary point at exactly r from a single spike is near.
  RegionLabeling boundary = classify_regions({vec1(1.0)}, spikes, r, g);
  CHECK(boundary.label[0] == 0);

  // 100 uniform queries vs 2 spikes: agree with an exhaustive check.
  Rng rng(3);
  std::vector<Eigen::VectorXd> queries;
  for (int i = 0; i < 100; ++i) queries.push_back(vec1(rng.uniform(-2, 12)));
  RegionLabeling lab = classify_regions(queries, spikes, r, g);
  for (int i = 0; i < 100; ++i) {
    const double d0 = std::abs(queries[i][0] - 0.0);
    const double d1 = std::abs(queries[i][0] - 10.0);
    int expect = -1;
    if (d0 <= d1 && d0 <= r) expect = 0;
    else if (d1 < d0 && d1 <= r) expect = 1;
    CHECK(lab.label[i] == expect);
    // partition: exactly one region
    CHECK((lab.label[i] == -1 || lab.label[i] == 0 || lab.label[i] == 1));
  }
}

TEST_CASE("region statistics") {
  MetricTensor g = MetricTensor::from_matrix(Eigen::MatrixXd::Identity(1, 1));
  DiscreteMeasure ref;
  ref.atoms.push_back({0.7, vec1(0.0)});
  ref.atoms.push_back({-0.4, vec1(6.0)});

  // Estimate equals the reference: all statistics vanish for r < sep/2.
  RegionStatistics same = region_statistics(ref, ref, 1.0, g);
  CHECK(same.far_mass == 0.0);
  CHECK(same.near_errors[0] == 0.0);
  CHECK(same.near_errors[1] == 0.0);

  // One extra far atom of weight 0.3.
  DiscreteMeasure est = ref;
  est.atoms.push_back({0.3, vec1(3.0)});
  RegionStatistics plus = region_statistics(est, ref, 1.0, g);
  CHECK(plus.far_mass == doctest::Approx(0.3));
  CHECK(plus.near_errors[0] == 0.0);

  // Randomized 10-atom estimate against a direct labeled sum.
  Rng rng(19);
  DiscreteMeasure rnd;
  for (int i = 0; i < 10; ++i) rnd.atoms.push_back({rng.uniform(-1, 1), vec1(rng.uniform(-3, 9))});
  const double r = 0.8;
  RegionStatistics st = region_statistics(rnd, ref, r, g);
  double far = 0.0;
  double near0 = 0.0, near1 = 0.0;
  for (const auto& a : rnd.atoms) {
    const double d0 = std::abs(a.x[0] - 0.0);
    const double d1 = std::abs(a.x[0] - 6.0);
    if (d0 <= d1 && d0 <= r) near0 += a.w;
    else if (d1 < d0 && d1 <= r) near1 += a.w;
    else far += std::abs(a.w);
  }
  CHECK(st.far_mass == doctest::Approx(far).epsilon(1e-12));
  CHECK(st.near_errors[0] == doctest::Approx(std::abs(near0 - 0.7)).epsilon(1e-12));
  CHECK(st.near_errors[1] == doctest::Approx(std::abs(near1 + 0.4)).epsilon(1e-12));
}

TEST_CASE("discrete measure TV norm and JSON round trip") {
  DiscreteMeasure mu;
  mu.atoms.push_back({0.5, vec2(0.0, 1.0)});
  mu.atoms.push_back({-0.25, vec2(2.0, -1.0)});
  mu.atoms.push_back({0.0, vec2(3.0, 3.0)});  // zero-weight atom allowed
  CHECK(mu.tv_norm() == doctest::Approx(0.75));
  DiscreteMeasure rt = DiscreteMeasure::from_json_string(mu.to_json_string());
  REQUIRE(rt.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(rt.atoms[i].w == mu.atoms[i].w);
    CHECK(rt.atoms[i].x == mu.atoms[i].x);
  }
  DiscreteMeasure empty;
  CHECK(empty.tv_norm() == 0.0);
  CHECK(DiscreteMeasure::from_json_string(empty.to_json_string()).size() == 0);
}

TEST_CASE("metric tensor requires symmetric positive definite input") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(MetricTensor::from_matrix(bad), ValidationError);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(MetricTensor::from_matrix(asym), ValidationError);
  MetricTensor ok = MetricTensor::from_matrix(Eigen::MatrixXd::Identity(2, 2) * 4.0);
  CHECK(ok.g_sqrt(0, 0) == doctest::Approx(2.0));
  CHECK(ok.g_inv_sqrt(0, 0) == doctest::Approx(0.5));
}
