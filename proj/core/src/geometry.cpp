#include "offgrid/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace offgrid {

using nlohmann::json;

ParameterBox::ParameterBox(Eigen::VectorXd l, Eigen::VectorXd h)
    : lo(std::move(l)), hi(std::move(h)) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw ValidationError("parameter box: lo/hi dimension mismatch or empty");
  for (int i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw ValidationError("parameter box: need lo < hi on every axis");
}

bool ParameterBox::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lo.size()) return false;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

Eigen::VectorXd ParameterBox::clamp(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = x;
  for (int i = 0; i < y.size(); ++i) y[i] = std::min(hi[i], std::max(lo[i], y[i]));
  return y;
}

std::string ParameterBox::to_json_string() const {
  json j;
  j["lo"] = std::vector<double>(lo.data(), lo.data() + lo.size());
  j["hi"] = std::vector<double>(hi.data(), hi.data() + hi.size());
  return j.dump();
}

ParameterBox ParameterBox::from_json_string(const std::string& s) {
  json j = json::parse(s);
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  return ParameterBox(Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size()),
                      Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size()));
}

double DiscreteMeasure::tv_norm() const {
  double s = 0.0;
  for (const auto& a : atoms) s += std::abs(a.w);
  return s;
}

std::string DiscreteMeasure::to_json_string() const {
  json arr = json::array();
  for (const auto& a : atoms) {
    json ja;
    ja["w"] = a.w;
    ja["x"] = std::vector<double>(a.x.data(), a.x.data() + a.x.size());
    arr.push_back(std::move(ja));
  }
  json j;
  j["atoms"] = std::move(arr);
  return j.dump();
}

DiscreteMeasure DiscreteMeasure::from_json_string(const std::string& s) {
  json j = json::parse(s);
  DiscreteMeasure mu;
  for (const auto& ja : j.at("atoms")) {
    Atom a;
    a.w = ja.at("w").get<double>();
    const auto x = ja.at("x").get<std::vector<double>>();
    if (x.empty()) throw ValidationError("measure atom with empty location");
    a.x = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    if (!mu.atoms.empty() && a.x.size() != mu.atoms.front().x.size())
      throw ValidationError("measure atoms with mixed dimensions");
    mu.atoms.push_back(std::move(a));
  }
  return mu;
}

void DiscreteMeasure::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << to_json_string() << "\n";
}

DiscreteMeasure DiscreteMeasure::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

MetricTensor MetricTensor::from_matrix(const Eigen::MatrixXd& g) {
  if (g.rows() != g.cols() || g.rows() == 0) throw ValidationError("metric: square matrix required");
  if (!g.isApprox(g.transpose(), 1e-12)) throw ValidationError("metric: symmetric matrix required");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) throw NumericalError("metric: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ValidationError("metric: positive definite matrix required");
  MetricTensor m;
  m.g = g;
  const Eigen::VectorXd sq = es.eigenvalues().cwiseSqrt();
  m.g_sqrt = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
  m.g_inv_sqrt = es.eigenvectors() * sq.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return m;
}

double MetricTensor::distance(const Eigen::VectorXd& s, const Eigen::VectorXd& t) const {
  const Eigen::VectorXd h = s - t;
  return std::sqrt(h.dot(g * h));
}

double fisher_rao_distance(const MetricTensor& g, const Eigen::VectorXd& s,
                           const Eigen::VectorXd& t) {
  if (s.size() != t.size() || s.size() != g.dim())
    throw ValidationError("fisher_rao_distance: dimension mismatch");
  return g.distance(s, t);
}

double min_separation(const DiscreteMeasure& mu, const MetricTensor& g) {
  if (mu.size() < 2)
    throw ValidationError("min_separation: needs at least two atoms");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mu.size(); ++i)
    for (int j = i + 1; j < mu.size(); ++j)
      best = std::min(best, g.distance(mu.atoms[i].x, mu.atoms[j].x));
  return best;
}

bool model_membership(const DiscreteMeasure& mu, int s0, double delta0, const MetricTensor& g) {
  if (s0 < 0) throw ValidationError("model_membership: s0 must be >= 0");
  if (mu.size() > s0) return false;
  if (mu.size() < 2) return true;  // separation clause vacuous
  return min_separation(mu, g) >= delta0;
}

RegionLabeling classify_regions(const std::vector<Eigen::VectorXd>& points,
                                const std::vector<Eigen::VectorXd>& centers, double r,
                                const MetricTensor& g) {
  if (r < 0) throw ValidationError("classify_regions: radius must be >= 0");
  RegionLabeling out;
  out.label.resize(points.size(), -1);
  for (std::size_t p = 0; p < points.size(); ++p) {
    int best = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = g.distance(points[p], centers[k]);
      if (d < bestd) {  // strict: equidistant centers keep the smaller index
        bestd = d;
        best = static_cast<int>(k);
      }
    }
    // near regions are closed balls; a boundary point (d == r) is assigned to
    // its nearest center, with equidistant ties already resolved to the
    // smallest index above
    out.label[p] = (best >= 0 && bestd <= r) ? best : -1;
  }
  return out;
}

RegionStatistics region_statistics(const DiscreteMeasure& estimate,
                                   const DiscreteMeasure& reference, double r,
                                   const MetricTensor& g) {
  std::vector<Eigen::VectorXd> pts, ctrs;
  pts.reserve(estimate.atoms.size());
  for (const auto& a : estimate.atoms) pts.push_back(a.x);
  ctrs.reserve(reference.atoms.size());
  for (const auto& a : reference.atoms) ctrs.push_back(a.x);
  const RegionLabeling lab = classify_regions(pts, ctrs, r, g);

  RegionStatistics st;
  st.near_signed_mass.assign(reference.atoms.size(), 0.0);
  st.near_errors.assign(reference.atoms.size(), 0.0);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (lab.label[p] < 0)
      st.far_mass += std::abs(estimate.atoms[p].w);
    else
      st.near_signed_mass[lab.label[p]] += estimate.atoms[p].w;
  }
  for (std::size_t k = 0; k < reference.atoms.size(); ++k)
    st.near_errors[k] = std::abs(st.near_signed_mass[k] - reference.atoms[k].w);
  return st;
}

}  // namespace offgrid
