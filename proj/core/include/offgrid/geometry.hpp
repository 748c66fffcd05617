#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "offgrid/common.hpp"

namespace offgrid {

// Axis-aligned parameter domain. lo < hi componentwise.
struct ParameterBox {
  Eigen::VectorXd lo, hi;

  ParameterBox() = default;
  ParameterBox(Eigen::VectorXd l, Eigen::VectorXd h);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x) const;  // closed box
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  double diameter() const { return (hi - lo).norm(); }

  std::string to_json_string() const;
  static ParameterBox from_json_string(const std::string& s);
};

// Weighted atoms; weights are signed and zero weights are legal atoms.
struct DiscreteMeasure {
  struct Atom {
    double w = 0.0;
    Eigen::VectorXd x;
  };
  std::vector<Atom> atoms;

  int size() const { return static_cast<int>(atoms.size()); }
  int dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms.front().x.size()); }
  double tv_norm() const;

  std::string to_json_string() const;
  static DiscreteMeasure from_json_string(const std::string& s);
  void save(const std::string& path) const;
  static DiscreteMeasure load(const std::string& path);
};

// Constant Riemannian metric g (SPD). Caches g^{1/2} and g^{-1/2} once.
struct MetricTensor {
  Eigen::MatrixXd g, g_sqrt, g_inv_sqrt;

  static MetricTensor from_matrix(const Eigen::MatrixXd& g);
  int dim() const { return static_cast<int>(g.rows()); }
  double distance(const Eigen::VectorXd& s, const Eigen::VectorXd& t) const;
};

double fisher_rao_distance(const MetricTensor& g, const Eigen::VectorXd& s,
                           const Eigen::VectorXd& t);

// Smallest pairwise distance between atom locations. Needs >= 2 atoms.
double min_separation(const DiscreteMeasure& mu, const MetricTensor& g);

// The measure belongs to the (s0, delta0) model class: at most s0 atoms and
// pairwise separation >= delta0. The separation clause is vacuous with
// fewer than two atoms.
bool model_membership(const DiscreteMeasure& mu, int s0, double delta0, const MetricTensor& g);

// label[i] = index of the near region containing point i (distance <= r,
// nearest center wins, ties to the smallest index), or -1 for the far region.
struct RegionLabeling {
  std::vector<int> label;
};
RegionLabeling classify_regions(const std::vector<Eigen::VectorXd>& points,
                                const std::vector<Eigen::VectorXd>& centers, double r,
                                const MetricTensor& g);

// Mass bookkeeping of an estimate against reference atoms: total |weight|
// landing in the far region, and per-center |sum of near weights - ref weight|.
struct RegionStatistics {
  double far_mass = 0.0;
  std::vector<double> near_errors;       // |mu(N_k) - a0_k|
  std::vector<double> near_signed_mass;  // mu(N_k)
};
RegionStatistics region_statistics(const DiscreteMeasure& estimate,
                                   const DiscreteMeasure& reference, double r,
                                   const MetricTensor& g);

}  // namespace offgrid
