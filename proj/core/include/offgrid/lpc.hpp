#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"

namespace offgrid {

// Where an extremal value was found during a curvature scan.
struct CurvatureWitness {
  Eigen::VectorXd offset;     // s - t
  Eigen::VectorXd direction;  // tangent direction (order-2 scans)
  double value = 0.0;
  double fr_distance = 0.0;
};

// Grid certification of the two curvature constants: eps0 from the far
// region (kernel stays below 1 - 2*eps0 at distance >= r0), eps2 from the
// near region (metric-normalized negative Hessian stays above 4*eps2).
struct CurvatureAudit {
  double eps0_hat = 0.0;
  double eps2_hat = 0.0;
  CurvatureWitness far_witness;
  CurvatureWitness near_witness;
  long far_points = 0;
  long near_points = 0;
  double truncation_fr = 0.0;
  // Analytic bound on |kernel| beyond the truncation radius (quartic sinc
  // decay); NaN when no closed-form tail is available.
  double far_tail_bound = 0.0;
};

CurvatureAudit audit_curvature(const TIKernel& kernel, double r0, const ParameterBox& box,
                               long grid_density = 10000);

// Monte-Carlo plus hill-climb estimate of the slot-normalized derivative
// bounds B_ij = sup over offsets of the operator norm, all i+j <= 3.
struct DerivativeBoundAudit {
  struct Entry {
    int i = 0, j = 0;
    double estimate = 0.0;
    double bound = 0.0;  // claimed bound when known, NaN otherwise
    Eigen::VectorXd witness;
  };
  std::vector<Entry> entries;
  bool within_bounds = true;
};
DerivativeBoundAudit derivative_bound_audit(const TIKernel& kernel, long trials = 4000,
                                            std::uint64_t seed = 1);

// Interference sums at a concrete spike configuration: for each reference
// point and each derivative pair (i,j) in {0,1}x{0,2}, the bound
// 32 * sum_{l != ref} ||K^{(i,j)}(x_ref, x_l)|| must stay below
// min(eps0/b0, 2*eps2/b2).
struct InterferenceCheck {
  Eigen::MatrixXd lhs;  // rows: reference points; cols: (0,0),(0,2),(1,0),(1,2)
  double rhs = 0.0;
  bool pass = false;
  double worst = 0.0;
  int worst_point = -1;
  int worst_pair = -1;
};
InterferenceCheck interference_check(const std::vector<Eigen::VectorXd>& points,
                                     const TIKernel& kernel, double eps0, double eps2, double b0,
                                     double b2);

// Claimed constants for the sinc-4 pivot family plus any attached audit.
struct LpcReport {
  int d = 1;
  int s0 = 1;
  double r0 = 0.0;
  double eps0_lower = 0.0;
  double eps2_lower = 0.0;
  double delta0 = 0.0;
  struct BBound {
    int i = 0, j = 0;
    double bound = 0.0;
  };
  std::vector<BBound> b;  // all i+j <= 3

  bool has_audit = false;
  CurvatureAudit audit;
  bool failed = false;  // audited value fell below a claimed lower bound

  // B_i = 1 + B_{0i} + B_{1i} aggregates used by interference thresholds.
  double b_aggregate(int i) const;
  void attach_audit(const CurvatureAudit& a);
  std::string to_json_string() const;
};

double sinc4_b_bound(int d, int i, int j);  // (12 d)^{(i+j)/2}
LpcReport sinc4_lpc_params(int d, int s0);

}  // namespace offgrid
