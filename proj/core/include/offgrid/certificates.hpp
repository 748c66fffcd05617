#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "offgrid/common.hpp"
#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"
#include "offgrid/sketching.hpp"

namespace offgrid {

// Interpolation system for dual certificates: s(d+1) constraints (values and
// gradients at the atom locations) against the pivot kernel's feature map.
struct UpsilonSystem {
  Eigen::MatrixXd points;         // s x d
  Eigen::MatrixXd upsilon;        // s(d+1) x s(d+1), symmetric
  Eigen::MatrixXd d_g;            // block-diagonal normalizer diag(I_s, G^{-1/2} per point)
  Eigen::MatrixXd upsilon_tilde;  // d_g * upsilon * d_g, unit diagonal
  double cond = 0.0;              // spectral condition number of upsilon_tilde
  double inv_norm = 0.0;          // ||upsilon_tilde^{-1}||_2

  // Solve upsilon x = rhs (symmetric-indefinite factorization plus two rounds
  // of iterative refinement). Deterministic, single-threaded.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  friend UpsilonSystem assemble_upsilon(const Eigen::MatrixXd&, const TIKernel&);
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

// Throws NumericalError when the normalized system is ill-posed
// (condition number above 1e12); points must be pairwise distinct.
UpsilonSystem assemble_upsilon(const Eigen::MatrixXd& points, const TIKernel& pivot);

// Dual certificate eta(x), either in the pivot RKHS (alpha coefficients
// against kernel values/gradients at the points) or in a sketched feature
// span (complex coefficients against the operator's features). The pivot
// pointer is non-owning: the kernel must outlive the certificate.
struct DualCertificate {
  enum class Kind { full, localizing };

  Kind kind = Kind::full;
  int localized_index = -1;  // meaningful for Kind::localizing
  Eigen::MatrixXd points;    // s x d
  Eigen::VectorXd signs;     // +-1 per atom

  // Pivot-RKHS path.
  const TIKernel* pivot = nullptr;
  Eigen::VectorXd alpha1;  // s
  Eigen::MatrixXd alpha2;  // s x d

  // Sketched path.
  bool is_sketched = false;
  std::shared_ptr<const SketchOperator> op;
  Eigen::VectorXcd coeffs;  // c, length m

  double rkhs_norm_bound = 0.0;   // pivot path: sqrt(u' Upsilon^{-1} u); sketched: ||c||
  double interp_residual = 0.0;   // max |eta(x_j) - target_j|
  double grad_residual = 0.0;     // max ||grad eta(x_j)||

  double eta(const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad_eta(const Eigen::VectorXd& x) const;
  std::string to_json_string() const;
};

DualCertificate build_certificate(const Eigen::MatrixXd& points, const Eigen::VectorXd& signs,
                                  const TIKernel& pivot);
// Target e_i * sign_i instead of the full sign vector; the single-entry
// right-hand side keeps ||D_g u|| = 1, hence rkhs_norm_bound <= sqrt(2) for
// well-separated configurations.
DualCertificate build_localizing_certificate(const Eigen::MatrixXd& points,
                                             const Eigen::VectorXd& signs, int index,
                                             const TIKernel& pivot);
// Minimum-norm complex coefficients interpolating the same constraints in the
// operator's feature span (stacked real/imaginary least squares). Throws
// NumericalError when the feature system is rank-deficient (increase m).
DualCertificate build_sketched_certificate(const Eigen::MatrixXd& points,
                                           const Eigen::VectorXd& signs,
                                           const SketchOperator& op);

// Non-degeneracy audit of a certificate over the near/far split at radius r0:
// far clause |eta| <= 1 - eps0, near clause |eta| <= 1 - eps2 d_g^2 (full) or
// |delta_ij - eta| <= eps2 d_g^2 on every near region (localizing). Failures
// are reported with witnesses, never thrown. Margins carry a 1e-9 slack for
// the interpolation tolerance of the build step.
struct CertificateAudit {
  double eps0 = 0.0, eps2 = 0.0, r0 = 0.0;
  double far_margin = 0.0;   // min over far points of 1 - eps0 - |eta|
  double near_margin = 0.0;  // min over near points of the near-clause margin
  Eigen::VectorXd far_witness, near_witness;
  int near_witness_region = -1;
  std::int64_t far_count = 0, near_count = 0;
  double tail_bound = 0.0;     // certified sup of |eta| beyond the scan radius
  bool tail_certified = false;  // only available for the sinc-4 pivot path
  bool far_pass = false, near_pass = false, pass = false;
  std::string note;
  std::string to_json_string() const;
};

CertificateAudit audit_certificate(const DualCertificate& cert, double r0, double eps0,
                                   double eps2, const MetricTensor& g,
                                   std::int64_t far_samples = 10000,
                                   std::int64_t near_grid_density = 200,
                                   double trunc_fr = 50.0, std::uint64_t seed = 20240901);

// Bregman divergence of the TV norm at mu0 in the direction of mu, linearized
// by the certificate: ||mu||_TV - ||mu0||_TV - integral of eta d(mu - mu0).
double bregman_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& mu0,
                          const DualCertificate& cert);

}  // namespace offgrid
