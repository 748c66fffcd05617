#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "offgrid/common.hpp"
#include "offgrid/geometry.hpp"

namespace offgrid {

// sinc(z) = sin(z)/z and its first four derivatives. Series branch near the
// origin (used automatically below |z| = 0.5, which covers the mandated
// |z| < 1e-4 switch with a wide margin against cancellation).
double sinc_deriv(double z, int order);

// q(z) = sinc(z)^4 derivatives, order 0..4.
double sinc4_axis_deriv(double z, int order);

// Mixture template: the smoothing distribution whose characteristic function
// multiplies the low-pass model spectrum. F[phi](0)=1 and |F[phi]|<=1 hold by
// construction for the built-in kinds and are validated for custom ones.
struct TemplateDistribution {
  enum class Kind { gaussian, cauchy, point_mass, custom };

  Kind kind = Kind::point_mass;
  int d = 1;
  Eigen::VectorXd scale;  // per-axis sigma (gaussian) or alpha (cauchy)
  std::function<std::complex<double>(const Eigen::VectorXd&)> custom_cf;

  static TemplateDistribution gaussian(const Eigen::VectorXd& sigma);
  static TemplateDistribution cauchy(const Eigen::VectorXd& alpha);
  static TemplateDistribution point_mass(int dim);
  static TemplateDistribution custom(int dim,
                                     std::function<std::complex<double>(const Eigen::VectorXd&)> cf);

  std::complex<double> cf(const Eigen::VectorXd& omega) const;
  bool separable() const { return kind != Kind::custom; }
  double cf_axis(int axis, double w) const;  // real for the separable kinds
  Eigen::VectorXd sample_noise(Rng& rng) const;

  std::string to_json_string() const;  // custom kind not serializable
  static TemplateDistribution from_json_string(const std::string& s);
};

// Translation-invariant kernel K(s,t) = rho(s-t). rho need not be normalized
// to rho(0)=1 (model kernels built from templates are not); normalization()
// reports rho(0) and `normalized()` whether it equals one.
class TIKernel {
 public:
  virtual ~TIKernel() = default;

  virtual int dim() const = 0;
  virtual double rho(const Eigen::VectorXd& h) const = 0;
  // Partial derivative of rho for a multi-index alpha with |alpha| <= 4.
  virtual double rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const = 0;
  // Spectral density nu = F[rho]/(2pi)^d.
  virtual double spectral_density(const Eigen::VectorXd& omega) const = 0;
  // True if nu is supported on the cube [-hw, hw]^d; sets hw.
  virtual bool spectral_support_cube(double& half_width) const = 0;
  virtual bool normalized() const { return true; }
  virtual double normalization() const { return 1.0; }
  virtual std::string describe() const = 0;

  double eval(const Eigen::VectorXd& s, const Eigen::VectorXd& t) const { return rho(s - t); }

  // Fisher-Rao metric matrix g = -Hess(rho/rho(0))(0), analytic per kernel.
  virtual Eigen::MatrixXd metric_matrix() const;
  MetricTensor metric() const { return MetricTensor::from_matrix(metric_matrix()); }
};

// Pivot kernel: rho(h) = prod_j sinc(h_j/(4 tau))^4.
class Sinc4Kernel : public TIKernel {
 public:
  Sinc4Kernel(int d, double tau);
  int dim() const override { return d_; }
  double tau() const { return tau_; }
  double rho(const Eigen::VectorXd& h) const override;
  double rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const override;
  double spectral_density(const Eigen::VectorXd& omega) const override;
  bool spectral_support_cube(double& hw) const override {
    hw = 1.0 / tau_;
    return true;
  }
  Eigen::MatrixXd metric_matrix() const override;
  std::string describe() const override;

 private:
  int d_;
  double tau_;
};

// rho(h) = exp(-1/2 h' Omega h), Omega SPD.
class GaussianKernel : public TIKernel {
 public:
  explicit GaussianKernel(const Eigen::MatrixXd& omega);
  int dim() const override { return static_cast<int>(omega_.rows()); }
  double rho(const Eigen::VectorXd& h) const override;
  double rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const override;
  double spectral_density(const Eigen::VectorXd& omega) const override;
  bool spectral_support_cube(double&) const override { return false; }
  Eigen::MatrixXd metric_matrix() const override { return omega_; }
  std::string describe() const override;

 private:
  Eigen::MatrixXd omega_, omega_inv_;
  double det_;
};

// Model kernel induced by a template: spectrum 2^{-d} |F[phi]|^2 on the cube
// [-1/tau, 1/tau]^d (the low-pass window times the squared template cf).
// Axis-separable templates use adaptive panel quadrature per axis; custom
// templates fall back to a tensor quadrature grid.
class TemplateModelKernel : public TIKernel {
 public:
  TemplateModelKernel(int d, double tau, TemplateDistribution tpl);
  int dim() const override { return d_; }
  double tau() const { return tau_; }
  const TemplateDistribution& tpl() const { return tpl_; }
  double rho(const Eigen::VectorXd& h) const override;
  double rho_partial(const Eigen::VectorXd& h, const Eigen::VectorXi& alpha) const override;
  double spectral_density(const Eigen::VectorXd& omega) const override;
  bool spectral_support_cube(double& hw) const override {
    hw = 1.0 / tau_;
    return true;
  }
  bool normalized() const override { return false; }
  double normalization() const override { return rho0_; }
  Eigen::MatrixXd metric_matrix() const override;
  std::string describe() const override;

 private:
  double axis_integral(int axis, double h, int order) const;
  int d_;
  double tau_;
  TemplateDistribution tpl_;
  double rho0_ = 1.0;
};

std::unique_ptr<TIKernel> model_kernel_from_template(int d, double tau,
                                                     const TemplateDistribution& tpl);

// Kernel config: {"kind":"sinc4","dim":..,"tau":..} |
//                {"kind":"gaussian","omega":[[..]]} |
//                {"kind":"template","dim":..,"tau":..,"template":{..}}
std::unique_ptr<TIKernel> kernel_from_json_string(const std::string& s);
std::string kernel_to_json_string(const TIKernel& k);

// Tensor Gauss-Legendre quadrature on [-1/tau, 1/tau]^d. Nodes are strictly
// interior. Default nodes per axis: 64 for d<=2, 32 for d=3.
struct SpectralGrid {
  Eigen::MatrixXd nodes;    // (m^d) x d
  Eigen::VectorXd weights;  // product weights
  static SpectralGrid tensor_gauss_legendre(int d, double tau, int per_axis = 0);
};

// 1-D Gauss-Legendre rule on [-1,1].
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// Covariant kernel derivative K^{(i,j)}(s,t) = (-1)^j grad^{i+j} rho(s-t), i
// differentiations in s and j in t, contracted against tangent vectors U
// (|U| = i) and V (|V| = j). Supports i+j <= 4.
double covariant_derivative(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t,
                            int i, int j, const std::vector<Eigen::VectorXd>& U,
                            const std::vector<Eigen::VectorXd>& V);

// Full derivative tensor for i+j <= 3 (used by the operator-norm machinery).
struct DerivTensor {
  int order = 0;
  double scalar = 0.0;
  Eigen::VectorXd vec;
  Eigen::MatrixXd mat;
  std::vector<Eigen::MatrixXd> t3;  // t3[a](b,c)
};
DerivTensor derivative_tensor(const TIKernel& k, int i, int j, const Eigen::VectorXd& s,
                              const Eigen::VectorXd& t);

// Operator norm of the covariant derivative with every slot precomposed with
// g^{-1/2}: exact (spectral) up to order 2, symmetric power iteration at
// order 3.
double operator_norm(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t, int i,
                     int j);
double operator_norm(const TIKernel& k, const Eigen::VectorXd& s, const Eigen::VectorXd& t, int i,
                     int j, const Eigen::MatrixXd& g_inv_sqrt);

}  // namespace offgrid
