#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "offgrid/kernels.hpp"

namespace offgrid {

/// The model spectrum vanishes somewhere the pivot spectrum does not: the
// pivot RKHS cannot embed, and the offending frequency is reported.
class EmbeddingViolation : public ValidationError {
 public:
  EmbeddingViolation(const std::string& msg, Eigen::VectorXd omega)
      : ValidationError(msg), omega_(std::move(omega)) {}
  const Eigen::VectorXd& frequency() const { return omega_; }

 private:
  Eigen::VectorXd omega_;
};

// sup over the pivot spectral support of sqrt(pivot density / model density),
// with the 0/0 -> 0 convention below the pivot floor.
struct SwitchConstant {
  double value = 0.0;
  Eigen::VectorXd attained_at;
  std::string pivot_desc, model_desc;
  long grid_per_axis = 0;
  double pivot_floor = 0.0;
  std::string to_json_string() const;
};

// Grid max plus golden-section refinement around the argmax. per_axis <= 0
// picks the default resolution (4096 for d=1, 256 for d=2, 64 for d=3).
SwitchConstant switch_constant(const TIKernel& pivot, const TIKernel& model, long per_axis = 0);

/// Scaling probe for supersmooth templates F[phi] ~ exp(-alpha ||w||_p^beta):
// computes the switch constant against the sinc-4 pivot across a tau ladder
// and fits log C - (d/2) log tau against (d^{1/p}/tau)^beta.
struct ScalingProbe {
  std::vector<double> taus;
  std::vector<double> c_values;
  double alpha_hat = 0.0;
  double intercept = 0.0;
  double residual = 0.0;   // sum of squared fit residuals
  double r_squared = 0.0;
  bool warning = false;
  std::string warning_message;
  std::string to_json_string() const;
};

ScalingProbe supersmooth_scaling_probe(const TemplateDistribution& tpl, double p, double beta,
                                       const std::vector<double>& taus, long per_axis = 0);

// Same probe against caller-supplied model kernels (one per tau).
ScalingProbe supersmooth_scaling_probe(
    const std::function<std::unique_ptr<TIKernel>(double)>& model_factory, int d, double p,
    double beta, const std::vector<double>& taus, long per_axis = 0);

}  // namespace offgrid
