#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "offgrid/common.hpp"
#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"

namespace offgrid {

// 128-bit fixed-point accumulator for phase sums. Each sample contributes
// cos/sin rounded to 62 fractional bits; integer addition is associative, so
// chunked parallel reductions and the sketch merge law are exact, not just
// close.
using PhaseAccum = __int128;

// Spectral window of the low-pass component: 2^{-d} on [-1/tau,1/tau]^d, else 0.
double spectral_window(const Eigen::VectorXd& omega, double tau);

// Frequency-sampling law for the random features, supported on (a superset of)
// the spectral cube.
struct SketchingLaw {
  std::string name;  // "ih4" | "uniform"
  int dim = 0;
  double tau = 0.0;
  std::function<double(const Eigen::VectorXd&)> density;  // Lambda, a pdf
  std::function<Eigen::VectorXd(Rng&)> sample;            // one i.i.d. draw
  // sup over the cube of window/Lambda; +inf when Lambda vanishes on the
  // boundary (the default law), which noise-level reports must flag.
  double sup_ratio = 0.0;
  // sup over the cube of the sinc-4 spectral density over Lambda.
  double c_lambda = 0.0;

  // Default law: the sinc-4 spectral density itself, sampled per axis as a sum
  // of four uniforms on [-1/(4 tau), 1/(4 tau)]. c_lambda = 1 by construction.
  static SketchingLaw ih4(int d, double tau);
  // Uniform on the cube: constant weights, sup_ratio = tau^{-d}, c_lambda = (8/3)^d.
  static SketchingLaw uniform_cube(int d, double tau);
  static SketchingLaw by_name(const std::string& name, int d, double tau);
};

// Frozen random-feature operator: m frequencies omega_i with importance
// weights W(omega_i) = sqrt(window/Lambda) and the template characteristic
// function at each node. Immutable after construction.
class SketchOperator {
 public:
  static SketchOperator draw(const SketchingLaw& law, const TemplateDistribution& tpl, int m,
                             std::uint64_t seed);
  // Reassemble from stored arrays (deserialization); performs shape checks only.
  static SketchOperator from_parts(std::string law_name, double tau, std::uint64_t seed,
                                   Eigen::MatrixXd omegas, Eigen::VectorXd weights,
                                   Eigen::VectorXcd template_cf);

  int m() const { return static_cast<int>(omega_.rows()); }
  int dim() const { return static_cast<int>(omega_.cols()); }
  double tau() const { return tau_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& law_name() const { return law_name_; }
  const Eigen::MatrixXd& frequencies() const { return omega_; }  // m x d
  const Eigen::VectorXd& weights() const { return w_; }
  const Eigen::VectorXcd& template_cf() const { return cf_; }
  // Scale of sketch entry i: W_i / sqrt(m). Sketch moduli never exceed it.
  double entry_scale(int i) const { return w_[i] / sqrt_m_; }

  // Feature values phi_i(t) = W_i * F[phi](omega_i) * e^{-i omega_i. t}, all i.
  Eigen::VectorXcd feature_column(const Eigen::VectorXd& t) const;
  // Entrywise partial derivative d^alpha_t of the features: multiplies each
  // feature by prod_j (-i omega_ij)^alpha_j.
  Eigen::VectorXcd feature_column(const Eigen::VectorXd& t, const Eigen::VectorXi& alpha) const;

 private:
  SketchOperator() = default;
  std::string law_name_;
  double tau_ = 0.0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd omega_;
  Eigen::VectorXd w_;
  Eigen::VectorXcd cf_;
  double sqrt_m_ = 1.0;
};

// Dataset summary: entry i = (1/sqrt(m)) W_i (1/n) sum_j e^{-i omega_i . x_j}.
// No template factor: the data are already template-convolved draws.
struct SketchVector {
  Eigen::VectorXcd z;
  std::int64_t n = 0;
  std::uint64_t op_seed = 0;
  std::string dataset_sha256;
  // Fixed-point phase accumulators, kept when the sketch was computed (or
  // merged) in-process; empty after deserialization. With them present the
  // merge law is bit-exact.
  std::vector<PhaseAccum> acc_re, acc_im;
  bool exact() const { return !acc_re.empty(); }
};

// Single pass over the samples (rows), parallel over sample chunks with a
// fixed-order exact reduction. digest overrides the computed dataset hash
// (callers sketching a file pass the file hash).
SketchVector sketch_dataset(const Eigen::MatrixXd& samples, const SketchOperator& op,
                            const std::string& digest = "");

// Sample-count-weighted average: (|A| z_A + |B| z_B)/(|A|+|B|). Exact (bitwise
// equal to sketching the concatenated dataset) when both operands carry their
// accumulators.
SketchVector merge_sketches(const SketchOperator& op, const SketchVector& a,
                            const SketchVector& b);

// Sketched forward operator on a discrete measure:
// entry i = (1/sqrt(m)) W_i F[phi](omega_i) sum_k a_k e^{-i omega_i . x_k}.
Eigen::VectorXcd forward(const SketchOperator& op, const DiscreteMeasure& mu);

// Sketched model kernel (1/m) sum_i phi_i(s) conj(phi_i(t)); the imaginary
// part is sampling noise, the real part is the usable Gram value.
std::complex<double> sketched_kernel_complex(const SketchOperator& op, const Eigen::VectorXd& s,
                                             const Eigen::VectorXd& t);
double sketched_kernel(const SketchOperator& op, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& t);

// Feature-count prescription, simple shape:
//   m0 = ceil(c_sketch * max(d, log s0) * s0 * log(max(1, box_diameter) s0 / alpha)).
std::int64_t sketch_size(int s0, int d, double box_diameter, double alpha,
                         double c_sketch = 1.0);

// Feature-count prescription with the explicit sinc-4 constants. c1 and c2
// grow like d^{15/2} c_lambda and d^6 c_lambda; n_grid is the covering number
// the tail term sees.
struct SketchSizeBreakdown {
  double n_grid = 0.0;
  double c1 = 0.0, c2 = 0.0;
  double c_lambda = 1.0, c_sketch = 1.0;
  std::int64_t m0 = 0;
  std::string to_json_string() const;
};
SketchSizeBreakdown sketch_size_sinc4(int s0, int d, double box_diameter, double alpha,
                                      double c_lambda, double c_sketch = 1.0);

// High-probability bound on the sketched noise norm ||z - forward(mu0)||:
//   value = c_alpha_m / sqrt(n),
//   c_alpha_m = 2 sqrt([tau^{-d} + sup_ratio log(2/alpha)/(2 sqrt(m))] [1 + c1 log(2 c2/alpha)]).
// The universal constants c1, c2 are not pinned by theory; they default to 1
// and every report flags that. Two published m->infinity limits disagree by a
// factor 2^d; both are reported, neither is reconciled here.
struct NoiseLevelBound {
  double c_alpha_m = 0.0;
  double value = 0.0;
  double limit_plain = 0.0;   // 2 sqrt(1 + c1 log(2 c2/alpha)) tau^{-d/2}
  double limit_remark = 0.0;  // 2 sqrt(1 + c1 log(4 c2/alpha)) (4/tau)^{d/2}
  double c1 = 1.0, c2 = 1.0;
  std::string note;
  std::string to_json_string() const;
};
NoiseLevelBound noise_level_bound(double alpha, std::int64_t m, std::int64_t n, double tau,
                                  const SketchingLaw& law, double c1 = 1.0, double c2 = 1.0);

// Almost-sure envelope levels for the law-normalized feature derivatives:
// L_r = sqrt(c_lambda) (12 d)^{r/2}, r = 0..3.
std::array<double, 4> tail_bound_levels(int d, double c_lambda);

// Sketch file: one JSON object holding the operator and the data sketch.
std::string sketch_file_json(const SketchOperator& op, const SketchVector& sk);
std::pair<SketchOperator, SketchVector> sketch_file_from_json(const std::string& text);
void save_sketch_file(const std::string& path, const SketchOperator& op, const SketchVector& sk);
std::pair<SketchOperator, SketchVector> load_sketch_file(const std::string& path);

// Headerless CSV, one row per sample, d columns.
Eigen::MatrixXd load_samples_csv(const std::string& path, int expected_dim = -1);
void save_samples_csv(const std::string& path, const Eigen::MatrixXd& samples);

}  // namespace offgrid
