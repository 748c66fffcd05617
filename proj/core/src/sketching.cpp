#include "offgrid/sketching.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace offgrid {

namespace {

using nlohmann::json;

// Canonical digest of an in-memory sample matrix: shape header + row-major bytes.
std::string matrix_digest(const Eigen::MatrixXd& samples) {
  std::string buf = "samples:" + std::to_string(samples.rows()) + "x" +
                    std::to_string(samples.cols()) + ":";
  buf.reserve(buf.size() + static_cast<std::size_t>(samples.size()) * sizeof(double));
  for (Eigen::Index r = 0; r < samples.rows(); ++r)
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      const double v = samples(r, c);
      buf.append(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  return sha256_hex(buf.data(), buf.size());
}

json complex_list(const Eigen::VectorXcd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

Eigen::VectorXcd complex_list_parse(const json& arr, const char* what) {
  if (!arr.is_array()) throw ValidationError(std::string(what) + ": expected an array");
  Eigen::VectorXcd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& e = arr[i];
    if (!e.is_array() || e.size() != 2)
      throw ValidationError(std::string(what) + ": entries must be [re, im] pairs");
    v[static_cast<Eigen::Index>(i)] =
        std::complex<double>(e[0].get<double>(), e[1].get<double>());
  }
  return v;
}

}  // namespace

double spectral_window(const Eigen::VectorXd& omega, double tau) {
  const double band = 1.0 / tau;
  for (Eigen::Index j = 0; j < omega.size(); ++j)
    if (std::abs(omega[j]) > band) return 0.0;
  return std::pow(0.5, static_cast<int>(omega.size()));
}

SketchingLaw SketchingLaw::ih4(int d, double tau) {
  if (d < 1 || tau <= 0.0) throw ValidationError("sketching law: need d >= 1 and tau > 0");
  SketchingLaw law;
  law.name = "ih4";
  law.dim = d;
  law.tau = tau;
  auto kernel = std::make_shared<Sinc4Kernel>(d, tau);
  law.density = [kernel](const Eigen::VectorXd& w) { return kernel->spectral_density(w); };
  law.sample = [d, tau](Rng& rng) {
    Eigen::VectorXd w(d);
    const double h = 1.0 / (4.0 * tau);
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += rng.uniform(-h, h);
      w[j] = s;
    }
    return w;
  };
  // The density vanishes at the cube boundary while the window does not.
  law.sup_ratio = std::numeric_limits<double>::infinity();
  law.c_lambda = 1.0;
  return law;
}

SketchingLaw SketchingLaw::uniform_cube(int d, double tau) {
  if (d < 1 || tau <= 0.0) throw ValidationError("sketching law: need d >= 1 and tau > 0");
  SketchingLaw law;
  law.name = "uniform";
  law.dim = d;
  law.tau = tau;
  const double level = std::pow(tau / 2.0, d);
  law.density = [d, tau, level](const Eigen::VectorXd& w) {
    for (int j = 0; j < d; ++j)
      if (std::abs(w[j]) > 1.0 / tau) return 0.0;
    return level;
  };
  law.sample = [d, tau](Rng& rng) {
    Eigen::VectorXd w(d);
    for (int j = 0; j < d; ++j) w[j] = rng.uniform(-1.0 / tau, 1.0 / tau);
    return w;
  };
  law.sup_ratio = std::pow(tau, -d);       // 2^{-d} / (tau/2)^d
  law.c_lambda = std::pow(8.0 / 3.0, d);   // (2/3)^d (2 tau)^d / (tau/2)^d
  return law;
}

SketchingLaw SketchingLaw::by_name(const std::string& name, int d, double tau) {
  if (name == "ih4") return ih4(d, tau);
  if (name == "uniform") return uniform_cube(d, tau);
  throw ValidationError("unknown sketching law '" + name + "' (have: ih4, uniform)");
}

SketchOperator SketchOperator::draw(const SketchingLaw& law, const TemplateDistribution& tpl,
                                    int m, std::uint64_t seed) {
  if (m < 1) throw ValidationError("sketch operator: need m >= 1");
  if (tpl.d != law.dim)
    throw ValidationError("sketch operator: template dimension != law dimension");
  SketchOperator op;
  op.law_name_ = law.name;
  op.tau_ = law.tau;
  op.seed_ = seed;
  op.omega_.resize(m, law.dim);
  op.w_.resize(m);
  op.cf_.resize(m);
  op.sqrt_m_ = std::sqrt(static_cast<double>(m));
  Rng rng(seed);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd w = law.sample(rng);
    const double lam = law.density(w);
    if (!(lam > 0.0))
      throw ValidationError("sketching law density vanished at a drawn frequency "
                            "(law violates positivity on its support)");
    op.omega_.row(i) = w.transpose();
    op.w_[i] = std::sqrt(spectral_window(w, law.tau) / lam);
    op.cf_[i] = tpl.cf(w);
  }
  return op;
}

SketchOperator SketchOperator::from_parts(std::string law_name, double tau, std::uint64_t seed,
                                          Eigen::MatrixXd omegas, Eigen::VectorXd weights,
                                          Eigen::VectorXcd template_cf) {
  if (omegas.rows() < 1) throw ValidationError("sketch operator: need m >= 1");
  if (weights.size() != omegas.rows() || template_cf.size() != omegas.rows())
    throw ValidationError("sketch operator: weights/template_cf length != frequency count");
  if (tau <= 0.0) throw ValidationError("sketch operator: tau must be positive");
  SketchOperator op;
  op.law_name_ = std::move(law_name);
  op.tau_ = tau;
  op.seed_ = seed;
  op.omega_ = std::move(omegas);
  op.w_ = std::move(weights);
  op.cf_ = std::move(template_cf);
  op.sqrt_m_ = std::sqrt(static_cast<double>(op.omega_.rows()));
  return op;
}

Eigen::VectorXcd SketchOperator::feature_column(const Eigen::VectorXd& t) const {
  if (t.size() != omega_.cols())
    throw ValidationError("feature column: point dimension != operator dimension");
  const Eigen::VectorXd theta = omega_ * t;
  Eigen::VectorXcd out(omega_.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = w_[i] * cf_[i] * std::complex<double>(std::cos(theta[i]), -std::sin(theta[i]));
  return out;
}

Eigen::VectorXcd SketchOperator::feature_column(const Eigen::VectorXd& t,
                                                const Eigen::VectorXi& alpha) const {
  if (alpha.size() != omega_.cols())
    throw ValidationError("feature column: derivative order dimension != operator dimension");
  Eigen::VectorXcd out = feature_column(t);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    std::complex<double> fac(1.0, 0.0);
    for (Eigen::Index j = 0; j < alpha.size(); ++j)
      for (int k = 0; k < alpha[j]; ++k) fac *= std::complex<double>(0.0, -omega_(i, j));
    out[i] *= fac;
  }
  return out;
}

SketchVector sketch_dataset(const Eigen::MatrixXd& samples, const SketchOperator& op,
                            const std::string& digest) {
  const std::int64_t n = samples.rows();
  if (n <= 0) throw ValidationError("sketch_dataset: sample matrix is empty");
  if (samples.cols() != op.dim())
    throw ValidationError("sketch_dataset: sample dimension " + std::to_string(samples.cols()) +
                          " != operator dimension " + std::to_string(op.dim()));
  const int m = op.m();
  const Eigen::MatrixXd& omega = op.frequencies();

  // Same chunking rule as the scheduler so the partials line up with it.
  const int chunks = static_cast<int>(std::min<std::int64_t>(kParallelChunks, n));
  std::vector<std::vector<PhaseAccum>> part_re(chunks), part_im(chunks);
  parallel_for_chunks(n, [&](int c, std::int64_t lo, std::int64_t hi) {
    auto& re = part_re[c];
    auto& im = part_im[c];
    re.assign(m, 0);
    im.assign(m, 0);
    Eigen::VectorXd theta(m);
    for (std::int64_t j = lo; j < hi; ++j) {
      theta.noalias() = omega * samples.row(j).transpose();
      for (int i = 0; i < m; ++i) {
        re[i] += static_cast<PhaseAccum>(std::llrint(std::cos(theta[i]) * 0x1p62));
        im[i] += static_cast<PhaseAccum>(std::llrint(-std::sin(theta[i]) * 0x1p62));
      }
    }
  });

  SketchVector sk;
  sk.n = n;
  sk.op_seed = op.seed();
  sk.acc_re.assign(m, 0);
  sk.acc_im.assign(m, 0);
  for (int c = 0; c < chunks; ++c)
    for (int i = 0; i < m; ++i) {
      sk.acc_re[i] += part_re[c][i];
      sk.acc_im[i] += part_im[c][i];
    }
  sk.z.resize(m);
  const double den = static_cast<double>(n) * 0x1p62;
  for (int i = 0; i < m; ++i) {
    const std::complex<double> mean(static_cast<double>(sk.acc_re[i]) / den,
                                    static_cast<double>(sk.acc_im[i]) / den);
    sk.z[i] = op.entry_scale(i) * mean;
  }
  sk.dataset_sha256 = digest.empty() ? matrix_digest(samples) : digest;
  return sk;
}

SketchVector merge_sketches(const SketchOperator& op, const SketchVector& a,
                            const SketchVector& b) {
  if (a.z.size() != op.m() || b.z.size() != op.m())
    throw ValidationError("merge_sketches: sketch length != operator feature count");
  if (a.n <= 0 || b.n <= 0) throw ValidationError("merge_sketches: sample counts must be positive");
  const int m = op.m();
  SketchVector out;
  out.n = a.n + b.n;
  out.op_seed = op.seed();
  const std::string tag = "merge:" + a.dataset_sha256 + "+" + b.dataset_sha256;
  out.dataset_sha256 = sha256_hex(tag.data(), tag.size());
  out.z.resize(m);
  if (a.exact() && b.exact()) {
    out.acc_re.resize(m);
    out.acc_im.resize(m);
    const double den = static_cast<double>(out.n) * 0x1p62;
    for (int i = 0; i < m; ++i) {
      out.acc_re[i] = a.acc_re[i] + b.acc_re[i];
      out.acc_im[i] = a.acc_im[i] + b.acc_im[i];
      const std::complex<double> mean(static_cast<double>(out.acc_re[i]) / den,
                                      static_cast<double>(out.acc_im[i]) / den);
      out.z[i] = op.entry_scale(i) * mean;
    }
  } else {
    // Deserialized operands: fall back to the weighted average on the entries.
    const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
    out.z = (na * a.z + nb * b.z) / (na + nb);
  }
  return out;
}

Eigen::VectorXcd forward(const SketchOperator& op, const DiscreteMeasure& mu) {
  const int m = op.m();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(m);
  if (mu.size() == 0) return out;
  if (mu.dim() != op.dim())
    throw ValidationError("forward: measure dimension != operator dimension");
  const Eigen::MatrixXd& omega = op.frequencies();
  parallel_for_chunks(m, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      std::complex<double> s(0.0, 0.0);
      for (const auto& atom : mu.atoms) {
        const double theta = omega.row(i).dot(atom.x);
        s += atom.w * std::complex<double>(std::cos(theta), -std::sin(theta));
      }
      out[i] = op.entry_scale(static_cast<int>(i)) * op.template_cf()[i] * s;
    }
  });
  return out;
}

std::complex<double> sketched_kernel_complex(const SketchOperator& op, const Eigen::VectorXd& s,
                                             const Eigen::VectorXd& t) {
  if (s.size() != op.dim() || t.size() != op.dim())
    throw ValidationError("sketched kernel: point dimension != operator dimension");
  const Eigen::MatrixXd& omega = op.frequencies();
  const int m = op.m();
  std::complex<double> acc(0.0, 0.0);
  for (int i = 0; i < m; ++i) {
    const double mag = op.weights()[i] * op.weights()[i] * std::norm(op.template_cf()[i]);
    const double theta = omega.row(i).dot(s - t);
    acc += mag * std::complex<double>(std::cos(theta), -std::sin(theta));
  }
  return acc / static_cast<double>(m);
}

double sketched_kernel(const SketchOperator& op, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& t) {
  return sketched_kernel_complex(op, s, t).real();
}

std::int64_t sketch_size(int s0, int d, double box_diameter, double alpha, double c_sketch) {
  if (s0 < 1 || d < 1) throw ValidationError("sketch_size: need s0 >= 1 and d >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("sketch_size: alpha must be in (0,1)");
  const double lead = std::max(static_cast<double>(d), std::log(static_cast<double>(s0)));
  const double rhs =
      c_sketch * lead * s0 * std::log(std::max(1.0, box_diameter) * s0 / alpha);
  return static_cast<std::int64_t>(std::ceil(rhs));
}

std::string SketchSizeBreakdown::to_json_string() const {
  json j;
  j["n_grid"] = n_grid;
  j["c1"] = c1;
  j["c2"] = c2;
  j["c_lambda"] = c_lambda;
  j["c_sketch"] = c_sketch;
  j["m0"] = m0;
  return j.dump();
}

SketchSizeBreakdown sketch_size_sinc4(int s0, int d, double box_diameter, double alpha,
                                      double c_lambda, double c_sketch) {
  if (s0 < 1 || d < 1) throw ValidationError("sketch_size_sinc4: need s0 >= 1 and d >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("sketch_size_sinc4: alpha must be in (0,1)");
  if (!(c_lambda >= 1.0) || !std::isfinite(c_lambda))
    throw ValidationError("sketch_size_sinc4: c_lambda must be finite and >= 1");
  const double dd = d;
  const double s12 = std::sqrt(12.0);
  const double rcl = std::sqrt(c_lambda);
  const double q = 128.0 / 23.0;  // the curvature-to-flatness trade constant
  SketchSizeBreakdown out;
  out.c_lambda = c_lambda;
  out.c_sketch = c_sketch;
  out.n_grid = box_diameter * 32.0 * s12 * rcl * std::pow(dd, 3.5) +
               q * (12.0 * s12 * rcl * std::sqrt(dd) + rcl * 12.0 * dd);
  out.c1 = (1.0 + 12.0 * dd) * c_lambda *
           (1024.0 * std::pow(dd, 6) * (2.0 + std::sqrt(12.0 * dd)) +
            q * q * (1.0 + std::sqrt(12.0 * dd) + 12.0 * dd));
  out.c2 = c_lambda * (1024.0 * std::pow(dd, 6) + 32.0 * std::pow(dd, 3) * std::sqrt(1.0 + 12.0 * dd) +
                       q * q * 144.0 * dd * dd + q * 12.0 * dd * std::sqrt(1.0 + 12.0 * dd));
  const double m0 = c_sketch * s0 *
                    (out.c1 * std::log(std::max(1.0, static_cast<double>(s0))) *
                         std::log(s0 / alpha) +
                     out.c2 * std::log(std::pow(s0 * out.n_grid, d) / alpha));
  out.m0 = static_cast<std::int64_t>(std::ceil(m0));
  return out;
}

std::string NoiseLevelBound::to_json_string() const {
  json j;
  j["c_alpha_m"] = c_alpha_m;
  j["value"] = value;
  j["limit_plain"] = limit_plain;
  j["limit_remark"] = limit_remark;
  j["c1"] = c1;
  j["c2"] = c2;
  j["note"] = note;
  return j.dump();
}

NoiseLevelBound noise_level_bound(double alpha, std::int64_t m, std::int64_t n, double tau,
                                  const SketchingLaw& law, double c1, double c2) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("noise_level_bound: alpha must be in (0,1)");
  if (m < 1 || n < 1) throw ValidationError("noise_level_bound: need m >= 1 and n >= 1");
  if (tau <= 0.0) throw ValidationError("noise_level_bound: tau must be positive");
  const int d = law.dim;
  NoiseLevelBound out;
  out.c1 = c1;
  out.c2 = c2;
  const double spread = 1.0 + c1 * std::log(2.0 * c2 / alpha);
  const double fin = std::pow(tau, -d) +
                     law.sup_ratio * std::log(2.0 / alpha) / (2.0 * std::sqrt(static_cast<double>(m)));
  out.c_alpha_m = 2.0 * std::sqrt(fin * spread);
  out.value = out.c_alpha_m / std::sqrt(static_cast<double>(n));
  out.limit_plain = 2.0 * std::sqrt(spread) * std::pow(tau, -0.5 * d);
  out.limit_remark = 2.0 * std::sqrt(1.0 + c1 * std::log(4.0 * c2 / alpha)) *
                     std::pow(4.0 / tau, 0.5 * d);
  std::ostringstream note;
  note << "universal constants c1=" << c1 << ", c2=" << c2
       << " are configured defaults, not theory-derived values; ";
  note << "the two published large-m limits disagree (" << out.limit_plain << " vs "
       << out.limit_remark << " per root-n) and are reported unreconciled";
  if (std::isinf(law.sup_ratio))
    note << "; law '" << law.name
         << "' has an unbounded weight ratio, so the finite-m bound is infinite - "
            "certify noise levels with the uniform law";
  out.note = note.str();
  return out;
}

std::array<double, 4> tail_bound_levels(int d, double c_lambda) {
  if (d < 1) throw ValidationError("tail_bound_levels: need d >= 1");
  if (!std::isfinite(c_lambda) || c_lambda <= 0.0)
    throw ValidationError("tail_bound_levels: c_lambda must be finite and positive");
  std::array<double, 4> levels{};
  const double step = std::sqrt(12.0 * d);
  double v = std::sqrt(c_lambda);
  for (int r = 0; r < 4; ++r) {
    levels[r] = v;
    v *= step;
  }
  return levels;
}

std::string sketch_file_json(const SketchOperator& op, const SketchVector& sk) {
  if (sk.z.size() != op.m())
    throw ValidationError("sketch file: sketch length != operator feature count");
  json j;
  j["m"] = op.m();
  j["tau"] = op.tau();
  j["seed"] = op.seed();
  j["law"] = op.law_name();
  json omegas = json::array();
  for (int i = 0; i < op.m(); ++i) {
    json row = json::array();
    for (int k = 0; k < op.dim(); ++k) row.push_back(op.frequencies()(i, k));
    omegas.push_back(std::move(row));
  }
  j["omegas"] = std::move(omegas);
  j["weights"] = std::vector<double>(op.weights().data(), op.weights().data() + op.m());
  j["template_cf"] = complex_list(op.template_cf());
  j["z"] = complex_list(sk.z);
  j["n"] = sk.n;
  j["dataset_sha256"] = sk.dataset_sha256;
  return j.dump();
}

std::pair<SketchOperator, SketchVector> sketch_file_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sketch file: JSON parse failed: ") + e.what());
  }
  for (const char* key : {"m", "tau", "seed", "law", "omegas", "weights", "template_cf", "z",
                          "n", "dataset_sha256"})
    if (!j.contains(key)) throw ValidationError(std::string("sketch file: missing key '") + key + "'");
  const int m = j["m"].get<int>();
  if (m < 1) throw ValidationError("sketch file: need m >= 1");
  const json& omegas = j["omegas"];
  if (!omegas.is_array() || static_cast<int>(omegas.size()) != m)
    throw ValidationError("sketch file: omegas length != m");
  const int d = omegas.empty() ? 0 : static_cast<int>(omegas[0].size());
  if (d < 1) throw ValidationError("sketch file: frequencies must have dimension >= 1");
  Eigen::MatrixXd freq(m, d);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(omegas[i].size()) != d)
      throw ValidationError("sketch file: ragged frequency rows");
    for (int k = 0; k < d; ++k) freq(i, k) = omegas[i][k].get<double>();
  }
  const auto wvec = j["weights"].get<std::vector<double>>();
  if (static_cast<int>(wvec.size()) != m)
    throw ValidationError("sketch file: weights length != m");
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wvec.data(), m);
  Eigen::VectorXcd cf = complex_list_parse(j["template_cf"], "sketch file template_cf");
  if (cf.size() != m) throw ValidationError("sketch file: template_cf length != m");

  SketchOperator op = SketchOperator::from_parts(j["law"].get<std::string>(),
                                                 j["tau"].get<double>(),
                                                 j["seed"].get<std::uint64_t>(), std::move(freq),
                                                 std::move(w), std::move(cf));
  SketchVector sk;
  sk.z = complex_list_parse(j["z"], "sketch file z");
  if (sk.z.size() != m) throw ValidationError("sketch file: z length != m");
  sk.n = j["n"].get<std::int64_t>();
  if (sk.n < 1) throw ValidationError("sketch file: need n >= 1");
  sk.op_seed = op.seed();
  sk.dataset_sha256 = j["dataset_sha256"].get<std::string>();
  // Modulus invariant |z_i| <= W_i/sqrt(m); the tiny slack covers the final
  // rounding of the fixed-point mean.
  for (int i = 0; i < m; ++i) {
    if (!std::isfinite(sk.z[i].real()) || !std::isfinite(sk.z[i].imag()))
      throw ValidationError("sketch file: non-finite sketch entry");
    if (std::abs(sk.z[i]) > op.entry_scale(i) * (1.0 + 1e-12))
      throw ValidationError("sketch file: entry modulus exceeds its weight bound");
  }
  return {std::move(op), std::move(sk)};
}

void save_sketch_file(const std::string& path, const SketchOperator& op, const SketchVector& sk) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << sketch_file_json(op, sk) << "\n";
  if (!out) throw ValidationError("short write to '" + path + "'");
}

std::pair<SketchOperator, SketchVector> load_sketch_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sketch_file_from_json(buf.str());
}

Eigen::MatrixXd load_samples_csv(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      const std::string cell = line.substr(pos, next - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      while (end && *end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
      if (end == cell.c_str() || (end && *end != '\0'))
        throw ValidationError("'" + path + "' line " + std::to_string(lineno) +
                              ": cannot parse '" + cell + "' as a number");
      row.push_back(v);
      pos = next + 1;
      if (next == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("'" + path + "' line " + std::to_string(lineno) +
                            ": ragged row (expected " + std::to_string(rows.front().size()) +
                            " columns, got " + std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("'" + path + "' contains no samples");
  const int d = static_cast<int>(rows.front().size());
  if (expected_dim > 0 && d != expected_dim)
    throw ValidationError("'" + path + "' has " + std::to_string(d) + " columns, expected " +
                          std::to_string(expected_dim));
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < d; ++c) samples(static_cast<Eigen::Index>(r), c) = rows[r][c];
  return samples;
}

void save_samples_csv(const std::string& path, const Eigen::MatrixXd& samples) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out.precision(17);
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      if (c) out << ',';
      out << samples(r, c);
    }
    out << '\n';
  }
  if (!out) throw ValidationError("short write to '" + path + "'");
}

}  // namespace offgrid
