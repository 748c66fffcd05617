// Command-line front end: simulation, sketching, estimation, certification,
// kernel audits, and bound reports over JSON/CSV files. Every subcommand
// prints a JSON object on stdout; exit codes are 0 (success), 1 (an audit ran
// and failed), 2 (invalid input), 3 (numerical failure).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "offgrid/certificates.hpp"
#include "offgrid/common.hpp"
#include "offgrid/geometry.hpp"
#include "offgrid/kernels.hpp"
#include "offgrid/lpc.hpp"
#include "offgrid/pipeline.hpp"
#include "offgrid/sketching.hpp"
#include "offgrid/solver.hpp"
#include "offgrid/switchconst.hpp"

namespace {

using offgrid::ValidationError;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

void emit(const json& j, const std::string& out_path = "") {
  const std::string text = j.dump(2);
  if (!out_path.empty()) write_file(out_path, text);
  std::cout << text << "\n";
}

// A sketching setup from a kernel config: template kernels carry their
// template, the bare sinc-4 window smooths with nothing (point mass).
struct SketchSetup {
  int dim = 1;
  double tau = 0.0;
  offgrid::TemplateDistribution tpl = offgrid::TemplateDistribution::point_mass(1);
};

SketchSetup sketch_setup_from_kernel_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("kernel config: invalid JSON: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  SketchSetup s;
  if (kind == "template") {
    s.tpl = offgrid::TemplateDistribution::from_json_string(j.at("template").dump());
    s.dim = j.at("dim").get<int>();
    s.tau = j.at("tau").get<double>();
  } else if (kind == "sinc4") {
    s.dim = j.at("dim").get<int>();
    s.tau = j.at("tau").get<double>();
    s.tpl = offgrid::TemplateDistribution::point_mass(s.dim);
  } else {
    throw ValidationError("sketching needs a 'template' or 'sinc4' kernel config");
  }
  if (s.tpl.d != s.dim) throw ValidationError("kernel config: template dimension mismatch");
  return s;
}

offgrid::ParameterBox box_from_bounds(const std::vector<double>& lo,
                                      const std::vector<double>& hi, int d) {
  if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
    throw ValidationError("--box-lo/--box-hi need exactly " + std::to_string(d) +
                          " values each");
  offgrid::ParameterBox box;
  box.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), d);
  box.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), d);
  return box;
}

json trace_json(const offgrid::SolveTrace& trace) {
  json j;
  j["converged"] = trace.converged;
  j["outer_iterations"] = trace.outer_iterations;
  j["dual_gap"] = trace.dual_gap;
  j["objectives"] = trace.objectives;
  j["note"] = trace.note;
  return j;
}

// --- subcommand bodies ------------------------------------------------------

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = offgrid::ExperimentConfig::from_json_string(read_file(config_path));
  if (cfg.n_values.empty()) throw ValidationError("config has no sample counts");
  if (cfg.seeds.empty()) throw ValidationError("config has no seeds");
  std::filesystem::create_directories(out_dir);
  json files = json::array();
  for (const auto n : cfg.n_values)
    for (const auto seed : cfg.seeds) {
      const Eigen::MatrixXd s = offgrid::simulate_mixture(cfg.truth, cfg.tpl, n, seed);
      const auto path = std::filesystem::path(out_dir) /
                        ("samples_n" + std::to_string(n) + "_s" + std::to_string(seed) + ".csv");
      offgrid::save_samples_csv(path.string(), s);
      files.push_back(path.string());
    }
  emit(json{{"written", files}, {"dim", cfg.truth.dim()}});
  return 0;
}

int cmd_sketch(const std::string& samples_path, const std::string& kernel_path, int m,
               std::uint64_t seed, const std::string& law_name, const std::string& out_path) {
  const SketchSetup setup = sketch_setup_from_kernel_json(read_file(kernel_path));
  const Eigen::MatrixXd samples = offgrid::load_samples_csv(samples_path, setup.dim);
  const auto law = offgrid::SketchingLaw::by_name(law_name, setup.dim, setup.tau);
  const auto op = offgrid::SketchOperator::draw(law, setup.tpl, m, seed);
  const auto sv =
      offgrid::sketch_dataset(samples, op, offgrid::sha256_file_hex(samples_path));
  offgrid::save_sketch_file(out_path, op, sv);
  emit(json{{"out", out_path},
            {"m", op.m()},
            {"n", sv.n},
            {"law", op.law_name()},
            {"tau", op.tau()},
            {"dataset_sha256", sv.dataset_sha256}});
  return 0;
}

int cmd_estimate(const std::string& sketch_path, const std::string& kernel_path,
                 const std::string& preset, double kappa_flag, int s0, double alpha,
                 const std::vector<double>& box_lo, const std::vector<double>& box_hi,
                 const offgrid::SolveConfig& solve_cfg, const std::string& out_path,
                 const std::string& trace_path) {
  auto [op_value, sv] = offgrid::load_sketch_file(sketch_path);
  auto op = std::make_shared<const offgrid::SketchOperator>(std::move(op_value));
  const int d = op->dim();
  const auto box = box_from_bounds(box_lo, box_hi, d);

  double kappa = kappa_flag;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double c_switch = std::numeric_limits<double>::quiet_NaN();
  if (kappa <= 0.0) {
    if (kernel_path.empty())
      throw ValidationError("a kappa preset needs --kernel for the switch constant "
                            "(or pass --kappa directly)");
    if (s0 < 1) throw ValidationError("a kappa preset needs --s0");
    const SketchSetup setup = sketch_setup_from_kernel_json(read_file(kernel_path));
    if (setup.dim != d) throw ValidationError("kernel dimension does not match the sketch");
    const offgrid::Sinc4Kernel pivot(d, op->tau());
    const offgrid::TemplateModelKernel model(d, op->tau(), setup.tpl);
    c_switch = offgrid::switch_constant(pivot, model).value;
    const auto law = offgrid::SketchingLaw::by_name(op->law_name(), d, op->tau());
    gamma = offgrid::noise_level_bound(alpha, op->m(), sv.n, op->tau(), law).value;
    if (!std::isfinite(gamma))
      throw ValidationError("the '" + op->law_name() +
                            "' law admits no finite noise bound; pass --kappa directly");
    double c_kappa = 0.0;
    if (preset == "s2mix" || preset == "sketched")
      c_kappa = offgrid::kappa_preset_sketched(c_switch);
    else if (preset == "supermix" || preset == "population")
      c_kappa = offgrid::kappa_preset_population(c_switch);
    else
      throw ValidationError("unknown kappa preset '" + preset +
                            "' (have: s2mix, supermix, sketched, population)");
    kappa = offgrid::calibrate_kappa(gamma, s0, c_kappa);
  }

  const auto problem = offgrid::BlassoProblem::sketched(op, sv.z, kappa, box);
  const auto [estimate, trace] = offgrid::solve(problem, solve_cfg);

  if (!out_path.empty()) estimate.save(out_path);
  if (!trace_path.empty()) write_file(trace_path, trace_json(trace).dump(2));
  json j;
  j["kappa"] = kappa;
  j["gamma"] = gamma;
  j["c_switch"] = c_switch;
  j["atoms"] = estimate.size();
  j["estimate"] = json::parse(estimate.to_json_string());
  j["trace"] = trace_json(trace);
  emit(j);
  return 0;
}

int cmd_certify(const std::string& kernel_path, const std::string& positions_path,
                const std::string& signs_path, const std::string& sketch_path, int localize,
                double r0, double eps0, double eps2, const std::string& out_path) {
  const auto pivot = offgrid::kernel_from_json_string(read_file(kernel_path));
  const Eigen::MatrixXd points = offgrid::load_samples_csv(positions_path, pivot->dim());
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(points.rows());
  if (!signs_path.empty()) {
    const Eigen::MatrixXd s = offgrid::load_samples_csv(signs_path, 1);
    if (s.rows() != points.rows())
      throw ValidationError("--signs must have one row per position");
    signs = s.col(0);
  }
  if (r0 <= 0.0) r0 = 1.0 / (4.0 * pivot->dim());

  offgrid::DualCertificate cert;
  if (!sketch_path.empty()) {
    auto [op_value, sv] = offgrid::load_sketch_file(sketch_path);
    auto op = std::make_shared<const offgrid::SketchOperator>(std::move(op_value));
    cert = offgrid::build_sketched_certificate(points, signs, *op);
    cert.op = op;  // keep the operator alive for the audit
  } else if (localize >= 0) {
    cert = offgrid::build_localizing_certificate(points, signs, localize, *pivot);
  } else {
    cert = offgrid::build_certificate(points, signs, *pivot);
  }
  const auto audit = offgrid::audit_certificate(cert, r0, eps0, eps2, pivot->metric());
  json j;
  j["certificate"] = json::parse(cert.to_json_string());
  j["audit"] = json::parse(audit.to_json_string());
  emit(j, out_path);
  return audit.pass ? 0 : 1;
}

int cmd_lpc(const std::string& kernel_path, int d, int s0, long grid,
            const std::string& out_path) {
  std::unique_ptr<offgrid::TIKernel> kernel;
  if (!kernel_path.empty()) {
    kernel = offgrid::kernel_from_json_string(read_file(kernel_path));
    if (d > 0 && d != kernel->dim())
      throw ValidationError("--d contradicts the kernel config's dimension");
    d = kernel->dim();
  } else {
    if (d < 1) throw ValidationError("need --kernel or --d");
    kernel = std::make_unique<offgrid::Sinc4Kernel>(d, 1.0);
  }
  offgrid::LpcReport report = offgrid::sinc4_lpc_params(d, s0);

  // Scan box sized from the kernel's own metric: reach ~115 Fisher-Rao units
  // per axis, the same stratum coverage as a +-400 window at tau = 1.
  const Eigen::MatrixXd g = kernel->metric().g;
  Eigen::VectorXd half(d);
  for (int a = 0; a < d; ++a) half[a] = 115.5 / std::sqrt(g(a, a));
  offgrid::ParameterBox box;
  box.lo = -half;
  box.hi = half;
  report.attach_audit(offgrid::audit_curvature(*kernel, report.r0, box, grid));
  emit(json::parse(report.to_json_string()), out_path);
  return report.failed ? 1 : 0;
}

int cmd_switch_constant(const std::string& pivot_path, const std::string& model_path,
                        int per_axis, const std::string& out_path) {
  const auto pivot = offgrid::kernel_from_json_string(read_file(pivot_path));
  const auto model = offgrid::kernel_from_json_string(read_file(model_path));
  const auto c = offgrid::switch_constant(*pivot, *model, per_axis);
  emit(json::parse(c.to_json_string()), out_path);
  return 0;
}

int cmd_report(const std::string& mu_path, const std::string& mu0_path,
               const std::string& config_path, std::int64_t n_flag, const std::string& out_path,
               const std::string& csv_path) {
  const auto mu = offgrid::DiscreteMeasure::load(mu_path);
  const auto mu0 = offgrid::DiscreteMeasure::load(mu0_path);
  auto cfg = offgrid::ExperimentConfig::from_json_string(read_file(config_path));
  const int d = mu0.dim();
  const int s0 = mu0.size();

  if (cfg.tau <= 0.0) {
    const double cap = offgrid::tau_max(mu0, d);
    if (!std::isfinite(cap))
      throw ValidationError("auto bandwidth needs at least two components; set tau");
    cfg.tau = 0.99 * cap;
  }
  if (cfg.eps0 <= 0.0) cfg.eps0 = 1.0 / (32.0 * std::pow(static_cast<double>(d), 3.0));
  if (cfg.eps2 <= 0.0) cfg.eps2 = 23.0 / 128.0;
  if (cfg.m <= 0) throw ValidationError("the config must pin the sketch size m");
  const std::int64_t n = n_flag > 0 ? n_flag
                         : cfg.n_values.empty() ? 0 : cfg.n_values.front();
  if (n < 1) throw ValidationError("need --n or a nonempty n list in the config");

  const offgrid::Sinc4Kernel pivot(d, cfg.tau);
  const offgrid::TemplateModelKernel model(d, cfg.tau, cfg.tpl);
  const double c_switch = offgrid::switch_constant(pivot, model).value;
  const auto law = offgrid::SketchingLaw::by_name(cfg.law, d, cfg.tau);
  const double gamma =
      offgrid::noise_level_bound(cfg.alpha, cfg.m, n, cfg.tau, law).value;

  offgrid::BoundConstants constants;
  constants.mode = offgrid::BlassoProblem::Mode::sketched;
  constants.c_switch = c_switch;
  constants.c_kappa = cfg.kappa_preset == "population"
                          ? offgrid::kappa_preset_population(c_switch)
                      : cfg.kappa_preset == "fixed"
                          ? cfg.kappa_override * std::sqrt(static_cast<double>(s0)) / gamma
                          : offgrid::kappa_preset_sketched(c_switch, cfg.c_pivot_prime);
  constants.eps0 = cfg.eps0;
  constants.eps2 = cfg.eps2;
  constants.c_pivot_prime = cfg.c_pivot_prime;
  constants.metric = offgrid::MetricTensor::from_matrix(
      Eigen::MatrixXd::Identity(d, d) / (12.0 * cfg.tau * cfg.tau));

  const double r = offgrid::effective_radius(n, cfg.schedule).r;
  const auto report = offgrid::bound_verdict(mu, mu0, r, gamma, s0, constants);

  if (!csv_path.empty()) {
    // plot-ready table over the config's n grid: schedule radius, measured
    // errors of this estimate at that radius, and the flat bounds.
    const double c_alpha_m =
        offgrid::noise_level_bound(cfg.alpha, cfg.m, 1, cfg.tau, law).c_alpha_m;
    std::ostringstream csv;
    csv << "n,r_n,far_mass,max_near_error,far_bound_flat,near_bound_flat\n";
    csv << std::setprecision(17);
    for (const auto nk : cfg.n_values) {
      const auto er = offgrid::effective_radius(nk, cfg.schedule);
      const auto stats = offgrid::region_statistics(mu, mu0, er.r, constants.metric);
      double max_near = 0.0;
      for (const double e : stats.near_errors) max_near = std::max(max_near, e);
      const double fb = cfg.c_pivot_prime * c_switch * (512.0 / 69.0) * c_alpha_m * er.v *
                        std::sqrt(static_cast<double>(s0));
      csv << nk << ',' << er.r << ',' << stats.far_mass << ',' << max_near << ',' << fb << ','
          << 3.0 * fb << '\n';
    }
    write_file(csv_path, csv.str());
  }
  emit(json::parse(report.to_json_string()), out_path);
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  auto cfg = offgrid::ExperimentConfig::from_json_string(read_file(config_path));
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const auto rec = offgrid::run_experiment(cfg);
  emit(json::parse(rec.to_json_string()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"off-the-grid sparse mixture recovery from random-feature sketches"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out;
  auto* sim = app.add_subcommand("simulate", "draw mixture samples for every (n, seed) cell");
  sim->add_option("--config", sim_config, "experiment config JSON")->required();
  sim->add_option("--out", sim_out, "output directory for sample CSVs")->required();

  // sketch
  std::string sk_samples, sk_kernel, sk_out, sk_law = "uniform";
  int sk_m = 0;
  std::uint64_t sk_seed = 1;
  auto* sk = app.add_subcommand("sketch", "compress a sample CSV into a random-feature sketch");
  sk->add_option("--samples", sk_samples, "headerless CSV, one sample per row")->required();
  sk->add_option("--kernel", sk_kernel, "model kernel JSON (template or sinc4)")->required();
  sk->add_option("--m", sk_m, "number of features")->required();
  sk->add_option("--seed", sk_seed, "frequency seed");
  sk->add_option("--law", sk_law, "frequency law: uniform | ih4");
  sk->add_option("--out", sk_out, "sketch file to write")->required();

  // estimate
  std::string est_sketch, est_kernel, est_preset = "s2mix", est_out, est_trace;
  double est_kappa = 0.0, est_alpha = 0.2;
  int est_s0 = 0;
  std::vector<double> est_lo, est_hi;
  offgrid::SolveConfig est_solve;
  auto* est = app.add_subcommand("estimate", "solve the sketched problem for a sparse measure");
  est->add_option("--sketch", est_sketch, "sketch file from `sketch`")->required();
  est->add_option("--kernel", est_kernel, "model kernel JSON (for preset calibration)");
  est->add_option("--kappa-preset", est_preset, "s2mix | supermix | sketched | population");
  est->add_option("--kappa", est_kappa, "explicit regularization (skips the preset)");
  est->add_option("--s0", est_s0, "target sparsity (preset calibration)");
  est->add_option("--alpha", est_alpha, "noise-bound failure budget");
  est->add_option("--box-lo", est_lo, "search box lower corner (d values)")->required();
  est->add_option("--box-hi", est_hi, "search box upper corner (d values)")->required();
  est->add_option("--max-atoms", est_solve.max_atoms, "atom budget");
  est->add_option("--max-outer", est_solve.max_outer, "outer iteration budget");
  est->add_option("--gap-tol", est_solve.gap_tol, "relative dual-gap stop");
  est->add_option("--out", est_out, "measure JSON to write");
  est->add_option("--trace-out", est_trace, "solve trace JSON to write");

  // certify
  std::string cert_kernel, cert_positions, cert_signs, cert_sketch, cert_out;
  int cert_localize = -1;
  double cert_r0 = 0.0, cert_eps0 = 0.0, cert_eps2 = 0.0;
  auto* cert = app.add_subcommand("certify", "build and audit a dual certificate");
  cert->add_option("--kernel", cert_kernel, "pivot kernel JSON")->required();
  cert->add_option("--positions", cert_positions, "spike positions CSV (s0 rows, d cols)")
      ->required();
  cert->add_option("--signs", cert_signs, "optional sign column CSV (default all +1)");
  cert->add_option("--sketch", cert_sketch, "sketch file: certify in its feature span");
  cert->add_option("--localize", cert_localize, "build the localizing certificate for index i");
  cert->add_option("--r0", cert_r0, "near/far split radius (default 1/(4d))");
  cert->add_option("--eps0", cert_eps0, "far-region ceiling constant")->required();
  cert->add_option("--eps2", cert_eps2, "near-region curvature constant")->required();
  cert->add_option("--out", cert_out, "audit JSON to write");

  // lpc
  std::string lpc_kernel, lpc_out;
  int lpc_d = 0, lpc_s0 = 1;
  long lpc_grid = 10000;
  auto* lpc = app.add_subcommand("lpc", "audit the pivot curvature constants");
  lpc->add_option("--kernel", lpc_kernel, "kernel JSON (default: sinc-4 at --d)");
  lpc->add_option("--d", lpc_d, "dimension (when no kernel file is given)");
  lpc->add_option("--s0", lpc_s0, "sparsity for the separation constant");
  lpc->add_option("--grid", lpc_grid, "scan density");
  lpc->add_option("--out", lpc_out, "report JSON to write");

  // switch-constant
  std::string sw_pivot, sw_model, sw_out;
  int sw_grid = 0;
  auto* sw = app.add_subcommand("switch-constant",
                                "spectral norm ratio between a pivot and a model kernel");
  sw->add_option("--pivot", sw_pivot, "pivot kernel JSON")->required();
  sw->add_option("--model", sw_model, "model kernel JSON")->required();
  sw->add_option("--grid", sw_grid, "frequency grid per axis (0 picks a default)");
  sw->add_option("--out", sw_out, "result JSON to write");

  // report
  std::string rep_mu, rep_mu0, rep_config, rep_out, rep_csv;
  std::int64_t rep_n = 0;
  auto* rep = app.add_subcommand("report", "bound verdict for an estimate against the truth");
  rep->add_option("--mu", rep_mu, "estimated measure JSON")->required();
  rep->add_option("--mu0", rep_mu0, "ground-truth measure JSON")->required();
  rep->add_option("--config", rep_config, "experiment config JSON")->required();
  rep->add_option("--n", rep_n, "sample count the estimate used (default: first in config)");
  rep->add_option("--out", rep_out, "verdict JSON to write");
  rep->add_option("--csv", rep_csv, "plot-ready per-n table to write");

  // run
  std::string run_config, run_out;
  auto* run = app.add_subcommand("run", "run the full experiment grid from a config");
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "output directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return offgrid::kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(sim_config, sim_out);
    if (*sk) return cmd_sketch(sk_samples, sk_kernel, sk_m, sk_seed, sk_law, sk_out);
    if (*est)
      return cmd_estimate(est_sketch, est_kernel, est_preset, est_kappa, est_s0, est_alpha,
                          est_lo, est_hi, est_solve, est_out, est_trace);
    if (*cert)
      return cmd_certify(cert_kernel, cert_positions, cert_signs, cert_sketch, cert_localize,
                         cert_r0, cert_eps0, cert_eps2, cert_out);
    if (*lpc) return cmd_lpc(lpc_kernel, lpc_d, lpc_s0, lpc_grid, lpc_out);
    if (*sw) return cmd_switch_constant(sw_pivot, sw_model, sw_grid, sw_out);
    if (*rep) return cmd_report(rep_mu, rep_mu0, rep_config, rep_n, rep_out, rep_csv);
    if (*run) return cmd_run(run_config, run_out);
  } catch (const offgrid::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return offgrid::kExitValidation;
  } catch (const offgrid::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return offgrid::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return offgrid::kExitNumerical;
  }
  return 0;
}
