#include "offgrid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "offgrid/switchconst.hpp"

namespace offgrid {

namespace {

using nlohmann::json;

constexpr double kFlatSlack = 1e-9;  // relative slack on the flat-bound comparisons

json measure_json(const DiscreteMeasure& mu) { return json::parse(mu.to_json_string()); }

json schedule_json(const RadiusSchedule& s) {
  return json{{"kind", s.kind}, {"a", s.a}, {"b", s.b}};
}

RadiusSchedule schedule_from_json(const json& j) {
  const std::string kind = j.value("kind", "log");
  if (kind == "log") return RadiusSchedule::log_schedule();
  if (kind == "poly") return RadiusSchedule::poly(j.value("a", 0.0));
  if (kind == "logpoly") return RadiusSchedule::logpoly(j.value("a", 0.0), j.value("b", 0.0));
  throw ValidationError("unknown radius schedule kind '" + kind + "'");
}

json solve_json(const SolveConfig& c) {
  return json{{"max_atoms", c.max_atoms},
              {"lmo_grid", c.lmo_grid},
              {"lmo_refine_steps", c.lmo_refine_steps},
              {"sliding_iters", c.sliding_iters},
              {"armijo_step", c.armijo_step},
              {"armijo_shrink", c.armijo_shrink},
              {"armijo_slope", c.armijo_slope},
              {"merge_radius", c.merge_radius},
              {"prune_threshold", c.prune_threshold},
              {"gap_tol", c.gap_tol},
              {"max_outer", c.max_outer},
              {"seed", c.seed}};
}

SolveConfig solve_from_json(const json& j) {
  SolveConfig c;
  c.max_atoms = j.value("max_atoms", c.max_atoms);
  c.lmo_grid = j.value("lmo_grid", c.lmo_grid);
  c.lmo_refine_steps = j.value("lmo_refine_steps", c.lmo_refine_steps);
  c.sliding_iters = j.value("sliding_iters", c.sliding_iters);
  c.armijo_step = j.value("armijo_step", c.armijo_step);
  c.armijo_shrink = j.value("armijo_shrink", c.armijo_shrink);
  c.armijo_slope = j.value("armijo_slope", c.armijo_slope);
  c.merge_radius = j.value("merge_radius", c.merge_radius);
  c.prune_threshold = j.value("prune_threshold", c.prune_threshold);
  c.gap_tol = j.value("gap_tol", c.gap_tol);
  c.max_outer = j.value("max_outer", c.max_outer);
  c.seed = j.value("seed", c.seed);
  return c;
}

// Mixture weights as a probability vector; throws unless positive and
// normalized.
std::vector<double> probability_weights(const DiscreteMeasure& mu0) {
  if (mu0.size() == 0) throw ValidationError("the mixture needs at least one component");
  std::vector<double> w(static_cast<std::size_t>(mu0.size()));
  double sum = 0.0;
  for (int k = 0; k < mu0.size(); ++k) {
    const double wk = mu0.atoms[static_cast<std::size_t>(k)].w;
    if (!(wk > 0.0)) throw ValidationError("mixture weights must be positive");
    w[static_cast<std::size_t>(k)] = wk;
    sum += wk;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("mixture weights must sum to one (got " + std::to_string(sum) + ")");
  return w;
}

ParameterBox padded_box(const DiscreteMeasure& mu0) {
  const int d = mu0.dim();
  Eigen::VectorXd lo = mu0.atoms.front().x, hi = mu0.atoms.front().x;
  for (const auto& a : mu0.atoms) {
    lo = lo.cwiseMin(a.x);
    hi = hi.cwiseMax(a.x);
  }
  for (int j = 0; j < d; ++j) {
    const double span = hi[j] - lo[j];
    const double pad = 0.25 * (span > 0.0 ? span : 4.0);  // degenerate axis -> +-1
    lo[j] -= pad;
    hi[j] += pad;
  }
  ParameterBox box;
  box.lo = lo;
  box.hi = hi;
  return box;
}

std::string csv_escape(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

double tau_max(const DiscreteMeasure& mu0, int d, std::string* note) {
  if (d < 1) throw ValidationError("dimension must be positive");
  if (mu0.size() > 0 && mu0.dim() != d)
    throw ValidationError("mixture dimension does not match the requested dimension");
  if (note) note->clear();
  if (mu0.size() < 2) {
    if (note) *note = "fewer than two atoms: no separation constraint, any bandwidth is admissible";
    return std::numeric_limits<double>::infinity();
  }
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mu0.size(); ++i)
    for (int j = i + 1; j < mu0.size(); ++j)
      gap = std::min(gap, (mu0.atoms[static_cast<std::size_t>(i)].x -
                           mu0.atoms[static_cast<std::size_t>(j)].x)
                              .norm());
  const double s0 = static_cast<double>(mu0.size());
  return gap / (147.77 * std::pow(s0, 0.25) * std::pow(static_cast<double>(d), 1.75));
}

Eigen::MatrixXd simulate_mixture(const DiscreteMeasure& mu0, const TemplateDistribution& tpl,
                                 std::int64_t n, std::uint64_t seed) {
  const std::vector<double> w = probability_weights(mu0);
  const int d = mu0.dim();
  if (tpl.d != d) throw ValidationError("template dimension does not match the mixture");
  if (n < 0) throw ValidationError("sample count must be nonnegative");
  Eigen::MatrixXd samples(n, d);
  Rng rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    const int k = rng.categorical(w);
    samples.row(i) =
        (mu0.atoms[static_cast<std::size_t>(k)].x + tpl.sample_noise(rng)).transpose();
  }
  return samples;
}

std::string ExperimentConfig::to_json_string(int indent) const {
  json j;
  j["truth"] = measure_json(truth);
  j["template"] = json::parse(tpl.to_json_string());
  j["tau"] = tau;
  j["n_values"] = n_values;
  j["m"] = m;
  j["alpha"] = alpha;
  j["schedule"] = schedule_json(schedule);
  j["seeds"] = seeds;
  j["kappa_preset"] = kappa_preset;
  j["kappa_override"] = kappa_override;
  j["oracle_gamma"] = oracle_gamma;
  j["box"] = box.dim() > 0 ? json::parse(box.to_json_string()) : json();
  j["op_seed_base"] = op_seed_base;
  j["eps0"] = eps0;
  j["eps2"] = eps2;
  j["c_pivot_prime"] = c_pivot_prime;
  j["law"] = law;
  j["solve"] = solve_json(solve);
  j["out_dir"] = out_dir;
  return j.dump(indent);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& s) {
  json j;
  try {
    j = json::parse(s);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  if (!j.contains("truth")) throw ValidationError("experiment config needs a 'truth' measure");
  ExperimentConfig c;
  try {
    c.truth = DiscreteMeasure::from_json_string(j.at("truth").dump());
    if (j.contains("template")) c.tpl = TemplateDistribution::from_json_string(j["template"].dump());
    c.tau = j.value("tau", c.tau);
    c.n_values = j.value("n_values", c.n_values);
    c.m = j.value("m", c.m);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
    c.seeds = j.value("seeds", c.seeds);
    c.kappa_preset = j.value("kappa_preset", c.kappa_preset);
    c.kappa_override = j.value("kappa_override", c.kappa_override);
    c.oracle_gamma = j.value("oracle_gamma", c.oracle_gamma);
    if (j.contains("box") && !j["box"].is_null())
      c.box = ParameterBox::from_json_string(j["box"].dump());
    c.op_seed_base = j.value("op_seed_base", c.op_seed_base);
    c.eps0 = j.value("eps0", c.eps0);
    c.eps2 = j.value("eps2", c.eps2);
    c.c_pivot_prime = j.value("c_pivot_prime", c.c_pivot_prime);
    c.law = j.value("law", c.law);
    if (j.contains("solve")) c.solve = solve_from_json(j["solve"]);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("experiment config field has the wrong type: ") + e.what());
  }
  return c;
}

std::string RunRecord::to_json_string(int indent) const {
  json j;
  j["config"] = json::parse(config.to_json_string());
  j["config_digest"] = config_digest;
  j["tau"] = tau;
  j["c_switch"] = c_switch;
  j["c_kappa"] = c_kappa;
  j["c_alpha_m"] = c_alpha_m;
  j["c_d"] = c_d;
  j["m"] = m;
  j["environment"] = environment;
  j["cells"] = json::array();
  for (const auto& cell : cells) {
    json jc;
    jc["n"] = cell.n;
    jc["seed"] = cell.seed;
    jc["kappa"] = cell.kappa;
    jc["gamma"] = cell.gamma;
    jc["gamma_oracle"] = cell.gamma_oracle;
    jc["r_n"] = cell.r_n;
    jc["v_n"] = cell.v_n;
    jc["estimate"] = measure_json(cell.estimate);
    jc["converged"] = cell.converged;
    jc["near_optimal"] = cell.near_optimal;
    jc["iterations"] = cell.iterations;
    jc["dual_gap"] = cell.dual_gap;
    jc["far_mass"] = cell.far_mass;
    jc["near_errors"] = cell.near_errors;
    jc["max_near_error"] = cell.max_near_error;
    jc["localization"] = cell.localization;
    jc["far_bound_flat"] = cell.far_bound_flat;
    jc["near_bound_flat"] = cell.near_bound_flat;
    jc["flat_far_ok"] = cell.flat_far_ok;
    jc["flat_near_ok"] = cell.flat_near_ok;
    jc["flat_detection_ok"] = cell.flat_detection_ok;
    jc["flagged_sets"] = cell.flagged_sets;
    jc["verdict"] = cell.has_verdict ? json::parse(cell.verdict.to_json_string()) : json();
    jc["verdict_error"] = cell.verdict_error;
    jc["error"] = cell.error;
    j["cells"].push_back(std::move(jc));
  }
  return j.dump(indent);
}

void RunRecord::save(const std::string& dir) const {
  if (dir.empty()) throw ValidationError("output directory must be nonempty");
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  {
    std::ofstream out(base / "run.json");
    if (!out) throw ValidationError("cannot write " + (base / "run.json").string());
    out << to_json_string() << "\n";
  }
  std::ofstream csv(base / "cells.csv");
  if (!csv) throw ValidationError("cannot write " + (base / "cells.csv").string());
  csv << "n,seed,kappa,gamma,r_n,far_mass,max_near_error,localization,"
         "far_bound_flat,near_bound_flat,converged,near_optimal,"
         "flat_far_ok,flat_near_ok,flat_detection_ok,verdict_pass,error\n";
  csv << std::setprecision(17);
  for (const auto& cell : cells) {
    csv << cell.n << ',' << cell.seed << ',' << cell.kappa << ',' << cell.gamma << ',' << cell.r_n
        << ',' << cell.far_mass << ',' << cell.max_near_error << ',' << cell.localization << ','
        << cell.far_bound_flat << ',' << cell.near_bound_flat << ',' << int(cell.converged) << ','
        << int(cell.near_optimal) << ',' << int(cell.flat_far_ok) << ',' << int(cell.flat_near_ok)
        << ',' << int(cell.flat_detection_ok) << ','
        << (cell.has_verdict ? std::to_string(int(cell.verdict.pass)) : std::string()) << ','
        << csv_escape(cell.error) << '\n';
  }
}

RunRecord run_experiment(const ExperimentConfig& config) {
  ExperimentConfig cfg = config;
  const std::vector<double> weights = probability_weights(cfg.truth);
  const int s0 = cfg.truth.size();
  const int d = cfg.truth.dim();
  if (cfg.tpl.d != d) throw ValidationError("template dimension does not match the mixture");
  if (cfg.tpl.kind == TemplateDistribution::Kind::custom)
    throw ValidationError("custom templates have no sampler; simulation needs a built-in kind");
  if (cfg.n_values.empty()) throw ValidationError("at least one sample count is required");
  for (const auto n : cfg.n_values)
    if (n < 1) throw ValidationError("sample counts must be at least 1");
  if (cfg.seeds.empty()) throw ValidationError("at least one seed is required");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  if (!(cfg.c_pivot_prime > 0.0)) throw ValidationError("c_pivot_prime must be positive");

  const bool fixed = cfg.kappa_preset == "fixed";
  if (!fixed && cfg.kappa_preset != "sketched" && cfg.kappa_preset != "population")
    throw ValidationError("kappa preset must be 'sketched', 'population' or 'fixed'");
  if (fixed && !(cfg.kappa_override > 0.0))
    throw ValidationError("the fixed preset needs a positive kappa_override");

  // Bandwidth admissibility.
  std::string tau_note;
  const double cap = tau_max(cfg.truth, d, &tau_note);
  if (cfg.tau <= 0.0) {
    if (!std::isfinite(cap))
      throw ValidationError(
          "auto bandwidth needs at least two components to set a separation scale; "
          "give tau explicitly");
    cfg.tau = 0.99 * cap;
  } else if (cfg.tau > cap * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << std::setprecision(10) << "bandwidth tau = " << cfg.tau
        << " exceeds the admissible maximum min gap / (147.77 s0^{1/4} d^{7/4}) = " << cap;
    throw ValidationError(msg.str());
  }

  if (cfg.box.dim() == 0) cfg.box = padded_box(cfg.truth);
  if (cfg.box.dim() != d) throw ValidationError("search box dimension does not match the mixture");
  for (const auto& a : cfg.truth.atoms)
    if (!cfg.box.contains(a.x)) throw ValidationError("the search box must contain every component");

  SketchingLaw law = SketchingLaw::by_name(cfg.law, d, cfg.tau);
  const bool finite_tail = std::isfinite(law.sup_ratio);
  if (!finite_tail && !(fixed && cfg.oracle_gamma))
    throw ValidationError(
        "the '" + cfg.law +
        "' law has an unbounded weight envelope, so no finite noise-level bound exists; "
        "calibrated presets need the uniform law (or use fixed kappa with oracle gamma)");

  if (cfg.m <= 0)
    cfg.m = static_cast<int>(sketch_size(s0, d, cfg.box.diameter(), cfg.alpha));
  if (cfg.eps0 <= 0.0) cfg.eps0 = 1.0 / (32.0 * std::pow(static_cast<double>(d), 3.0));
  if (cfg.eps2 <= 0.0) cfg.eps2 = 23.0 / 128.0;

  RunRecord rec;
  rec.tau = cfg.tau;
  rec.m = cfg.m;
  const Sinc4Kernel pivot(d, cfg.tau);
  const TemplateModelKernel model(d, cfg.tau, cfg.tpl);
  rec.c_switch = switch_constant(pivot, model).value;
  rec.c_kappa = fixed ? 0.0
               : cfg.kappa_preset == "population"
                   ? kappa_preset_population(rec.c_switch)
                   : kappa_preset_sketched(rec.c_switch, cfg.c_pivot_prime);
  rec.c_alpha_m = finite_tail
                      ? noise_level_bound(cfg.alpha, cfg.m, 1, cfg.tau, law).c_alpha_m
                      : std::numeric_limits<double>::quiet_NaN();
  const double r0 = 1.0 / (4.0 * d);
  const double curvature_limit = std::sqrt(cfg.eps0 / (6.0 * cfg.eps2));
  rec.c_d = std::pow(std::min(r0, curvature_limit), -4.0);
  rec.environment = "threads=" + std::to_string(thread_count());
  rec.config = cfg;
  {
    ExperimentConfig for_digest = cfg;
    for_digest.out_dir.clear();
    const std::string blob = for_digest.to_json_string();
    rec.config_digest = sha256_hex(blob.data(), blob.size());
  }

  const MetricTensor metric = MetricTensor::from_matrix(
      Eigen::MatrixXd::Identity(d, d) / (12.0 * cfg.tau * cfg.tau));
  const double flat_factor =
      cfg.c_pivot_prime * rec.c_switch * (512.0 / 69.0) * std::sqrt(static_cast<double>(s0));

  for (const auto n : cfg.n_values) {
    for (const auto seed : cfg.seeds) {
      CellResult cell;
      cell.n = n;
      cell.seed = seed;
      try {
        const Eigen::MatrixXd samples = simulate_mixture(cfg.truth, cfg.tpl, n, seed);
        auto op = std::make_shared<const SketchOperator>(
            SketchOperator::draw(law, cfg.tpl, cfg.m, cfg.op_seed_base + seed));
        const SketchVector sv = sketch_dataset(samples, *op);
        cell.gamma_oracle = (sv.z - forward(*op, cfg.truth)).norm();
        cell.gamma = cfg.oracle_gamma
                         ? std::max(cell.gamma_oracle, 1e-12)
                         : noise_level_bound(cfg.alpha, cfg.m, n, cfg.tau, law).value;
        cell.kappa = fixed ? cfg.kappa_override : calibrate_kappa(cell.gamma, s0, rec.c_kappa);

        const BlassoProblem problem = BlassoProblem::sketched(op, sv.z, cell.kappa, cfg.box);
        auto [estimate, trace] = solve(problem, cfg.solve, &cfg.truth);
        cell.estimate = std::move(estimate);
        cell.converged = trace.converged;
        cell.near_optimal = trace.near_optimal;
        cell.iterations = trace.outer_iterations;
        cell.dual_gap = trace.dual_gap;

        const EffectiveRadius er = effective_radius(n, cfg.schedule);
        cell.r_n = er.r;
        cell.v_n = er.v;
        const RegionStatistics stats =
            region_statistics(cell.estimate, cfg.truth, er.r, metric);
        cell.far_mass = stats.far_mass;
        cell.near_errors = stats.near_errors;
        cell.max_near_error = stats.near_errors.empty()
                                  ? 0.0
                                  : *std::max_element(stats.near_errors.begin(),
                                                      stats.near_errors.end());
        cell.localization = 0.0;
        for (const auto& t : cfg.truth.atoms) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& a : cell.estimate.atoms)
            best = std::min(best, metric.distance(t.x, a.x));
          cell.localization = std::max(cell.localization, best);
        }

        if (finite_tail) {
          cell.far_bound_flat = flat_factor * rec.c_alpha_m * er.v;
          cell.near_bound_flat = 3.0 * cell.far_bound_flat;
          cell.flat_far_ok =
              cell.far_mass <= cell.far_bound_flat + kFlatSlack * (1.0 + cell.far_bound_flat);
          cell.flat_near_ok = cell.max_near_error <=
                              cell.near_bound_flat + kFlatSlack * (1.0 + cell.near_bound_flat);
          const DetectionScan det =
              detection_scan(cell.estimate, cfg.truth, er.r, cell.far_bound_flat, metric);
          cell.flat_detection_ok = det.ok;
          cell.flagged_sets = det.flagged_sets;
        } else {
          cell.far_bound_flat = std::numeric_limits<double>::quiet_NaN();
          cell.near_bound_flat = std::numeric_limits<double>::quiet_NaN();
        }

        BoundConstants bc;
        bc.mode = BlassoProblem::Mode::sketched;
        bc.c_switch = rec.c_switch;
        bc.c_kappa = fixed ? cell.kappa * std::sqrt(static_cast<double>(s0)) / cell.gamma
                           : rec.c_kappa;
        bc.eps0 = cfg.eps0;
        bc.eps2 = cfg.eps2;
        bc.c_pivot_prime = cfg.c_pivot_prime;
        bc.metric = metric;
        try {
          cell.verdict = bound_verdict(cell.estimate, cfg.truth, er.r, cell.gamma, s0, bc);
          cell.has_verdict = true;
        } catch (const ValidationError& e) {
          cell.verdict_error = e.what();
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      rec.cells.push_back(std::move(cell));
    }
  }

  if (!cfg.out_dir.empty()) rec.save(cfg.out_dir);
  return rec;
}

}  // namespace offgrid
