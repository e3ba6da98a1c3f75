// Command-line front end: solve / stability / lmi-check / sweep / simulate
// over JSON problem files.  Exit codes are a scripting contract:
//   0  success (converged / feasible / stable)
//   2  bad regime (diverged / infeasible / unstable / no finite trials)
//   1  usage or input error

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mare/mare.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kBadRegime = 2;

struct CommonOpts {
  std::string path;
  bool force_m = false;
  bool json = false;
  std::string out;
};

mare::ProblemFile load_guarded(const CommonOpts& opts) {
  mare::ProblemFile pf = mare::load_problem(opts.path);
  const std::size_t m = pf.plant.input_dim();
  if (m > 12 && !opts.force_m) {
    const std::string count =
        m <= 30 ? std::to_string(std::size_t{1} << m) : "2^" + std::to_string(m);
    throw mare::Error("problem has " + std::to_string(m) + " channels (" + count +
                      " delivery patterns); every solver pass sums over all of "
                      "them -- pass --force-m to accept the 2^m cost");
  }
  return pf;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw mare::Error("cannot open output file: " + path);
  return file;
}

void print_matrix(std::ostream& os, const mare::Matrix& m, const char* indent = "  ") {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << indent;
    for (std::size_t j = 0; j < m.cols(); ++j)
      os << std::setw(14) << std::setprecision(8) << m(i, j)
         << (j + 1 < m.cols() ? " " : "");
    os << "\n";
  }
}

std::vector<double> parse_ray(const std::string& text, std::size_t m) {
  if (text.empty()) return std::vector<double>(m, 1.0);
  std::vector<double> ray;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ray.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw mare::Error("--ray: cannot parse '" + item + "' as a number");
    }
  }
  if (ray.size() != m)
    throw mare::Error("--ray: got " + std::to_string(ray.size()) +
                      " entries, expected " + std::to_string(m));
  return ray;
}

mare::GainMatrix gain_from_spec(const std::string& spec, const mare::ProblemFile& pf,
                                int& exit_code) {
  exit_code = kOk;
  if (spec.empty() || spec == "solve" || spec == "from-solve") {
    const mare::MareSolution sol = mare::solve_mare(pf.plant, pf.solver);
    if (sol.verdict != mare::SolveVerdict::Converged || !sol.gain) {
      std::cerr << "solver verdict: " << mare::to_string(sol.verdict)
                << "; no gain available (supply one with --gain FILE)\n";
      exit_code = kBadRegime;
      return mare::GainMatrix{};
    }
    return *sol.gain;
  }
  std::ifstream in(spec);
  if (!in) throw mare::Error("cannot open gain file: " + spec);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw mare::Error(spec + ": " + e.what());
  }
  mare::Matrix k = mare::gain_from_json(doc);
  if (k.rows() != pf.plant.state_dim() || k.cols() != pf.plant.input_dim())
    throw mare::Error(spec + ": gain has the wrong shape");
  if (!mare::is_finite(k)) throw mare::Error(spec + ": gain has non-finite entries");
  return mare::GainMatrix{k};
}

// --- solve -----------------------------------------------------------------

int cmd_solve(const CommonOpts& opts, double tol, long long max_iter, double s0,
              bool csv) {
  mare::ProblemFile pf = load_guarded(opts);
  if (tol > 0) pf.solver.tol = tol;
  if (max_iter > 0) pf.solver.max_iter = static_cast<std::size_t>(max_iter);
  if (s0 >= 0)
    pf.solver.initial = s0 * mare::SymMatrix::identity(pf.plant.state_dim());

  const mare::MareSolution sol = mare::solve_mare(pf.plant, pf.solver);

  std::ofstream file;
  std::ostream& os = open_out(opts.out, file);
  if (opts.json) {
    os << mare::solution_to_json(sol).dump(2) << "\n";
  } else if (csv) {
    os << "record,i,j,value\n";
    os << "verdict,,," << mare::to_string(sol.verdict) << "\n";
    os << "iterations,,," << sol.iterations << "\n";
    os << "residual,,," << mare::format_double(sol.final_residual) << "\n";
    for (std::size_t i = 0; i < sol.fixed_point.dim(); ++i)
      for (std::size_t j = 0; j < sol.fixed_point.dim(); ++j)
        os << "S," << i + 1 << "," << j + 1 << ","
           << mare::format_double(sol.fixed_point(i, j)) << "\n";
    if (sol.gain)
      for (std::size_t i = 0; i < sol.gain->K.rows(); ++i)
        for (std::size_t j = 0; j < sol.gain->K.cols(); ++j)
          os << "K," << i + 1 << "," << j + 1 << ","
             << mare::format_double(sol.gain->K(i, j)) << "\n";
  } else {
    os << "verdict:    " << mare::to_string(sol.verdict) << "\n";
    os << "iterations: " << sol.iterations << "\n";
    os << "residual:   " << sol.final_residual << "\n";
    os << "S:\n";
    print_matrix(os, sol.fixed_point.mat());
    if (sol.gain) {
      os << "K:\n";
      print_matrix(os, sol.gain->K);
    }
  }
  return sol.verdict == mare::SolveVerdict::Converged ? kOk : kBadRegime;
}

// --- stability ---------------------------------------------------------------

int cmd_stability(const CommonOpts& opts, const std::string& gain_spec) {
  mare::ProblemFile pf = load_guarded(opts);
  int code = kOk;
  const mare::GainMatrix gain = gain_from_spec(gain_spec, pf, code);
  if (code != kOk) return code;

  const mare::SubsetTable table = mare::eta_squared(pf.plant.channels);
  const mare::LyapOperator op(pf.plant, table, gain);
  const mare::SpectralRadius rho = mare::ms_spectral_radius(op);

  std::ofstream file;
  std::ostream& os = open_out(opts.out, file);
  if (opts.json) {
    nlohmann::json j;
    j["rho"] = rho.value;
    j["residual"] = rho.residual;
    j["iterations"] = rho.iterations;
    j["power_iteration_converged"] = rho.converged;
    j["mean_square_stable"] = rho.value < 1.0;
    os << j.dump(2) << "\n";
  } else {
    os << "rho:       " << std::setprecision(12) << rho.value << "\n";
    os << "residual:  " << rho.residual << "\n";
    os << "verdict:   "
       << (rho.value < 1.0 ? "mean-square stable (rho < 1)"
                           : "mean-square unstable (rho >= 1)")
       << "\n";
  }
  if (!rho.converged) {
    std::cerr << "warning: power iteration did not settle (residual "
              << rho.residual << "); falling back to the bounded-iteration test\n";
    const mare::LyapIterateResult it = mare::lyap_iterate(
        op, mare::SymMatrix::identity(pf.plant.state_dim()));
    std::cerr << "bounded-iteration verdict: " << mare::to_string(it.verdict)
              << " after " << it.iterations << " iterations\n";
    return it.verdict == mare::LyapVerdict::Bounded ? kOk : kBadRegime;
  }
  return rho.value < 1.0 ? kOk : kBadRegime;
}

// --- lmi-check ---------------------------------------------------------------

int cmd_lmi_check(const CommonOpts& opts, double delta, bool regularize,
                  const std::string& check_cert) {
  mare::ProblemFile pf = load_guarded(opts);
  mare::SubsetTable table = mare::eta_squared(pf.plant.channels);

  if (!check_cert.empty()) {  // re-verify a dumped certificate
    std::ifstream in(check_cert);
    if (!in) throw mare::Error("cannot open certificate file: " + check_cert);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw mare::Error(check_cert + ": " + e.what());
    }
    mare::LmiCertificate cert = mare::certificate_from_json(doc);
    mare::PlantModel plant = pf.plant;
    if (cert.w_regularization > 0.0)
      plant.W += cert.w_regularization *
                 mare::SymMatrix::identity(plant.state_dim());
    const mare::LmiCheck chk = mare::check_lmi(plant, table, cert.Y, cert.Z);
    std::cout << "stored verdict:   " << (cert.feasible ? "feasible" : "infeasible")
              << "\n";
    std::cout << "re-check verdict: " << (chk.feasible ? "feasible" : "infeasible")
              << "\n";
    std::cout << "min pivot:        " << chk.min_pivot << "\n";
    return chk.feasible ? kOk : kBadRegime;
  }

  if (delta == 0.0)
    std::cerr << "warning: --delta 0 leaves no strictness margin; at the fixed "
                 "point the inequality holds with equality and the check can "
                 "fail at tolerance\n";

  mare::PlantModel plant = pf.plant;
  double w_eps = 0.0;
  if (!mare::cholesky(plant.W).ok) {
    if (!regularize)
      throw mare::Error(
          "W is not positive definite; its inverse block does not exist. "
          "Re-run with --regularize to substitute W + eps*I");
    const mare::RegularizedPlant reg = mare::regularize_state_weight(plant);
    plant = reg.plant;
    w_eps = reg.epsilon;
    std::cerr << "note: W regularized with eps = " << w_eps << "\n";
  }

  const mare::MareSolution sol = mare::solve_mare(plant, pf.solver);
  if (sol.verdict != mare::SolveVerdict::Converged) {
    std::cout << "verdict: infeasible-by-divergence (solver "
              << mare::to_string(sol.verdict) << " after " << sol.iterations
              << " iterations; no certificate exists via this pipeline)\n";
    return kBadRegime;
  }

  mare::LmiCertificate cert =
      mare::certificate_from_solution(plant, table, sol, delta);
  cert.w_regularization = w_eps;

  std::cout << "verdict:   " << (cert.feasible ? "feasible" : "infeasible") << "\n";
  std::cout << "delta:     " << cert.delta << "\n";
  std::cout << "min pivot: " << cert.min_pivot << "\n";
  if (w_eps > 0.0) std::cout << "W shift:   " << w_eps << "\n";
  if (!opts.out.empty()) {
    std::ofstream file;
    std::ostream& os = open_out(opts.out, file);
    os << mare::certificate_to_json(cert).dump(2) << "\n";
  }
  return cert.feasible ? kOk : kBadRegime;
}

// --- sweep -------------------------------------------------------------------

int cmd_sweep(const CommonOpts& opts, const std::string& ray_text, double lo,
              double hi, double tol, long long max_iter) {
  mare::ProblemFile pf = load_guarded(opts);
  const std::vector<double> ray = parse_ray(ray_text, pf.plant.input_dim());
  if (max_iter > 0) pf.solver.max_iter = static_cast<std::size_t>(max_iter);

  const mare::SweepResult res =
      mare::sweep_boundary(pf.plant, ray, lo, hi, tol, pf.solver);

  std::ofstream file;
  std::ostream& os = open_out(opts.out, file);
  os << "record,t,verdict,iterations,final_residual,rho\n";
  for (const mare::SweepProbe& probe : res.probes)
    os << "probe," << mare::format_double(probe.t) << ","
       << mare::to_string(probe.verdict) << "," << probe.iterations << ","
       << mare::format_double(probe.final_residual) << ",\n";
  if (!res.crossing) {
    std::cerr << "no crossing in range: both ends of [" << lo << ", " << hi
              << "] gave the same verdict\n";
    return kError;
  }
  os << "boundary," << mare::format_double(res.boundary) << ",,,,"
     << (res.rho_at_boundary ? mare::format_double(res.rho_at_boundary->value)
                             : std::string())
     << "\n";
  return kOk;
}

// --- simulate ----------------------------------------------------------------

int cmd_simulate(const CommonOpts& opts, long long steps, long long trials,
                 long long seed, double qnoise, long long burn_in,
                 const std::string& gain_spec) {
  mare::ProblemFile pf = load_guarded(opts);
  const std::size_t n = pf.plant.state_dim();
  if (steps > 0) pf.sim.steps = static_cast<std::size_t>(steps);
  if (trials > 0) pf.sim.trials = static_cast<std::size_t>(trials);
  if (seed >= 0) pf.sim.master_seed = static_cast<std::uint64_t>(seed);
  if (burn_in >= 0) pf.sim.burn_in = static_cast<std::size_t>(burn_in);
  if (qnoise >= 0) pf.sim.process_noise = qnoise * mare::SymMatrix::identity(n);

  int code = kOk;
  const mare::GainMatrix gain = gain_from_spec(gain_spec, pf, code);
  if (code != kOk) return code;

  const mare::SubsetTable table = mare::eta_squared(pf.plant.channels);
  const mare::SpectralRadius rho =
      mare::ms_spectral_radius(mare::LyapOperator(pf.plant, table, gain));
  if (!(rho.value < 1.0))
    std::cerr << "warning: rho = " << rho.value
              << " >= 1; the closed loop is not mean-square stable and trials "
                 "may leave the finite range\n";

  const mare::SymMatrix q =
      pf.sim.process_noise.value_or(mare::SymMatrix(n));
  const mare::SimResult sim = mare::simulate(pf.plant, gain, pf.sim);
  const mare::CovarianceFixedPoint analytic =
      mare::covariance_fixed_point(pf.plant, table, gain, q);

  std::ofstream file;
  std::ostream& os = open_out(opts.out, file);
  if (opts.json) {
    nlohmann::json j;
    j["covariance"] = mare::to_json(sim.covariance);
    j["avg_cost"] = sim.avg_cost;
    j["trials_used"] = sim.trials_used;
    j["master_seed"] = sim.master_seed;
    j["rho"] = rho.value;
    if (analytic.verdict == mare::LyapVerdict::Bounded) {
      j["analytic_covariance"] = mare::to_json(analytic.covariance);
      j["analytic_cost"] = analytic.expected_cost;
    }
    os << j.dump(2) << "\n";
  } else {
    os << "record,trial,seed,avg_cost,cov_trace,finite,analytic_cov_trace,"
          "analytic_cost\n";
    for (const mare::TrialRecord& rec : sim.trials)
      os << "trial," << rec.index << "," << rec.seed << ","
         << mare::format_double(rec.avg_cost) << ","
         << mare::format_double(rec.cov_trace) << "," << (rec.finite ? 1 : 0)
         << ",,\n";
    os << "aggregate," << sim.trials_used << "," << sim.master_seed << ","
       << mare::format_double(sim.avg_cost) << ","
       << mare::format_double(trace(sim.covariance)) << "," << sim.trials_used
       << ",";
    if (analytic.verdict == mare::LyapVerdict::Bounded)
      os << mare::format_double(trace(analytic.covariance)) << ","
         << mare::format_double(analytic.expected_cost);
    else
      os << ",";
    os << "\n";
  }
  return sim.trials_used > 0 ? kOk : kBadRegime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Solver toolkit for discrete-time Riccati fixed points, gains, "
      "feasibility certificates and mean-square stability of LQG control "
      "over lossy actuation channels"};
  app.require_subcommand(1);

  CommonOpts opts;
  double tol = -1.0, s0 = -1.0, delta = 1e-6, lo = 0.01, hi = 1.0,
         sweep_tol = 1e-3, qnoise = -1.0;
  long long max_iter = -1, steps = -1, trials = -1, seed = -1, burn_in = -1;
  bool csv = false, regularize = false;
  std::string gain_spec, ray_text, check_cert;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("problem", opts.path, "problem file (JSON)")->required();
    sub->add_flag("--force-m", opts.force_m,
                  "accept more than 12 channels despite the 2^m cost");
    sub->add_option("--out", opts.out, "write the report to this file");
  };

  CLI::App* solve = app.add_subcommand("solve", "iterate the Riccati map to its fixed point");
  add_common(solve);
  solve->add_option("--tol", tol, "relative residual threshold");
  solve->add_option("--max-iter", max_iter, "iteration cap");
  solve->add_option("--s0", s0, "start from s0 * identity instead of 0");
  solve->add_flag("--json", opts.json, "machine-readable JSON output");
  solve->add_flag("--csv", csv, "machine-readable CSV output");

  CLI::App* stability = app.add_subcommand("stability", "spectral radius of the closed-loop second-moment map");
  add_common(stability);
  stability->add_option("--gain", gain_spec, "'solve' (default) or a JSON gain file");
  stability->add_flag("--json", opts.json, "machine-readable JSON output");

  CLI::App* lmi = app.add_subcommand("lmi-check", "build and check a feasibility certificate");
  add_common(lmi);
  lmi->add_option("--delta", delta, "inflation margin (default 1e-6)");
  lmi->add_flag("--regularize", regularize, "substitute W + eps*I when W is singular");
  lmi->add_option("--check-cert", check_cert, "re-verify a dumped certificate file");

  CLI::App* sweep = app.add_subcommand("sweep", "bisect the arrival-probability stability boundary");
  add_common(sweep);
  sweep->add_option("--ray", ray_text, "direction as comma-separated entries in (0,1] (default all 1)");
  sweep->add_option("--lo", lo, "lower scale (default 0.01)");
  sweep->add_option("--hi", hi, "upper scale (default 1.0)");
  sweep->add_option("--tol", sweep_tol, "bisection tolerance (default 1e-3)");
  sweep->add_option("--max-iter", max_iter, "solver iteration cap per probe");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo rollout vs the analytic covariance");
  add_common(simulate);
  simulate->add_option("--steps", steps, "steps per trial");
  simulate->add_option("--trials", trials, "number of trials");
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--qnoise", qnoise, "process noise qnoise * identity");
  simulate->add_option("--burn-in", burn_in, "discarded prefix length");
  simulate->add_option("--gain", gain_spec, "'solve' (default) or a JSON gain file");
  simulate->add_flag("--json", opts.json, "machine-readable JSON output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(opts, tol, max_iter, s0, csv);
    if (stability->parsed()) return cmd_stability(opts, gain_spec);
    if (lmi->parsed()) return cmd_lmi_check(opts, delta, regularize, check_cert);
    if (sweep->parsed()) return cmd_sweep(opts, ray_text, lo, hi, sweep_tol, max_iter);
    if (simulate->parsed())
      return cmd_simulate(opts, steps, trials, seed, qnoise, burn_in, gain_spec);
  } catch (const mare::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
