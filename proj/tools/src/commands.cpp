#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "eqstop/pathsim.hpp"

namespace eqstop::cli {

namespace {

using closedform::EquilibriumSolution;
using closedform::Regime;

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void add_problem(Document& doc, const RealOptionProblem& pb) {
  doc.add("sigma2", pb.sigma2).add("K", pb.strike).add("p", pb.p).add("r1", pb.r1).add("r2", pb.r2);
}

const char* candidate_name(Candidate c) {
  switch (c) {
    case Candidate::ForcePure: return "pure";
    case Candidate::ForceMixed: return "mixed";
    default: return "equilibrium";
  }
}

verifier::Grid verification_grid(const RunConfig& cfg, const EquilibriumSolution& sol) {
  if (!cfg.x_min && !cfg.x_max) return verifier::default_grid(sol, cfg.grid);
  const auto& s = sol.strategy;
  const double lo = cfg.x_min.value_or(1e-3 * s.lower);
  const double hi = cfg.x_max.value_or(2.0 * s.upper);
  const double pins[] = {s.lower, s.upper};
  return verifier::Grid::uniform(lo, hi, cfg.grid, pins);
}

void add_status(Document& doc, const std::string& name, const verifier::ConditionStatus& st) {
  doc.add(name, st.passed).add(name + "_violation", st.violation).add(name + "_at", st.location);
}

std::vector<double> default_eval_states(const EquilibriumSolution& sol) {
  const auto& s = sol.strategy;
  return {0.5 * s.lower, s.lower, 0.5 * (s.lower + s.upper), s.upper, 1.2 * s.upper};
}

const char* region(const EquilibriumSolution& sol, double x) {
  if (x < sol.strategy.lower) return "continue";
  if (x < sol.strategy.upper) return "randomize";
  return "stop";
}

}  // namespace

EquilibriumSolution select_solution(const RunConfig& cfg) {
  require_valid(cfg.problem);
  switch (cfg.candidate) {
    case Candidate::ForcePure: return closedform::pure_solution_unchecked(cfg.problem);
    case Candidate::ForceMixed: return closedform::mixed_solution_unchecked(cfg.problem);
    default: return closedform::solve(cfg.problem);
  }
}

bool verification_passed(const verifier::ConditionReport& rep, double strike) {
  const double scale = std::max(1.0, strike);
  return rep.conditions_passed() && rep.generator_reduction_consistent &&
         rep.continuity_gap <= 1e-9 * scale && rep.ode_residual <= 1e-8 * scale &&
         rep.jump_residuals[0] <= 1e-8 * scale && rep.jump_residuals[1] <= 1e-8 * scale &&
         (!rep.fd_evaluated || rep.fd_max_relative_error <= 1e-3);
}

Document cmd_solve(const RunConfig& cfg) {
  const auto sol = select_solution(cfg);
  Document doc;
  add_problem(doc, cfg.problem);
  if (cfg.candidate != Candidate::Equilibrium) doc.add("candidate", candidate_name(cfg.candidate));
  doc.add("regime", closedform::to_string(sol.regime));
  if (sol.regime == Regime::Mixed) {
    doc.add("xlow", sol.strategy.lower)
        .add("xbar", sol.strategy.upper)
        .add("push", sol.strategy.push)
        .add("lambda_at_xlow", sol.intensity(sol.strategy.lower));
  } else {
    doc.add("threshold", sol.strategy.lower);
  }
  const auto lin = closedform::linear_coefficients(cfg.problem);
  doc.add("alpha1", sol.alphas[0]).add("alpha2", sol.alphas[1]);
  doc.add("a1", lin.a[0]).add("b1", lin.b[0]).add("a2", lin.a[1]).add("b2", lin.b[1]);
  doc.add("D1", sol.power[0]).add("D2", sol.power[1]);
  return doc;
}

Document cmd_classify(const RunConfig& cfg) {
  require_valid(cfg.problem);
  const auto cond = closedform::regime_condition(cfg.problem);
  Document doc;
  add_problem(doc, cfg.problem);
  doc.add("regime", closedform::to_string(closedform::classify_regime(cfg.problem)))
      .add("regime_lhs", cond.lhs)
      .add("regime_rhs", cond.rhs);
  return doc;
}

Document cmd_verify(const RunConfig& cfg, bool& passed) {
  const auto sol = select_solution(cfg);
  const auto grid = verification_grid(cfg, sol);
  const auto rep =
      verifier::verify_solution(sol, grid, verifier::Tolerances::for_solution(sol));
  passed = verification_passed(rep, cfg.problem.strike);

  Document doc;
  add_problem(doc, cfg.problem);
  doc.add("candidate", candidate_name(cfg.candidate));
  doc.add("regime", closedform::to_string(sol.regime));
  doc.add("grid_nodes", static_cast<std::int64_t>(grid.size()));
  doc.add("admissible", rep.admissible);
  if (!rep.admissible) doc.add("admissibility_note", rep.admissibility_note);
  add_status(doc, "cond_I", rep.strict_below);
  add_status(doc, "cond_II", rep.equal_inside);
  add_status(doc, "cond_III", rep.generator);
  add_status(doc, "cond_IV", rep.smooth_fit);
  if (rep.admissible) {
    doc.add("generator_reduction_consistent", rep.generator_reduction_consistent)
        .add("continuity_gap", rep.continuity_gap)
        .add("max_abs_second_derivative", rep.max_abs_second_derivative)
        .add("ode_residual", rep.ode_residual)
        .add("jump_residual1", rep.jump_residuals[0])
        .add("jump_residual2", rep.jump_residuals[1])
        .add("fd_max_relative_error", rep.fd_max_relative_error);
    doc.add("note",
            "continuity and bounded J'' on grid nodes are necessary, not sufficient, for the "
            "C2 requirement off the lower threshold");
  }
  doc.add("verified", passed);
  return doc;
}

std::string cmd_simulate(const RunConfig& cfg) {
  const auto sol = select_solution(cfg);
  pathsim::SimConfig sim;
  sim.dt = cfg.dt.value_or(1e-3);
  sim.n_paths = cfg.paths;
  sim.master_seed = cfg.seed;
  sim.t_max = cfg.t_max;
  sim.tail_mode = cfg.tail_mode;
  const auto states = cfg.eval_states.empty() ? default_eval_states(sol) : cfg.eval_states;
  const auto est = pathsim::estimate_all(cfg.problem, sol.strategy, sim, states);

  std::ostringstream os;
  os << "# eqstop simulate master_seed=" << cfg.seed << " regime=" << closedform::to_string(sol.regime)
     << " candidate=" << candidate_name(cfg.candidate) << " tail_mode="
     << (cfg.tail_mode == pathsim::TailMode::Truncate ? "truncate" : "analytic") << '\n';
  os << "x,J_closed,J_mc,J_se,w1_mc,w2_mc,tail_bias_bound,n_paths,dt\n";
  for (const auto& e : est) {
    os << csv_num(e.J.x) << ',' << csv_num(closedform::value_J(sol, e.J.x)) << ','
       << csv_num(e.J.mean) << ',' << csv_num(e.J.std_error) << ',' << csv_num(e.w[0].mean) << ','
       << csv_num(e.w[1].mean) << ',' << csv_num(e.J.tail_bias_bound) << ',' << e.J.n_paths << ','
       << csv_num(sim.dt) << '\n';
  }
  return os.str();
}

std::string cmd_figure(const RunConfig& cfg) {
  const auto sol = select_solution(cfg);
  const auto& s = sol.strategy;
  const double lo = cfg.x_min.value_or(1e-2 * s.lower);
  const double hi = cfg.x_max.value_or(2.0 * s.upper);
  const double pins[] = {s.lower, s.upper};
  const auto grid = verifier::Grid::uniform(lo, hi, cfg.grid, pins);

  std::ostringstream os;
  os << "# eqstop figure master_seed=" << cfg.seed << " regime=" << closedform::to_string(sol.regime)
     << " candidate=" << candidate_name(cfg.candidate) << '\n';
  os << "x,J,w1,w2,lambda,region\n";
  for (double x : grid.nodes()) {
    os << csv_num(x) << ',' << csv_num(closedform::value_J(sol, x)) << ','
       << csv_num(closedform::value_w(sol, x, 0)) << ',' << csv_num(closedform::value_w(sol, x, 1))
       << ',' << csv_num(s.intensity_at(x)) << ',' << region(sol, x) << '\n';
  }
  return os.str();
}

std::string cmd_diagnostics(const RunConfig& cfg) {
  require_valid(cfg.problem);
  if (cfg.h_list.empty()) throw PreconditionError("diagnostics: h_list is empty");
  const auto model = pathsim::SimModel::from(cfg.problem);
  pathsim::SimConfig sim;
  const double h0 = cfg.h_list.front();
  sim.dt = cfg.dt.value_or(5e-4 * h0 * h0);
  sim.n_paths = cfg.paths;
  sim.master_seed = cfg.seed;
  sim.t_max = cfg.t_max;
  const auto rows = pathsim::smalltime_diagnostics(model, cfg.x, cfg.h_list, sim);
  const double vol = model.diffusion.volatility(cfg.x);

  std::ostringstream os;
  os << "# eqstop diagnostics master_seed=" << cfg.seed << " x=" << csv_num(cfg.x)
     << " sigma2_x=" << csv_num(vol * vol) << '\n';
  os << "h,dt,mean_tau,h2_over_tau,h2_over_tau_se,tau2_over_tau,tau2_over_tau_se,"
        "l_sq_mean_over_tau,l_sq_mean_over_tau_se,tau_l_over_tau,tau_l_over_tau_se,"
        "l2_over_tau,l2_over_tau_se,censored,n_paths\n";
  for (const auto& r : rows) {
    os << csv_num(r.h) << ',' << csv_num(r.dt) << ',' << csv_num(r.mean_exit_time) << ','
       << csv_num(r.h2_over_tau) << ',' << csv_num(r.h2_over_tau_se) << ','
       << csv_num(r.tau2_over_tau) << ',' << csv_num(r.tau2_over_tau_se) << ','
       << csv_num(r.l_sq_mean_over_tau) << ',' << csv_num(r.l_sq_mean_over_tau_se) << ','
       << csv_num(r.tau_l_over_tau) << ',' << csv_num(r.tau_l_over_tau_se) << ','
       << csv_num(r.l2_over_tau) << ',' << csv_num(r.l2_over_tau_se) << ',' << r.censored << ','
       << sim.n_paths << '\n';
  }
  return os.str();
}

CommandResult run_command(std::string_view name, const RunConfig& cfg) {
  CommandResult res;
  try {
    if (name == "solve") {
      res.output = cmd_solve(cfg).render(cfg.format);
    } else if (name == "classify") {
      res.output = cmd_classify(cfg).render(cfg.format);
    } else if (name == "verify") {
      bool passed = false;
      res.output = cmd_verify(cfg, passed).render(cfg.format);
      if (!passed) {
        res.exit_code = kExitCheckFailed;
        res.error = "verification failed";
      }
    } else if (name == "simulate") {
      res.output = cmd_simulate(cfg);
    } else if (name == "figure") {
      res.output = cmd_figure(cfg);
    } else if (name == "diagnostics") {
      res.output = cmd_diagnostics(cfg);
    } else {
      res.exit_code = kExitInvalidInput;
      res.error = "unknown command '" + std::string(name) + "'";
    }
  } catch (const ValidationError& e) {
    res.exit_code = kExitInvalidInput;
    std::ostringstream os;
    os << "invalid parameters:";
    for (const auto& v : e.violations()) os << "\n  " << v.field << ": " << v.constraint;
    res.error = os.str();
  } catch (const NumericalError& e) {
    res.exit_code = kExitNumerical;
    res.error = e.what();
  } catch (const std::invalid_argument& e) {  // ConfigError, PreconditionError
    res.exit_code = kExitInvalidInput;
    res.error = e.what();
  } catch (const std::domain_error& e) {
    res.exit_code = kExitInvalidInput;
    res.error = e.what();
  } catch (const std::logic_error& e) {  // RegimeError
    res.exit_code = kExitInvalidInput;
    res.error = e.what();
  } catch (const std::exception& e) {
    res.exit_code = kExitNumerical;
    res.error = e.what();
  }
  return res;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Equilibrium stopping under weighted discounting"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<std::size_t> paths, grid;
  bool force_pure = false, force_mixed = false;
  app.add_option("--config", config_path, "Flat key: value configuration file");
  app.add_option("--out", out_path, "Write the output here instead of stdout");
  app.add_option("--seed", seed, "Master seed for the random substreams");
  app.add_option("--dt", dt, "Simulation time step");
  app.add_option("--paths", paths, "Monte Carlo paths per state");
  app.add_option("--grid", grid, "Grid nodes for verify and figure");
  auto* fp = app.add_flag("--force-pure", force_pure, "Use the pure threshold candidate");
  auto* fm = app.add_flag("--force-mixed", force_mixed, "Use the mixed threshold candidate");
  fp->excludes(fm);

  std::string command;
  for (const char* name : {"solve", "classify", "verify", "simulate", "figure", "diagnostics"}) {
    auto* sub = app.add_subcommand(name);
    sub->callback([&command, name] { command = name; });
  }
  app.get_subcommand("solve")->description("Closed-form equilibrium as a key: value document");
  app.get_subcommand("classify")->description("Mixed or pure regime and the regime inequality");
  app.get_subcommand("verify")->description("Verification conditions; exit 1 on any failure");
  app.get_subcommand("simulate")->description("Monte Carlo estimates of J and w as CSV");
  app.get_subcommand("figure")->description("Value functions and intensity on a dense grid as CSV");
  app.get_subcommand("diagnostics")->description("Small-time exit and local-time ratios as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "eqstop: " << e.what() << '\n';
    return kExitInvalidInput;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
      const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      cfg = parse_config(text);
    }
  } catch (const ConfigError& e) {
    err << "eqstop: " << e.what() << '\n';
    return kExitInvalidInput;
  }
  if (seed) cfg.seed = *seed;
  if (dt) cfg.dt = *dt;
  if (paths) cfg.paths = *paths;
  if (grid) cfg.grid = *grid;
  if (!out_path.empty()) cfg.out = out_path;
  if (force_pure) cfg.candidate = Candidate::ForcePure;
  if (force_mixed) cfg.candidate = Candidate::ForceMixed;

  const auto res = run_command(command, cfg);
  if (!res.error.empty()) err << "eqstop " << command << ": " << res.error << '\n';
  if (res.exit_code == kExitInvalidInput || res.exit_code == kExitNumerical) return res.exit_code;

  if (cfg.out.empty()) {
    out << res.output;
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    f << res.output;
    if (!f) {
      err << "eqstop: cannot write '" << cfg.out << "'\n";
      return kExitInvalidInput;
    }
  }
  return res.exit_code;
}

}  // namespace eqstop::cli
