#include "eqstop/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace eqstop::verifier {

using closedform::Branch;
using closedform::EquilibriumSolution;
using closedform::Regime;

Tolerances Tolerances::for_solution(const EquilibriumSolution& sol) {
  const double K = sol.problem.strike;
  const double scale = sol.strategy.lower > 0.0 ? sol.strategy.lower : 1.0;
  return {1e-9 * K, 1e-9 * K, 1e-9 * K / scale};
}

namespace {

void record(ConditionStatus& st, double violation, double x) {
  ++st.nodes;
  st.evaluated = true;
  if (violation > st.violation) {
    st.violation = violation;
    st.location = x;
  }
  if (violation > 0.0) st.passed = false;
}

std::string admissibility_problem(const EquilibriumSolution& sol, const Grid& grid) {
  const auto& s = sol.strategy;
  if (!(s.lower > 0.0) || !std::isfinite(s.lower)) return "lower threshold is not positive";
  if (!(s.lower <= s.upper)) return "lower threshold exceeds upper threshold";
  if (sol.regime == Regime::Pure) return {};
  if (!(s.lower < s.upper)) return "mixed rule with an empty randomization region";
  if (!(s.push > 0.0) || !std::isfinite(s.push)) return "local-time push is not positive";
  if (!(s.intensity_at(s.lower) >= 0.0)) return "intensity is negative at the lower threshold";
  for (double x : grid.nodes())
    if (x >= s.lower && x < s.upper && !(s.intensity_at(x) >= 0.0))
      return "intensity is negative on the randomization region";
  return {};
}

double J_branch(const EquilibriumSolution& sol, Branch b, double x) {
  const double p = sol.problem.p;
  return p * closedform::value_w_branch(sol, b, x, 0) +
         (1.0 - p) * closedform::value_w_branch(sol, b, x, 1);
}

}  // namespace

ConditionReport check_conditions(const EquilibriumSolution& sol, const Grid& grid,
                                 const Tolerances& tol) {
  ConditionReport rep;
  const auto& s = sol.strategy;
  if (auto why = admissibility_problem(sol, grid); !why.empty()) {
    rep.admissible = false;
    rep.admissibility_note = why;
    for (auto* st : {&rep.strict_below, &rep.equal_inside, &rep.generator, &rep.smooth_fit})
      st->passed = false;
    return rep;
  }
  if (!(grid.front() < s.lower) || !(grid.back() > s.upper))
    throw PreconditionError("check_conditions: grid must span (x_min < lower, x_max > upper)");
  if (!grid.index_of(s.lower) || !grid.index_of(s.upper))
    throw PreconditionError("check_conditions: grid must contain both thresholds as nodes");

  const auto& pb = sol.problem;
  const double K = pb.strike;
  const auto diffusion = pb.diffusion();
  const auto payoff = pb.payoff();
  const double mean_rate = moment(pb.mixture(), [](double r) { return r; });
  const double rate_boundary = K * mean_rate;

  for (double x : grid.nodes()) {
    if (x < s.lower) {
      record(rep.strict_below, std::max(0.0, closedform::value_J(sol, x) - K + tol.strict), x);
    } else if (x < s.upper) {
      record(rep.equal_inside, std::max(0.0, std::abs(closedform::value_J(sol, x) - K) - tol.equality),
             x);
    } else {
      const double g = payoff.terminal(x);
      const double res = payoff.running(x) +
                         diffusion.generator(x, payoff.terminal_d1(x), payoff.terminal_d2(x)) -
                         g * mean_rate;
      record(rep.generator, std::max(0.0, -res - tol.equality), x);
      const double reduced = x - rate_boundary;
      if (std::abs(res - reduced) > 1e-12 * std::max({1.0, std::abs(x), rate_boundary}))
        rep.generator_reduction_consistent = false;
    }
    if (x != s.lower && x < s.upper)
      rep.max_abs_second_derivative =
          std::max(rep.max_abs_second_derivative, std::abs(closedform::value_J_second(sol, x)));
  }

  const auto dJ = closedform::value_J_prime(sol, s.lower);
  const double slope = payoff.terminal_d1(s.lower);
  const double miss = std::max(std::abs(dJ.left - slope), std::abs(dJ.right - slope));
  record(rep.smooth_fit, std::max(0.0, miss - tol.smooth_fit), s.lower);

  const Branch inside = sol.regime == Regime::Mixed ? Branch::Randomization : Branch::Stopping;
  rep.continuity_gap =
      std::abs(J_branch(sol, Branch::Continuation, s.lower) - J_branch(sol, inside, s.lower));
  if (sol.regime == Regime::Mixed)
    rep.continuity_gap = std::max(rep.continuity_gap,
                                  std::abs(J_branch(sol, Branch::Randomization, s.upper) -
                                           J_branch(sol, Branch::Stopping, s.upper)));
  return rep;
}

ConditionReport verify_solution(const EquilibriumSolution& sol, const Grid& grid,
                                const Tolerances& tol) {
  ConditionReport rep = check_conditions(sol, grid, tol);
  if (!rep.admissible) return rep;
  const auto& s = sol.strategy;

  if (sol.regime == Regime::Mixed) {
    for (double x : grid.nodes()) {
      if (x <= s.lower || x >= s.upper) continue;
      const auto res = ansatz_residual(sol, x);
      rep.ode_residual = std::max({rep.ode_residual, std::abs(res.reduced), std::abs(res.full)});
    }
    rep.jump_residuals = jump_check(sol);
  }

  const FdResult fd = fd_solve_w(sol.problem, s, grid);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double exact = closedform::value_w(sol, grid[j], i);
      rep.fd_max_relative_error =
          std::max(rep.fd_max_relative_error, std::abs(fd.values[i][j] - exact) / std::abs(exact));
    }
  rep.fd_evaluated = true;
  return rep;
}

Grid default_grid(const EquilibriumSolution& sol, std::size_t n) {
  const auto& s = sol.strategy;
  if (!(s.lower > 0.0 && s.lower <= s.upper && std::isfinite(s.upper))) {
    // Not a proper threshold rule; check_conditions reports it without
    // looking at the nodes, so any grid spanning the problem scale will do.
    const double xbar = closedform::upper_threshold(sol.problem);
    const double pins[] = {xbar};
    return Grid::uniform(1e-3 * xbar, 2.0 * xbar, n, pins);
  }
  const double pins[] = {s.lower, s.upper};
  return Grid::uniform(1e-3 * s.lower, 2.0 * s.upper, n, pins);
}

AnsatzResidual ansatz_residual(const EquilibriumSolution& sol, double x) {
  if (sol.regime != Regime::Mixed) throw RegimeError("ansatz_residual: needs the mixed regime");
  const auto& s = sol.strategy;
  if (!(x > s.lower && x < s.upper))
    throw DomainError("ansatz_residual: x must lie strictly inside the randomization region");

  const auto& pb = sol.problem;
  const auto diffusion = pb.diffusion();
  const auto payoff = pb.payoff();
  double weighted = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    weighted += pb.weight(i) * pb.rate(i) * closedform::value_w(sol, x, i);

  const double f = payoff.running(x);
  const double g = payoff.terminal(x);
  AnsatzResidual out;
  out.reduced =
      f + diffusion.generator(x, payoff.terminal_d1(x), payoff.terminal_d2(x)) - weighted;
  const double J = closedform::value_J(sol, x);
  const double AJ =
      diffusion.generator(x, closedform::value_J_prime(sol, x).right, closedform::value_J_second(sol, x));
  out.full = f + AJ - weighted - s.intensity_at(x) * (J - g);
  return out;
}

std::array<double, 2> jump_check(const EquilibriumSolution& sol) {
  if (sol.regime != Regime::Mixed) throw RegimeError("jump_check: needs the mixed regime");
  const double u = sol.strategy.lower;
  const double K = sol.problem.strike;
  std::array<double, 2> out{};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto d = closedform::value_w_prime(sol, u, i);
    const double w = closedform::value_w(sol, u, i);
    out[i] = std::abs(d.right - d.left - 2.0 * sol.strategy.push * (w - K));
  }
  return out;
}

double smoothfit_map(const RealOptionProblem& pb, double u) {
  const auto c = closedform::linear_coefficients(pb);
  double acc = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double r = pb.rate(i);
    const double al = closedform::alpha(r, pb.sigma2);
    const double boundary = c.a[i] * u + c.b[i];
    // y_i'(u) = 1/r + alpha D_i u^(alpha-1), D_i u^alpha = boundary - u/r
    acc += pb.weight(i) * (1.0 / r + al * (boundary - u / r) / u);
  }
  return acc;
}

double smoothfit_root(const RealOptionProblem& pb) {
  require_valid(pb);
  const double upper = closedform::upper_threshold(pb);
  double lo = closedform::intensity_root(pb);
  double hi = upper - 1e-12 * upper;
  if (!(lo < hi)) throw RootNotFoundError("smoothfit_root: empty bracket");
  double f_lo = smoothfit_map(pb, lo);
  const double f_hi = smoothfit_map(pb, hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "smoothfit_root: no sign change on [" << lo << ", " << hi << "] (" << f_lo << ", "
       << f_hi << ")";
    throw RootNotFoundError(os.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = smoothfit_map(pb, mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace eqstop::verifier
