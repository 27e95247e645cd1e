#pragma once

// Independent numerical checks of a threshold equilibrium: the four
// sufficient conditions on a grid, the randomization-region ODE residual,
// the derivative-jump relation at the push point, a finite-difference
// recomputation of w(., r_i) and the smooth-fit root used to cross-check
// the closed-form lower threshold.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "eqstop/closedform.hpp"
#include "eqstop/grid.hpp"
#include "eqstop/stopcore.hpp"

namespace eqstop::verifier {

struct Tolerances {
  double strict = 0.0;      // J - K < -strict on (0, lower)
  double equality = 0.0;    // |J - K| <= equality on [lower, upper); (III) >= -equality
  double smooth_fit = 0.0;  // |J'(lower +-)| <= smooth_fit

  /// 1e-9 K, 1e-9 K and 1e-9 K / lower.
  static Tolerances for_solution(const closedform::EquilibriumSolution& sol);
};

struct ConditionStatus {
  bool passed = true;
  bool evaluated = false;
  double violation = 0.0;  // worst amount by which the condition is missed, >= 0
  double location = 0.0;   // node of the worst violation
  std::size_t nodes = 0;   // nodes inspected
};

struct ConditionReport {
  bool admissible = true;
  std::string admissibility_note;

  ConditionStatus strict_below;  // (I)
  ConditionStatus equal_inside;  // (II)
  ConditionStatus generator;     // (III)
  ConditionStatus smooth_fit;    // (IV)
  /// (III) residual sign agrees with x >= K int r dF on every node.
  bool generator_reduction_consistent = true;

  double continuity_gap = 0.0;        // largest |J| jump across lower and upper
  double max_abs_second_derivative = 0.0;  // sup |J''| over nodes off the kinks

  // Filled by verify_solution.
  double ode_residual = 0.0;              // sup of both ansatz residuals on (lower, upper)
  std::array<double, 2> jump_residuals{}; // per rate, mixed regime only
  double fd_max_relative_error = 0.0;
  bool fd_evaluated = false;

  bool conditions_passed() const noexcept {
    return admissible && strict_below.passed && equal_inside.passed && generator.passed &&
           smooth_fit.passed;
  }
};

/// Checks conditions (I)-(IV). The grid must contain the solution's
/// thresholds as nodes, start in (0, lower) and end beyond upper.
/// Inadmissible strategies (not a proper threshold rule) are reported with
/// admissible = false and the conditions left unevaluated.
ConditionReport check_conditions(const closedform::EquilibriumSolution& sol, const Grid& grid,
                                 const Tolerances& tol);

/// check_conditions plus the ODE residual sweep, the jump check and the
/// finite-difference comparison on the same grid.
ConditionReport verify_solution(const closedform::EquilibriumSolution& sol, const Grid& grid,
                                const Tolerances& tol);

/// Grid used by the verify command: n piecewise-uniform nodes on
/// [1e-3 lower, 2 upper] with both thresholds pinned. Falls back to
/// [1e-3 xbar, 2 xbar] when the strategy is not a proper threshold rule.
Grid default_grid(const closedform::EquilibriumSolution& sol, std::size_t n = 2001);

struct AnsatzResidual {
  double reduced = 0.0;  // f + A g - sum_k p_k r_k w(x, r_k)
  double full = 0.0;     // f + A J - sum_k p_k r_k w(x, r_k) - lambda(x) (J - g)
};

/// Mixed regime only (RegimeError otherwise); x must lie in (lower, upper).
AnsatzResidual ansatz_residual(const closedform::EquilibriumSolution& sol, double x);

/// |w'(lower+) - w'(lower-) - 2 push (w(lower) - K)| for each rate.
std::array<double, 2> jump_check(const closedform::EquilibriumSolution& sol);

struct FdOptions {
  double intensity_cap = 1e6;
  bool report_cap_sensitivity = true;
};

struct FdResult {
  std::array<std::vector<double>, 2> values;  // per rate, on the grid nodes
  double cap_sensitivity = 0.0;  // max |change| when the cap is raised tenfold; 0 if inactive
  bool cap_active = false;
};

/// Second-order finite-difference solution of
///   x + (A - r_i) h = lambda(x) (h - K)   on (0, lower) and (lower, upper),
///   h(0) = 0, h = K on [upper, inf),
///   h'(lower+) - h'(lower-) = 2 push (h(lower) - K).
/// The condition at 0 is carried to the first node as the exact
/// no-singular-mode relation x h' - alpha h = (1 - alpha) x / r.
FdResult fd_solve_w(const RealOptionProblem& problem, const MixedThresholdStrategy& strategy,
                    const Grid& grid, const FdOptions& options = {});

/// Root of u -> p y1'(u) + (1-p) y2'(u) with y_i(x) = x / r_i + D_i(u) x^alpha_i
/// matched to a_i u + b_i at u. Bracketed bisection on
/// [intensity_root, upper - eps] to 1e-12 absolute. RootNotFoundError when
/// the bracket has no sign change (the pure regime).
double smoothfit_root(const RealOptionProblem& problem);

/// The map whose root smoothfit_root finds.
double smoothfit_map(const RealOptionProblem& problem, double u);

}  // namespace eqstop::verifier
