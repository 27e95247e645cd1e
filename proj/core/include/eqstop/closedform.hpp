#pragma once

// Closed-form threshold equilibria of the GBM real-options problem with a
// two-point discount mixture: regime classification, the mixed and pure
// candidates, and exact evaluation of w(., r_i) and J.

#include <array>
#include <cstddef>

#include "eqstop/stopcore.hpp"

namespace eqstop::closedform {

enum class Regime { Mixed, Pure };

const char* to_string(Regime r) noexcept;

/// alpha(r) = (1 + sqrt(8 r / sigma2 + 1)) / 2, the positive root of the
/// GBM characteristic equation; always > 1.
double alpha(double rate, double sigma2);

/// w(x, r_i) = a_i x + b_i on the randomization region.
struct LinearCoefficients {
  std::array<double, 2> a{};
  std::array<double, 2> b{};
};

LinearCoefficients linear_coefficients(const RealOptionProblem& problem);

/// lambda(x) = (slope x - offset) / (pole - x).
struct RationalIntensity {
  double slope = 0.0;
  double offset = 0.0;
  double pole = 0.0;

  double operator()(double x) const { return (slope * x - offset) / (pole - x); }
};

/// Both sides of the regime inequality int alpha dF < int r dF * int (alpha-1)/r dF.
struct RegimeCondition {
  double lhs = 0.0;
  double rhs = 0.0;
  bool mixed() const noexcept { return lhs < rhs; }
};

RegimeCondition regime_condition(const RealOptionProblem& problem);

/// Mixed iff the regime inequality holds strictly; ties are Pure.
Regime classify_regime(const RealOptionProblem& problem);

// Raw formulas. None of these check the regime; they are exposed for the
// verifier, the forced-candidate CLI paths and the tests.

/// K * int r dF, the pole of the intensity.
double upper_threshold(const RealOptionProblem& problem);
/// r1 r2 K / (p r2 + (1-p) r1), where the intensity numerator vanishes.
double intensity_root(const RealOptionProblem& problem);
/// Smooth-fit lower threshold in terms of p, alpha(r_i), a_i, b_i.
double mixed_lower_threshold(const RealOptionProblem& problem);
/// The same threshold rearranged in terms of r_i and alpha(r_i) only.
double mixed_lower_threshold_rates_form(const RealOptionProblem& problem);
/// Local-time push from the derivative jump of w(., r_i) at `lower`.
double push_intensity(const RealOptionProblem& problem, double lower, std::size_t rate_index);
/// K int alpha dF / int (alpha-1)/r dF.
double pure_threshold(const RealOptionProblem& problem);
RationalIntensity candidate_intensity(const RealOptionProblem& problem);

/// Requires the Mixed regime (RegimeError otherwise). Cross-checks the
/// lower threshold against the smooth-fit root (1e-8 relative) and the push
/// from i = 1 against i = 2 (1e-10 relative); ConsistencyError on mismatch.
MixedThresholdStrategy mixed_candidate(const RealOptionProblem& problem);

/// Requires the Pure regime (RegimeError otherwise).
MixedThresholdStrategy pure_candidate(const RealOptionProblem& problem);

struct EquilibriumSolution {
  Regime regime = Regime::Pure;
  RealOptionProblem problem;
  MixedThresholdStrategy strategy;
  RationalIntensity intensity;      // meaningful in the Mixed regime
  std::array<double, 2> alphas{};
  LinearCoefficients linear;        // meaningful in the Mixed regime
  std::array<double, 2> power{};    // D_i in w = D_i x^alpha_i + x / r_i below lower
};

/// Dispatches on classify_regime and returns the populated solution.
EquilibriumSolution solve(const RealOptionProblem& problem);

/// Mixed-form solution built from the raw formulas without regime or
/// admissibility checks. Used to show why the mixed candidate fails in the
/// Pure regime.
EquilibriumSolution mixed_solution_unchecked(const RealOptionProblem& problem);

/// Pure-form solution at pure_threshold(problem) without regime checks.
/// Under Mixed-regime parameters this is the candidate whose condition (III)
/// fails.
EquilibriumSolution pure_solution_unchecked(const RealOptionProblem& problem);

/// Left and right one-sided values of a derivative.
struct OneSided {
  double left = 0.0;
  double right = 0.0;
};

/// w(x, r_i) for x > 0; continuous, tends to 0 as x -> 0+.
double value_w(const EquilibriumSolution& sol, double x, std::size_t rate_index);
OneSided value_w_prime(const EquilibriumSolution& sol, double x, std::size_t rate_index);
/// Second derivative, taken from the left at the kinks.
double value_w_second(const EquilibriumSolution& sol, double x, std::size_t rate_index);

/// w evaluated on a named branch, ignoring where x lies. Used for the
/// continuity and jump checks at the thresholds.
enum class Branch { Continuation, Randomization, Stopping };
double value_w_branch(const EquilibriumSolution& sol, Branch branch, double x,
                      std::size_t rate_index);

/// J = p w(., r1) + (1-p) w(., r2).
double value_J(const EquilibriumSolution& sol, double x);
OneSided value_J_prime(const EquilibriumSolution& sol, double x);
double value_J_second(const EquilibriumSolution& sol, double x);

}  // namespace eqstop::closedform
