#include "eqstop/closedform.hpp"

#include <cmath>
#include <sstream>

#include "eqstop/verifier.hpp"

namespace eqstop::closedform {

namespace {

double relative_gap(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

void require_positive_state(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError(std::string(what) + ": state must be > 0");
}

std::array<double, 2> alphas_of(const RealOptionProblem& pb) {
  return {alpha(pb.r1, pb.sigma2), alpha(pb.r2, pb.sigma2)};
}

EquilibriumSolution assemble_mixed(const RealOptionProblem& pb, MixedThresholdStrategy strategy) {
  EquilibriumSolution sol;
  sol.regime = Regime::Mixed;
  sol.problem = pb;
  sol.intensity = candidate_intensity(pb);
  sol.alphas = alphas_of(pb);
  sol.linear = linear_coefficients(pb);
  const double u = strategy.lower;
  for (std::size_t i = 0; i < 2; ++i) {
    const double r = pb.rate(i);
    const double w_u = sol.linear.a[i] * u + sol.linear.b[i];
    sol.power[i] = (w_u - u / r) / std::pow(u, sol.alphas[i]);
  }
  sol.strategy = std::move(strategy);
  return sol;
}

EquilibriumSolution assemble_pure(const RealOptionProblem& pb, double threshold) {
  EquilibriumSolution sol;
  sol.regime = Regime::Pure;
  sol.problem = pb;
  sol.strategy = MixedThresholdStrategy::pure(threshold);
  sol.alphas = alphas_of(pb);
  sol.linear = linear_coefficients(pb);
  for (std::size_t i = 0; i < 2; ++i) {
    const double r = pb.rate(i);
    sol.power[i] = (pb.strike - threshold / r) / std::pow(threshold, sol.alphas[i]);
  }
  return sol;
}

MixedThresholdStrategy raw_mixed_strategy(const RealOptionProblem& pb) {
  const double lower = mixed_lower_threshold(pb);
  const RationalIntensity lam = candidate_intensity(pb);
  return MixedThresholdStrategy{lower, upper_threshold(pb), lam, push_intensity(pb, lower, 0)};
}

}  // namespace

const char* to_string(Regime r) noexcept { return r == Regime::Mixed ? "mixed" : "pure"; }

double alpha(double rate, double sigma2) {
  if (!(rate > 0.0) || !(sigma2 > 0.0) || !std::isfinite(rate) || !std::isfinite(sigma2))
    throw DomainError("alpha: rate and sigma2 must be > 0");
  return 0.5 * (1.0 + std::sqrt(8.0 * rate / sigma2 + 1.0));
}

LinearCoefficients linear_coefficients(const RealOptionProblem& pb) {
  require_valid(pb);
  const double K = pb.strike;
  LinearCoefficients c;
  c.a[0] = 1.0 / (pb.p * (pb.r1 - pb.r2));
  c.b[0] = -pb.r2 * K / (pb.p * (pb.r1 - pb.r2));
  c.a[1] = 1.0 / ((1.0 - pb.p) * (pb.r2 - pb.r1));
  c.b[1] = -pb.r1 * K / ((1.0 - pb.p) * (pb.r2 - pb.r1));
  return c;
}

RegimeCondition regime_condition(const RealOptionProblem& pb) {
  const auto mix = pb.mixture();
  const double s2 = pb.sigma2;
  const double mean_alpha = moment(mix, [s2](double r) { return alpha(r, s2); });
  const double mean_rate = moment(mix, [](double r) { return r; });
  const double mean_ratio = moment(mix, [s2](double r) { return (alpha(r, s2) - 1.0) / r; });
  return {mean_alpha, mean_rate * mean_ratio};
}

Regime classify_regime(const RealOptionProblem& pb) {
  return regime_condition(pb).mixed() ? Regime::Mixed : Regime::Pure;
}

double upper_threshold(const RealOptionProblem& pb) {
  return pb.strike * moment(pb.mixture(), [](double r) { return r; });
}

double intensity_root(const RealOptionProblem& pb) {
  require_valid(pb);
  return pb.r1 * pb.r2 * pb.strike / (pb.p * pb.r2 + (1.0 - pb.p) * pb.r1);
}

double mixed_lower_threshold(const RealOptionProblem& pb) {
  const auto c = linear_coefficients(pb);
  const auto al = alphas_of(pb);
  const double s2 = pb.sigma2;
  const double mean_ratio =
      moment(pb.mixture(), [s2](double r) { return (alpha(r, s2) - 1.0) / r; });
  const double q = 1.0 - pb.p;
  const double num = pb.p * al[0] * c.b[0] + q * al[1] * c.b[1];
  const double den = mean_ratio - (pb.p * al[0] * c.a[0] + q * al[1] * c.a[1]);
  return num / den;
}

double mixed_lower_threshold_rates_form(const RealOptionProblem& pb) {
  const auto al = alphas_of(pb);
  const double s2 = pb.sigma2;
  const double mean_ratio =
      moment(pb.mixture(), [s2](double r) { return (alpha(r, s2) - 1.0) / r; });
  const double num = (al[1] * pb.r1 - al[0] * pb.r2) * pb.strike;
  const double den = (pb.r1 - pb.r2) * mean_ratio - (al[0] - al[1]);
  return num / den;
}

double push_intensity(const RealOptionProblem& pb, double lower, std::size_t i) {
  if (i > 1) throw DomainError("push_intensity: rate index must be 0 or 1");
  const auto c = linear_coefficients(pb);
  const double r = pb.rate(i);
  const double al = alpha(r, pb.sigma2);
  const double a = c.a[i];
  const double w_u = a * lower + c.b[i];
  // w'(lower+) - w'(lower-) over 2 (w(lower) - K)
  const double jump = a - (al / lower) * (w_u - lower / r) - 1.0 / r;
  return jump / (2.0 * (w_u - pb.strike));
}

double pure_threshold(const RealOptionProblem& pb) {
  const auto mix = pb.mixture();
  const double s2 = pb.sigma2;
  const double mean_alpha = moment(mix, [s2](double r) { return alpha(r, s2); });
  const double mean_ratio = moment(mix, [s2](double r) { return (alpha(r, s2) - 1.0) / r; });
  return pb.strike * mean_alpha / mean_ratio;
}

RationalIntensity candidate_intensity(const RealOptionProblem& pb) {
  require_valid(pb);
  return {pb.p * pb.r2 + (1.0 - pb.p) * pb.r1, pb.r1 * pb.r2 * pb.strike, upper_threshold(pb)};
}

MixedThresholdStrategy mixed_candidate(const RealOptionProblem& pb) {
  if (classify_regime(pb) != Regime::Mixed)
    throw RegimeError("mixed_candidate: parameters are in the pure regime");
  MixedThresholdStrategy s = raw_mixed_strategy(pb);

  const double root = verifier::smoothfit_root(pb);
  if (relative_gap(root, s.lower) > 1e-8) {
    std::ostringstream os;
    os.precision(17);
    os << "mixed_candidate: lower threshold formula " << s.lower
       << " disagrees with smooth-fit root " << root;
    throw ConsistencyError(os.str());
  }
  const double push2 = push_intensity(pb, s.lower, 1);
  if (relative_gap(s.push, push2) > 1e-10) {
    std::ostringstream os;
    os.precision(17);
    os << "mixed_candidate: push from rate 1 (" << s.push << ") and rate 2 (" << push2
       << ") disagree";
    throw ConsistencyError(os.str());
  }
  if (!(s.lower >= intensity_root(pb) && s.lower < s.upper && s.push > 0.0))
    throw ConsistencyError("mixed_candidate: candidate is not a proper mixed threshold rule");
  return s;
}

MixedThresholdStrategy pure_candidate(const RealOptionProblem& pb) {
  if (classify_regime(pb) != Regime::Pure)
    throw RegimeError("pure_candidate: parameters are in the mixed regime");
  return MixedThresholdStrategy::pure(pure_threshold(pb));
}

EquilibriumSolution solve(const RealOptionProblem& pb) {
  require_valid(pb);
  if (classify_regime(pb) == Regime::Mixed) return assemble_mixed(pb, mixed_candidate(pb));
  return assemble_pure(pb, pure_candidate(pb).lower);
}

EquilibriumSolution mixed_solution_unchecked(const RealOptionProblem& pb) {
  require_valid(pb);
  return assemble_mixed(pb, raw_mixed_strategy(pb));
}

EquilibriumSolution pure_solution_unchecked(const RealOptionProblem& pb) {
  require_valid(pb);
  return assemble_pure(pb, pure_threshold(pb));
}

double value_w_branch(const EquilibriumSolution& sol, Branch branch, double x, std::size_t i) {
  switch (branch) {
    case Branch::Continuation:
      return sol.power[i] * std::pow(x, sol.alphas[i]) + x / sol.problem.rate(i);
    case Branch::Randomization:
      return sol.linear.a[i] * x + sol.linear.b[i];
    case Branch::Stopping:
      break;
  }
  return sol.problem.strike;
}

namespace {

double branch_d1(const EquilibriumSolution& sol, Branch branch, double x, std::size_t i) {
  switch (branch) {
    case Branch::Continuation:
      return sol.alphas[i] * sol.power[i] * std::pow(x, sol.alphas[i] - 1.0) +
             1.0 / sol.problem.rate(i);
    case Branch::Randomization:
      return sol.linear.a[i];
    case Branch::Stopping:
      break;
  }
  return 0.0;
}

double branch_d2(const EquilibriumSolution& sol, Branch branch, double x, std::size_t i) {
  if (branch != Branch::Continuation) return 0.0;
  const double al = sol.alphas[i];
  return al * (al - 1.0) * sol.power[i] * std::pow(x, al - 2.0);
}

Branch branch_at(const EquilibriumSolution& sol, double x) {
  const auto& s = sol.strategy;
  if (x < s.lower) return Branch::Continuation;
  if (sol.regime == Regime::Mixed && x < s.upper) return Branch::Randomization;
  return Branch::Stopping;
}

// Branch immediately to the left of x (differs from branch_at only at a threshold).
Branch branch_left_of(const EquilibriumSolution& sol, double x) {
  const auto& s = sol.strategy;
  if (x <= s.lower) return Branch::Continuation;
  if (sol.regime == Regime::Mixed && x <= s.upper) return Branch::Randomization;
  return Branch::Stopping;
}

void check_index(std::size_t i) {
  if (i > 1) throw DomainError("rate index must be 0 or 1");
}

}  // namespace

double value_w(const EquilibriumSolution& sol, double x, std::size_t i) {
  require_positive_state(x, "value_w");
  check_index(i);
  return value_w_branch(sol, branch_at(sol, x), x, i);
}

OneSided value_w_prime(const EquilibriumSolution& sol, double x, std::size_t i) {
  require_positive_state(x, "value_w_prime");
  check_index(i);
  return {branch_d1(sol, branch_left_of(sol, x), x, i), branch_d1(sol, branch_at(sol, x), x, i)};
}

double value_w_second(const EquilibriumSolution& sol, double x, std::size_t i) {
  require_positive_state(x, "value_w_second");
  check_index(i);
  return branch_d2(sol, branch_left_of(sol, x), x, i);
}

double value_J(const EquilibriumSolution& sol, double x) {
  const double p = sol.problem.p;
  return p * value_w(sol, x, 0) + (1.0 - p) * value_w(sol, x, 1);
}

OneSided value_J_prime(const EquilibriumSolution& sol, double x) {
  const double p = sol.problem.p;
  const auto d0 = value_w_prime(sol, x, 0);
  const auto d1 = value_w_prime(sol, x, 1);
  return {p * d0.left + (1.0 - p) * d1.left, p * d0.right + (1.0 - p) * d1.right};
}

double value_J_second(const EquilibriumSolution& sol, double x) {
  const double p = sol.problem.p;
  return p * value_w_second(sol, x, 0) + (1.0 - p) * value_w_second(sol, x, 1);
}

}  // namespace eqstop::closedform
