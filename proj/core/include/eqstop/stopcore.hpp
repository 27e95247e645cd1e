#pragma once

// Shared domain types for time-inconsistent stopping under weighted
// discounting: discount mixtures, diffusion and payoff data, the GBM
// real-options problem, and the two families of randomized stopping rules.

#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqstop {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation requested for the wrong equilibrium regime.
class RegimeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Caller broke a documented precondition (grid layout, empty inputs, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown: singular systems, non-finite states, failed roots.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RootNotFoundError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Two independent routes to the same quantity disagreed.
class ConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct Violation {
  std::string field;
  std::string constraint;

  bool operator==(const Violation&) const = default;
};

/// Problem parameters failed validation; carries every violation found.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// ---------------------------------------------------------------------------
// Discount mixture
// ---------------------------------------------------------------------------

/// Finite mixture of exponential discount rates, h(t) = sum_k p_k exp(-r_k t).
///
/// Weights are strictly positive and sum to one (within 1e-12); rates are
/// strictly positive and strictly increasing. Any number of points is
/// allowed here; the two-point restriction lives in RealOptionProblem.
class DiscountMixture {
 public:
  DiscountMixture(std::vector<double> weights, std::vector<double> rates);

  static DiscountMixture single(double rate);
  static DiscountMixture two_point(double p, double r1, double r2);

  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> rates() const noexcept { return rates_; }
  std::size_t size() const noexcept { return rates_.size(); }
  double min_rate() const noexcept { return rates_.front(); }
  double max_rate() const noexcept { return rates_.back(); }

 private:
  std::vector<double> weights_;
  std::vector<double> rates_;
};

/// h(t) for t >= 0. Throws DomainError for negative or non-finite t.
double discount_eval(const DiscountMixture& mix, double t);

/// Mixture expectation sum_k p_k phi(r_k).
template <std::invocable<double> Transform>
double moment(const DiscountMixture& mix, Transform&& phi) {
  double acc = 0.0;
  const auto w = mix.weights();
  const auto r = mix.rates();
  for (std::size_t k = 0; k < r.size(); ++k) acc += w[k] * static_cast<double>(phi(r[k]));
  return acc;
}

// ---------------------------------------------------------------------------
// Diffusion and payoff data
// ---------------------------------------------------------------------------

using ScalarFn = std::function<double(double)>;

/// dX = mu(X) dt + sigma(X) dW on the open interval (lower, upper).
struct DiffusionSpec {
  ScalarFn drift;
  ScalarFn volatility;
  double lower = 0.0;
  double upper = 0.0;
  /// Set for driftless GBM (dX = s X dW); enables exact log-space stepping.
  std::optional<double> gbm_volatility;

  static DiffusionSpec driftless_gbm(double sigma);

  /// Generator A u(x) = mu(x) u'(x) + sigma(x)^2 u''(x) / 2.
  double generator(double x, double d1, double d2) const;
  bool contains(double x) const noexcept { return x > lower && x < upper; }
};

/// Running cost f >= 0 and terminal cost g > 0 with analytic g', g''.
struct PayoffSpec {
  ScalarFn running;
  ScalarFn terminal;
  ScalarFn terminal_d1;
  ScalarFn terminal_d2;

  /// f(x) = x, g = K.
  static PayoffSpec real_option(double strike);
};

// ---------------------------------------------------------------------------
// Real-options problem
// ---------------------------------------------------------------------------

/// Driftless GBM with variance rate sigma2, running cost x, terminal cost K,
/// discounted by p exp(-r1 t) + (1-p) exp(-r2 t).
///
/// A plain aggregate so that invalid parameter sets can be represented and
/// reported by validate(); make() is the checked constructor.
struct RealOptionProblem {
  double sigma2 = 0.0;
  double strike = 0.0;
  double p = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;

  /// Throws ValidationError listing every violated constraint.
  static RealOptionProblem make(double sigma2, double strike, double p, double r1, double r2);

  double rate(std::size_t i) const { return i == 0 ? r1 : r2; }
  double weight(std::size_t i) const { return i == 0 ? p : 1.0 - p; }

  DiscountMixture mixture() const;
  DiffusionSpec diffusion() const;
  PayoffSpec payoff() const;

  bool operator==(const RealOptionProblem&) const = default;
};

/// Empty when the problem is valid.
std::vector<Violation> validate(const RealOptionProblem& problem);

/// Throws ValidationError when validate() reports anything.
void require_valid(const RealOptionProblem& problem);

// ---------------------------------------------------------------------------
// Stopping strategies
// ---------------------------------------------------------------------------

struct Interval {
  double lo;
  double hi;
  bool contains(double x) const noexcept { return x > lo && x < hi; }
};

struct PushPoint {
  double location;
  double weight;
};

/// Local-time pushed mixed strategy: stop at the first exit from the
/// continuation set D or when Psi_t = sum_i w_i l^{x_i}_t + int psi(X) dt
/// exceeds an independent Exp(1) draw.
struct GeneralMixedStrategy {
  std::vector<Interval> continuation;
  std::vector<PushPoint> pushes;
  ScalarFn intensity;  // consulted only inside D

  bool in_continuation(double x) const noexcept;
  /// psi(x) inside D, zero on the complement.
  double intensity_at(double x) const;
  /// Throws PreconditionError when a push point lies outside D or has a
  /// non-positive weight.
  void check() const;
};

/// Threshold strategy: continue below `lower`, randomize on [lower, upper)
/// with intensity lambda(x) plus a local-time push at `lower`, stop surely
/// at and above `upper`. lower == upper is the pure threshold rule.
struct MixedThresholdStrategy {
  double lower = 0.0;
  double upper = 0.0;
  ScalarFn intensity;  // consulted only on [lower, upper)
  double push = 0.0;

  static MixedThresholdStrategy pure(double threshold);

  bool is_pure() const noexcept { return lower == upper; }
  double intensity_at(double x) const;
  /// Throws PreconditionError on lower > upper, a pure rule carrying a push,
  /// or a mixed rule without a positive push.
  void check() const;
};

}  // namespace eqstop
