#include "eqstop/stopcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace eqstop {

namespace {

std::string join_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "invalid problem:";
  for (const auto& item : v) os << ' ' << item.field << " (" << item.constraint << ");";
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::invalid_argument(join_violations(violations)), violations_(std::move(violations)) {}

DiscountMixture::DiscountMixture(std::vector<double> weights, std::vector<double> rates)
    : weights_(std::move(weights)), rates_(std::move(rates)) {
  if (rates_.empty() || rates_.size() != weights_.size())
    throw DomainError("discount mixture: weights and rates must be non-empty and equally sized");
  for (std::size_t k = 0; k < rates_.size(); ++k) {
    if (!(weights_[k] > 0.0) || !std::isfinite(weights_[k]))
      throw DomainError("discount mixture: weights must be positive");
    if (!(rates_[k] > 0.0) || !std::isfinite(rates_[k]))
      throw DomainError("discount mixture: rates must be positive");
    if (k > 0 && !(rates_[k] > rates_[k - 1]))
      throw DomainError("discount mixture: rates must be strictly increasing");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("discount mixture: weights must sum to one");
  const double second = moment(*this, [](double r) { return r * r; });
  if (!std::isfinite(second)) throw DomainError("discount mixture: infinite second moment");
}

DiscountMixture DiscountMixture::single(double rate) { return DiscountMixture({1.0}, {rate}); }

DiscountMixture DiscountMixture::two_point(double p, double r1, double r2) {
  return DiscountMixture({p, 1.0 - p}, {r1, r2});
}

double discount_eval(const DiscountMixture& mix, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("discount_eval: t must be >= 0");
  return moment(mix, [t](double r) { return std::exp(-r * t); });
}

DiffusionSpec DiffusionSpec::driftless_gbm(double sigma) {
  DiffusionSpec d;
  d.drift = [](double) { return 0.0; };
  d.volatility = [sigma](double x) { return sigma * x; };
  d.lower = 0.0;
  d.upper = std::numeric_limits<double>::infinity();
  d.gbm_volatility = sigma;
  return d;
}

double DiffusionSpec::generator(double x, double d1, double d2) const {
  const double s = volatility(x);
  return drift(x) * d1 + 0.5 * s * s * d2;
}

PayoffSpec PayoffSpec::real_option(double strike) {
  PayoffSpec f;
  f.running = [](double x) { return x; };
  f.terminal = [strike](double) { return strike; };
  f.terminal_d1 = [](double) { return 0.0; };
  f.terminal_d2 = [](double) { return 0.0; };
  return f;
}

std::vector<Violation> validate(const RealOptionProblem& pb) {
  std::vector<Violation> out;
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!finite_pos(pb.sigma2)) out.push_back({"sigma2", "σ² > 0"});
  if (!finite_pos(pb.strike)) out.push_back({"K", "K > 0"});
  if (!(std::isfinite(pb.p) && pb.p > 0.0 && pb.p < 1.0)) out.push_back({"p", "p ∈ (0,1)"});
  if (!finite_pos(pb.r1)) out.push_back({"r1", "r1 > 0"});
  if (!std::isfinite(pb.r2) || !(pb.r2 > pb.r1)) out.push_back({"r2", "strictly increasing rates"});
  return out;
}

void require_valid(const RealOptionProblem& problem) {
  auto v = validate(problem);
  if (!v.empty()) throw ValidationError(std::move(v));
}

RealOptionProblem RealOptionProblem::make(double sigma2, double strike, double p, double r1,
                                          double r2) {
  RealOptionProblem pb{sigma2, strike, p, r1, r2};
  require_valid(pb);
  return pb;
}

DiscountMixture RealOptionProblem::mixture() const {
  require_valid(*this);
  return DiscountMixture::two_point(p, r1, r2);
}

DiffusionSpec RealOptionProblem::diffusion() const {
  return DiffusionSpec::driftless_gbm(std::sqrt(sigma2));
}

PayoffSpec RealOptionProblem::payoff() const { return PayoffSpec::real_option(strike); }

bool GeneralMixedStrategy::in_continuation(double x) const noexcept {
  return std::any_of(continuation.begin(), continuation.end(),
                     [x](const Interval& iv) { return iv.contains(x); });
}

double GeneralMixedStrategy::intensity_at(double x) const {
  if (!intensity || !in_continuation(x)) return 0.0;
  return intensity(x);
}

void GeneralMixedStrategy::check() const {
  if (continuation.empty()) throw PreconditionError("mixed strategy: empty continuation set");
  for (const auto& iv : continuation)
    if (!(iv.lo < iv.hi)) throw PreconditionError("mixed strategy: empty continuation interval");
  for (const auto& pp : pushes) {
    if (!(pp.weight > 0.0)) throw PreconditionError("mixed strategy: push weights must be > 0");
    if (!in_continuation(pp.location))
      throw PreconditionError("mixed strategy: push point outside the continuation set");
  }
}

MixedThresholdStrategy MixedThresholdStrategy::pure(double threshold) {
  return MixedThresholdStrategy{threshold, threshold, {}, 0.0};
}

double MixedThresholdStrategy::intensity_at(double x) const {
  if (is_pure() || !intensity || x < lower || x >= upper) return 0.0;
  return intensity(x);
}

void MixedThresholdStrategy::check() const {
  if (!(lower <= upper)) throw PreconditionError("threshold strategy: lower > upper");
  if (is_pure()) {
    if (push != 0.0) throw PreconditionError("threshold strategy: pure rule cannot carry a push");
    return;
  }
  if (!(push > 0.0)) throw PreconditionError("threshold strategy: mixed rule needs push > 0");
  if (!intensity) throw PreconditionError("threshold strategy: mixed rule needs an intensity");
}

}  // namespace eqstop
