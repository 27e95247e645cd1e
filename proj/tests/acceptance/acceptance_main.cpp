// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
//
// Oracles here are written independently of the library: the randomization
// region values come from solving the two linear identities directly, and
// the lower threshold from bisecting the smooth-fit slope built on them.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eqstop/closedform.hpp"
#include "eqstop/pathsim.hpp"
#include "eqstop/verifier.hpp"

using namespace eqstop;
namespace cf = eqstop::closedform;
namespace ps = eqstop::pathsim;

namespace {

const RealOptionProblem kFig1a{0.2, 3.0, 0.5, 0.2, 2.0};
const RealOptionProblem kFig1b{0.2, 3.0, 0.5, 0.2, 0.8};
constexpr std::uint64_t kSeed = 20240611;
constexpr double kInf = std::numeric_limits<double>::infinity();

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double alpha_oracle(double r, double s2) { return 0.5 + std::sqrt(0.25 + 2.0 * r / s2); }

// w_1, w_2 on the randomization region from p w1 + (1-p) w2 = K and
// p r1 w1 + (1-p) r2 w2 = x.
std::array<double, 2> region_values(const RealOptionProblem& pb, double x) {
  const double w1 = (x - pb.r2 * pb.strike) / (pb.p * (pb.r1 - pb.r2));
  const double w2 = (pb.strike - pb.p * w1) / (1.0 - pb.p);
  return {w1, w2};
}

// J'(u-) with y_i = x / r_i + D_i x^alpha_i matched to the region values at u.
double smooth_fit_slope(const RealOptionProblem& pb, double u) {
  const auto w = region_values(pb, u);
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double r = pb.rate(i), a = alpha_oracle(r, pb.sigma2);
    acc += pb.weight(i) * (1.0 / r + a * (w[i] - u / r) / u);
  }
  return acc;
}

// First sign change of the smooth-fit slope on (0, xbar), refined by bisection.
double smooth_fit_root_oracle(const RealOptionProblem& pb, double xbar) {
  const int n = 4000;
  double lo = xbar / n, f_lo = smooth_fit_slope(pb, lo);
  for (int k = 2; k < n; ++k) {
    const double hi = xbar * k / n, f_hi = smooth_fit_slope(pb, hi);
    if ((f_lo < 0.0) != (f_hi < 0.0)) {
      double a = lo, b = hi;
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = smooth_fit_slope(pb, m);
        ((fm < 0.0) == (f_lo < 0.0) ? a : b) = m;
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    f_lo = f_hi;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double fd_error(const cf::EquilibriumSolution& sol, std::size_t n) {
  const double pins[] = {sol.strategy.lower, sol.strategy.upper};
  const auto grid = verifier::Grid::uniform(3e-3, 6.6, n, pins);
  const auto fd = verifier::fd_solve_w(sol.problem, sol.strategy, grid);
  double worst = 0.0;
  for (int i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max(worst, rel(fd.values[i][j], cf::value_w(sol, grid[j], i)));
  return worst;
}

bool candidate_passes(const std::function<cf::EquilibriumSolution()>& make) {
  try {
    const auto sol = make();
    const auto rep = verifier::check_conditions(sol, verifier::default_grid(sol),
                                                verifier::Tolerances::for_solution(sol));
    return rep.conditions_passed();
  } catch (const std::exception&) {
    return false;
  }
}

// ---------------------------------------------------------------------------

void regime_reproduction(Outcome& o) {
  const auto a = cf::solve(kFig1a);
  const auto b = cf::solve(kFig1b);
  o.detail << "r2=2 -> " << cf::to_string(a.regime) << ", r2=0.8 -> " << cf::to_string(b.regime);
  o.require(a.regime == cf::Regime::Mixed, "r2=2 should be mixed");
  o.require(b.regime == cf::Regime::Pure, "r2=0.8 should be pure");
}

void exact_fixtures(Outcome& o) {
  const auto sol = cf::solve(kFig1a);
  const auto& s = sol.strategy;
  const double e_xbar = rel(s.upper, 3.3);
  const double e_u = rel(s.lower, 30.0 / 11.0);
  const double e_lam = rel(sol.intensity(s.lower), 22.0 / 7.0);
  const double p1 = cf::push_intensity(kFig1a, s.lower, 0);
  const double p2 = cf::push_intensity(kFig1a, s.lower, 1);
  const double e_push = rel(p1, p2);
  const double e_root = rel(s.lower, smooth_fit_root_oracle(kFig1a, 3.3));
  o.detail << "rel err xbar " << e_xbar << ", xlow " << e_u << ", lambda(xlow) " << e_lam
           << ", push i=1 vs 2 " << e_push << ", root oracle " << e_root;
  o.require(e_xbar <= 1e-12, "xbar");
  o.require(e_u <= 1e-12, "xlow");
  o.require(e_lam <= 1e-12, "lambda(xlow)");
  o.require(e_push <= 1e-10, "push agreement");
  o.require(e_root <= 1e-8, "smooth-fit root");
}

void smooth_fit_and_identities(Outcome& o) {
  double worst_fit = 0.0, worst_mix = 0.0, worst_rate = 0.0;
  int region_points = 0;
  for (const auto& pb : {kFig1a, kFig1b}) {
    const auto sol = cf::solve(pb);
    const double u = sol.strategy.lower, K = pb.strike;
    const auto d = cf::value_J_prime(sol, u);
    worst_fit = std::max({worst_fit, std::abs(d.left) / (K / u), std::abs(d.right) / (K / u)});
    if (sol.regime != cf::Regime::Mixed) continue;
    // Identities hold on the randomization region, which is empty for a
    // pure rule.
    const int n = 1001;
    for (int k = 0; k < n; ++k) {
      const double x = u + (sol.strategy.upper - u) * k / (n - 1);
      const double w1 = cf::value_w(sol, x, 0), w2 = cf::value_w(sol, x, 1);
      worst_mix = std::max(worst_mix, rel(pb.p * w1 + (1 - pb.p) * w2, K));
      worst_rate = std::max(worst_rate, rel(pb.p * pb.r1 * w1 + (1 - pb.p) * pb.r2 * w2, x));
      ++region_points;
    }
  }
  o.detail << "max |J'(xlow+-)| / (K/xlow) " << worst_fit << ", mix identity " << worst_mix
           << ", rate identity " << worst_rate << " over " << region_points << " points";
  o.require(worst_fit <= 1e-9, "smooth fit");
  o.require(worst_mix <= 1e-12, "p w1 + (1-p) w2 = K");
  o.require(worst_rate <= 1e-12, "p r1 w1 + (1-p) r2 w2 = x");
}

void verification_suite(Outcome& o) {
  for (const auto& pb : {kFig1a, kFig1b}) {
    const auto sol = cf::solve(pb);
    const auto rep = verifier::check_conditions(sol, verifier::default_grid(sol),
                                                verifier::Tolerances::for_solution(sol));
    o.detail << cf::to_string(sol.regime) << " equilibrium " << (rep.conditions_passed() ? "passes" : "fails")
             << "; ";
    o.require(rep.conditions_passed(), std::string(cf::to_string(sol.regime)) + " equilibrium");
  }
  const auto pure = cf::pure_solution_unchecked(kFig1a);
  const auto rep = verifier::check_conditions(pure, verifier::default_grid(pure),
                                              verifier::Tolerances::for_solution(pure));
  o.detail << "pure candidate under r2=2: (III) " << (rep.generator.passed ? "passes" : "fails")
           << " with violation " << rep.generator.violation << " at x=" << rep.generator.location;
  o.require(!rep.generator.passed, "pure candidate should fail (III)");
}

void fd_cross_check(Outcome& o) {
  const auto sol = cf::solve(kFig1a);
  const double e2001 = fd_error(sol, 2001);
  const double e4001 = fd_error(sol, 4001);
  const double ratio = e2001 / e4001;
  o.detail << "max rel err N=4001 " << e4001 << ", N=2001 " << e2001 << ", ratio " << ratio;
  o.require(e4001 <= 1e-3, "error at 4001 nodes");
  o.require(ratio >= 3.0 && ratio <= 5.0, "convergence ratio");
}

void monte_carlo(Outcome& o) {
  const auto sol = cf::solve(kFig1a);
  ps::SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.n_paths = 200000;
  cfg.master_seed = kSeed;
  const double u = sol.strategy.lower, xbar = sol.strategy.upper, K = kFig1a.strike;
  const double xs[] = {1.0, u, 3.0, xbar};
  const auto est = ps::estimate_J(kFig1a, sol.strategy, cfg, xs);
  for (const auto& e : est) {
    const double exact = cf::value_J(sol, e.x);
    const double diff = std::abs(e.mean - exact);
    o.detail << "x=" << e.x << " J=" << e.mean << " se=" << e.std_error << " exact=" << exact << "; ";
    if (e.x != xbar) o.require(diff <= std::max(3.0 * e.std_error, 0.01 * K), "closed form at x=" + std::to_string(e.x));
    if (e.x >= u && e.x <= xbar) o.require(std::abs(e.mean - K) <= 3.0 * e.std_error, "K at x=" + std::to_string(e.x));
  }
}

struct DistributionalRun {
  double survival_worst_z = 0.0;
  std::vector<double> survival_disc, survival_se;
  double lhs_disc = 0, lhs_se = 0, rhs_disc = 0, rhs_se = 0;
};

DistributionalRun distributional(double dt) {
  const auto model = ps::SimModel::from(kFig1a);
  const GeneralMixedStrategy clock{{{0.0, kInf}}, {}, [](double) { return 1.0; }};
  ps::SimConfig cfg;
  cfg.dt = dt;
  cfg.n_paths = 20000;
  cfg.master_seed = kSeed;
  DistributionalRun run;

  std::vector<double> ts;
  for (int k = 1; k <= 10; ++k) ts.push_back(0.1 * k);
  for (const auto& pt : ps::survival_check(model, clock, 1.0, cfg, ts)) {
    const double exact = std::exp(-pt.t);
    const double disc = std::max(std::abs(pt.empirical - exact), std::abs(pt.pathwise - exact));
    const double se = std::max(pt.empirical_se, pt.pathwise_se);
    run.survival_disc.push_back(disc);
    run.survival_se.push_back(se);
    run.survival_worst_z = std::max(run.survival_worst_z, disc / se);
  }

  // g = K, intensity c, rate r: E int e^{-rt} K c dt up to the clock = K c / (c + r).
  const double c = 1.0, r = 0.5, exact = kFig1a.strike * c / (c + r);
  const auto id = ps::identity_check(model, clock, cfg, r, 1.0);
  run.lhs_disc = std::abs(id.lhs - exact);
  run.lhs_se = id.lhs_se;
  run.rhs_disc = std::abs(id.rhs - exact);
  run.rhs_se = id.rhs_se;
  return run;
}

void distributional_identities(Outcome& o) {
  const auto a = distributional(1e-4);
  const auto b = distributional(5e-5);
  o.detail << "survival max |dev|/se " << a.survival_worst_z << " (dt=1e-4), " << b.survival_worst_z
           << " (dt=5e-5); identity lhs/rhs dev " << a.lhs_disc << "/" << a.rhs_disc << " -> "
           << b.lhs_disc << "/" << b.rhs_disc << " (se " << a.lhs_se << "/" << a.rhs_se << ")";
  for (const auto* run : {&a, &b}) {
    o.require(run->survival_worst_z <= 3.0, "survival within 3 sigma");
    o.require(run->lhs_disc <= 3.0 * run->lhs_se, "identity lhs within 3 sigma");
    o.require(run->rhs_disc <= 3.0 * run->rhs_se, "identity rhs within 3 sigma");
  }
  // Halving dt must not make any discrepancy worse beyond Monte Carlo noise.
  bool improving = true;
  for (std::size_t k = 0; k < a.survival_disc.size(); ++k)
    improving &= b.survival_disc[k] <= a.survival_disc[k] + 3.0 * std::hypot(a.survival_se[k], b.survival_se[k]);
  improving &= b.lhs_disc <= a.lhs_disc + 3.0 * std::hypot(a.lhs_se, b.lhs_se);
  improving &= b.rhs_disc <= a.rhs_disc + 3.0 * std::hypot(a.rhs_se, b.rhs_se);
  o.require(improving, "not improving at dt=5e-5");
}

void small_time(Outcome& o) {
  const auto model = ps::SimModel::from(kFig1a);
  const std::vector<double> hs{0.2, 0.1, 0.05};
  ps::SimConfig cfg;
  cfg.dt = 5e-4 * hs[0] * hs[0];
  cfg.n_paths = 20000;
  cfg.master_seed = kSeed;
  const auto rows = ps::smalltime_diagnostics(model, 2.0, hs, cfg);
  for (const auto& r : rows)
    o.detail << "h=" << r.h << ": " << r.h2_over_tau << ", " << r.l_sq_mean_over_tau << ", "
             << r.l2_over_tau << ", " << r.tau2_over_tau << ", " << r.tau_l_over_tau << "; ";
  const auto& last = rows.back();
  o.require(rel(last.h2_over_tau, 0.8) <= 0.10, "h^2/E tau");
  o.require(rel(last.l_sq_mean_over_tau, 0.8) <= 0.10, "(E l)^2/E tau");
  o.require(rel(last.l2_over_tau, 1.6) <= 0.15, "E l^2/E tau");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto &big = rows[k - 1], &small = rows[k];
    o.require(small.tau2_over_tau <=
                  big.tau2_over_tau + 3.0 * std::hypot(big.tau2_over_tau_se, small.tau2_over_tau_se),
              "E tau^2/E tau monotone");
    o.require(small.tau_l_over_tau <=
                  big.tau_l_over_tau + 3.0 * std::hypot(big.tau_l_over_tau_se, small.tau_l_over_tau_se),
              "E tau l/E tau monotone");
  }
}

void sweep_dichotomy(Outcome& o) {
  std::mt19937_64 gen(0xacce97);
  std::uniform_real_distribution<double> s2(0.05, 1.0), K(0.5, 10.0), p(0.05, 0.95), r(0.05, 4.0);
  int counterexamples = 0, mixed = 0, mismatched = 0;
  for (int k = 0; k < 200; ++k) {
    double r1 = r(gen), r2 = r(gen);
    while (r1 == r2) r2 = r(gen);
    if (r1 > r2) std::swap(r1, r2);
    const RealOptionProblem pb{s2(gen), K(gen), p(gen), r1, r2};
    const bool pure_ok = candidate_passes([&] { return cf::pure_solution_unchecked(pb); });
    const bool mixed_ok = candidate_passes([&] { return cf::mixed_solution_unchecked(pb); });
    if (pure_ok == mixed_ok) {
      ++counterexamples;
      o.detail << "counterexample sigma2=" << pb.sigma2 << " K=" << pb.strike << " p=" << pb.p
               << " r1=" << r1 << " r2=" << r2 << " (pure " << pure_ok << ", mixed " << mixed_ok << "); ";
      continue;
    }
    mixed += mixed_ok;
    mismatched += (mixed_ok != (cf::classify_regime(pb) == cf::Regime::Mixed));
  }
  o.detail << "200 sets: " << mixed << " mixed, " << 200 - mixed - counterexamples << " pure, "
           << counterexamples << " counterexamples, " << mismatched << " disagree with the classifier";
  o.require(counterexamples == 0, "exactly one candidate passes");
  o.require(mismatched == 0, "passing candidate matches the regime");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  void (*body)(Outcome&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "regime reproduction", 1.0, regime_reproduction},
      {2, "exact-arithmetic fixtures", 0.0, exact_fixtures},
      {3, "smooth fit and value identities", 0.0, smooth_fit_and_identities},
      {4, "verification suite", 5.0, verification_suite},
      {5, "finite-difference cross-check", 10.0, fd_cross_check},
      {6, "Monte Carlo validation", 300.0, monte_carlo},
      {7, "distributional identities", 0.0, distributional_identities},
      {8, "small-time diagnostics", 0.0, small_time},
      {9, "parameter-sweep dichotomy", 0.0, sweep_dichotomy},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0) o.require(secs < c.budget_s, "runtime over " + std::to_string(c.budget_s) + " s");
    failures += !o.pass;
    std::printf("%s %d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
