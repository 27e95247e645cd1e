#pragma once

// Monte Carlo engine for local-time pushed mixed stopping times.
//
// A path evolves the state on a fixed time grid (exact log-space steps for
// driftless GBM, Euler-Maruyama otherwise) and accumulates
//   Lambda_t = sum_i w_i l^{x_i}_t + int lambda(X_s) ds
// with the intensity integrated by the left-point rule and local time taken
// from the discrete Tanaka defect
//   |X' - a| - |X - a| - sgn(X - a) (X' - X),   sgn(0) = 0.
// The path stops at the first grid time where Lambda >= U (U ~ Exp(1),
// drawn once per path) or the state leaves the continuation set.
//
// Every path owns a counter-based random substream addressed by
// (master_seed, path index), so aggregate results are bit-identical for
// any number of worker threads.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "eqstop/stopcore.hpp"

namespace eqstop::pathsim {

enum class TailMode { Truncate, AnalyticCorrection };

struct SimConfig {
  double dt = 1e-3;
  std::size_t n_paths = 10000;
  std::uint64_t master_seed = 20240611;
  double t_max = 0.0;  // 0 selects the horizon from the tail-bias target
  TailMode tail_mode = TailMode::AnalyticCorrection;
  unsigned threads = 0;  // 0 = hardware concurrency; EQSTOP_THREADS caps either way
  /// Take one exact multi-step GBM increment while the state is far below
  /// the quiet level of a threshold rule (no intensity, no push point, no
  /// exit within 8 standard deviations of the step).
  bool skip_quiet = true;

  /// Throws PreconditionError unless dt > 0, n_paths >= 1 and
  /// (t_max == 0 or t_max >= dt).
  void check() const;
};

/// Worker count after applying the EQSTOP_THREADS cap.
unsigned resolve_threads(unsigned requested);

/// State dynamics, costs and discounting for a simulation.
struct SimModel {
  DiffusionSpec diffusion;
  PayoffSpec payoff;
  DiscountMixture mix;
  /// f(x) = x under a martingale state: per-step running cost uses the exact
  /// conditional mean e^{-rt} X (1 - e^{-r dt}) / r and the analytic tail
  /// correction is available.
  bool linear_running_cost = false;
  /// Set by from(); enables automatic horizon selection.
  std::optional<RealOptionProblem> source;

  static SimModel from(const RealOptionProblem& problem);
};

using Strategy = std::variant<MixedThresholdStrategy, GeneralMixedStrategy>;

enum class StopCause { Immediate, Clock, Barrier, Censored };

const char* to_string(StopCause c) noexcept;

struct PathOutcome {
  double stop_time = 0.0;   // censoring time when censored
  bool censored = false;
  double stop_state = 0.0;
  std::vector<double> running_cost;  // realized int_0^tau e^{-r_k s} f(X_s) ds per mixture rate
  double accumulated_intensity = 0.0;  // Lambda at the stop
  double local_time = 0.0;  // at the threshold push point (first push point for general rules)
  StopCause cause = StopCause::Censored;
};

/// Smallest grid-aligned horizon whose analytic tail bias is below 1e-3 K
/// for a real-options start state x: (x + K) sum p_k e^{-r_k t} under the
/// analytic correction, sum p_k (x / r_k + K) e^{-r_k t} under truncation.
double auto_horizon(const RealOptionProblem& problem, double x, double dt, TailMode mode);

/// Bound on the bias left after the tail treatment at horizon t_max.
double tail_bias_bound(const RealOptionProblem& problem, double x, double t_max, TailMode mode);

/// One path from x0. Requires cfg.t_max > 0 unless the model carries the
/// real-options payoff (then the horizon is selected automatically).
PathOutcome simulate_path(const SimModel& model, const Strategy& strategy, double x0,
                          const SimConfig& cfg, std::uint64_t path_index);

struct Estimate {
  double x = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double tail_bias_bound = 0.0;
  double horizon = 0.0;
  std::size_t n_paths = 0;
  std::size_t censored = 0;
};

/// J and both w(., r_i) estimated on one shared set of paths.
struct StateEstimate {
  Estimate J;
  std::array<Estimate, 2> w;
};

std::vector<StateEstimate> estimate_all(const RealOptionProblem& problem, const Strategy& strategy,
                                        const SimConfig& cfg, std::span<const double> eval_states);

std::vector<Estimate> estimate_J(const RealOptionProblem& problem, const Strategy& strategy,
                                 const SimConfig& cfg, std::span<const double> eval_states);

std::vector<Estimate> estimate_w(const RealOptionProblem& problem, const Strategy& strategy,
                                 const SimConfig& cfg, std::span<const double> eval_states,
                                 std::size_t rate_index);

// ---------------------------------------------------------------------------
// Distributional checks
// ---------------------------------------------------------------------------

struct SurvivalPoint {
  double t = 0.0;
  double empirical = 0.0;     // fraction with tau^Psi > t
  double empirical_se = 0.0;
  double pathwise = 0.0;      // mean of e^{-Psi_t} on an independent path set
  double pathwise_se = 0.0;
  double z = 0.0;
};

/// Compares P(tau^Psi > t) with E[e^{-Psi_t}] on independent path sets.
/// The continuation set is ignored: this concerns the clock alone.
std::vector<SurvivalPoint> survival_check(const SimModel& model, const Strategy& strategy,
                                          double x0, const SimConfig& cfg,
                                          std::span<const double> t_grid);

struct IdentityResult {
  double lhs = 0.0;  // E int_0^{tau^{Psi,D}} e^{-rt} g(X_t) dPsi_t
  double lhs_se = 0.0;
  double rhs = 0.0;  // E e^{-r tau^Psi} g(X_{tau^Psi}) 1{tau^Psi <= tau^D}
  double rhs_se = 0.0;
  double z = 0.0;
};

/// Both sides of the discounted-stopping identity on independent path sets.
/// x must lie in the continuation set. With r == 0 cfg.t_max must be set.
IdentityResult identity_check(const SimModel& model, const Strategy& strategy,
                              const SimConfig& cfg, double rate, double x);

struct SmallTimeRow {
  double h = 0.0;
  double dt = 0.0;
  double mean_exit_time = 0.0;
  double h2_over_tau = 0.0, h2_over_tau_se = 0.0;            // -> sigma(x)^2
  double tau2_over_tau = 0.0, tau2_over_tau_se = 0.0;        // -> 0
  double l_sq_mean_over_tau = 0.0, l_sq_mean_over_tau_se = 0.0;  // (E l)^2 / E tau -> sigma(x)^2
  double tau_l_over_tau = 0.0, tau_l_over_tau_se = 0.0;      // -> 0
  double l2_over_tau = 0.0, l2_over_tau_se = 0.0;            // E l^2 / E tau -> 2 sigma(x)^2
  std::size_t censored = 0;
};

/// Monte Carlo estimates of the small-h limits of the exit time tau_h from
/// (x - h, x + h) and the local time l^x_{tau_h}. cfg.dt is the step for the
/// first h; later entries use dt (h / h_0)^2 so every h is resolved by the
/// same number of steps. h_list must be strictly decreasing with
/// [x - h, x + h] inside the state interval.
std::vector<SmallTimeRow> smalltime_diagnostics(const SimModel& model, double x,
                                                std::span<const double> h_list,
                                                const SimConfig& cfg);

}  // namespace eqstop::pathsim
