#include "eqstop/pathsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>

#include "engine.hpp"

namespace eqstop::pathsim {

void SimConfig::check() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("SimConfig: dt must be > 0");
  if (n_paths < 1) throw PreconditionError("SimConfig: n_paths must be >= 1");
  if (!(t_max == 0.0 || (t_max >= dt && std::isfinite(t_max))))
    throw PreconditionError("SimConfig: t_max must be 0 (automatic) or >= dt");
}

unsigned resolve_threads(unsigned requested) {
  unsigned n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EQSTOP_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

SimModel SimModel::from(const RealOptionProblem& problem) {
  require_valid(problem);
  return SimModel{problem.diffusion(), problem.payoff(), problem.mixture(), true, problem};
}

const char* to_string(StopCause c) noexcept {
  switch (c) {
    case StopCause::Immediate: return "immediate";
    case StopCause::Clock: return "clock";
    case StopCause::Barrier: return "barrier";
    case StopCause::Censored: return "censored";
  }
  return "?";
}

namespace {

double rate_tail_bound(double r, double x, double K, double t, TailMode mode) {
  const double d = std::exp(-r * t);
  return mode == TailMode::AnalyticCorrection ? K * d : (x / r + K) * d;
}

double horizon_target(const RealOptionProblem& pb, double x, double t, TailMode mode) {
  double acc = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const double r = pb.rate(k);
    const double scale = mode == TailMode::AnalyticCorrection ? x + pb.strike : x / r + pb.strike;
    acc += pb.weight(k) * scale * std::exp(-r * t);
  }
  return acc;
}

}  // namespace

namespace detail {

void check_rule_fits(const SimModel& model, const Rule& rule) {
  const auto& d = model.diffusion;
  auto inside = [&](double v) { return v > d.lower && v <= d.upper; };
  if (rule.threshold && !(inside(rule.threshold->lower) && inside(rule.threshold->upper)))
    throw PreconditionError("pathsim: strategy thresholds must lie inside the state interval");
  for (const auto& pp : rule.pushes)
    if (!d.contains(pp.location))
      throw PreconditionError("pathsim: push points must lie inside the state interval");
}

Rule make_rule(const Strategy& strategy) {
  Rule rule;
  if (const auto* t = std::get_if<MixedThresholdStrategy>(&strategy)) {
    t->check();
    rule.threshold = t;
    if (t->push > 0.0) rule.pushes.push_back({t->lower, t->push});
    rule.local_time_at = t->lower;
    rule.quiet_below = t->lower;
  } else {
    const auto& g = std::get<GeneralMixedStrategy>(strategy);
    g.check();
    rule.general = &g;
    rule.pushes = g.pushes;
    if (!g.pushes.empty()) rule.local_time_at = g.pushes.front().location;
  }
  return rule;
}

std::size_t step_count(double horizon, double dt) {
  const double n = std::ceil(horizon / dt - 1e-9);
  return static_cast<std::size_t>(std::max(1.0, n));
}

PathOutcome run_path(const SimModel& model, const Rule& rule, const PathRun& run,
                     const Probe* probe, Trace* trace) {
  const auto& d = model.diffusion;
  const auto rates = model.mix.rates();
  const std::size_t nr = rates.size();
  const double dt = run.dt;

  PathOutcome out;
  out.running_cost.assign(nr, 0.0);
  rng::Substream rs(run.seed, run.path, run.domain);
  const double U = rs.exponential();
  if (trace) {
    trace->exp_draw = U;
    trace->lambda_at.clear();
    trace->identity_integral = 0.0;
  }
  const bool ignore_stops = probe && probe->ignore_stops;
  double x = run.x0;
  out.stop_state = x;
  if (!ignore_stops && !rule.in_continuation(x)) {
    out.cause = StopCause::Immediate;
    return out;
  }

  std::vector<double> disc(nr, 1.0), step_disc(nr), step_cost(nr);
  for (std::size_t k = 0; k < nr; ++k) {
    step_disc[k] = std::exp(-rates[k] * dt);
    step_cost[k] = -std::expm1(-rates[k] * dt) / rates[k];
  }
  const bool track_identity = probe && probe->identity && trace;
  const double id_rate = track_identity ? probe->identity_rate : 0.0;
  const double id_step = std::exp(-id_rate * dt);
  double id_disc = 1.0;

  const bool can_skip = run.skip_quiet && d.gbm_volatility && model.linear_running_cost &&
                        std::isfinite(rule.quiet_below);
  const bool track_local = !std::isnan(rule.local_time_at);
  const std::size_t n_snap = probe ? probe->snapshots.size() : 0;
  const double cap = 1.0 / dt;

  double lambda_acc = 0.0;
  std::size_t n = 0, snap = 0;
  while (n < run.n_steps) {
    std::size_t m = 1;
    if (can_skip && x < rule.quiet_below) {
      // Largest step whose 8-sigma log excursion stays below the quiet level.
      const double gap = std::log(rule.quiet_below / x) / (8.0 * *d.gbm_volatility);
      const double fit = gap * gap / dt;
      if (fit >= 2.0) {
        const std::size_t left = run.n_steps - n;
        m = fit < static_cast<double>(left) ? static_cast<std::size_t>(fit) : left;
        if (snap < n_snap) m = std::min(m, probe->snapshots[snap] - n);
        m = std::max<std::size_t>(m, 1);
      }
    }
    const double h = m == 1 ? dt : static_cast<double>(m) * dt;
    const double x_next = step_state(d, x, h, rs.standard_normal());
    if (!std::isfinite(x_next)) {
      std::ostringstream os;
      os.precision(17);
      os << "simulate_path: non-finite state at step " << n << " (t=" << static_cast<double>(n) * dt
         << ", x=" << x << ", path=" << run.path << ")";
      throw NumericalError(os.str());
    }

    if (model.linear_running_cost) {
      for (std::size_t k = 0; k < nr; ++k) {
        const double c = m == 1 ? step_cost[k] : -std::expm1(-rates[k] * h) / rates[k];
        out.running_cost[k] += disc[k] * x * c;
      }
    } else {
      const double f = model.payoff.running(x);
      for (std::size_t k = 0; k < nr; ++k) out.running_cost[k] += disc[k] * f * h;
    }

    double dl = m == 1 ? std::min(rule.intensity(x), cap) * h : 0.0;
    for (const auto& pp : rule.pushes) dl += pp.weight * tanaka(x, x_next, pp.location);
    if (track_local) out.local_time += tanaka(x, x_next, rule.local_time_at);
    if (track_identity) {
      const double counted = ignore_stops ? dl : std::min(dl, std::max(0.0, U - lambda_acc));
      trace->identity_integral += id_disc * model.payoff.terminal(x) * counted;
      id_disc *= m == 1 ? id_step : std::exp(-id_rate * h);
    }
    lambda_acc += dl;

    for (std::size_t k = 0; k < nr; ++k)
      disc[k] *= m == 1 ? step_disc[k] : std::exp(-rates[k] * h);
    n += m;
    x = x_next;
    while (snap < n_snap && probe->snapshots[snap] == n) {
      if (trace) trace->lambda_at.push_back(lambda_acc);
      ++snap;
    }
    if (ignore_stops) continue;

    const bool clock = lambda_acc >= U;
    if (clock || !rule.in_continuation(x)) {
      out.stop_time = static_cast<double>(n) * dt;
      out.stop_state = x;
      out.accumulated_intensity = lambda_acc;
      out.cause = clock ? StopCause::Clock : StopCause::Barrier;
      return out;
    }
  }
  out.censored = true;
  out.stop_time = static_cast<double>(n) * dt;
  out.stop_state = x;
  out.accumulated_intensity = lambda_acc;
  out.cause = StopCause::Censored;
  return out;
}

namespace {

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

SampleStats sample_stats(std::span<const double> v) {
  if (v.empty()) return {};
  const double shift = v.front();
  const std::size_t n = v.size();
  std::vector<double> dev(n), sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    dev[i] = v[i] - shift;
    sq[i] = dev[i] * dev[i];
  }
  const double nd = static_cast<double>(n);
  const double mean_dev = pairwise_sum(dev.data(), n) / nd;
  SampleStats out;
  out.mean = shift + mean_dev;
  if (n > 1) {
    const double var = std::max(0.0, (pairwise_sum(sq.data(), n) - nd * mean_dev * mean_dev) / (nd - 1.0));
    out.std_error = std::sqrt(var / nd);
  }
  return out;
}

}  // namespace detail

double auto_horizon(const RealOptionProblem& problem, double x, double dt, TailMode mode) {
  require_valid(problem);
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("auto_horizon: x must be > 0");
  if (!(dt > 0.0)) throw PreconditionError("auto_horizon: dt must be > 0");
  const double target = 1e-3 * problem.strike;
  if (horizon_target(problem, x, 0.0, mode) < target) return dt;
  double lo = 0.0, hi = 1.0;
  while (horizon_target(problem, x, hi, mode) >= target) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-3 * dt; ++it) {
    const double mid = 0.5 * (lo + hi);
    (horizon_target(problem, x, mid, mode) < target ? hi : lo) = mid;
  }
  return static_cast<double>(detail::step_count(hi, dt)) * dt;
}

double tail_bias_bound(const RealOptionProblem& problem, double x, double t_max, TailMode mode) {
  double acc = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    acc += problem.weight(k) * rate_tail_bound(problem.rate(k), x, problem.strike, t_max, mode);
  return acc;
}

PathOutcome simulate_path(const SimModel& model, const Strategy& strategy, double x0,
                          const SimConfig& cfg, std::uint64_t path_index) {
  cfg.check();
  if (!model.diffusion.contains(x0)) throw DomainError("simulate_path: x0 outside the state interval");
  const auto rule = detail::make_rule(strategy);
  detail::check_rule_fits(model, rule);
  double horizon = cfg.t_max;
  if (horizon == 0.0) {
    if (!model.source)
      throw PreconditionError("simulate_path: t_max is required for a general model");
    horizon = auto_horizon(*model.source, x0, cfg.dt, cfg.tail_mode);
  }
  const detail::PathRun run{x0, cfg.dt, detail::step_count(horizon, cfg.dt), cfg.master_seed,
                            detail::kDomainEstimate, path_index, cfg.skip_quiet};
  return detail::run_path(model, rule, run);
}

std::vector<StateEstimate> estimate_all(const RealOptionProblem& problem, const Strategy& strategy,
                                        const SimConfig& cfg, std::span<const double> eval_states) {
  require_valid(problem);
  cfg.check();
  if (eval_states.empty()) throw PreconditionError("estimate: eval_states is empty");
  for (double x : eval_states)
    if (!(x > 0.0) || !std::isfinite(x))
      throw PreconditionError("estimate: eval_states must lie inside (0, inf)");

  const SimModel model = SimModel::from(problem);
  const auto rule = detail::make_rule(strategy);
  detail::check_rule_fits(model, rule);
  const unsigned threads = resolve_threads(cfg.threads);
  const double K = problem.strike;
  const double p = problem.p;
  const std::size_t n = cfg.n_paths;
  const bool analytic = cfg.tail_mode == TailMode::AnalyticCorrection;

  std::vector<StateEstimate> out;
  out.reserve(eval_states.size());
  std::vector<double> y0(n), y1(n), j(n);
  std::vector<unsigned char> censored(n);
  for (double x : eval_states) {
    const double t_req = cfg.t_max > 0.0 ? cfg.t_max : auto_horizon(problem, x, cfg.dt, cfg.tail_mode);
    const std::size_t steps = detail::step_count(t_req, cfg.dt);
    const double horizon = static_cast<double>(steps) * cfg.dt;
    const detail::PathRun base{x, cfg.dt, steps, cfg.master_seed, detail::kDomainEstimate, 0,
                               cfg.skip_quiet};

    detail::parallel_for(n, threads, [&](std::size_t i) {
      detail::PathRun run = base;
      run.path = i;
      const PathOutcome o = detail::run_path(model, rule, run);
      censored[i] = o.censored ? 1 : 0;
      if (o.cause == StopCause::Immediate) {
        y0[i] = y1[i] = j[i] = K;
        return;
      }
      double term[2];
      for (std::size_t k = 0; k < 2; ++k) {
        const double r = problem.rate(k);
        if (!o.censored)
          term[k] = K * std::exp(-r * o.stop_time);
        else
          term[k] = analytic ? o.stop_state * std::exp(-r * horizon) / r : 0.0;
      }
      y0[i] = o.running_cost[0] + term[0];
      y1[i] = o.running_cost[1] + term[1];
      j[i] = p * y0[i] + (1.0 - p) * y1[i];
    });

    const std::size_t n_cens = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
    auto make = [&](std::span<const double> v, double bound) {
      const auto st = detail::sample_stats(v);
      return Estimate{x, st.mean, st.std_error, bound, horizon, n, n_cens};
    };
    StateEstimate se;
    se.J = make(j, tail_bias_bound(problem, x, horizon, cfg.tail_mode));
    se.w[0] = make(y0, rate_tail_bound(problem.r1, x, K, horizon, cfg.tail_mode));
    se.w[1] = make(y1, rate_tail_bound(problem.r2, x, K, horizon, cfg.tail_mode));
    out.push_back(se);
  }
  return out;
}

std::vector<Estimate> estimate_J(const RealOptionProblem& problem, const Strategy& strategy,
                                 const SimConfig& cfg, std::span<const double> eval_states) {
  std::vector<Estimate> out;
  for (const auto& s : estimate_all(problem, strategy, cfg, eval_states)) out.push_back(s.J);
  return out;
}

std::vector<Estimate> estimate_w(const RealOptionProblem& problem, const Strategy& strategy,
                                 const SimConfig& cfg, std::span<const double> eval_states,
                                 std::size_t rate_index) {
  if (rate_index > 1) throw DomainError("estimate_w: rate_index must be 0 or 1");
  std::vector<Estimate> out;
  for (const auto& s : estimate_all(problem, strategy, cfg, eval_states))
    out.push_back(s.w[rate_index]);
  return out;
}

}  // namespace eqstop::pathsim
