#include <cmath>
#include <limits>

#include "engine.hpp"
#include "eqstop/pathsim.hpp"

namespace eqstop::pathsim {

namespace {

double z_score(const detail::SampleStats& a, const detail::SampleStats& b) {
  const double diff = a.mean - b.mean;
  const double se = std::hypot(a.std_error, b.std_error);
  if (se > 0.0) return diff / se;
  return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

/// Standard error of a smooth function of sample means, via the linearized
/// per-sample residual sum_j grad_j (v_j[i] - mean_j).
double delta_se(std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
  const std::size_t n = terms.begin()->second->size();
  std::vector<double> e(n, 0.0);
  for (const auto& [grad, v] : terms)
    for (std::size_t i = 0; i < n; ++i) e[i] += grad * (*v)[i];
  return detail::sample_stats(e).std_error;
}

}  // namespace

std::vector<SurvivalPoint> survival_check(const SimModel& model, const Strategy& strategy,
                                          double x0, const SimConfig& cfg,
                                          std::span<const double> t_grid) {
  cfg.check();
  if (t_grid.empty()) throw PreconditionError("survival_check: t_grid is empty");
  if (!model.diffusion.contains(x0)) throw DomainError("survival_check: x0 outside the state interval");
  std::vector<std::size_t> snaps;
  for (double t : t_grid) {
    if (!(t > 0.0) || !std::isfinite(t) || (cfg.t_max > 0.0 && t > cfg.t_max))
      throw PreconditionError("survival_check: t_grid must lie in (0, t_max]");
    const std::size_t s = detail::step_count(t, cfg.dt);
    if (!snaps.empty() && s <= snaps.back())
      throw PreconditionError("survival_check: t_grid must be increasing and at least dt apart");
    snaps.push_back(s);
  }
  const auto rule = detail::make_rule(strategy);
  detail::check_rule_fits(model, rule);
  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t n = cfg.n_paths;
  const std::size_t m = snaps.size();
  const detail::Probe probe{snaps, true};

  // Row-major [snapshot][path].
  std::vector<double> alive(m * n), weight(m * n);
  auto sweep = [&](std::uint64_t domain, auto&& record) {
    detail::parallel_for(n, threads, [&](std::size_t i) {
      detail::Trace trace;
      const detail::PathRun run{x0, cfg.dt, snaps.back(), cfg.master_seed, domain, i, cfg.skip_quiet};
      detail::run_path(model, rule, run, &probe, &trace);
      for (std::size_t s = 0; s < m; ++s) record(s, i, trace);
    });
  };
  sweep(detail::kDomainSurvivalEmpirical, [&](std::size_t s, std::size_t i, const detail::Trace& tr) {
    alive[s * n + i] = tr.lambda_at[s] < tr.exp_draw ? 1.0 : 0.0;
  });
  sweep(detail::kDomainSurvivalPathwise, [&](std::size_t s, std::size_t i, const detail::Trace& tr) {
    weight[s * n + i] = std::exp(-tr.lambda_at[s]);
  });

  std::vector<SurvivalPoint> out;
  for (std::size_t s = 0; s < m; ++s) {
    const auto a = detail::sample_stats(std::span(alive).subspan(s * n, n));
    const auto b = detail::sample_stats(std::span(weight).subspan(s * n, n));
    out.push_back({t_grid[s], a.mean, a.std_error, b.mean, b.std_error, z_score(a, b)});
  }
  return out;
}

IdentityResult identity_check(const SimModel& model, const Strategy& strategy,
                              const SimConfig& cfg, double rate, double x) {
  cfg.check();
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw DomainError("identity_check: r must be >= 0");
  if (!model.diffusion.contains(x)) throw DomainError("identity_check: x outside the state interval");
  const auto rule = detail::make_rule(strategy);
  detail::check_rule_fits(model, rule);
  if (!rule.in_continuation(x)) throw PreconditionError("identity_check: x must lie in the continuation set");

  double horizon = cfg.t_max;
  if (horizon == 0.0) {
    if (rate == 0.0) throw PreconditionError("identity_check: r = 0 needs an explicit t_max");
    horizon = std::log(1e4) / rate;
  }
  const std::size_t steps = detail::step_count(horizon, cfg.dt);
  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t n = cfg.n_paths;

  std::vector<double> lhs(n), rhs(n);
  const detail::Probe probe{{}, false, true, rate};
  detail::parallel_for(n, threads, [&](std::size_t i) {
    detail::Trace trace;
    const detail::PathRun run{x, cfg.dt, steps, cfg.master_seed, detail::kDomainIdentityLhs, i,
                              cfg.skip_quiet};
    detail::run_path(model, rule, run, &probe, &trace);
    lhs[i] = trace.identity_integral;
  });
  detail::parallel_for(n, threads, [&](std::size_t i) {
    const detail::PathRun run{x, cfg.dt, steps, cfg.master_seed, detail::kDomainIdentityRhs, i,
                              cfg.skip_quiet};
    const auto o = detail::run_path(model, rule, run);
    rhs[i] = o.cause == StopCause::Clock
                 ? std::exp(-rate * o.stop_time) * model.payoff.terminal(o.stop_state)
                 : 0.0;
  });
  const auto a = detail::sample_stats(lhs);
  const auto b = detail::sample_stats(rhs);
  return {a.mean, a.std_error, b.mean, b.std_error, z_score(a, b)};
}

std::vector<SmallTimeRow> smalltime_diagnostics(const SimModel& model, double x,
                                                std::span<const double> h_list,
                                                const SimConfig& cfg) {
  cfg.check();
  if (h_list.empty()) throw PreconditionError("smalltime_diagnostics: h_list is empty");
  const auto& d = model.diffusion;
  for (std::size_t k = 0; k < h_list.size(); ++k) {
    const double h = h_list[k];
    if (!(h > 0.0) || (k > 0 && !(h < h_list[k - 1])))
      throw PreconditionError("smalltime_diagnostics: h_list must be positive and strictly decreasing");
    if (!(x - h > d.lower && x + h < d.upper))
      throw PreconditionError("smalltime_diagnostics: [x - h, x + h] must lie inside the state interval");
  }
  const double vol = std::abs(d.volatility(x));
  if (!(vol > 0.0)) throw PreconditionError("smalltime_diagnostics: degenerate volatility at x");

  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t n = cfg.n_paths;
  const double h0 = h_list.front();
  std::vector<SmallTimeRow> rows;
  std::vector<double> tau(n), tau2(n), loc(n), loc2(n), tau_loc(n);
  std::vector<unsigned char> censored(n);

  for (std::size_t k = 0; k < h_list.size(); ++k) {
    const double h = h_list[k];
    const double dt = cfg.dt * (h / h0) * (h / h0);
    // The exit time has mean h^2 / sigma(x)^2 to leading order; 200 means
    // leave a censoring probability far below anything measurable.
    const std::size_t max_steps = cfg.t_max > 0.0
                                      ? detail::step_count(cfg.t_max * (h / h0) * (h / h0), dt)
                                      : detail::step_count(200.0 * h * h / (vol * vol), dt);
    detail::parallel_for(n, threads, [&](std::size_t i) {
      rng::Substream rs(cfg.master_seed, i, detail::kDomainSmallTime + k);
      double state = x, l = 0.0;
      std::size_t s = 0;
      bool exited = false;
      while (s < max_steps) {
        const double next = detail::step_state(d, state, dt, rs.standard_normal());
        if (!std::isfinite(next)) throw NumericalError("smalltime_diagnostics: non-finite state");
        l += detail::tanaka(state, next, x);
        state = next;
        ++s;
        if (std::abs(state - x) >= h) {
          exited = true;
          break;
        }
      }
      const double t = static_cast<double>(s) * dt;
      tau[i] = t;
      tau2[i] = t * t;
      loc[i] = l;
      loc2[i] = l * l;
      tau_loc[i] = t * l;
      censored[i] = exited ? 0 : 1;
    });

    const double T = detail::sample_stats(tau).mean;
    const double L = detail::sample_stats(loc).mean;
    const double T2 = detail::sample_stats(tau2).mean;
    const double L2 = detail::sample_stats(loc2).mean;
    const double TL = detail::sample_stats(tau_loc).mean;

    SmallTimeRow row;
    row.h = h;
    row.dt = dt;
    row.mean_exit_time = T;
    row.h2_over_tau = h * h / T;
    row.h2_over_tau_se = delta_se({{-h * h / (T * T), &tau}});
    row.tau2_over_tau = T2 / T;
    row.tau2_over_tau_se = delta_se({{1.0 / T, &tau2}, {-T2 / (T * T), &tau}});
    row.l_sq_mean_over_tau = L * L / T;
    row.l_sq_mean_over_tau_se = delta_se({{2.0 * L / T, &loc}, {-L * L / (T * T), &tau}});
    row.tau_l_over_tau = TL / T;
    row.tau_l_over_tau_se = delta_se({{1.0 / T, &tau_loc}, {-TL / (T * T), &tau}});
    row.l2_over_tau = L2 / T;
    row.l2_over_tau_se = delta_se({{1.0 / T, &loc2}, {-L2 / (T * T), &tau}});
    row.censored = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace eqstop::pathsim
