#pragma once

// Internals shared by the path simulator and the distributional checks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "eqstop/pathsim.hpp"
#include "eqstop/rng.hpp"

namespace eqstop::pathsim::detail {

// Random domains keep the independent sample sets of one check apart.
inline constexpr std::uint64_t kDomainEstimate = 0;
inline constexpr std::uint64_t kDomainSurvivalEmpirical = 1;
inline constexpr std::uint64_t kDomainSurvivalPathwise = 2;
inline constexpr std::uint64_t kDomainIdentityLhs = 3;
inline constexpr std::uint64_t kDomainIdentityRhs = 4;
inline constexpr std::uint64_t kDomainSmallTime = 16;

/// Strategy flattened to what the stepping loop needs.
struct Rule {
  const MixedThresholdStrategy* threshold = nullptr;
  const GeneralMixedStrategy* general = nullptr;
  std::vector<PushPoint> pushes;
  double local_time_at = std::numeric_limits<double>::quiet_NaN();
  /// Below this level nothing but the state can change (threshold rules).
  double quiet_below = -std::numeric_limits<double>::infinity();

  bool in_continuation(double x) const {
    if (threshold) return x < (threshold->is_pure() ? threshold->lower : threshold->upper);
    return general->in_continuation(x);
  }
  double intensity(double x) const {
    return threshold ? threshold->intensity_at(x) : general->intensity_at(x);
  }
};

Rule make_rule(const Strategy& strategy);

/// Throws PreconditionError when thresholds or push points leave the state interval.
void check_rule_fits(const SimModel& model, const Rule& rule);

struct Probe {
  std::span<const std::size_t> snapshots;  // strictly increasing step counts
  bool ignore_stops = false;  // keep running past the clock and the barrier
  bool identity = false;
  double identity_rate = 0.0;
};

struct Trace {
  double exp_draw = 0.0;
  std::vector<double> lambda_at;  // Lambda at each snapshot
  double identity_integral = 0.0;  // clock-truncated int e^{-rt} g dLambda
};

struct PathRun {
  double x0;
  double dt;
  std::size_t n_steps;
  std::uint64_t seed;
  std::uint64_t domain;
  std::uint64_t path;
  bool skip_quiet;
};

PathOutcome run_path(const SimModel& model, const Rule& rule, const PathRun& run,
                     const Probe* probe = nullptr, Trace* trace = nullptr);

/// One state increment over dt driven by the standard normal z.
inline double step_state(const DiffusionSpec& d, double x, double dt, double z) {
  if (d.gbm_volatility) {
    const double s = *d.gbm_volatility;
    return x * std::exp(-0.5 * s * s * dt + s * std::sqrt(dt) * z);
  }
  return x + d.drift(x) * dt + d.volatility(x) * std::sqrt(dt) * z;
}

/// Discrete Tanaka defect at a, clamped at zero.
inline double tanaka(double x, double x_next, double a) {
  const double dx = x - a;
  const double sgn = dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0);
  const double inc = std::abs(x_next - a) - std::abs(dx) - sgn * (x_next - x);
  return inc > 0.0 ? inc : 0.0;
}

std::size_t step_count(double horizon, double dt);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any worker is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= chunks) return;
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) fn(i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(chunks);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error, summed pairwise in index order after shifting
/// by the first sample (identical samples give that value exactly and a
/// zero standard error).
SampleStats sample_stats(std::span<const double> v);

}  // namespace eqstop::pathsim::detail
