#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "eqstop/closedform.hpp"
#include "eqstop/verifier.hpp"

namespace eqstop::verifier {

namespace {

struct Stencil3 {
  double c0, c1, c2;  // weights on nodes j, j+-1, j+-2
};

// Second-order one-sided first derivative at x_j from x_j, x_j+s, x_j+2s;
// h1 = |x_{j+s} - x_j|, h2 = |x_{j+2s} - x_{j+s}|, s = +1 (forward) or -1.
Stencil3 one_sided(double h1, double h2, double sign) {
  const double c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
  const double c1 = (h1 + h2) / (h1 * h2);
  const double c2 = -h1 / (h2 * (h1 + h2));
  return {sign * c0, sign * c1, sign * c2};
}

struct Layout {
  std::size_t lower;  // node index of the push point (== upper for a pure rule)
  std::size_t upper;  // node index of the sure-stopping threshold
};

Layout locate(const MixedThresholdStrategy& s, const Grid& grid) {
  const auto lo = grid.index_of(s.lower);
  const auto hi = grid.index_of(s.upper);
  if (!lo || !hi) throw PreconditionError("fd_solve_w: grid must contain both thresholds as nodes");
  if (*lo < 2) throw PreconditionError("fd_solve_w: need at least two intervals below the lower threshold");
  if (!s.is_pure() && *hi - *lo < 2)
    throw PreconditionError("fd_solve_w: need at least two intervals in the randomization region");
  return {*lo, *hi};
}

std::vector<double> solve_rate(const RealOptionProblem& pb, const MixedThresholdStrategy& s,
                               const Grid& grid, const Layout& at, std::size_t rate_index,
                               double cap, bool& cap_hit) {
  const double r = pb.rate(rate_index);
  const double K = pb.strike;
  const double al = closedform::alpha(r, pb.sigma2);
  const auto x = grid.nodes();
  const std::size_t n = at.upper + 1;

  std::vector<Eigen::Triplet<double>> coeffs;
  coeffs.reserve(5 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  auto put = [&](std::size_t row, std::size_t col, double v) {
    coeffs.emplace_back(static_cast<int>(row), static_cast<int>(col), v);
  };

  // x h' - alpha h = (1 - alpha) x / r at the first node (no x^(1-alpha) mode).
  {
    const auto d = one_sided(x[1] - x[0], x[2] - x[1], 1.0);
    put(0, 0, x[0] * d.c0 - al);
    put(0, 1, x[0] * d.c1);
    put(0, 2, x[0] * d.c2);
    rhs[0] = (1.0 - al) * x[0] / r;
  }

  for (std::size_t j = 1; j < at.upper; ++j) {
    if (j == at.lower) {
      // h'(u+) - h'(u-) - 2 push (h(u) - K) = 0
      const auto fwd = one_sided(x[j + 1] - x[j], x[j + 2] - x[j + 1], 1.0);
      const auto bwd = one_sided(x[j] - x[j - 1], x[j - 1] - x[j - 2], -1.0);
      put(j, j, fwd.c0 - bwd.c0 - 2.0 * s.push);
      put(j, j + 1, fwd.c1);
      put(j, j + 2, fwd.c2);
      put(j, j - 1, -bwd.c1);
      put(j, j - 2, -bwd.c2);
      rhs[static_cast<Eigen::Index>(j)] = -2.0 * s.push * K;
      continue;
    }
    double lam = s.intensity_at(x[j]);
    if (lam > cap) {
      lam = cap;
      cap_hit = true;
    }
    const double hl = x[j] - x[j - 1];
    const double hr = x[j + 1] - x[j];
    const double diff = 0.5 * pb.sigma2 * x[j] * x[j];
    put(j, j - 1, diff * 2.0 / (hl * (hl + hr)));
    put(j, j, -diff * 2.0 / (hl * hr) - r - lam);
    put(j, j + 1, diff * 2.0 / (hr * (hl + hr)));
    rhs[static_cast<Eigen::Index>(j)] = -x[j] - lam * K;
  }
  put(at.upper, at.upper, 1.0);
  rhs[static_cast<Eigen::Index>(at.upper)] = K;

  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  A.setFromTriplets(coeffs.begin(), coeffs.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    std::ostringstream os;
    os << "fd_solve_w: singular system for rate index " << rate_index << " (nodes=" << grid.size()
       << ", x_min=" << grid.front() << ", lower node=" << at.lower << ", upper node=" << at.upper
       << ")";
    throw NumericalError(os.str());
  }
  const Eigen::VectorXd h = lu.solve(rhs);

  std::vector<double> out(grid.size(), K);
  for (std::size_t j = 0; j < at.upper; ++j) {
    out[j] = h[static_cast<Eigen::Index>(j)];
    if (!std::isfinite(out[j])) throw NumericalError("fd_solve_w: non-finite solution value");
  }
  return out;
}

}  // namespace

FdResult fd_solve_w(const RealOptionProblem& problem, const MixedThresholdStrategy& strategy,
                    const Grid& grid, const FdOptions& options) {
  require_valid(problem);
  strategy.check();
  const Layout at = locate(strategy, grid);

  FdResult res;
  for (std::size_t i = 0; i < 2; ++i) {
    bool hit = false;
    res.values[i] = solve_rate(problem, strategy, grid, at, i, options.intensity_cap, hit);
    if (!hit) continue;
    res.cap_active = true;
    if (!options.report_cap_sensitivity) continue;
    bool ignored = false;
    const auto raised =
        solve_rate(problem, strategy, grid, at, i, 10.0 * options.intensity_cap, ignored);
    for (std::size_t j = 0; j < raised.size(); ++j)
      res.cap_sensitivity = std::max(res.cap_sensitivity, std::abs(raised[j] - res.values[i][j]));
  }
  return res;
}

}  // namespace eqstop::verifier
