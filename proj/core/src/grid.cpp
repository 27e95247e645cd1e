#include "eqstop/grid.hpp"

#include <algorithm>
#include <cmath>

#include "eqstop/stopcore.hpp"

namespace eqstop::verifier {

Grid::Grid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.size() < 3) throw PreconditionError("grid: need at least 3 nodes");
  if (!(nodes_.front() > 0.0)) throw PreconditionError("grid: nodes must be > 0");
  for (std::size_t j = 1; j < nodes_.size(); ++j)
    if (!(nodes_[j] > nodes_[j - 1]) || !std::isfinite(nodes_[j]))
      throw PreconditionError("grid: nodes must be finite and strictly increasing");
}

Grid Grid::uniform(double x_min, double x_max, std::size_t n, std::span<const double> pins) {
  if (n < 3) throw PreconditionError("grid: need at least 3 nodes");
  if (!(x_min > 0.0) || !(x_max > x_min)) throw PreconditionError("grid: need 0 < x_min < x_max");

  std::vector<double> breaks{x_min};
  std::vector<double> inner(pins.begin(), pins.end());
  std::sort(inner.begin(), inner.end());
  for (double p : inner)
    if (p > x_min && p < x_max && p != breaks.back()) breaks.push_back(p);
  breaks.push_back(x_max);

  const std::size_t segments = breaks.size() - 1;
  const std::size_t intervals = n - 1;
  if (intervals < segments) throw PreconditionError("grid: too few nodes for the pinned points");

  // Largest-remainder apportionment with at least one interval per segment.
  const double total = x_max - x_min;
  std::vector<std::size_t> count(segments, 1);
  std::vector<double> remainder(segments, 0.0);
  std::size_t used = segments;
  for (std::size_t s = 0; s < segments; ++s) {
    const double share = (breaks[s + 1] - breaks[s]) / total * static_cast<double>(intervals);
    const auto extra = static_cast<std::size_t>(std::max(0.0, std::floor(share) - 1.0));
    count[s] += extra;
    used += extra;
    remainder[s] = share - static_cast<double>(count[s]);
  }
  while (used < intervals) {
    const auto s = static_cast<std::size_t>(
        std::max_element(remainder.begin(), remainder.end()) - remainder.begin());
    ++count[s];
    remainder[s] -= 1.0;
    ++used;
  }

  std::vector<double> nodes;
  nodes.reserve(n);
  nodes.push_back(x_min);
  for (std::size_t s = 0; s < segments; ++s) {
    const double lo = breaks[s];
    const double hi = breaks[s + 1];
    const double step = (hi - lo) / static_cast<double>(count[s]);
    for (std::size_t k = 1; k < count[s]; ++k) nodes.push_back(lo + step * static_cast<double>(k));
    nodes.push_back(hi);
  }
  return Grid(std::move(nodes));
}

std::optional<std::size_t> Grid::index_of(double x) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
  if (it == nodes_.end() || *it != x) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

}  // namespace eqstop::verifier
