#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace eqstop::verifier {

/// Strictly increasing, strictly positive state nodes (at least three).
class Grid {
 public:
  explicit Grid(std::vector<double> nodes);

  /// n nodes on [x_min, x_max] that are uniform between consecutive pins.
  /// Every pin strictly inside (x_min, x_max) becomes a node; intervals are
  /// shared out between the segments in proportion to their length, so the
  /// spacing differs between segments by O(1/n) only.
  static Grid uniform(double x_min, double x_max, std::size_t n, std::span<const double> pins = {});

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double front() const noexcept { return nodes_.front(); }
  double back() const noexcept { return nodes_.back(); }
  double operator[](std::size_t j) const noexcept { return nodes_[j]; }

  /// Index of a node equal to x, if any.
  std::optional<std::size_t> index_of(double x) const;

 private:
  std::vector<double> nodes_;
};

}  // namespace eqstop::verifier
