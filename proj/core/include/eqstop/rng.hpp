#pragma once

#include <array>
#include <cstdint>

namespace eqstop::rng {

/// Philox4x64-10 block function (Salmon et al., Random123).
using Counter = std::array<std::uint64_t, 4>;
using Key = std::array<std::uint64_t, 2>;

Counter philox4x64(Counter ctr, Key key) noexcept;

/// Independent substream addressed by (master_seed, stream index). Draws
/// are a pure function of (seed, stream, draw number), so results do not
/// depend on which thread consumes which stream or in which order.
class Substream {
 public:
  Substream(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t domain = 0) noexcept
      : key_{master_seed, domain}, stream_(stream) {}

  std::uint64_t next_u64() noexcept {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double standard_normal() noexcept;
  double exponential() noexcept;

 private:
  void refill() noexcept;

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Counter buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace eqstop::rng
