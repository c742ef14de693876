#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace fairinv {

/// Philox4x32-10 block cipher used as a counter-based generator.
///
/// Maps a 128-bit counter and a 64-bit key to 128 pseudo-random bits. There
/// is no sequential state: any block can be produced in O(1) from its
/// coordinates, which is what lets replications run in any order.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Uniform random bit generator over one (replication, lane, round) block.
///
/// Satisfies std::uniform_random_bit_generator; successive calls walk the
/// draw-index word of the Philox counter.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  constexpr CounterEngine(Philox4x32::Key key, std::uint32_t replication, std::uint32_t lane,
                          std::uint32_t round) noexcept
      : key_(key), replication_(replication), lane_(lane), round_(round) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    if (buffered_ == 0) {
      const auto out = Philox4x32::block({draw_, round_, lane_, replication_}, key_);
      ++draw_;
      buffer_[0] = (std::uint64_t{out[0]} << 32) | out[1];
      buffer_[1] = (std::uint64_t{out[2]} << 32) | out[3];
      buffered_ = 2;
    }
    return buffer_[2 - buffered_--];
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t replication_;
  std::uint32_t lane_;
  std::uint32_t round_;
  std::uint32_t draw_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

/// Per-replication random stream.
///
/// A stream is a value identified by (root_seed, replication_id, lane).
/// Draws for round t come from a dedicated counter block, so the values
/// seen in round t do not depend on how many draws earlier rounds consumed.
/// Lanes separate independent processes within one replication (supply,
/// demand, one per resource or type).
class RngStream {
 public:
  constexpr RngStream(std::uint64_t root_seed, std::uint32_t replication_id,
                      std::uint32_t lane = 0) noexcept
      : root_seed_(root_seed), replication_(replication_id), lane_(lane) {}

  [[nodiscard]] constexpr RngStream lane(std::uint32_t lane) const noexcept {
    return RngStream(root_seed_, replication_, lane);
  }

  [[nodiscard]] constexpr CounterEngine at_round(std::uint64_t t) const noexcept {
    return CounterEngine({static_cast<std::uint32_t>(root_seed_),
                          static_cast<std::uint32_t>(root_seed_ >> 32)},
                         replication_, lane_, static_cast<std::uint32_t>(t));
  }

  [[nodiscard]] constexpr std::uint64_t root_seed() const noexcept { return root_seed_; }
  [[nodiscard]] constexpr std::uint32_t replication_id() const noexcept { return replication_; }
  [[nodiscard]] constexpr std::uint32_t lane_id() const noexcept { return lane_; }

 private:
  std::uint64_t root_seed_;
  std::uint32_t replication_;
  std::uint32_t lane_;
};

}  // namespace fairinv
