#pragma once

#include <array>
#include <cstdint>

namespace flowchain {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless block function.
PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

/// Counter-based random stream for one (seed, path, substream) triple.
///
/// The counter layout is {block, substream, path_lo, path_hi} and the key is the
/// 64-bit seed, so any stream can be regenerated independently of every other one;
/// paths are never affected by how many other paths or workers exist.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t path_id, std::uint32_t substream = 0);

  std::uint32_t next_u32();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double next_uniform();
  /// Standard normal via Box-Muller; variates are produced in pairs.
  double next_normal();

  std::uint32_t block_index() const { return block_; }

 private:
  void refill();

  PhiloxKey key_;
  std::uint32_t substream_;
  std::uint64_t path_;
  std::uint32_t block_ = 0;
  PhiloxCounter buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace flowchain
