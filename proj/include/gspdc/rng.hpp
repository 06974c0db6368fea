#pragma once

#include <cmath>
#include <cstdint>

namespace gspdc::rng {

// Stream tags. One tag per random purpose so that every (seed, window, tag)
// triple is an independent stream and windows can be simulated in any order.
enum class Tag : std::uint64_t {
  pair_count = 1,
  pair_times = 2,
  control_thin = 3,
  signal_path = 4,
  analyzer_thin = 5,
  dark = 6,
  eta_sample = 7,
  merge_calib = 8,
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 output function (Stafford mix 13).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t absorb(std::uint64_t state, std::uint64_t x) {
  return mix64((state + kGolden) ^ mix64(x + kGolden));
}

} // namespace detail

/// Counter-based random stream keyed by (master seed, window index, tag).
///
/// The n-th output is a pure function of the key and n, so draws can be
/// addressed positionally (`at`) as well as sequentially (`next`).
/// Positional addressing keeps per-photon survival draws stable when a
/// transmittance parameter changes, which makes thinning monotone in the
/// parameter by construction.
class Stream {
public:
  Stream(std::uint64_t master_seed, std::uint64_t window_index, Tag tag)
      : key_(detail::absorb(detail::absorb(master_seed, window_index),
                            static_cast<std::uint64_t>(tag))) {}

  std::uint64_t at(std::uint64_t counter) const {
    return detail::mix64(key_ + (counter + 1) * detail::kGolden);
  }

  /// Uniform double in [0, 1) at the given counter position.
  double unit_at(std::uint64_t counter) const {
    return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
  }

  std::uint64_t next() { return at(counter_++); }

  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Derive a fresh 64-bit seed from this stream (for nested runs).
  std::uint64_t derive_seed() { return next(); }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Poisson sample. Sequential inversion for small means, Hormann's PTRS
/// transformed-rejection for large ones; both consume only `stream` and are
/// reproducible across platforms for a fixed key.
std::uint64_t poisson(Stream& stream, double mean);

/// Standard normal via Box-Muller (consumes two uniforms per call).
double normal(Stream& stream);

inline bool bernoulli(Stream& stream, double p) { return stream.next_unit() < p; }

} // namespace gspdc::rng
