#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace nppc {

using Engine = std::mt19937_64;

// Tags separating the substreams derived from one run seed.
enum class Stream : std::uint64_t {
  Response = 0x5245,
  TieBreak = 0x5442,
  Candidate = 0x4341,
  Chance = 0x4348,
  Cell = 0x434c,
  Synth = 0x5359,
  Split = 0x5350,
  KMeans = 0x4b4d,
  Bootstrap = 0x4253,
  Profile = 0x5046,
};

std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a substream seed as a pure function of the parent seed and tags.
/// Substreams never depend on scheduling, so parallel results match serial.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

inline std::uint64_t derive_seed(std::uint64_t parent, Stream stream) noexcept {
  return derive_seed(parent, {static_cast<std::uint64_t>(stream)});
}

inline std::uint64_t derive_seed(std::uint64_t parent, Stream stream, std::uint64_t index) noexcept {
  return derive_seed(parent, {static_cast<std::uint64_t>(stream), index});
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& eng) noexcept {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound).
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) noexcept {
  __extension__ using Wide = unsigned __int128;
  return static_cast<std::uint64_t>((static_cast<Wide>(eng()) * bound) >> 64);
}

/// Exact Poisson sampler for a fixed mean.
///
/// Means below 30 use inversion by sequential search over a precomputed CDF;
/// larger means use Hoermann's transformed rejection (PTRS).
class PoissonSampler {
 public:
  static constexpr double kInversionLimit = 30.0;

  explicit PoissonSampler(double mean);

  double mean() const noexcept { return mean_; }
  std::int64_t operator()(Engine& eng) const;

 private:
  std::int64_t sample_inversion(Engine& eng) const;
  std::int64_t sample_ptrs(Engine& eng) const;

  double mean_;
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
  double slam_ = 0, loglam_ = 0, b_ = 0, a_ = 0, invalpha_ = 0, vr_ = 0;
};

}  // namespace nppc
