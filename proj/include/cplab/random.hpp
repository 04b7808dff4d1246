#ifndef CPLAB_RANDOM_HPP
#define CPLAB_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cplab {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream from a master seed and a path of indices,
/// e.g. make_stream(seed, {purpose, n, replication}). The result depends only
/// on the arguments, never on which worker asks for it.
inline Rng make_stream(std::uint64_t master_seed,
                       std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(master_seed);
  for (auto k : path) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(mix64(h)),
                    static_cast<std::uint32_t>(mix64(h) >> 32)};
  return Rng(seq);
}

/// Uniform draw strictly inside (0, 1).
template <class G>
double open_unit(G& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Stream purposes; keeps sub-streams of one experiment disjoint.
namespace stream_tag {
inline constexpr std::uint64_t rows = 1;
inline constexpr std::uint64_t bootstrap = 2;
inline constexpr std::uint64_t reference = 3;
inline constexpr std::uint64_t limit = 4;
inline constexpr std::uint64_t audit = 5;
inline constexpr std::uint64_t mixing = 6;
inline constexpr std::uint64_t paths = 7;
inline constexpr std::uint64_t limit_plus = 8;
inline constexpr std::uint64_t limit_minus = 9;
}  // namespace stream_tag

}  // namespace cplab

#endif  // CPLAB_RANDOM_HPP
