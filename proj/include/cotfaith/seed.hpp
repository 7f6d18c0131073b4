#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace cotfaith {

/// FNV-1a over raw bytes. Stable across platforms and releases.
std::uint64_t stable_hash(std::string_view bytes,
                          std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// The inputs a per-probe seed is derived from. Resuming a run re-derives
/// the same seed for the same key, so randomness never shifts.
struct SeedTrace {
  std::uint64_t run_seed = 0;
  std::string item_id;
  std::string condition;
  std::string probe;

  std::uint64_t derive() const;
  bool operator==(const SeedTrace&) const = default;
};

/// Seeded generator with platform-independent bounded draws.
/// std::uniform_int_distribution is implementation-defined, so it is not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform double in [0, 1) with 53 random bits.
  double unit();

 private:
  std::mt19937_64 engine_;
};

}  // namespace cotfaith
