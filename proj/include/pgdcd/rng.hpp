#pragma once

#include <cstdint>
#include <random>

#include "pgdcd/tensor.hpp"

namespace pgdcd {

/// Seeded stream of uniform and Gaussian draws.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the
/// standard. The standard distributions are not, so the conversions are done
/// here: uniform doubles take the top 53 bits, normals use the basic
/// Box-Muller transform (both outputs of a pair are consumed in order).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Per-image stream seed. Outcomes never depend on scheduling because each
/// image draws only from its own stream.
constexpr std::uint64_t image_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

}  // namespace pgdcd
