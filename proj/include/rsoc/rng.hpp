#pragma once

#include "rsoc/types.hpp"

#include <cstdint>

namespace rsoc {

// Counter-based deterministic random streams. Stdlib distributions are
// implementation-defined, which would break byte-identical reruns, so the
// generator (splitmix64) and the normal transform (Box-Muller over bit-exact
// uniforms) are pinned here.
struct RandomStream {
  explicit RandomStream(std::uint64_t state) : state_(state) {}

  // Stream addressed by (seed, step, channel); draws are independent across
  // addresses and reproducible regardless of draw order elsewhere.
  static RandomStream at(std::uint64_t seed, std::uint64_t step, std::uint64_t channel);

  std::uint64_t next_u64();
  double next_uniform();       // [0, 1)
  double next_normal();        // N(0, 1)
  Vec normal_vector(int dim);  // iid N(0, 1)

  // Unbiased-enough bounded draw for resampling indices.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit mix used to derive per-rollout seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace rsoc
