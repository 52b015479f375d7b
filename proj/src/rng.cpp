#include "rsoc/rng.hpp"

#include <cmath>

namespace rsoc {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed + kGolden * (salt + 1));
}

RandomStream RandomStream::at(std::uint64_t seed, std::uint64_t step, std::uint64_t channel) {
  std::uint64_t s = mix64(seed + kGolden);
  s = mix64(s ^ (step + kGolden));
  s = mix64(s ^ (channel + 2 * kGolden));
  return RandomStream(s);
}

std::uint64_t RandomStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RandomStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on bit-exact uniforms; u1 shifted into (0,1] so log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Vec RandomStream::normal_vector(int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = next_normal();
  return v;
}

std::uint64_t RandomStream::next_below(std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * bound) >> 64);
}

}  // namespace rsoc
