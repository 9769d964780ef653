#include "nellcom/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nellcom {

double Rng::uniform() {
  if (scripted_mode_) {
    if (scripted_pos_ >= scripted_.size())
      throw std::logic_error("scripted rng exhausted");
    return scripted_[scripted_pos_++];
  }
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

uint64_t Rng::next_u64() {
  if (scripted_mode_) throw std::logic_error("scripted rng has no integer stream");
  return gen_();
}

double Rng::normal() {
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::logic_error("Rng::below(0)");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t derive_seed(uint64_t base, std::string_view label) {
  return splitmix64(splitmix64(base) ^ fnv1a64(label));
}

uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t index) {
  return splitmix64(derive_seed(base, label) ^ splitmix64(index));
}

}  // namespace nellcom
