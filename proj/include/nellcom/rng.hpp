#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace nellcom {

// Deterministic random stream. All randomness in the project flows through
// this class; std:: distributions are avoided because their output is
// implementation-defined and would break byte-level reproducibility.
//
// A scripted stream (fixed uniforms) is supported so tests can enumerate
// every Bernoulli draw outcome of the grammar sampler exhaustively.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  explicit Rng(std::vector<double> scripted_uniforms)
      : scripted_(std::move(scripted_uniforms)), scripted_mode_(true) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (one value per call).
  double normal();

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t below(uint64_t n);

  uint64_t next_u64();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_{0};
  std::vector<double> scripted_;
  size_t scripted_pos_ = 0;
  bool scripted_mode_ = false;
};

// Derives an independent stream seed from a base seed and a label, so that
// e.g. dataset shuffling and weight initialization never share a stream.
uint64_t derive_seed(uint64_t base, std::string_view label);
uint64_t derive_seed(uint64_t base, std::string_view label, uint64_t index);

}  // namespace nellcom
