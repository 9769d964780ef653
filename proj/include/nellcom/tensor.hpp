#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nellcom/rng.hpp"

namespace nellcom {

// A parameter matrix (rows x cols, row-major) with a gradient accumulator of
// the same shape. A vector is a single-column tensor. Gradients are summed
// into by backward passes and zeroed by the optimizer after each step.
struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(size_t r, size_t c) : rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

  size_t size() const { return value.size(); }
  double& at(size_t r, size_t c) { return value[r * cols + c]; }
  double at(size_t r, size_t c) const { return value[r * cols + c]; }
  double* row(size_t r) { return value.data() + r * cols; }
  const double* row(size_t r) const { return value.data() + r * cols; }
  double* grad_row(size_t r) { return grad.data() + r * cols; }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  static Tensor zeros(size_t rows, size_t cols) { return Tensor(rows, cols); }

  // Uniform in (-bound, +bound); the default bound is 1/sqrt(fan_in) with
  // fan_in the column count.
  static Tensor uniform_init(size_t rows, size_t cols, Rng& rng);
  static Tensor uniform_init(size_t rows, size_t cols, Rng& rng, double bound);

  // Standard normal entries (embedding-table initialization).
  static Tensor normal_init(size_t rows, size_t cols, Rng& rng);
};

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Scales gradients so their global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
double clip_gradient_norm(const std::vector<Tensor*>& params, double max_norm);

// Bias-corrected Adam over a fixed set of tensors. step() consumes the
// accumulated gradients and zeroes them afterwards.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig cfg = {});

  void step();
  int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor*>& params() const { return params_; }

 private:
  std::vector<Tensor*> params_;
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace nellcom
