#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nellcom/tensor.hpp"

namespace nellcom::test {

// Central finite differences against already-populated analytic gradients.
// `loss_fn` must rebuild the forward pass from the tensors' current values.
// Relative error uses a unit floor: |a - n| / max(1, |a|, |n|). `stride`
// subsamples coordinates of large tensors.
inline double fd_max_rel_err(const std::function<double()>& loss_fn,
                             const std::vector<Tensor*>& params, double h = 1e-4,
                             size_t stride = 1) {
  double worst = 0.0;
  for (Tensor* t : params) {
    for (size_t i = 0; i < t->size(); i += stride) {
      const double saved = t->value[i];
      t->value[i] = saved + h;
      const double f_plus = loss_fn();
      t->value[i] = saved - h;
      const double f_minus = loss_fn();
      t->value[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double analytic = t->grad[i];
      const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
      worst = std::max(worst, std::fabs(numeric - analytic) / denom);
    }
  }
  return worst;
}

inline Tensor random_tensor(size_t rows, size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& x : t.value) x = rng.uniform_range(-scale, scale);
  return t;
}

}  // namespace nellcom::test
