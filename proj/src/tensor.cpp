#include "nellcom/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace nellcom {

Tensor Tensor::uniform_init(size_t rows, size_t cols, Rng& rng) {
  return uniform_init(rows, cols, rng, 1.0 / std::sqrt(static_cast<double>(cols)));
}

Tensor Tensor::uniform_init(size_t rows, size_t cols, Rng& rng, double bound) {
  Tensor t(rows, cols);
  for (double& x : t.value) x = rng.uniform_range(-bound, bound);
  return t;
}

Tensor Tensor::normal_init(size_t rows, size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& x : t.value) x = rng.normal();
  return t;
}

double clip_gradient_norm(const std::vector<Tensor*>& params, double max_norm) {
  double sq = 0.0;
  for (const Tensor* t : params)
    for (double g : t->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Tensor* t : params)
      for (double& g : t->grad) g *= scale;
  }
  return norm;
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace nellcom
