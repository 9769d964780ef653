#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nellcom/tensor.hpp"

namespace nellcom {

// One-layer GRU cell parameters. Convention (pinned, gradient-checked):
//   z  = sigmoid(w_z x + u_z h + b_z)
//   r  = sigmoid(w_r x + u_r h + b_r)
//   n  = tanh(w_n x + r .* (u_n h + b_n))
//   h' = (1 - z) .* n + z .* h
struct GruParams {
  size_t input_size = 0;
  size_t hidden_size = 0;
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_n, u_n, b_n;

  GruParams() = default;
  GruParams(size_t input, size_t hidden, Rng& rng);

  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
};

// Dynamically built reverse-mode graph over vector values. Forward values
// are computed eagerly as ops are appended; backward() walks the tape in
// reverse and accumulates into graph-variable grads and Tensor::grad of any
// parameters the ops touched. A Graph instance is built per batch, consumed
// by one backward() call, and then cleared or discarded.
class Graph {
 public:
  struct Var {
    uint32_t idx = UINT32_MAX;
    bool valid() const { return idx != UINT32_MAX; }
  };

  Var input(std::vector<double> v);

  // Row lookup into an embedding table. Backward adds into that row only.
  Var embed(Tensor& table, size_t row);

  // W x + b. W is (out x in), b is (out x 1).
  Var linear(Tensor& W, Tensor& b, Var x);

  // Concatenation of three vectors (meaning-encoder front end).
  Var concat3(Var a, Var b, Var c);

  // One GRU step; returns the new hidden state.
  Var gru_cell(GruParams& cell, Var x_t, Var h_prev);

  // Numerically stabilized softmax cross-entropy against a target index.
  // Returns the scalar loss variable and the probability vector.
  std::pair<Var, std::vector<double>> softmax_cross_entropy(Var logits, size_t target);

  // Scalar helpers for assembling batch losses.
  Var add(Var a, Var b);
  Var scale(Var a, double factor);

  const std::vector<double>& value(Var v) const { return val_[v.idx]; }
  double scalar(Var v) const { return val_[v.idx][0]; }

  // Seeds d(seed)=1 and runs the tape in reverse.
  void backward(Var seed);

  size_t size() const { return val_.size(); }

 private:
  Var fresh(std::vector<double> value, std::function<void()> back);
  std::vector<double>& grad_of(Var v) { return grad_[v.idx]; }

  std::vector<std::vector<double>> val_;
  std::vector<std::vector<double>> grad_;
  std::vector<std::function<void()>> back_;
};

}  // namespace nellcom
