#include "nellcom/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace nellcom {

namespace {

// Four independent accumulators let the compiler pipeline the adds without
// reassociating anything; summation order is fixed, so results are
// bit-reproducible.
double dot(const double* a, const double* b, size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double* y, double a, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

namespace {
double gru_bound(size_t hidden) { return 1.0 / std::sqrt(static_cast<double>(hidden)); }
}  // namespace

// Every matrix and bias is uniform within +/-1/sqrt(hidden).
GruParams::GruParams(size_t input, size_t hidden, Rng& rng)
    : input_size(input),
      hidden_size(hidden),
      w_z(Tensor::uniform_init(hidden, input, rng, gru_bound(hidden))),
      u_z(Tensor::uniform_init(hidden, hidden, rng, gru_bound(hidden))),
      b_z(Tensor::uniform_init(hidden, 1, rng, gru_bound(hidden))),
      w_r(Tensor::uniform_init(hidden, input, rng, gru_bound(hidden))),
      u_r(Tensor::uniform_init(hidden, hidden, rng, gru_bound(hidden))),
      b_r(Tensor::uniform_init(hidden, 1, rng, gru_bound(hidden))),
      w_n(Tensor::uniform_init(hidden, input, rng, gru_bound(hidden))),
      u_n(Tensor::uniform_init(hidden, hidden, rng, gru_bound(hidden))),
      b_n(Tensor::uniform_init(hidden, 1, rng, gru_bound(hidden))) {}

std::vector<Tensor*> GruParams::params() {
  return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_n, &u_n, &b_n};
}

std::vector<const Tensor*> GruParams::params() const {
  return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_n, &u_n, &b_n};
}

Graph::Var Graph::fresh(std::vector<double> value, std::function<void()> back) {
  Var v{static_cast<uint32_t>(val_.size())};
  val_.push_back(std::move(value));
  grad_.emplace_back(val_.back().size(), 0.0);
  back_.push_back(std::move(back));
  return v;
}

Graph::Var Graph::input(std::vector<double> v) { return fresh(std::move(v), nullptr); }

Graph::Var Graph::embed(Tensor& table, size_t row) {
  if (row >= table.rows) throw std::out_of_range("embed: row index out of range");
  std::vector<double> out(table.row(row), table.row(row) + table.cols);
  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out), [this, v, &table, row]() {
    axpy(table.grad_row(row), 1.0, grad_[v.idx].data(), table.cols);
  });
}

Graph::Var Graph::linear(Tensor& W, Tensor& b, Var x) {
  const std::vector<double>& xv = val_[x.idx];
  if (W.cols != xv.size() || b.size() != W.rows)
    throw std::invalid_argument("linear: shape mismatch");
  std::vector<double> out(W.rows);
  for (size_t r = 0; r < W.rows; ++r) out[r] = b.value[r] + dot(W.row(r), xv.data(), W.cols);
  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out), [this, v, &W, &b, x]() {
    const std::vector<double>& g = grad_[v.idx];
    const std::vector<double>& xv2 = val_[x.idx];
    std::vector<double>& gx = grad_[x.idx];
    for (size_t r = 0; r < W.rows; ++r) {
      const double gr = g[r];
      axpy(W.grad_row(r), gr, xv2.data(), W.cols);
      b.grad[r] += gr;
      axpy(gx.data(), gr, W.row(r), W.cols);
    }
  });
}

Graph::Var Graph::concat3(Var a, Var b, Var c) {
  const auto &av = val_[a.idx], &bv = val_[b.idx], &cv = val_[c.idx];
  std::vector<double> out;
  out.reserve(av.size() + bv.size() + cv.size());
  out.insert(out.end(), av.begin(), av.end());
  out.insert(out.end(), bv.begin(), bv.end());
  out.insert(out.end(), cv.begin(), cv.end());
  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out), [this, v, a, b, c]() {
    const std::vector<double>& g = grad_[v.idx];
    size_t off = 0;
    for (Var src : {a, b, c}) {
      std::vector<double>& gs = grad_[src.idx];
      for (size_t i = 0; i < gs.size(); ++i) gs[i] += g[off + i];
      off += gs.size();
    }
  });
}

Graph::Var Graph::gru_cell(GruParams& cell, Var x_t, Var h_prev) {
  const std::vector<double>& x = val_[x_t.idx];
  const std::vector<double>& h = val_[h_prev.idx];
  if (x.size() != cell.input_size || h.size() != cell.hidden_size)
    throw std::invalid_argument("gru_cell: shape mismatch");
  const size_t H = cell.hidden_size, I = cell.input_size;

  std::vector<double> z(H), r(H), n(H), q(H), out(H);
  for (size_t j = 0; j < H; ++j) {
    z[j] = sigmoid(dot(cell.w_z.row(j), x.data(), I) + dot(cell.u_z.row(j), h.data(), H) +
                   cell.b_z.value[j]);
    r[j] = sigmoid(dot(cell.w_r.row(j), x.data(), I) + dot(cell.u_r.row(j), h.data(), H) +
                   cell.b_r.value[j]);
    q[j] = dot(cell.u_n.row(j), h.data(), H) + cell.b_n.value[j];
    n[j] = std::tanh(dot(cell.w_n.row(j), x.data(), I) + r[j] * q[j]);
    out[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
  }

  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out),
               [this, v, &cell, x_t, h_prev, z = std::move(z), r = std::move(r),
                n = std::move(n), q = std::move(q)]() {
                 const size_t H = cell.hidden_size, I = cell.input_size;
                 const std::vector<double>& gh_out = grad_[v.idx];
                 const std::vector<double>& x = val_[x_t.idx];
                 const std::vector<double>& h = val_[h_prev.idx];
                 std::vector<double>& gx = grad_[x_t.idx];
                 std::vector<double>& gh = grad_[h_prev.idx];

                 std::vector<double> daz(H), dar(H), dan(H), dq(H);
                 for (size_t j = 0; j < H; ++j) {
                   const double g = gh_out[j];
                   daz[j] = g * (h[j] - n[j]) * z[j] * (1.0 - z[j]);
                   dan[j] = g * (1.0 - z[j]) * (1.0 - n[j] * n[j]);
                   dar[j] = dan[j] * q[j] * r[j] * (1.0 - r[j]);
                   dq[j] = dan[j] * r[j];
                   gh[j] += g * z[j];
                 }
                 for (size_t j = 0; j < H; ++j) {
                   axpy(cell.w_z.grad_row(j), daz[j], x.data(), I);
                   axpy(cell.u_z.grad_row(j), daz[j], h.data(), H);
                   cell.b_z.grad[j] += daz[j];
                   axpy(cell.w_r.grad_row(j), dar[j], x.data(), I);
                   axpy(cell.u_r.grad_row(j), dar[j], h.data(), H);
                   cell.b_r.grad[j] += dar[j];
                   axpy(cell.w_n.grad_row(j), dan[j], x.data(), I);
                   axpy(cell.u_n.grad_row(j), dq[j], h.data(), H);
                   cell.b_n.grad[j] += dq[j];
                   axpy(gx.data(), daz[j], cell.w_z.row(j), I);
                   axpy(gx.data(), dar[j], cell.w_r.row(j), I);
                   axpy(gx.data(), dan[j], cell.w_n.row(j), I);
                   axpy(gh.data(), daz[j], cell.u_z.row(j), H);
                   axpy(gh.data(), dar[j], cell.u_r.row(j), H);
                   axpy(gh.data(), dq[j], cell.u_n.row(j), H);
                 }
               });
}

std::pair<Graph::Var, std::vector<double>> Graph::softmax_cross_entropy(Var logits,
                                                                        size_t target) {
  const std::vector<double>& l = val_[logits.idx];
  if (target >= l.size()) throw std::out_of_range("softmax_cross_entropy: target out of range");
  double mx = l[0];
  for (double x : l) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : l) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> probs(l.size());
  for (size_t i = 0; i < l.size(); ++i) probs[i] = std::exp(l[i] - lse);
  const double loss = lse - l[target];

  Var v{static_cast<uint32_t>(val_.size())};
  Var out = fresh({loss}, [this, v, logits, target, probs]() {
    const double g = grad_[v.idx][0];
    std::vector<double>& gl = grad_[logits.idx];
    for (size_t i = 0; i < probs.size(); ++i) gl[i] += g * probs[i];
    gl[target] -= g;
  });
  return {out, std::move(probs)};
}

Graph::Var Graph::add(Var a, Var b) {
  const auto &av = val_[a.idx], &bv = val_[b.idx];
  if (av.size() != bv.size()) throw std::invalid_argument("add: shape mismatch");
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out), [this, v, a, b]() {
    const std::vector<double>& g = grad_[v.idx];
    for (size_t i = 0; i < g.size(); ++i) {
      grad_[a.idx][i] += g[i];
      grad_[b.idx][i] += g[i];
    }
  });
}

Graph::Var Graph::scale(Var a, double factor) {
  std::vector<double> out(val_[a.idx]);
  for (double& x : out) x *= factor;
  Var v{static_cast<uint32_t>(val_.size())};
  return fresh(std::move(out), [this, v, a, factor]() {
    const std::vector<double>& g = grad_[v.idx];
    for (size_t i = 0; i < g.size(); ++i) grad_[a.idx][i] += factor * g[i];
  });
}

void Graph::backward(Var seed) {
  if (!seed.valid() || val_[seed.idx].size() != 1)
    throw std::invalid_argument("backward: seed must be a scalar variable");
  grad_[seed.idx][0] = 1.0;
  for (size_t i = back_.size(); i-- > 0;) {
    if (back_[i]) back_[i]();
  }
}

}  // namespace nellcom
