#include "eegdt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "eegdt/errors.hpp"
#include "eegdt/params.hpp"

namespace eegdt {

Tensor::Tensor(std::vector<size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_size(shape), fill) {}

Tensor::Tensor(std::vector<size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_size(shape) != data.size()) {
    throw InvalidArgument("tensor: shape " + shape_string(shape) + " does not match " +
                          std::to_string(data.size()) + " values");
  }
}

size_t Tensor::rows() const {
  if (shape.size() <= 1) return 1;
  return shape[0];
}

size_t Tensor::cols() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return shape[0];
  return data.size() / shape[0];
}

size_t shape_size(const std::vector<size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace ad {

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw InvalidArgument("item: tensor is not a scalar " + shape_string(v.shape));
  return v[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const ParameterSet& params, size_t index) {
  if (params_ == nullptr) {
    params_ = &params;
    param_nodes_.assign(params.size(), kNoNode);
  } else if (params_ != &params) {
    throw InvalidArgument("tape: parameters from two different sets");
  }
  if (index >= param_nodes_.size()) throw InvalidArgument("tape: parameter index out of range");
  if (param_nodes_[index] == kNoNode) {
    Node n;
    n.external = &params.tensor(index);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    param_nodes_[index] = nodes_.size() - 1;
  }
  return Var(this, param_nodes_[index]);
}

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad && recording_;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.own;
}

std::vector<double>& Tape::grad(size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Tape::backward(Var scalar) {
  if (!recording_) throw InvalidArgument("backward: tape was created without recording");
  if (scalar.size() != 1) throw InvalidArgument("backward: loss must be a scalar");
  if (!nodes_[scalar.id()].requires_grad) return;
  grad(scalar.id())[0] += 1.0;
  for (size_t i = scalar.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

void Tape::accumulate_param_grads(std::vector<Tensor>& grads, double weight) const {
  if (params_ == nullptr) return;
  if (grads.size() != param_nodes_.size()) throw InvalidArgument("tape: gradient buffer size mismatch");
  for (size_t p = 0; p < param_nodes_.size(); ++p) {
    if (param_nodes_[p] == kNoNode) continue;
    const auto& g = nodes_[param_nodes_[p]].grad;
    if (g.empty()) continue;
    auto& dst = grads[p].data;
    for (size_t i = 0; i < g.size(); ++i) dst[i] += weight * g[i];
  }
}

// ---------------------------------------------------------------------------
// helpers

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw InvalidArgument("autodiff: operands live on different tapes");
  return a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()));
  }
}

bool rg(Var v) { return v.valid() && v.tape().requires_grad(v.id()); }

// C[m x n] += A[m x k] . B[k x n]
void gemm_nn(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
  for (size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[m x k] . B[n x k]^T
void gemm_nt(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// C[m x n] += A[k x m]^T . B[k x n]
void gemm_tn(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
  for (size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = a.tape();
  const Tensor& av = a.value();
  Tensor out(av.shape);
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, deriv](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (size_t i = 0; i < bv.size(); ++i) out[i] += bv[i];
  const size_t ia = a.id(), ib = b.id();
  const bool ra = rg(a), rb = rg(b);
  return tape.push(std::move(out), ra || rb, [ia, ib, ra, rb](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (rb) {
      auto& gb = t.grad(ib);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (size_t i = 0; i < bv.size(); ++i) out[i] -= bv[i];
  const size_t ia = a.id(), ib = b.id();
  const bool ra = rg(a), rb = rg(b);
  return tape.push(std::move(out), ra || rb, [ia, ib, ra, rb](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (rb) {
      auto& gb = t.grad(ib);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bv = b.value().data;
  for (size_t i = 0; i < bv.size(); ++i) out[i] *= bv[i];
  const size_t ia = a.id(), ib = b.id();
  const bool ra = rg(a), rb = rg(b);
  return tape.push(std::move(out), ra || rb, [ia, ib, ra, rb](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& av = t.value(ia).data;
    const auto& bv = t.value(ib).data;
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (rb) {
      auto& gb = t.grad(ib);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var silu(Var a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var gelu(Var a) {
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double u = kGeluC * (x + 0.044715 * x * x * x);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
      });
}

Var clamp_min(Var a, double lo) {
  return unary(
      a, [lo](double x) { return x < lo ? lo : x; },
      [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

// ---------------------------------------------------------------------------
// broadcasting

Var add_row(Var a, Var v) {
  Tape& tape = same_tape(a, v);
  const size_t m = a.rows(), n = a.cols();
  if (v.size() != n) throw InvalidArgument("add_row: vector length mismatch");
  Tensor out = a.value();
  const auto& vv = v.value().data;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += vv[j];
  const size_t ia = a.id(), iv = v.id();
  const bool ra = rg(a), rv = rg(v);
  return tape.push(std::move(out), ra || rv, [ia, iv, ra, rv, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (rv) {
      auto& gv = t.grad(iv);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) gv[j] += g[i * n + j];
    }
  });
}

Var mul_row(Var a, Var v) {
  Tape& tape = same_tape(a, v);
  const size_t m = a.rows(), n = a.cols();
  if (v.size() != n) throw InvalidArgument("mul_row: vector length mismatch");
  Tensor out = a.value();
  const auto& vv = v.value().data;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] *= vv[j];
  const size_t ia = a.id(), iv = v.id();
  const bool ra = rg(a), rv = rg(v);
  return tape.push(std::move(out), ra || rv, [ia, iv, ra, rv, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& av = t.value(ia).data;
    const auto& vv = t.value(iv).data;
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * vv[j];
    }
    if (rv) {
      auto& gv = t.grad(iv);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) gv[j] += g[i * n + j] * av[i * n + j];
    }
  });
}

Var add_col(Var a, Var v) {
  Tape& tape = same_tape(a, v);
  const size_t m = a.rows(), n = a.cols();
  if (v.size() != m) throw InvalidArgument("add_col: vector length mismatch");
  Tensor out = a.value();
  const auto& vv = v.value().data;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += vv[i];
  const size_t ia = a.id(), iv = v.id();
  const bool ra = rg(a), rv = rg(v);
  return tape.push(std::move(out), ra || rv, [ia, iv, ra, rv, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (rv) {
      auto& gv = t.grad(iv);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) gv[i] += g[i * n + j];
    }
  });
}

Var mul_col(Var a, Var v) {
  Tape& tape = same_tape(a, v);
  const size_t m = a.rows(), n = a.cols();
  if (v.size() != m) throw InvalidArgument("mul_col: vector length mismatch");
  Tensor out = a.value();
  const auto& vv = v.value().data;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] *= vv[i];
  const size_t ia = a.id(), iv = v.id();
  const bool ra = rg(a), rv = rg(v);
  return tape.push(std::move(out), ra || rv, [ia, iv, ra, rv, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& av = t.value(ia).data;
    const auto& vv = t.value(iv).data;
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * vv[i];
    }
    if (rv) {
      auto& gv = t.grad(iv);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) gv[i] += g[i * n + j] * av[i * n + j];
    }
  });
}

Var mul_scalar(Var a, Var s) {
  Tape& tape = same_tape(a, s);
  if (s.size() != 1) throw InvalidArgument("mul_scalar: factor must have one element");
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (double& x : out.data) x *= sv;
  const size_t ia = a.id(), is = s.id();
  const bool ra = rg(a), rs = rg(s);
  return tape.push(std::move(out), ra || rs, [ia, is, ra, rs](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& av = t.value(ia).data;
    const double sv = t.value(is)[0];
    if (ra) {
      auto& ga = t.grad(ia);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
    }
    if (rs) {
      double acc = 0.0;
      for (size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad(is)[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw InvalidArgument("matmul: inner dimension mismatch " + shape_string(a.shape()) + " . " +
                          shape_string(b.shape()));
  }
  Tensor out({m, n});
  gemm_nn(m, n, k, a.value().data.data(), b.value().data.data(), out.data.data());
  const size_t ia = a.id(), ib = b.id();
  const bool ra = rg(a), rb = rg(b);
  return tape.push(std::move(out), ra || rb, [=](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) gemm_nt(m, k, n, g.data(), t.value(ib).data.data(), t.grad(ia).data());
    if (rb) gemm_tn(k, n, m, t.value(ia).data.data(), g.data(), t.grad(ib).data());
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw InvalidArgument("matmul_nt: inner dimension mismatch " + shape_string(a.shape()) +
                          " . " + shape_string(b.shape()) + "^T");
  }
  Tensor out({m, n});
  gemm_nt(m, n, k, a.value().data.data(), b.value().data.data(), out.data.data());
  const size_t ia = a.id(), ib = b.id();
  const bool ra = rg(a), rb = rg(b);
  return tape.push(std::move(out), ra || rb, [=](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (ra) gemm_nn(m, k, n, g.data(), t.value(ib).data.data(), t.grad(ia).data());
    if (rb) gemm_tn(n, k, m, g.data(), t.value(ia).data.data(), t.grad(ib).data());
  });
}

Var linear(Var x, Var w, Var bias) {
  Tape& tape = same_tape(x, w);
  const bool vector_in = x.value().rank() == 1;
  const size_t m = x.rows(), in = x.cols();
  if (w.value().rank() != 2 || w.cols() != in) {
    throw InvalidArgument("linear: weight " + shape_string(w.shape()) + " incompatible with input " +
                          shape_string(x.shape()));
  }
  const size_t out_dim = w.rows();
  const bool has_bias = bias.valid();
  if (has_bias && bias.size() != out_dim) throw InvalidArgument("linear: bias length mismatch");
  Tensor out(vector_in ? std::vector<size_t>{out_dim} : std::vector<size_t>{m, out_dim});
  if (has_bias) {
    const auto& bv = bias.value().data;
    for (size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.data.begin() + i * out_dim);
  }
  gemm_nt(m, out_dim, in, x.value().data.data(), w.value().data.data(), out.data.data());
  const size_t ix = x.id(), iw = w.id(), ib = has_bias ? bias.id() : kNoNode;
  const bool rx = rg(x), rw = rg(w), rb = has_bias && rg(bias);
  return tape.push(std::move(out), rx || rw || rb, [=](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    if (rx) gemm_nn(m, in, out_dim, g.data(), t.value(iw).data.data(), t.grad(ix).data());
    if (rw) gemm_tn(out_dim, in, m, g.data(), t.value(ix).data.data(), t.grad(iw).data());
    if (rb) {
      auto& gb = t.grad(ib);
      for (size_t i = 0; i < m; ++i)
        for (size_t o = 0; o < out_dim; ++o) gb[o] += g[i * out_dim + o];
    }
  });
}

Var transpose(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out({n, m});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

// ---------------------------------------------------------------------------
// shape

Var reshape(Var a, std::vector<size_t> shape) {
  Tape& tape = a.tape();
  if (shape_size(shape) != a.size()) {
    throw InvalidArgument("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().data);
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_rows: no inputs");
  Tape& tape = parts[0].tape();
  const size_t n = parts[0].cols();
  size_t m = 0;
  bool any = false;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.cols() != n) throw InvalidArgument("concat_rows: column count mismatch");
    m += p.rows();
    any = any || rg(p);
  }
  Tensor out({m, n});
  std::vector<size_t> ids, offsets;
  size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.size();
  }
  return tape.push(std::move(out), any, [ids, offsets](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    for (size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      auto& gp = t.grad(ids[k]);
      for (size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  Tape& tape = parts[0].tape();
  const size_t m = parts[0].rows();
  size_t n = 0;
  bool any = false;
  std::vector<size_t> ids, widths;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != m) throw InvalidArgument("concat_cols: row count mismatch");
    n += p.cols();
    any = any || rg(p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Tensor out({m, n});
  size_t col = 0;
  for (const Var& p : parts) {
    const size_t w = p.cols();
    const auto& pv = p.value().data;
    for (size_t i = 0; i < m; ++i)
      std::copy(pv.begin() + i * w, pv.begin() + (i + 1) * w, out.data.begin() + i * n + col);
    col += w;
  }
  return tape.push(std::move(out), any, [ids, widths, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    size_t col = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      const size_t w = widths[k];
      if (t.requires_grad(ids[k])) {
        auto& gp = t.grad(ids[k]);
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + col + j];
      }
      col += w;
    }
  });
}

Var slice_rows(Var a, size_t start, size_t count) {
  Tape& tape = a.tape();
  const size_t n = a.cols();
  if (start + count > a.rows()) throw InvalidArgument("slice_rows: range out of bounds");
  const bool vec = a.value().rank() <= 1;
  Tensor out(vec ? std::vector<size_t>{count * n} : std::vector<size_t>{count, n});
  if (vec && count != 1) throw InvalidArgument("slice_rows: vector has a single row");
  std::copy(a.value().data.begin() + start * n, a.value().data.begin() + (start + count) * n,
            out.data.begin());
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, start, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < g.size(); ++i) ga[start * n + i] += g[i];
  });
}

Var slice_cols(Var a, size_t start, size_t count) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  if (start + count > n) throw InvalidArgument("slice_cols: range out of bounds");
  const bool vec = a.value().rank() <= 1;
  Tensor out(vec ? std::vector<size_t>{count} : std::vector<size_t>{m, count});
  const auto& av = a.value().data;
  for (size_t i = 0; i < m; ++i)
    std::copy(av.begin() + i * n + start, av.begin() + i * n + start + count,
              out.data.begin() + i * count);
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, start, count, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < count; ++j) ga[i * n + start + j] += g[i * count + j];
  });
}

Var permute3(Var a, std::array<size_t, 3> perm) {
  Tape& tape = a.tape();
  const auto& sh = a.shape();
  if (sh.size() != 3) throw InvalidArgument("permute3: expected a rank-3 tensor");
  std::array<size_t, 3> in_dims{sh[0], sh[1], sh[2]};
  std::array<size_t, 3> in_strides{sh[1] * sh[2], sh[2], 1};
  std::array<size_t, 3> out_dims{in_dims[perm[0]], in_dims[perm[1]], in_dims[perm[2]]};
  // index map: out flat -> in flat
  std::vector<size_t> src(a.size());
  size_t o = 0;
  for (size_t i = 0; i < out_dims[0]; ++i)
    for (size_t j = 0; j < out_dims[1]; ++j)
      for (size_t k = 0; k < out_dims[2]; ++k)
        src[o++] = i * in_strides[perm[0]] + j * in_strides[perm[1]] + k * in_strides[perm[2]];
  Tensor out({out_dims[0], out_dims[1], out_dims[2]});
  const auto& av = a.value().data;
  for (size_t i = 0; i < src.size(); ++i) out[i] = av[src[i]];
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, src = std::move(src)](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < src.size(); ++i) ga[src[i]] += g[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(Var a) {
  Tape& tape = a.tape();
  double s = 0.0;
  for (double x : a.value().data) s += x;
  const size_t ia = a.id();
  return tape.push(Tensor({1}, s), rg(a), [ia](Tape& t, size_t self) {
    const double g = t.grad_or_empty(self)[0];
    for (double& x : t.grad(ia)) x += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var mean_cols(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out({m});
  for (size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) s += av[i * n + j];
    out[i] = s / static_cast<double>(n);
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    const double inv = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * inv;
  });
}

Var max_cols(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out({m});
  std::vector<size_t> arg(m);
  for (size_t i = 0; i < m; ++i) {
    size_t best = 0;
    for (size_t j = 1; j < n; ++j)
      if (av[i * n + j] > av[i * n + best]) best = j;
    arg[i] = i * n + best;
    out[i] = av[arg[i]];
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, arg = std::move(arg)](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < arg.size(); ++i) ga[arg[i]] += g[i];
  });
}

Var mean_rows(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out({n});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  for (double& x : out.data) x /= static_cast<double>(m);
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    const double inv = 1.0 / static_cast<double>(m);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
  });
}

Var max_rows(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out({n});
  std::vector<size_t> arg(n);
  for (size_t j = 0; j < n; ++j) {
    size_t best = 0;
    for (size_t i = 1; i < m; ++i)
      if (av[i * n + j] > av[best * n + j]) best = i;
    arg[j] = best * n + j;
    out[j] = av[arg[j]];
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, arg = std::move(arg)](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t j = 0; j < arg.size(); ++j) ga[arg[j]] += g[j];
  });
}

Var avg_pool_cols(Var a, size_t window) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  if (window == 0 || n / window == 0) throw InvalidArgument("avg_pool_cols: window larger than input");
  const size_t out_n = n / window;
  const auto& av = a.value().data;
  Tensor out({m, out_n});
  const double inv = 1.0 / static_cast<double>(window);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < out_n; ++j) {
      double s = 0.0;
      for (size_t w = 0; w < window; ++w) s += av[i * n + j * window + w];
      out[i * out_n + j] = s * inv;
    }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [=](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < out_n; ++j)
        for (size_t w = 0; w < window; ++w) ga[i * n + j * window + w] += g[i * out_n + j] * inv;
  });
}

// ---------------------------------------------------------------------------
// normalization

Var layer_norm_rows(Var a, double eps) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out(a.shape());
  std::vector<double> inv_std(m);
  for (size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    double mu = 0.0;
    for (size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mu) * inv_std[i];
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a),
                   [ia, m, n, inv_std = std::move(inv_std)](Tape& t, size_t self) {
                     const auto& g = t.grad_or_empty(self);
                     const auto& y = t.value(self).data;
                     auto& ga = t.grad(ia);
                     const double inv_n = 1.0 / static_cast<double>(n);
                     for (size_t i = 0; i < m; ++i) {
                       double sg = 0.0, sgy = 0.0;
                       for (size_t j = 0; j < n; ++j) {
                         sg += g[i * n + j];
                         sgy += g[i * n + j] * y[i * n + j];
                       }
                       for (size_t j = 0; j < n; ++j) {
                         ga[i * n + j] += inv_std[i] *
                                          (g[i * n + j] - sg * inv_n - y[i * n + j] * sgy * inv_n);
                       }
                     }
                   });
}

Var softmax_rows(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out(a.shape());
  for (size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      s += out[i * n + j];
    }
    for (size_t j = 0; j < n; ++j) out[i * n + j] /= s;
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& y = t.value(self).data;
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& tape = a.tape();
  const size_t m = a.rows(), n = a.cols();
  const auto& av = a.value().data;
  Tensor out(a.shape());
  for (size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (size_t j = 0; j < n; ++j) out[i * n + j] = row[j] - lse;
  }
  const size_t ia = a.id();
  return tape.push(std::move(out), rg(a), [ia, m, n](Tape& t, size_t self) {
    const auto& g = t.grad_or_empty(self);
    const auto& y = t.value(self).data;
    auto& ga = t.grad(ia);
    for (size_t i = 0; i < m; ++i) {
      double sg = 0.0;
      for (size_t j = 0; j < n; ++j) sg += g[i * n + j];
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * sg;
    }
  });
}

// ---------------------------------------------------------------------------
// convolution

Var conv1d(Var x, Var w, Var bias, size_t stride, size_t pad_left, size_t pad_right,
           size_t groups) {
  Tape& tape = same_tape(x, w);
  const auto& ws = w.shape();
  if (ws.size() != 3) throw InvalidArgument("conv1d: weight must be rank 3, got " + shape_string(ws));
  const size_t c_in = x.rows(), len = x.cols();
  const size_t c_out = ws[0], cg_in = ws[1], kernel = ws[2];
  if (groups == 0 || c_in % groups != 0 || c_out % groups != 0 || cg_in != c_in / groups) {
    throw InvalidArgument("conv1d: channel/group mismatch, input " + shape_string(x.shape()) +
                          " weight " + shape_string(ws));
  }
  if (stride == 0) throw InvalidArgument("conv1d: stride must be positive");
  if (len + pad_left + pad_right < kernel) throw InvalidArgument("conv1d: kernel longer than padded input");
  const size_t out_len = (len + pad_left + pad_right - kernel) / stride + 1;
  const bool has_bias = bias.valid();
  if (has_bias && bias.size() != c_out) throw InvalidArgument("conv1d: bias length mismatch");
  const size_t cg_out = c_out / groups;

  // Valid output positions l for tap k satisfy 0 <= l*stride + k - pad_left < len.
  auto range_for = [=](size_t k, size_t& lo, size_t& hi) {
    const long off = static_cast<long>(k) - static_cast<long>(pad_left);
    long l_lo = off >= 0 ? 0 : (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    long l_hi = (static_cast<long>(len) - 1 - off);
    l_hi = l_hi < 0 ? -1 : l_hi / static_cast<long>(stride);
    l_hi = std::min<long>(l_hi, static_cast<long>(out_len) - 1);
    lo = static_cast<size_t>(l_lo);
    hi = l_hi < l_lo ? lo : static_cast<size_t>(l_hi + 1);
  };

  Tensor out({c_out, out_len});
  const double* xv = x.value().data.data();
  const double* wv = w.value().data.data();
  for (size_t co = 0; co < c_out; ++co) {
    double* orow = out.data.data() + co * out_len;
    if (has_bias) std::fill(orow, orow + out_len, bias.value()[co]);
    const size_t g = co / cg_out;
    for (size_t cj = 0; cj < cg_in; ++cj) {
      const double* xrow = xv + (g * cg_in + cj) * len;
      const double* wrow = wv + (co * cg_in + cj) * kernel;
      for (size_t k = 0; k < kernel; ++k) {
        const double wk = wrow[k];
        if (wk == 0.0) continue;
        size_t lo, hi;
        range_for(k, lo, hi);
        const long off = static_cast<long>(k) - static_cast<long>(pad_left);
        if (stride == 1) {
          const double* xs = xrow + (static_cast<long>(lo) + off);
          for (size_t l = lo; l < hi; ++l) orow[l] += wk * xs[l - lo];
        } else {
          for (size_t l = lo; l < hi; ++l) orow[l] += wk * xrow[static_cast<long>(l * stride) + off];
        }
      }
    }
  }

  const size_t ix = x.id(), iw = w.id(), ib = has_bias ? bias.id() : kNoNode;
  const bool rx = rg(x), rw = rg(w), rb = has_bias && rg(bias);
  return tape.push(std::move(out), rx || rw || rb, [=](Tape& t, size_t self) {
    const auto& gout = t.grad_or_empty(self);
    const double* xv = t.value(ix).data.data();
    const double* wv = t.value(iw).data.data();
    double* gx = rx ? t.grad(ix).data() : nullptr;
    double* gw = rw ? t.grad(iw).data() : nullptr;
    if (rb) {
      auto& gb = t.grad(ib);
      for (size_t co = 0; co < c_out; ++co)
        for (size_t l = 0; l < out_len; ++l) gb[co] += gout[co * out_len + l];
    }
    for (size_t co = 0; co < c_out; ++co) {
      const double* grow = gout.data() + co * out_len;
      const size_t g = co / cg_out;
      for (size_t cj = 0; cj < cg_in; ++cj) {
        const size_t ci = g * cg_in + cj;
        const double* xrow = xv + ci * len;
        for (size_t k = 0; k < kernel; ++k) {
          size_t lo, hi;
          range_for(k, lo, hi);
          const long off = static_cast<long>(k) - static_cast<long>(pad_left);
          const size_t widx = (co * cg_in + cj) * kernel + k;
          if (gw) {
            double s = 0.0;
            for (size_t l = lo; l < hi; ++l) s += grow[l] * xrow[static_cast<long>(l * stride) + off];
            gw[widx] += s;
          }
          if (gx) {
            const double wk = wv[widx];
            double* gxrow = gx + ci * len;
            for (size_t l = lo; l < hi; ++l) gxrow[static_cast<long>(l * stride) + off] += wk * grow[l];
          }
        }
      }
    }
  });
}

Var conv1d_same(Var x, Var w, Var bias, size_t groups) {
  const size_t k = w.shape().at(2);
  return conv1d(x, w, bias, 1, (k - 1) / 2, k / 2, groups);
}

Var factorized_conv_weight(Var dw, Var t, size_t depth) {
  Tape& tape = same_tape(dw, t);
  const size_t fd = dw.rows(), channels = dw.cols();
  const size_t filters = t.rows(), kernel = t.cols();
  if (depth == 0 || fd != filters * depth) {
    throw InvalidArgument("factorized_conv_weight: spatial filter rows must equal filters*depth");
  }
  const auto& dv = dw.value().data;
  const auto& tv = t.value().data;
  Tensor out({fd, channels, kernel});
  for (size_t r = 0; r < fd; ++r) {
    const size_t f = r / depth;
    for (size_t c = 0; c < channels; ++c)
      for (size_t k = 0; k < kernel; ++k)
        out[(r * channels + c) * kernel + k] = dv[r * channels + c] * tv[f * kernel + k];
  }
  const size_t idw = dw.id(), it = t.id();
  const bool rd = rg(dw), rt = rg(t);
  return tape.push(std::move(out), rd || rt, [=](Tape& tp, size_t self) {
    const auto& g = tp.grad_or_empty(self);
    const auto& dv = tp.value(idw).data;
    const auto& tv = tp.value(it).data;
    double* gd = rd ? tp.grad(idw).data() : nullptr;
    double* gt = rt ? tp.grad(it).data() : nullptr;
    for (size_t r = 0; r < fd; ++r) {
      const size_t f = r / depth;
      for (size_t c = 0; c < channels; ++c)
        for (size_t k = 0; k < kernel; ++k) {
          const double gv = g[(r * channels + c) * kernel + k];
          if (gd) gd[r * channels + c] += gv * tv[f * kernel + k];
          if (gt) gt[f * kernel + k] += gv * dv[r * channels + c];
        }
    }
  });
}

}  // namespace ad
}  // namespace eegdt
