#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation applied to Vars created on it. Calling
// backward() on a scalar Var walks the tape in reverse and accumulates
// gradients. Operations are coarse grained (matmul, conv1d, layer norm, ...)
// so the interpretive overhead stays small next to the arithmetic.
//
// Tensors are row-major. Most operations interpret their operands as 1-D
// vectors or 2-D matrices; rank-3 shapes only appear for convolution weights.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace eegdt {

struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape_, double fill = 0.0);
  Tensor(std::vector<size_t> shape_, std::vector<double> data_);

  size_t size() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }
  // Rows/cols when viewed as a matrix: rank-1 tensors are a single row.
  size_t rows() const;
  size_t cols() const;

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool operator==(const Tensor&) const = default;
};

size_t shape_size(const std::vector<size_t>& shape);
std::string shape_string(const std::vector<size_t>& shape);

class ParameterSet;

namespace ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  size_t id() const { return id_; }

  const Tensor& value() const;
  const std::vector<size_t>& shape() const { return value().shape; }
  size_t size() const { return value().size(); }
  size_t rows() const { return value().rows(); }
  size_t cols() const { return value().cols(); }
  double item() const;

 private:
  Tape* tape_ = nullptr;
  size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, size_t self)>;

  // With recording disabled no backward closures are kept, which makes
  // inference cheaper. backward() then throws.
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Tensor value);
  // A differentiable leaf owned by the tape.
  Var variable(Tensor value);
  // A differentiable leaf that aliases parameter `index` of `params`. Repeat
  // calls return the same Var. All parameter leaves on one tape must come
  // from the same ParameterSet, which must outlive the tape.
  Var param(const ParameterSet& params, size_t index);

  Var push(Tensor value, bool requires_grad, Backward backward);

  void backward(Var scalar);

  const Tensor& value(size_t id) const;
  bool requires_grad(size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node; allocated (zeroed) on first access.
  std::vector<double>& grad(size_t id);
  // Read-only gradient; empty when the node received no gradient.
  const std::vector<double>& grad_or_empty(size_t id) const { return nodes_[id].grad; }

  // Adds the gradient of every parameter leaf into `grads` (indexed like the
  // bound ParameterSet), multiplied by `weight`.
  void accumulate_param_grads(std::vector<Tensor>& grads, double weight = 1.0) const;

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor own;
    const Tensor* external = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
  };

  bool recording_;
  std::deque<Node> nodes_;  // deque: references stay valid as the tape grows
  const ParameterSet* params_ = nullptr;
  std::vector<size_t> param_nodes_;
};

inline constexpr size_t kNoNode = std::numeric_limits<size_t>::max();

// ---- elementwise ---------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);
Var square(Var a);
Var sigmoid(Var a);
Var silu(Var a);
Var relu(Var a);
Var elu(Var a);
// tanh approximation
Var gelu(Var a);
Var clamp_min(Var a, double lo);

// ---- broadcasting on matrices (rows x cols) -----------------------------
// a[i, j] + v[j]
Var add_row(Var a, Var v);
// a[i, j] * v[j]
Var mul_row(Var a, Var v);
// a[i, j] + v[i]
Var add_col(Var a, Var v);
// a[i, j] * v[i]
Var mul_col(Var a, Var v);
// a[i, j] * s where s is a single-element Var
Var mul_scalar(Var a, Var s);

// ---- linear algebra ------------------------------------------------------
// a[m x k] . b[k x n]
Var matmul(Var a, Var b);
// a[m x k] . b[n x k]^T
Var matmul_nt(Var a, Var b);
// x[n x in] . w[out x in]^T + bias[out]; bias may be an invalid Var.
// A rank-1 x is treated as a single row and the result is rank-1.
Var linear(Var x, Var w, Var bias);
Var transpose(Var a);

// ---- shape ---------------------------------------------------------------
Var reshape(Var a, std::vector<size_t> shape);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, size_t start, size_t count);
Var slice_cols(Var a, size_t start, size_t count);
// a of shape [d0, d1, d2] -> axes permuted by `perm`.
Var permute3(Var a, std::array<size_t, 3> perm);

// ---- reductions ----------------------------------------------------------
Var sum(Var a);
Var mean(Var a);
// per-row reductions over columns -> [rows]
Var mean_cols(Var a);
Var max_cols(Var a);
// per-column reductions over rows -> [cols]
Var mean_rows(Var a);
Var max_rows(Var a);
// non-overlapping average pooling along columns, trailing remainder dropped
Var avg_pool_cols(Var a, size_t window);

// ---- normalization & attention helpers -----------------------------------
// Each row normalized to zero mean and unit variance (no affine).
Var layer_norm_rows(Var a, double eps);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// ---- convolution ---------------------------------------------------------
// x[c_in x L], w[c_out x (c_in / groups) x K], bias[c_out] (may be invalid).
// Output [c_out x L_out], L_out = (L + pad_left + pad_right - K) / stride + 1.
Var conv1d(Var x, Var w, Var bias, size_t stride, size_t pad_left, size_t pad_right,
           size_t groups = 1);
// "same" convolution with stride 1 (pad_left = (K-1)/2, pad_right = K/2).
Var conv1d_same(Var x, Var w, Var bias, size_t groups = 1);

// Composes a temporal filter bank t[F x K] with a spatial (depthwise) filter
// dw[F*depth x C] into a full conv weight [F*depth x C x K]:
//   out[f*depth + d, c, k] = dw[f*depth + d, c] * t[f, k]
Var factorized_conv_weight(Var dw, Var t, size_t depth);

}  // namespace ad
}  // namespace eegdt
