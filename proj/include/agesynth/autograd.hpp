#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "agesynth/tensor.hpp"

/// Reverse-mode automatic differentiation over `Tensor`.
///
/// Each differentiable op records its parents and a backward rule. Backward
/// rules are themselves written with differentiable ops, so calling `grad`
/// with `create_graph = true` yields gradients that can be differentiated
/// again. The R1 penalty depends on this.
namespace agesynth::ad {

class Var;
using BackwardFn = std::function<std::vector<Var>(const Var& grad_out)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> parents;
  BackwardFn backward;
};

class Var {
public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  /// Mutable access for in-place parameter updates. Only valid on leaves.
  Tensor& mutable_value() const;
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const noexcept {
    return node_ != nullptr && node_->requires_grad;
  }
  bool is_leaf() const noexcept { return node_ && !node_->backward; }
  double item() const { return node_->value.item(); }

  Node* node() const noexcept { return node_.get(); }

  static Var from_node(std::shared_ptr<Node> node);

private:
  std::shared_ptr<Node> node_;
};

/// Graph recording switch, thread local. Recording is on by default.
bool grad_enabled() noexcept;

class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var parameter(Tensor t) { return Var(std::move(t), true); }
Var detach(const Var& x);

/// Gradients of the scalar `output` with respect to each of `inputs`.
/// Inputs the output does not depend on receive zero tensors.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph = false);

// Elementwise arithmetic with broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& x);
Var mul_scalar(const Var& x, double s);
Var add_scalar(const Var& x, double s);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& x) { return neg(x); }
inline Var operator*(const Var& x, double s) { return mul_scalar(x, s); }
inline Var operator*(double s, const Var& x) { return mul_scalar(x, s); }

Var square(const Var& x);
Var sqrt(const Var& x);
Var abs(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x);
Var leaky_relu(const Var& x, double slope);
inline Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var sum(const Var& x);
Var mean(const Var& x);
Var reduce_to(const Var& x, const Shape& target);
Var broadcast_to(const Var& x, const Shape& target);
Var reshape(const Var& x, const Shape& shape);

Var conv2d(const Var& x, const Var& w, kernels::ConvGeometry g);
Var conv2d_input_grad(const Var& grad_out, const Var& w, const Shape& x_shape,
                      kernels::ConvGeometry g);
Var conv2d_weight_grad(const Var& x, const Var& grad_out, const Shape& w_shape,
                       kernels::ConvGeometry g);

Var resample(const Var& x, const kernels::Interp1D& rows,
             const kernels::Interp1D& cols);
Var resample_adjoint(const Var& g, const kernels::Interp1D& rows,
                     const kernels::Interp1D& cols);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int begin, int count);
Var embed_channels(const Var& x, int begin, int total);

}  // namespace agesynth::ad
