#include "agesynth/autograd.hpp"

#include <cmath>
#include <unordered_map>

#include "agesynth/errors.hpp"

namespace agesynth::ad {

namespace {

thread_local bool g_grad_enabled = true;

using kernels::Binary;

// Applies `f` elementwise to produce a new tensor.
template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  const auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = f(src[i]);
  return out;
}

Var make_result(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var::from_node(std::move(node));
}

Var accumulate(const Var& a, const Var& b) {
  if (!a.defined()) return b;
  if (!b.defined()) return a;
  return add(a, b);
}

}  // namespace

Var::Var(Tensor value, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor& Var::mutable_value() const {
  if (!is_leaf()) {
    throw ArgumentError("mutable_value() on a non-leaf variable");
  }
  return node_->value;
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var detach(const Var& x) { return constant(x.value()); }

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph) {
  if (output.value().numel() != 1) {
    throw ShapeError("grad: output must be a scalar, got " +
                     output.shape().str());
  }
  // Post-order over the nodes that carry gradient.
  std::vector<Node*> order;
  if (output.requires_grad()) {
    std::unordered_map<Node*, bool> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
    visited[output.node()] = true;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const Var& p = node->parents[next++];
        if (p.requires_grad() && !visited[p.node()]) {
          visited[p.node()] = true;
          stack.emplace_back(p.node(), 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, bool> wanted;
  for (const auto& in : inputs) {
    if (in.defined()) wanted[in.node()] = true;
  }

  // Without create_graph, nodes that cannot reach a wanted input are marked
  // as not requiring grad for the duration of the sweep, so backward rules
  // skip them (e.g. weight gradients of a network only differentiated
  // through). With create_graph the new graph must keep those links.
  std::vector<Node*> pruned;
  if (!create_graph) {
    std::unordered_map<Node*, bool> relevant;
    for (Node* node : order) {
      bool r = wanted.count(node) > 0;
      for (const auto& p : node->parents) {
        if (p.requires_grad() && relevant[p.node()]) r = true;
      }
      relevant[node] = r;
    }
    for (Node* node : order) {
      for (const auto& p : node->parents) {
        Node* pn = p.node();
        if (pn->requires_grad && !relevant[pn]) {
          pn->requires_grad = false;
          pruned.push_back(pn);
        }
      }
    }
  }

  const bool previous = g_grad_enabled;
  g_grad_enabled = create_graph;
  std::unordered_map<Node*, Var> grads;
  if (output.requires_grad()) {
    grads[output.node()] = constant(Tensor(output.shape(), 1.0));
  }
  try {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (!node->backward) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;
      const Var g = found->second;
      if (!wanted.count(node)) grads.erase(found);
      const auto parent_grads = node->backward(g);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        const Var& p = node->parents[i];
        if (!p.requires_grad() || !parent_grads[i].defined()) continue;
        grads[p.node()] = accumulate(grads[p.node()], parent_grads[i]);
      }
    }
  } catch (...) {
    g_grad_enabled = previous;
    for (Node* n : pruned) n->requires_grad = true;
    throw;
  }
  g_grad_enabled = previous;
  for (Node* n : pruned) n->requires_grad = true;

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto found = in.defined() ? grads.find(in.node()) : grads.end();
    if (found != grads.end() && found->second.defined()) {
      result.push_back(found->second);
    } else {
      result.push_back(constant(Tensor(in.shape())));
    }
  }
  return result;
}

Var add(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  return make_result(kernels::binary(Binary::add, a.value(), b.value()),
                     {a, b}, [sa, sb](const Var& g) -> std::vector<Var> {
                       return {reduce_to(g, sa), reduce_to(g, sb)};
                     });
}

Var sub(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  return make_result(kernels::binary(Binary::sub, a.value(), b.value()),
                     {a, b}, [sa, sb](const Var& g) -> std::vector<Var> {
                       return {reduce_to(g, sa), reduce_to(neg(g), sb)};
                     });
}

Var mul(const Var& a, const Var& b) {
  return make_result(kernels::binary(Binary::mul, a.value(), b.value()),
                     {a, b}, [a, b](const Var& g) -> std::vector<Var> {
                       Var ga, gb;
                       if (a.requires_grad()) ga = reduce_to(g * b, a.shape());
                       if (b.requires_grad()) gb = reduce_to(g * a, b.shape());
                       return {ga, gb};
                     });
}

Var div(const Var& a, const Var& b) {
  return make_result(
      kernels::binary(Binary::div, a.value(), b.value()), {a, b},
      [a, b](const Var& g) -> std::vector<Var> {
        Var ga, gb;
        if (a.requires_grad()) ga = reduce_to(g / b, a.shape());
        if (b.requires_grad()) {
          gb = reduce_to(neg(g * a / square(b)), b.shape());
        }
        return {ga, gb};
      });
}

Var neg(const Var& x) { return mul_scalar(x, -1.0); }

Var mul_scalar(const Var& x, double s) {
  return make_result(map(x.value(), [s](double v) { return v * s; }), {x},
                     [s](const Var& g) -> std::vector<Var> {
                       return {mul_scalar(g, s)};
                     });
}

Var add_scalar(const Var& x, double s) {
  return make_result(map(x.value(), [s](double v) { return v + s; }), {x},
                     [](const Var& g) -> std::vector<Var> { return {g}; });
}

Var square(const Var& x) {
  return make_result(map(x.value(), [](double v) { return v * v; }), {x},
                     [x](const Var& g) -> std::vector<Var> {
                       return {mul_scalar(g * x, 2.0)};
                     });
}

Var sqrt(const Var& x) {
  return make_result(map(x.value(), [](double v) { return std::sqrt(v); }),
                     {x}, [x](const Var& g) -> std::vector<Var> {
                       return {mul_scalar(g / sqrt(x), 0.5)};
                     });
}

Var abs(const Var& x) {
  Tensor sign = map(x.value(), [](double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  });
  return make_result(map(x.value(), [](double v) { return std::abs(v); }),
                     {x}, [sign = std::move(sign)](const Var& g) {
                       return std::vector<Var>{g * constant(sign)};
                     });
}

Var tanh(const Var& x) {
  return make_result(map(x.value(), [](double v) { return std::tanh(v); }),
                     {x}, [x](const Var& g) -> std::vector<Var> {
                       const Var t = tanh(x);
                       return {g - g * square(t)};
                     });
}

Var sigmoid(const Var& x) {
  return make_result(map(x.value(),
                         [](double v) {
                           return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                           : std::exp(v) / (1.0 + std::exp(v));
                         }),
                     {x}, [x](const Var& g) -> std::vector<Var> {
                       const Var s = sigmoid(x);
                       return {g * (s - square(s))};
                     });
}

Var softplus(const Var& x) {
  return make_result(map(x.value(),
                         [](double v) {
                           return std::max(v, 0.0) +
                                  std::log1p(std::exp(-std::abs(v)));
                         }),
                     {x}, [x](const Var& g) -> std::vector<Var> {
                       return {g * sigmoid(x)};
                     });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor gate = map(x.value(), [slope](double v) { return v > 0.0 ? 1.0 : slope; });
  Tensor out = kernels::binary(Binary::mul, x.value(), gate);
  return make_result(std::move(out), {x},
                     [gate = std::move(gate)](const Var& g) {
                       return std::vector<Var>{g * constant(gate)};
                     });
}

Var sum(const Var& x) { return reduce_to(x, Shape{}); }

Var mean(const Var& x) {
  return mul_scalar(sum(x), 1.0 / static_cast<double>(x.value().numel()));
}

Var reduce_to(const Var& x, const Shape& target) {
  if (x.shape() == target) return x;
  const Shape source = x.shape();
  return make_result(kernels::reduce_to(x.value(), target), {x},
                     [source](const Var& g) -> std::vector<Var> {
                       return {broadcast_to(g, source)};
                     });
}

Var broadcast_to(const Var& x, const Shape& target) {
  if (x.shape() == target) return x;
  const Shape source = x.shape();
  return make_result(kernels::broadcast_to(x.value(), target), {x},
                     [source](const Var& g) -> std::vector<Var> {
                       return {reduce_to(g, source)};
                     });
}

Var reshape(const Var& x, const Shape& shape) {
  if (x.shape() == shape) return x;
  const Shape source = x.shape();
  return make_result(x.value().reshaped(shape), {x},
                     [source](const Var& g) -> std::vector<Var> {
                       return {reshape(g, source)};
                     });
}

Var conv2d(const Var& x, const Var& w, kernels::ConvGeometry geo) {
  return make_result(
      kernels::conv2d(x.value(), w.value(), geo), {x, w},
      [x, w, geo](const Var& g) -> std::vector<Var> {
        Var gx, gw;
        if (x.requires_grad()) gx = conv2d_input_grad(g, w, x.shape(), geo);
        if (w.requires_grad()) gw = conv2d_weight_grad(x, g, w.shape(), geo);
        return {gx, gw};
      });
}

Var conv2d_input_grad(const Var& grad_out, const Var& w, const Shape& x_shape,
                      kernels::ConvGeometry geo) {
  return make_result(
      kernels::conv2d_input_grad(grad_out.value(), w.value(), x_shape, geo),
      {grad_out, w},
      [grad_out, w, geo](const Var& g) -> std::vector<Var> {
        Var gg, gw;
        if (grad_out.requires_grad()) gg = conv2d(g, w, geo);
        if (w.requires_grad()) {
          gw = conv2d_weight_grad(g, grad_out, w.shape(), geo);
        }
        return {gg, gw};
      });
}

Var conv2d_weight_grad(const Var& x, const Var& grad_out, const Shape& w_shape,
                       kernels::ConvGeometry geo) {
  return make_result(
      kernels::conv2d_weight_grad(x.value(), grad_out.value(), w_shape, geo),
      {x, grad_out},
      [x, grad_out, geo](const Var& g) -> std::vector<Var> {
        Var gx, gg;
        if (x.requires_grad()) {
          gx = conv2d_input_grad(grad_out, g, x.shape(), geo);
        }
        if (grad_out.requires_grad()) gg = conv2d(x, g, geo);
        return {gx, gg};
      });
}

Var resample(const Var& x, const kernels::Interp1D& rows,
             const kernels::Interp1D& cols) {
  return make_result(kernels::resample(x.value(), rows, cols), {x},
                     [rows, cols](const Var& g) -> std::vector<Var> {
                       return {resample_adjoint(g, rows, cols)};
                     });
}

Var resample_adjoint(const Var& g_in, const kernels::Interp1D& rows,
                     const kernels::Interp1D& cols) {
  return make_result(kernels::resample_adjoint(g_in.value(), rows, cols),
                     {g_in}, [rows, cols](const Var& g) -> std::vector<Var> {
                       return {resample(g, rows, cols)};
                     });
}

Var concat_channels(const Var& a, const Var& b) {
  const int ca = a.shape().c;
  const int cb = b.shape().c;
  return make_result(kernels::concat_channels(a.value(), b.value()), {a, b},
                     [ca, cb](const Var& g) -> std::vector<Var> {
                       return {slice_channels(g, 0, ca),
                               slice_channels(g, ca, cb)};
                     });
}

Var slice_channels(const Var& x, int begin, int count) {
  const int total = x.shape().c;
  return make_result(kernels::slice_channels(x.value(), begin, count), {x},
                     [begin, total](const Var& g) -> std::vector<Var> {
                       return {embed_channels(g, begin, total)};
                     });
}

Var embed_channels(const Var& x, int begin, int total) {
  const int count = x.shape().c;
  return make_result(kernels::embed_channels(x.value(), begin, total), {x},
                     [begin, count](const Var& g) -> std::vector<Var> {
                       return {slice_channels(g, begin, count)};
                     });
}

}  // namespace agesynth::ad
