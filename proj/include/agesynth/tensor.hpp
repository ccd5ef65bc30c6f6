#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace agesynth {

/// Every tensor is four dimensional, batch x height x width x channels.
/// Vectors are carried as [N, 1, 1, L]; convolution kernels reuse the same
/// struct as [kh, kw, in_channels, out_channels].
struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  int operator[](int axis) const noexcept;
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor(Shape{}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(int n, int h, int w, int c) noexcept {
    return data_[offset(n, h, w, c)];
  }
  double at(int n, int h, int w, int c) const noexcept {
    return data_[offset(n, h, w, c)];
  }

  /// Value of a single-element tensor.
  double item() const;

  /// Same storage reinterpreted with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

private:
  std::size_t offset(int n, int h, int w, int c) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.h + h) * shape_.w + w) *
               shape_.c +
           c;
  }

  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

namespace kernels {

enum class Binary { add, sub, mul, div };

/// Numpy-style broadcast over the four axes (size 1 stretches).
Shape broadcast_shape(const Shape& a, const Shape& b);
Tensor binary(Binary op, const Tensor& a, const Tensor& b);

/// Sum over every axis where `target` has extent 1.
Tensor reduce_to(const Tensor& x, const Shape& target);
Tensor broadcast_to(const Tensor& x, const Shape& target);

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

/// Output shape of a convolution of `x` with kernel `w` ([kh, kw, cin, cout]).
Shape conv_output_shape(const Shape& x, const Shape& w, ConvGeometry g);
Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry g);
/// Adjoint of conv2d with respect to its input.
Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& w,
                         const Shape& x_shape, ConvGeometry g);
/// Adjoint of conv2d with respect to its kernel.
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out,
                          const Shape& w_shape, ConvGeometry g);

/// A 1-D linear resampling operator: each output index is a weighted sum
/// of at most two input indices.
struct Interp1D {
  int in_size = 0;
  int out_size = 0;
  std::vector<int> i0, i1;
  std::vector<double> w0, w1;
};

/// Bilinear x2 with half-pixel centres (matches align_corners=false).
Interp1D bilinear_up2(int in_size);
/// Pairwise averaging, i.e. one axis of 2x2 average pooling.
Interp1D average_down2(int in_size);

/// Applies `rows` along height and `cols` along width.
Tensor resample(const Tensor& x, const Interp1D& rows, const Interp1D& cols);
/// Transpose of `resample`.
Tensor resample_adjoint(const Tensor& g, const Interp1D& rows,
                        const Interp1D& cols);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int begin, int count);
/// Places `x` at channel offset `begin` of a zero tensor with `total` channels.
Tensor embed_channels(const Tensor& x, int begin, int total);

/// Concatenates tensors of equal [H, W, C] along the batch axis.
Tensor stack_batch(const std::vector<Tensor>& parts);
/// Batch rows [begin, begin + count).
Tensor batch_rows(const Tensor& x, int begin, int count);

}  // namespace kernels
}  // namespace agesynth
