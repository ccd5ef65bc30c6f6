#include "agesynth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Upper bound on the im2col scratch buffer, in doubles (64 MiB).
constexpr std::size_t kColsBudget = std::size_t{8} << 20;

}  // namespace

int Shape::operator[](int axis) const noexcept {
  switch (axis) {
    case 0: return n;
    case 1: return h;
    case 2: return w;
    default: return c;
  }
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ", " << h << ", " << w << ", " << c << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) +
                     " values do not fill shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_.str());
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != numel()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace kernels {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out;
  for (int axis = 0; axis < 4; ++axis) {
    const int da = a[axis];
    const int db = b[axis];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + a.str() + " with " + b.str());
    }
    const int d = std::max(da, db);
    switch (axis) {
      case 0: out.n = d; break;
      case 1: out.h = d; break;
      case 2: out.w = d; break;
      default: out.c = d; break;
    }
  }
  return out;
}

namespace {

struct Strides {
  std::size_t n, h, w, c;
};

// Element strides of `s` as seen from a broadcast output; zero on stretched axes.
Strides broadcast_strides(const Shape& s) {
  const std::size_t sc = 1;
  const std::size_t sw = static_cast<std::size_t>(s.c);
  const std::size_t sh = sw * s.w;
  const std::size_t sn = sh * s.h;
  return {s.n == 1 ? 0 : sn, s.h == 1 ? 0 : sh, s.w == 1 ? 0 : sw,
          s.c == 1 ? 0 : sc};
}

template <typename F>
Tensor binary_apply(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    const auto pa = a.data();
    const auto pb = b.data();
    auto po = out.data();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  const Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor out(os);
  const Strides sa = broadcast_strides(a.shape());
  const Strides sb = broadcast_strides(b.shape());
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (int n = 0; n < os.n; ++n)
    for (int h = 0; h < os.h; ++h)
      for (int w = 0; w < os.w; ++w) {
        const std::size_t ba = n * sa.n + h * sa.h + w * sa.w;
        const std::size_t bb = n * sb.n + h * sb.h + w * sb.w;
        for (int c = 0; c < os.c; ++c) {
          *po++ = f(pa[ba + c * sa.c], pb[bb + c * sb.c]);
        }
      }
  return out;
}

}  // namespace

Tensor binary(Binary op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case Binary::add:
      return binary_apply(a, b, [](double x, double y) { return x + y; });
    case Binary::sub:
      return binary_apply(a, b, [](double x, double y) { return x - y; });
    case Binary::mul:
      return binary_apply(a, b, [](double x, double y) { return x * y; });
    case Binary::div:
      return binary_apply(a, b, [](double x, double y) { return x / y; });
  }
  return {};
}

Tensor reduce_to(const Tensor& x, const Shape& target) {
  const Shape& s = x.shape();
  if (s == target) return x;
  for (int axis = 0; axis < 4; ++axis) {
    if (target[axis] != 1 && target[axis] != s[axis]) {
      throw ShapeError("cannot reduce " + s.str() + " to " + target.str());
    }
  }
  Tensor out(target);
  const Strides so = broadcast_strides(target);
  const double* px = x.data().data();
  double* po = out.data().data();
  for (int n = 0; n < s.n; ++n)
    for (int h = 0; h < s.h; ++h)
      for (int w = 0; w < s.w; ++w) {
        const std::size_t bo = n * so.n + h * so.h + w * so.w;
        for (int c = 0; c < s.c; ++c) po[bo + c * so.c] += *px++;
      }
  return out;
}

Tensor broadcast_to(const Tensor& x, const Shape& target) {
  if (x.shape() == target) return x;
  if (broadcast_shape(x.shape(), target) != target) {
    throw ShapeError("cannot broadcast " + x.shape().str() + " to " +
                     target.str());
  }
  return binary(Binary::add, Tensor(target), x);
}

Shape conv_output_shape(const Shape& x, const Shape& w, ConvGeometry g) {
  if (x.c != w.w) {
    throw ShapeError("conv2d: input channels " + std::to_string(x.c) +
                     " do not match kernel " + w.str());
  }
  const int oh = (x.h + 2 * g.pad - w.n) / g.stride + 1;
  const int ow = (x.w + 2 * g.pad - w.h) / g.stride + 1;
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d: kernel " + w.str() + " larger than input " +
                     x.str());
  }
  return Shape{x.n, oh, ow, w.c};
}

namespace {

struct ConvDims {
  int n, h, w, ci, kh, kw, co, oh, ow;
  std::size_t k() const { return static_cast<std::size_t>(kh) * kw * ci; }
  std::size_t rows_per_sample() const {
    return static_cast<std::size_t>(oh) * ow;
  }
  bool pointwise(ConvGeometry g) const {
    return kh == 1 && kw == 1 && g.stride == 1 && g.pad == 0;
  }
};

ConvDims conv_dims(const Shape& x, const Shape& w, ConvGeometry g) {
  const Shape o = conv_output_shape(x, w, g);
  return {x.n, x.h, x.w, x.c, w.n, w.h, w.c, o.h, o.w};
}

int samples_per_chunk(const ConvDims& d) {
  const std::size_t per = d.rows_per_sample() * d.k();
  return static_cast<int>(
      std::clamp<std::size_t>(kColsBudget / std::max<std::size_t>(per, 1), 1,
                              static_cast<std::size_t>(d.n)));
}

// Gathers receptive fields of samples [n0, n0+count) into `cols`.
void im2col(const double* x, const ConvDims& d, ConvGeometry g, int n0,
            int count, double* cols) {
  const std::size_t sample = static_cast<std::size_t>(d.h) * d.w * d.ci;
  for (int n = n0; n < n0 + count; ++n) {
    const double* xs = x + n * sample;
    for (int oy = 0; oy < d.oh; ++oy)
      for (int ox = 0; ox < d.ow; ++ox) {
        const int ix0 = ox * g.stride - g.pad;
        const bool row_inside = ix0 >= 0 && ix0 + d.kw <= d.w;
        for (int ky = 0; ky < d.kh; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (row_inside && iy >= 0 && iy < d.h) {
            // The kw taps of one kernel row are adjacent pixels.
            std::copy_n(xs + (static_cast<std::size_t>(iy) * d.w + ix0) * d.ci,
                        d.kw * d.ci, cols);
            cols += d.kw * d.ci;
            continue;
          }
          for (int kx = 0; kx < d.kw; ++kx) {
            const int ix = ix0 + kx;
            if (iy < 0 || iy >= d.h || ix < 0 || ix >= d.w) {
              std::fill_n(cols, d.ci, 0.0);
            } else {
              std::copy_n(xs + (static_cast<std::size_t>(iy) * d.w + ix) * d.ci,
                          d.ci, cols);
            }
            cols += d.ci;
          }
        }
      }
  }
}

void col2im_add(const double* cols, const ConvDims& d, ConvGeometry g, int n0,
                int count, double* x) {
  const std::size_t sample = static_cast<std::size_t>(d.h) * d.w * d.ci;
  for (int n = n0; n < n0 + count; ++n) {
    double* xs = x + n * sample;
    for (int oy = 0; oy < d.oh; ++oy)
      for (int ox = 0; ox < d.ow; ++ox) {
        for (int ky = 0; ky < d.kh; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int kx = 0; kx < d.kw; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w) {
              double* dst =
                  xs + (static_cast<std::size_t>(iy) * d.w + ix) * d.ci;
              for (int c = 0; c < d.ci; ++c) dst[c] += cols[c];
            }
            cols += d.ci;
          }
        }
      }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, ConvGeometry g) {
  const ConvDims d = conv_dims(x.shape(), w.shape(), g);
  Tensor out(Shape{d.n, d.oh, d.ow, d.co});
  const ConstMapMat wm(w.data().data(), d.k(), d.co);
  if (d.pointwise(g)) {
    const ConstMapMat xm(x.data().data(), d.n * d.rows_per_sample(), d.ci);
    MapMat om(out.data().data(), d.n * d.rows_per_sample(), d.co);
    om.noalias() = xm * wm;
    return out;
  }
  const int chunk = samples_per_chunk(d);
  std::vector<double> cols(chunk * d.rows_per_sample() * d.k());
  for (int n0 = 0; n0 < d.n; n0 += chunk) {
    const int count = std::min(chunk, d.n - n0);
    const std::size_t rows = count * d.rows_per_sample();
    im2col(x.data().data(), d, g, n0, count, cols.data());
    const ConstMapMat cm(cols.data(), rows, d.k());
    MapMat om(out.data().data() + n0 * d.rows_per_sample() * d.co, rows, d.co);
    om.noalias() = cm * wm;
  }
  return out;
}

Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& w,
                         const Shape& x_shape, ConvGeometry g) {
  const ConvDims d = conv_dims(x_shape, w.shape(), g);
  if (grad_out.shape() != Shape{d.n, d.oh, d.ow, d.co}) {
    throw ShapeError("conv2d_input_grad: gradient shape " +
                     grad_out.shape().str());
  }
  Tensor dx(x_shape);
  const ConstMapMat wm(w.data().data(), d.k(), d.co);
  if (d.pointwise(g)) {
    const ConstMapMat gm(grad_out.data().data(), d.n * d.rows_per_sample(),
                         d.co);
    MapMat xm(dx.data().data(), d.n * d.rows_per_sample(), d.ci);
    xm.noalias() = gm * wm.transpose();
    return dx;
  }
  const int chunk = samples_per_chunk(d);
  std::vector<double> cols(chunk * d.rows_per_sample() * d.k());
  for (int n0 = 0; n0 < d.n; n0 += chunk) {
    const int count = std::min(chunk, d.n - n0);
    const std::size_t rows = count * d.rows_per_sample();
    const ConstMapMat gm(grad_out.data().data() + n0 * d.rows_per_sample() * d.co,
                         rows, d.co);
    MapMat cm(cols.data(), rows, d.k());
    cm.noalias() = gm * wm.transpose();
    col2im_add(cols.data(), d, g, n0, count, dx.data().data());
  }
  return dx;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& grad_out,
                          const Shape& w_shape, ConvGeometry g) {
  const ConvDims d = conv_dims(x.shape(), w_shape, g);
  if (grad_out.shape() != Shape{d.n, d.oh, d.ow, d.co}) {
    throw ShapeError("conv2d_weight_grad: gradient shape " +
                     grad_out.shape().str());
  }
  Tensor dw(w_shape);
  MapMat wm(dw.data().data(), d.k(), d.co);
  if (d.pointwise(g)) {
    const ConstMapMat xm(x.data().data(), d.n * d.rows_per_sample(), d.ci);
    const ConstMapMat gm(grad_out.data().data(), d.n * d.rows_per_sample(),
                         d.co);
    wm.noalias() = xm.transpose() * gm;
    return dw;
  }
  const int chunk = samples_per_chunk(d);
  std::vector<double> cols(chunk * d.rows_per_sample() * d.k());
  for (int n0 = 0; n0 < d.n; n0 += chunk) {
    const int count = std::min(chunk, d.n - n0);
    const std::size_t rows = count * d.rows_per_sample();
    im2col(x.data().data(), d, g, n0, count, cols.data());
    const ConstMapMat cm(cols.data(), rows, d.k());
    const ConstMapMat gm(grad_out.data().data() + n0 * d.rows_per_sample() * d.co,
                         rows, d.co);
    wm.noalias() += cm.transpose() * gm;
  }
  return dw;
}

Interp1D bilinear_up2(int in_size) {
  Interp1D t;
  t.in_size = in_size;
  t.out_size = 2 * in_size;
  for (int o = 0; o < t.out_size; ++o) {
    const double src = std::max(0.0, (o + 0.5) / 2.0 - 0.5);
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in_size - 1);
    const double frac = src - i0;
    t.i0.push_back(i0);
    t.i1.push_back(i1);
    t.w0.push_back(1.0 - frac);
    t.w1.push_back(frac);
  }
  return t;
}

Interp1D average_down2(int in_size) {
  if (in_size % 2 != 0) {
    throw ShapeError("downsample: odd spatial size " + std::to_string(in_size));
  }
  Interp1D t;
  t.in_size = in_size;
  t.out_size = in_size / 2;
  for (int o = 0; o < t.out_size; ++o) {
    t.i0.push_back(2 * o);
    t.i1.push_back(2 * o + 1);
    t.w0.push_back(0.5);
    t.w1.push_back(0.5);
  }
  return t;
}

Tensor resample(const Tensor& x, const Interp1D& rows, const Interp1D& cols) {
  const Shape s = x.shape();
  if (s.h != rows.in_size || s.w != cols.in_size) {
    throw ShapeError("resample: table sizes do not match " + s.str());
  }
  const std::size_t row_len = static_cast<std::size_t>(s.w) * s.c;
  Tensor tmp(Shape{s.n, rows.out_size, s.w, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < rows.out_size; ++o) {
      const double* a = &x.data()[(n * s.h + rows.i0[o]) * row_len];
      const double* b = &x.data()[(n * s.h + rows.i1[o]) * row_len];
      double* dst = &tmp.data()[(n * rows.out_size + o) * row_len];
      for (std::size_t i = 0; i < row_len; ++i)
        dst[i] = rows.w0[o] * a[i] + rows.w1[o] * b[i];
    }
  Tensor out(Shape{s.n, rows.out_size, cols.out_size, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < rows.out_size; ++y) {
      const double* src = &tmp.data()[((n * rows.out_size) + y) * row_len];
      double* dst =
          &out.data()[((n * rows.out_size) + y) * cols.out_size * s.c];
      for (int o = 0; o < cols.out_size; ++o) {
        const double* a = src + cols.i0[o] * s.c;
        const double* b = src + cols.i1[o] * s.c;
        for (int c = 0; c < s.c; ++c)
          dst[o * s.c + c] = cols.w0[o] * a[c] + cols.w1[o] * b[c];
      }
    }
  return out;
}

Tensor resample_adjoint(const Tensor& g, const Interp1D& rows,
                        const Interp1D& cols) {
  const Shape s = g.shape();
  if (s.h != rows.out_size || s.w != cols.out_size) {
    throw ShapeError("resample_adjoint: table sizes do not match " + s.str());
  }
  Tensor tmp(Shape{s.n, s.h, cols.in_size, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y) {
      const double* src = &g.data()[((n * s.h) + y) * s.w * s.c];
      double* dst = &tmp.data()[((n * s.h) + y) * cols.in_size * s.c];
      for (int o = 0; o < cols.out_size; ++o) {
        double* a = dst + cols.i0[o] * s.c;
        double* b = dst + cols.i1[o] * s.c;
        for (int c = 0; c < s.c; ++c) {
          a[c] += cols.w0[o] * src[o * s.c + c];
          b[c] += cols.w1[o] * src[o * s.c + c];
        }
      }
    }
  const std::size_t row_len = static_cast<std::size_t>(cols.in_size) * s.c;
  Tensor out(Shape{s.n, rows.in_size, cols.in_size, s.c});
  for (int n = 0; n < s.n; ++n)
    for (int o = 0; o < rows.out_size; ++o) {
      const double* src = &tmp.data()[(n * s.h + o) * row_len];
      double* a = &out.data()[(n * rows.in_size + rows.i0[o]) * row_len];
      double* b = &out.data()[(n * rows.in_size + rows.i1[o]) * row_len];
      for (std::size_t i = 0; i < row_len; ++i) {
        a[i] += rows.w0[o] * src[i];
        b[i] += rows.w1[o] * src[i];
      }
    }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  Tensor out(Shape{sa.n, sa.h, sa.w, sa.c + sb.c});
  const std::size_t sites = static_cast<std::size_t>(sa.n) * sa.h * sa.w;
  double* po = out.data().data();
  for (std::size_t i = 0; i < sites; ++i) {
    po = std::copy_n(a.data().data() + i * sa.c, sa.c, po);
    po = std::copy_n(b.data().data() + i * sb.c, sb.c, po);
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 0 || begin + count > s.c) {
    throw ShapeError("slice_channels out of range for " + s.str());
  }
  Tensor out(Shape{s.n, s.h, s.w, count});
  const std::size_t sites = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (std::size_t i = 0; i < sites; ++i) {
    std::copy_n(x.data().data() + i * s.c + begin, count,
                out.data().data() + i * count);
  }
  return out;
}

Tensor embed_channels(const Tensor& x, int begin, int total) {
  const Shape s = x.shape();
  if (begin < 0 || begin + s.c > total) {
    throw ShapeError("embed_channels out of range for " + s.str());
  }
  Tensor out(Shape{s.n, s.h, s.w, total});
  const std::size_t sites = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (std::size_t i = 0; i < sites; ++i) {
    std::copy_n(x.data().data() + i * s.c, s.c,
                out.data().data() + i * total + begin);
  }
  return out;
}

Tensor stack_batch(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_batch: empty batch");
  const Shape s = parts.front().shape();
  int n = 0;
  for (const auto& p : parts) {
    const Shape ps = p.shape();
    if (ps.h != s.h || ps.w != s.w || ps.c != s.c) {
      throw ShapeError("stack_batch: mixed shapes " + s.str() + " and " +
                       ps.str());
    }
    n += ps.n;
  }
  Tensor out(Shape{n, s.h, s.w, s.c});
  auto dst = out.data().begin();
  for (const auto& p : parts) {
    dst = std::copy(p.data().begin(), p.data().end(), dst);
  }
  return out;
}

Tensor batch_rows(const Tensor& x, int begin, int count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 0 || begin + count > s.n) {
    throw ShapeError("batch_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") of " + s.str());
  }
  const std::size_t row = static_cast<std::size_t>(s.h) * s.w * s.c;
  const auto first = x.data().begin() + begin * row;
  return Tensor(Shape{count, s.h, s.w, s.c},
                std::vector<double>(first, first + count * row));
}

}  // namespace kernels
}  // namespace agesynth
