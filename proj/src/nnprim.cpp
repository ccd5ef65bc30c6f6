#include "agesynth/nnprim.hpp"

#include "agesynth/errors.hpp"

namespace agesynth::nn {

namespace {

Tensor unit_normal(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

void LayerSpec::validate() const {
  if (kernel != 1 && kernel != 3 && kernel != 4 && kernel != 7) {
    throw ArgumentError("layer kernel must be 1, 3, 4 or 7, got " +
                        std::to_string(kernel));
  }
  if (stride != 1 && stride != 2) {
    throw ArgumentError("layer stride must be 1 or 2, got " +
                        std::to_string(stride));
  }
  if (in_channels < 1 || out_channels < 1) {
    throw ArgumentError("layer channel counts must be >= 1");
  }
}

double equalized_scale(int fan_in, double gain) {
  if (fan_in < 1) throw ArgumentError("fan_in must be >= 1");
  return gain / std::sqrt(static_cast<double>(fan_in));
}

Var pixel_norm(const Var& x, double eps) {
  const Shape s = x.shape();
  const Var mean_sq =
      ad::reduce_to(ad::square(x), Shape{s.n, s.h, s.w, 1}) * (1.0 / s.c);
  return x / ad::sqrt(ad::add_scalar(mean_sq, eps));
}

Var minibatch_stddev(const Var& x, double eps) {
  const Shape s = x.shape();
  if (s.n < 1) throw ShapeError("minibatch_stddev on an empty batch");
  const Shape per_feature{1, s.h, s.w, s.c};
  const double inv_n = 1.0 / s.n;
  const Var mu = ad::reduce_to(x, per_feature) * inv_n;
  const Var var = ad::reduce_to(ad::square(x - mu), per_feature) * inv_n;
  const Var stddev = ad::mean(ad::sqrt(ad::add_scalar(var, eps)));
  return ad::concat_channels(x,
                             ad::broadcast_to(stddev, Shape{s.n, s.h, s.w, 1}));
}

Var activate(const Var& x, Activation a) {
  switch (a) {
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x, kLeakySlope);
    case Activation::tanh: return ad::tanh(x);
    case Activation::none: return x;
  }
  return x;
}

Var resample(const Var& x, ResampleMode mode) {
  const Shape s = x.shape();
  if (mode == ResampleMode::up) {
    return ad::resample(x, kernels::bilinear_up2(s.h), kernels::bilinear_up2(s.w));
  }
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("downsample needs even spatial dims, got " + s.str());
  }
  return ad::resample(x, kernels::average_down2(s.h),
                      kernels::average_down2(s.w));
}

EqualizedConv::EqualizedConv(std::string name, const LayerSpec& spec,
                             double gain, std::mt19937_64& rng,
                             double bias_init)
    : name_(std::move(name)), spec_(spec) {
  spec_.validate();
  scale_ = equalized_scale(spec.kernel * spec.kernel * spec.in_channels, gain);
  weight_ = ad::parameter(unit_normal(
      Shape{spec.kernel, spec.kernel, spec.in_channels, spec.out_channels},
      rng));
  bias_ = ad::parameter(Tensor(Shape{1, 1, 1, spec.out_channels}, bias_init));
}

Var EqualizedConv::forward(const Var& x) const {
  if (x.shape().c != spec_.in_channels) {
    throw ShapeError(name_ + ": expected " + std::to_string(spec_.in_channels) +
                     " input channels, got " + x.shape().str());
  }
  const int pad = spec_.kernel % 2 == 1 ? spec_.kernel / 2 : 0;
  const Var y = ad::conv2d(x, weight_ * scale_, {spec_.stride, pad});
  return activate(y + bias_, spec_.activation);
}

void EqualizedConv::collect(NamedParams& out) const {
  out.emplace_back(name_ + ".weight", weight_);
  out.emplace_back(name_ + ".bias", bias_);
}

EqualizedLinear::EqualizedLinear(std::string name, int in_features,
                                 int out_features, double gain,
                                 std::mt19937_64& rng, double bias_init)
    : conv_(std::move(name),
            LayerSpec{LayerKind::equalized_linear, 1, 1, in_features,
                      out_features, Activation::none},
            gain, rng, bias_init) {}

Var EqualizedLinear::forward(const Var& x) const {
  const Shape s = x.shape();
  if (s.h != 1 || s.w != 1) {
    throw ShapeError("linear layer expects [N, 1, 1, C] input, got " + s.str());
  }
  return conv_.forward(x);
}

ModulatedConv::ModulatedConv(std::string name, int kernel, int in_channels,
                             int out_channels, int latent_dim,
                             std::mt19937_64& rng)
    : name_(std::move(name)),
      spec_{LayerKind::modulated_conv, kernel, 1, in_channels, out_channels,
            Activation::none} {
  spec_.validate();
  affine_ = EqualizedLinear(name_ + ".affine", latent_dim, in_channels,
                            kHeGain, rng, 1.0);
  scale_ = equalized_scale(kernel * kernel * in_channels, kHeGain);
  weight_ = ad::parameter(
      unit_normal(Shape{kernel, kernel, in_channels, out_channels}, rng));
  bias_ = ad::parameter(Tensor(Shape{1, 1, 1, out_channels}));
}

Var ModulatedConv::style(const Var& w_age) const {
  return affine_.forward(w_age);
}

Var ModulatedConv::forward(const Var& x, const Var& w_age) const {
  const Shape s = x.shape();
  if (s.c != spec_.in_channels) {
    throw ShapeError(name_ + ": expected " + std::to_string(spec_.in_channels) +
                     " input channels, got " + s.str());
  }
  if (w_age.shape().n != s.n) {
    throw ShapeError(name_ + ": latent batch " + w_age.shape().str() +
                     " does not match features " + s.str());
  }
  const Var styles = style(w_age);
  const Var w = weight_ * scale_;
  const int pad = spec_.kernel / 2;
  const Var y = ad::conv2d(x * styles, w, {1, pad});
  // Squared norm of each modulated output filter: sum_i s_i^2 sum_k w_ik^2.
  const Var w_sq = ad::reduce_to(ad::square(w),
                                 Shape{1, 1, spec_.in_channels,
                                       spec_.out_channels});
  const Var norm_sq = ad::conv2d(ad::square(styles), w_sq, {1, 0});
  return y / ad::sqrt(ad::add_scalar(norm_sq, kEpsilon)) + bias_;
}

Tensor ModulatedConv::demodulated_weights(const Tensor& style,
                                          double eps) const {
  const Tensor& w = weight_.value();
  const Shape ws = w.shape();
  if (style.numel() != static_cast<std::size_t>(ws.w)) {
    throw ShapeError(name_ + ": style length does not match input channels");
  }
  Tensor out(ws);
  for (int o = 0; o < ws.c; ++o) {
    double norm_sq = 0.0;
    for (int ky = 0; ky < ws.n; ++ky)
      for (int kx = 0; kx < ws.h; ++kx)
        for (int i = 0; i < ws.w; ++i) {
          const double v = style[i] * scale_ * w.at(ky, kx, i, o);
          out.at(ky, kx, i, o) = v;
          norm_sq += v * v;
        }
    const double d = 1.0 / std::sqrt(norm_sq + eps);
    for (int ky = 0; ky < ws.n; ++ky)
      for (int kx = 0; kx < ws.h; ++kx)
        for (int i = 0; i < ws.w; ++i) out.at(ky, kx, i, o) *= d;
  }
  return out;
}

void ModulatedConv::collect(NamedParams& out) const {
  affine_.collect(out);
  out.emplace_back(name_ + ".weight", weight_);
  out.emplace_back(name_ + ".bias", bias_);
}

ResidualBlock::ResidualBlock(std::string name, int channels,
                             std::mt19937_64& rng)
    : conv1_(name + ".conv1",
             LayerSpec{LayerKind::equalized_conv, 3, 1, channels, channels,
                       Activation::relu},
             kHeGain, rng),
      conv2_(name + ".conv2",
             LayerSpec{LayerKind::equalized_conv, 3, 1, channels, channels,
                       Activation::none},
             kHeGain, rng) {}

Var ResidualBlock::forward(const Var& x) const {
  const Var h = pixel_norm(conv1_.forward(x));
  return x + pixel_norm(conv2_.forward(h));
}

void ResidualBlock::collect(NamedParams& out) const {
  conv1_.collect(out);
  conv2_.collect(out);
}

}  // namespace agesynth::nn
