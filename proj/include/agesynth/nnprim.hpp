#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "agesynth/autograd.hpp"

/// Building blocks shared by every network: equalized-learning-rate layers,
/// pixel norm, modulated convolution, minibatch stddev, residual blocks and
/// 2x resampling.
namespace agesynth::nn {

using ad::Var;

inline constexpr double kEpsilon = 1e-8;
inline constexpr double kLeakySlope = 0.2;
inline const double kHeGain = std::sqrt(2.0);

enum class LayerKind {
  equalized_conv,
  equalized_linear,
  modulated_conv,
  pixel_norm,
  minibatch_stddev,
  residual_block,
  upsample,
  downsample,
  activation,
};

enum class Activation { relu, leaky_relu, tanh, none };

struct LayerSpec {
  LayerKind kind = LayerKind::equalized_conv;
  int kernel = 3;
  int stride = 1;
  int in_channels = 1;
  int out_channels = 1;
  Activation activation = Activation::none;

  /// Throws ArgumentError unless kernel is 1/3/4/7, stride 1/2, channels >= 1.
  void validate() const;
};

/// A named trainable tensor. Names are the canonical checkpoint keys.
using NamedParams = std::vector<std::pair<std::string, Var>>;

/// Runtime multiplier gain / sqrt(fan_in) applied to unit-variance weights.
double equalized_scale(int fan_in, double gain);

/// x / sqrt(mean_over_channels(x^2) + eps), independently at every location.
Var pixel_norm(const Var& x, double eps = kEpsilon);

/// Appends one channel holding the batch stddev averaged over features and
/// positions (population stddev, constant across batch and space).
Var minibatch_stddev(const Var& x, double eps = kEpsilon);

Var activate(const Var& x, Activation a);

enum class ResampleMode { up, down };
/// Bilinear x2 up, or 2x2 average pooling down.
Var resample(const Var& x, ResampleMode mode);

/// Convolution with weights stored at unit variance and scaled at runtime.
/// "Same" padding for odd kernels, no padding for even ones.
class EqualizedConv {
public:
  EqualizedConv() = default;
  EqualizedConv(std::string name, const LayerSpec& spec, double gain,
                std::mt19937_64& rng, double bias_init = 0.0);

  Var forward(const Var& x) const;
  void collect(NamedParams& out) const;

  const LayerSpec& spec() const noexcept { return spec_; }
  double scale() const noexcept { return scale_; }
  const Var& weight() const noexcept { return weight_; }
  const Var& bias() const noexcept { return bias_; }

private:
  std::string name_;
  LayerSpec spec_;
  double scale_ = 1.0;
  Var weight_;  // [k, k, in, out]
  Var bias_;    // [1, 1, 1, out]
};

/// Fully connected layer on [N, 1, 1, in] vectors.
class EqualizedLinear {
public:
  EqualizedLinear() = default;
  EqualizedLinear(std::string name, int in_features, int out_features,
                  double gain, std::mt19937_64& rng, double bias_init = 0.0);

  Var forward(const Var& x) const;
  void collect(NamedParams& out) const { conv_.collect(out); }
  const EqualizedConv& conv() const noexcept { return conv_; }

private:
  EqualizedConv conv_;
};

/// Convolution whose kernel is scaled per input channel by a style derived
/// from the age latent, then demodulated to unit norm per output channel.
///
/// The forward pass scales activations instead of kernels, which is
/// algebraically identical: conv(x * s, w) * d == conv(x, d * s * w).
class ModulatedConv {
public:
  ModulatedConv() = default;
  ModulatedConv(std::string name, int kernel, int in_channels,
                int out_channels, int latent_dim, std::mt19937_64& rng);

  Var forward(const Var& x, const Var& w_age) const;
  void collect(NamedParams& out) const;

  /// Per-input-channel styles, [N, 1, 1, in].
  Var style(const Var& w_age) const;
  /// Explicit demodulated kernel for one style vector ([1, 1, 1, in]).
  Tensor demodulated_weights(const Tensor& style,
                             double eps = kEpsilon) const;

  const LayerSpec& spec() const noexcept { return spec_; }
  const Var& weight() const noexcept { return weight_; }

private:
  std::string name_;
  LayerSpec spec_;
  double scale_ = 1.0;
  EqualizedLinear affine_;
  Var weight_;
  Var bias_;
};

/// Two 3x3 equalized convolutions on a skip connection:
/// x + pn(conv2(pn(relu(conv1(x))))).
class ResidualBlock {
public:
  ResidualBlock() = default;
  ResidualBlock(std::string name, int channels, std::mt19937_64& rng);

  Var forward(const Var& x) const;
  void collect(NamedParams& out) const;

  EqualizedConv& first() noexcept { return conv1_; }
  EqualizedConv& second() noexcept { return conv2_; }

private:
  EqualizedConv conv1_;
  EqualizedConv conv2_;
};

}  // namespace agesynth::nn
