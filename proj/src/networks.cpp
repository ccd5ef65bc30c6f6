#include "agesynth/networks.hpp"

#include <algorithm>
#include <map>

#include "agesynth/errors.hpp"

namespace agesynth {

using nn::Activation;
using nn::EqualizedConv;
using nn::kHeGain;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

void record(ShapeTrace* trace, const std::string& layer, const Var& v) {
  if (trace) trace->push_back({layer, v.shape()});
}

void expect_image(const Var& x, int resolution, const char* who) {
  const Shape s = x.shape();
  if (s.h != resolution || s.w != resolution || s.c != 3) {
    throw ShapeError(std::string(who) + ": expected [N, " +
                     std::to_string(resolution) + ", " +
                     std::to_string(resolution) + ", 3] input, got " + s.str());
  }
}

LayerSpec conv_spec(int kernel, int stride, int in, int out, Activation act) {
  return LayerSpec{LayerKind::equalized_conv, kernel, stride, in, out, act};
}

}  // namespace

void NetworkConfig::validate() const {
  if (resolution < 16 || (resolution & (resolution - 1)) != 0) {
    throw ConfigError("network.resolution must be a power of two >= 16, got " +
                      std::to_string(resolution));
  }
  if (base_channels < 1) throw ConfigError("network.base_channels must be >= 1");
  if (latent_dim < 1) throw ConfigError("network.latent_dim must be >= 1");
  if (mapping_layers < 1) throw ConfigError("network.mapping_layers must be >= 1");
}

int NetworkConfig::discriminator_stages() const {
  int stages = 0;
  for (int r = resolution; r > 4; r /= 2) ++stages;
  return stages;
}

int NetworkConfig::discriminator_channels(int stage) const {
  int c = base_channels;
  for (int i = 0; i < stage; ++i) c = std::min(2 * c, 8 * base_channels);
  return c;
}

// -- identity encoder --------------------------------------------------------

IdentityEncoder::IdentityEncoder(const NetworkConfig& config,
                                 std::mt19937_64& rng)
    : resolution_(config.resolution) {
  const int b = config.base_channels;
  stem_ = EqualizedConv("id_encoder.stem",
                        conv_spec(7, 1, 3, b, Activation::relu), kHeGain, rng);
  down1_ = EqualizedConv("id_encoder.down1",
                         conv_spec(3, 2, b, 2 * b, Activation::relu), kHeGain,
                         rng);
  down2_ = EqualizedConv("id_encoder.down2",
                         conv_spec(3, 2, 2 * b, 4 * b, Activation::relu),
                         kHeGain, rng);
  for (int i = 0; i < 4; ++i) {
    blocks_.emplace_back("id_encoder.res" + std::to_string(i), 4 * b, rng);
  }
}

Var IdentityEncoder::forward(const Var& x, ShapeTrace* trace) const {
  expect_image(x, resolution_, "identity encoder");
  Var h = nn::pixel_norm(stem_.forward(x));
  record(trace, "conv7x7", h);
  h = nn::pixel_norm(down1_.forward(h));
  record(trace, "conv3x3_s2", h);
  h = nn::pixel_norm(down2_.forward(h));
  record(trace, "conv3x3_s2", h);
  for (const auto& block : blocks_) {
    h = block.forward(h);
    record(trace, "res_block", h);
  }
  return h;
}

void IdentityEncoder::collect(nn::NamedParams& out) const {
  stem_.collect(out);
  down1_.collect(out);
  down2_.collect(out);
  for (const auto& b : blocks_) b.collect(out);
}

// -- mapping network ---------------------------------------------------------

MappingNetwork::MappingNetwork(const NetworkConfig& config,
                               std::mt19937_64& rng)
    : code_length_(config.schema.code_length()) {
  int in = code_length_;
  for (int i = 0; i < config.mapping_layers; ++i) {
    layers_.emplace_back("mapping.fc" + std::to_string(i), in,
                         config.latent_dim, kHeGain, rng);
    in = config.latent_dim;
  }
}

Var MappingNetwork::forward(const Var& z, ShapeTrace* trace) const {
  const Shape s = z.shape();
  if (s.h != 1 || s.w != 1 || s.c != code_length_) {
    throw ShapeError("mapping network: expected [N, 1, 1, " +
                     std::to_string(code_length_) + "] age codes, got " +
                     s.str());
  }
  Var h = nn::pixel_norm(z);
  record(trace, "age_code", h);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = ad::leaky_relu(h, nn::kLeakySlope);
    h = nn::pixel_norm(h);
    record(trace, "linear", h);
  }
  return h;
}

void MappingNetwork::collect(nn::NamedParams& out) const {
  for (const auto& l : layers_) l.collect(out);
}

// -- decoder -----------------------------------------------------------------

Decoder::Decoder(const NetworkConfig& config, std::mt19937_64& rng)
    : id_resolution_(config.id_resolution()),
      id_channels_(config.id_channels()),
      latent_dim_(config.latent_dim) {
  const int b = config.base_channels;
  const int latent = config.latent_dim;
  for (int i = 0; i < 4; ++i) {
    styled_.emplace_back("decoder.styled" + std::to_string(i), 3, 4 * b, 4 * b,
                         latent, rng);
  }
  styled_.emplace_back("decoder.styled4", 3, 4 * b, 2 * b, latent, rng);
  styled_.emplace_back("decoder.styled5", 3, 2 * b, b, latent, rng);
  to_rgb_ = EqualizedConv("decoder.to_rgb",
                          conv_spec(1, 1, b, 3, Activation::tanh), 1.0, rng);
}

Var Decoder::forward(const Var& w_id, const Var& w_age,
                     ShapeTrace* trace) const {
  const Shape s = w_id.shape();
  if (s.h != id_resolution_ || s.w != id_resolution_ || s.c != id_channels_) {
    throw ShapeError("decoder: expected identity features [N, " +
                     std::to_string(id_resolution_) + ", " +
                     std::to_string(id_resolution_) + ", " +
                     std::to_string(id_channels_) + "], got " + s.str());
  }
  const Shape a = w_age.shape();
  if (a.n != s.n || a.h != 1 || a.w != 1 || a.c != latent_dim_) {
    throw ShapeError("decoder: expected age latents [" + std::to_string(s.n) +
                     ", 1, 1, " + std::to_string(latent_dim_) + "], got " +
                     a.str());
  }
  Var h = w_id;
  for (std::size_t i = 0; i < styled_.size(); ++i) {
    h = ad::leaky_relu(styled_[i].forward(h, w_age), nn::kLeakySlope);
    h = nn::pixel_norm(h);
    record(trace, "styled_conv", h);
    if (i >= 4) {
      h = nn::resample(h, nn::ResampleMode::up);
      record(trace, "upsample", h);
    }
  }
  h = to_rgb_.forward(h);
  record(trace, "conv1x1_tanh", h);
  return h;
}

void Decoder::collect(nn::NamedParams& out) const {
  for (const auto& s : styled_) s.collect(out);
  to_rgb_.collect(out);
}

// -- age encoder -------------------------------------------------------------

AgeEncoder::AgeEncoder(const NetworkConfig& config, std::mt19937_64& rng)
    : resolution_(config.resolution) {
  const int b = config.base_channels;
  convs_.emplace_back("age_encoder.stem",
                      conv_spec(7, 1, 3, b, Activation::leaky_relu), kHeGain,
                      rng);
  int c = b;
  for (int i = 1; i <= 4; ++i) {
    convs_.emplace_back("age_encoder.down" + std::to_string(i),
                        conv_spec(3, 2, c, 2 * c, Activation::leaky_relu),
                        kHeGain, rng);
    c *= 2;
  }
  project_ = EqualizedConv(
      "age_encoder.project",
      conv_spec(1, 1, c, config.schema.code_length(), Activation::none),
      kHeGain, rng);
}

Var AgeEncoder::forward(const Var& x, ShapeTrace* trace) const {
  expect_image(x, resolution_, "age encoder");
  Var h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    record(trace, i == 0 ? "conv7x7" : "conv3x3_s2", h);
  }
  h = project_.forward(h);
  record(trace, "conv1x1", h);
  const Shape s = h.shape();
  h = ad::reduce_to(h, Shape{s.n, 1, 1, s.c}) * (1.0 / (s.h * s.w));
  record(trace, "global_pool", h);
  return h;
}

void AgeEncoder::collect(nn::NamedParams& out) const {
  for (const auto& c : convs_) c.collect(out);
  project_.collect(out);
}

// -- discriminator -----------------------------------------------------------

Discriminator::Discriminator(const NetworkConfig& config, std::mt19937_64& rng)
    : resolution_(config.resolution) {
  const int b = config.base_channels;
  from_rgb_ = EqualizedConv("discriminator.from_rgb",
                            conv_spec(1, 1, 3, b, Activation::leaky_relu),
                            kHeGain, rng);
  const int stages = config.discriminator_stages();
  int c = b;
  for (int s = 0; s < stages; ++s) {
    const int next = config.discriminator_channels(s + 1);
    const std::string prefix = "discriminator.stage" + std::to_string(s);
    convs_.emplace_back(prefix + ".conv0",
                        conv_spec(3, 1, c, c, Activation::leaky_relu), kHeGain,
                        rng);
    convs_.emplace_back(prefix + ".conv1",
                        conv_spec(3, 1, c, next, Activation::leaky_relu),
                        kHeGain, rng);
    c = next;
  }
  head_conv_ = EqualizedConv("discriminator.head_conv",
                             conv_spec(3, 1, c + 1, c, Activation::leaky_relu),
                             kHeGain, rng);
  head_out_ = EqualizedConv(
      "discriminator.head_out",
      conv_spec(4, 1, c, config.schema.n(), Activation::none), kHeGain, rng);
}

Var Discriminator::forward(const Var& x, ShapeTrace* trace) const {
  expect_image(x, resolution_, "discriminator");
  Var h = from_rgb_.forward(x);
  record(trace, "conv1x1", h);
  for (std::size_t i = 0; i < convs_.size(); i += 2) {
    h = convs_[i].forward(h);
    record(trace, "conv3x3", h);
    h = convs_[i + 1].forward(h);
    record(trace, "conv3x3", h);
    h = nn::resample(h, nn::ResampleMode::down);
    record(trace, "downsample", h);
  }
  h = nn::minibatch_stddev(h);
  record(trace, "minibatch_stddev", h);
  h = head_conv_.forward(h);
  record(trace, "conv3x3", h);
  h = head_out_.forward(h);
  record(trace, "conv4x4", h);
  return h;
}

void Discriminator::collect(nn::NamedParams& out) const {
  from_rgb_.collect(out);
  for (const auto& c : convs_) c.collect(out);
  head_conv_.collect(out);
  head_out_.collect(out);
}

// -- bundle ------------------------------------------------------------------

Networks::Networks(const NetworkConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  id_encoder = IdentityEncoder(config_, rng);
  mapping = MappingNetwork(config_, rng);
  decoder = Decoder(config_, rng);
  age_encoder = AgeEncoder(config_, rng);
  discriminator = Discriminator(config_, rng);
}

Networks Networks::clone() const {
  Networks copy(config_, 0);
  copy_parameter_values(all_params(), copy.all_params());
  return copy;
}

nn::NamedParams Networks::generator_params() const {
  nn::NamedParams out;
  id_encoder.collect(out);
  mapping.collect(out);
  decoder.collect(out);
  return out;
}

nn::NamedParams Networks::mapping_params() const {
  nn::NamedParams out;
  mapping.collect(out);
  return out;
}

nn::NamedParams Networks::age_encoder_params() const {
  nn::NamedParams out;
  age_encoder.collect(out);
  return out;
}

nn::NamedParams Networks::discriminator_params() const {
  nn::NamedParams out;
  discriminator.collect(out);
  return out;
}

nn::NamedParams Networks::all_params() const {
  nn::NamedParams out = generator_params();
  age_encoder.collect(out);
  discriminator.collect(out);
  return out;
}

Var Networks::generate(const Var& x, const Var& z) const {
  return decode(identity_encode(x), map_age(z));
}

Var stack_codes(const std::vector<AgeCode>& codes) {
  if (codes.empty()) throw ShapeError("stack_codes: empty batch");
  const int len = static_cast<int>(codes.front().values.size());
  Tensor t(Shape{static_cast<int>(codes.size()), 1, 1, len});
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (static_cast<int>(codes[i].values.size()) != len) {
      throw ShapeError("stack_codes: ragged age codes");
    }
    std::copy(codes[i].values.begin(), codes[i].values.end(),
              t.data().begin() + i * len);
  }
  return ad::constant(std::move(t));
}

Var stack_latents(const std::vector<LatentAgeVector>& latents) {
  std::vector<AgeCode> rows;
  rows.reserve(latents.size());
  for (const auto& l : latents) rows.push_back({l.values, std::nullopt});
  return stack_codes(rows);
}

LatentAgeVector latent_row(const Tensor& latents, int row) {
  const Shape s = latents.shape();
  if (row < 0 || row >= s.n) throw ShapeError("latent_row out of range");
  const std::size_t len = static_cast<std::size_t>(s.h) * s.w * s.c;
  LatentAgeVector out;
  out.values.assign(latents.data().begin() + row * len,
                    latents.data().begin() + (row + 1) * len);
  return out;
}

void copy_parameter_values(const nn::NamedParams& from,
                           const nn::NamedParams& to) {
  std::map<std::string, const Var*> source;
  for (const auto& [name, v] : from) source[name] = &v;
  for (const auto& [name, v] : to) {
    auto it = source.find(name);
    if (it == source.end()) {
      throw LoadError("parameter '" + name + "' missing from source");
    }
    if (it->second->shape() != v.shape()) {
      throw LoadError("parameter '" + name + "' has shape " +
                      it->second->shape().str() + ", expected " +
                      v.shape().str());
    }
    v.mutable_value() = it->second->value();
  }
}

std::size_t count_parameters(const nn::NamedParams& params) {
  std::size_t total = 0;
  for (const auto& [name, v] : params) total += v.value().numel();
  return total;
}

}  // namespace agesynth
