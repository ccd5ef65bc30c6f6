#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agesynth/agecode.hpp"
#include "agesynth/nnprim.hpp"

namespace agesynth {

using ad::Var;

struct NetworkConfig {
  int resolution = 256;
  int base_channels = 64;
  int latent_dim = 256;
  int mapping_layers = 8;
  AgeClassSchema schema = AgeClassSchema::reference();

  /// Throws ConfigError unless resolution is a power of two >= 16 and the
  /// channel counts are positive.
  void validate() const;

  int id_channels() const noexcept { return 4 * base_channels; }
  int id_resolution() const noexcept { return resolution / 4; }
  /// Number of conv-conv-downsample stages before the discriminator's 4x4 head.
  int discriminator_stages() const;
  /// Output channels of discriminator stage `stage`'s convs (doubling, capped at 8x base).
  int discriminator_channels(int stage) const;
};

/// One row of a layer-by-layer shape trace.
struct LayerShape {
  std::string layer;
  Shape shape;
};
using ShapeTrace = std::vector<LayerShape>;

class IdentityEncoder {
public:
  IdentityEncoder() = default;
  IdentityEncoder(const NetworkConfig& config, std::mt19937_64& rng);

  /// [N, R, R, 3] image batch to [N, R/4, R/4, 4*base] identity features.
  Var forward(const Var& x, ShapeTrace* trace = nullptr) const;
  void collect(nn::NamedParams& out) const;

private:
  int resolution_ = 0;
  nn::EqualizedConv stem_;
  nn::EqualizedConv down1_;
  nn::EqualizedConv down2_;
  std::vector<nn::ResidualBlock> blocks_;
};

class MappingNetwork {
public:
  MappingNetwork() = default;
  MappingNetwork(const NetworkConfig& config, std::mt19937_64& rng);

  /// [N, 1, 1, k*n] age codes to [N, 1, 1, latent_dim] age latents.
  Var forward(const Var& z, ShapeTrace* trace = nullptr) const;
  void collect(nn::NamedParams& out) const;

  nn::EqualizedLinear& layer(int i) { return layers_.at(i); }

private:
  int code_length_ = 0;
  std::vector<nn::EqualizedLinear> layers_;
};

class Decoder {
public:
  Decoder() = default;
  Decoder(const NetworkConfig& config, std::mt19937_64& rng);

  Var forward(const Var& w_id, const Var& w_age,
              ShapeTrace* trace = nullptr) const;
  void collect(nn::NamedParams& out) const;

  const std::vector<nn::ModulatedConv>& styled() const noexcept {
    return styled_;
  }

private:
  int id_resolution_ = 0;
  int id_channels_ = 0;
  int latent_dim_ = 0;
  std::vector<nn::ModulatedConv> styled_;
  nn::EqualizedConv to_rgb_;
};

class AgeEncoder {
public:
  AgeEncoder() = default;
  AgeEncoder(const NetworkConfig& config, std::mt19937_64& rng);

  /// [N, R, R, 3] images to [N, 1, 1, k*n] age codes.
  Var forward(const Var& x, ShapeTrace* trace = nullptr) const;
  void collect(nn::NamedParams& out) const;

private:
  int resolution_ = 0;
  std::vector<nn::EqualizedConv> convs_;
  nn::EqualizedConv project_;
};

class Discriminator {
public:
  Discriminator() = default;
  Discriminator(const NetworkConfig& config, std::mt19937_64& rng);

  /// [N, R, R, 3] images to [N, 1, 1, n] raw per-class scores.
  Var forward(const Var& x, ShapeTrace* trace = nullptr) const;
  void collect(nn::NamedParams& out) const;

private:
  int resolution_ = 0;
  nn::EqualizedConv from_rgb_;
  std::vector<nn::EqualizedConv> convs_;
  nn::EqualizedConv head_conv_;
  nn::EqualizedConv head_out_;
};

/// All five networks of one model. Movable, not copyable: layers share
/// parameter storage, so duplicates must go through clone().
class Networks {
public:
  Networks(const NetworkConfig& config, std::uint64_t seed);
  Networks(Networks&&) = default;
  Networks& operator=(Networks&&) = default;
  Networks(const Networks&) = delete;
  Networks& operator=(const Networks&) = delete;

  Networks clone() const;

  const NetworkConfig& config() const noexcept { return config_; }

  IdentityEncoder id_encoder;
  MappingNetwork mapping;
  Decoder decoder;
  AgeEncoder age_encoder;
  Discriminator discriminator;

  /// E_id, M and F, the parameters averaged by the EMA.
  nn::NamedParams generator_params() const;
  nn::NamedParams mapping_params() const;
  nn::NamedParams age_encoder_params() const;
  nn::NamedParams discriminator_params() const;
  nn::NamedParams all_params() const;

  Var identity_encode(const Var& x, ShapeTrace* trace = nullptr) const {
    return id_encoder.forward(x, trace);
  }
  Var map_age(const Var& z, ShapeTrace* trace = nullptr) const {
    return mapping.forward(z, trace);
  }
  Var decode(const Var& w_id, const Var& w_age,
             ShapeTrace* trace = nullptr) const {
    return decoder.forward(w_id, w_age, trace);
  }
  Var age_encode(const Var& x, ShapeTrace* trace = nullptr) const {
    return age_encoder.forward(x, trace);
  }
  Var discriminate(const Var& x, ShapeTrace* trace = nullptr) const {
    return discriminator.forward(x, trace);
  }
  /// F(E_id(x), M(z)).
  Var generate(const Var& x, const Var& z) const;

private:
  NetworkConfig config_;
};

/// Stacks age codes into a [N, 1, 1, k*n] batch.
Var stack_codes(const std::vector<AgeCode>& codes);
/// Stacks latent vectors into a [N, 1, 1, latent_dim] batch.
Var stack_latents(const std::vector<LatentAgeVector>& latents);
LatentAgeVector latent_row(const Tensor& latents, int row);

/// Copies parameter values across matching names; throws LoadError on drift.
void copy_parameter_values(const nn::NamedParams& from,
                           const nn::NamedParams& to);

std::size_t count_parameters(const nn::NamedParams& params);

}  // namespace agesynth
