#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agesynth/trainer.hpp"
#include "json.hpp"

namespace agesynth {

/// Metrics of one probed input.
struct ProbeSample {
  std::string name;
  std::map<std::string, double> metrics;
};

struct ProbeReport {
  std::string probe;
  std::vector<ProbeSample> samples;
  /// Means of every per-sample metric, keyed "mean_<metric>", plus any
  /// ratio recomputed from those means.
  std::map<std::string, double> aggregates;
  std::vector<std::string> artifacts;
  std::string note;

  /// Rebuilds `aggregates` from `samples`.
  void recompute_aggregates();
  nlohmann::json to_json() const;
  void write(const std::string& path) const;
};

enum class WeightSource { ema, live };
WeightSource parse_weight_source(const std::string& text);

/// Networks whose E_id, M and F drive the probes. E_age is never averaged,
/// so encoders always come from model.live.
const Networks& probe_generator(const LoadedModel& model, WeightSource source);

/// M applied to the noise-free indicator block of anchor `cls`.
LatentAgeVector anchor_latent(const Networks& gen, int cls);

/// F(E_id(x), w) for a [N, R, R, 3] batch and one latent shared by all rows.
Tensor render_with_latent(const Networks& gen, const Tensor& x,
                          const LatentAgeVector& w);

/// Block-mean argmax over one row of a [N, 1, 1, k*n] code batch. Ties go
/// to the lower class.
int predict_age_class(const Tensor& codes, int row, const AgeClassSchema& schema);

/// Fraction of rows whose predicted class equals targets[row].
double roundtrip_accuracy(const Tensor& codes, const std::vector<int>& targets,
                          const AgeClassSchema& schema);

/// Generates x[i] at the noise-free code of targets[i] with `gen`, re-encodes
/// with `encoder`'s E_age, and scores the class round trip.
double age_roundtrip_metric(const Tensor& x, const std::vector<int>& targets,
                            const Networks& gen, const Networks& encoder);

/// Per-row l1 distance between E_id(x) and E_id of the aged output.
std::vector<double> identity_consistency(const Tensor& x,
                                         const std::vector<int>& targets,
                                         const Networks& gen);

/// Compares the trained 3-6 anchor against the midpoint of the 0-2 and 7-9
/// latents. Per sample: midpoint_l1 (outputs under the two latents) and
/// adjacent_l1 (mean distance of the 3-6 output to its two neighbours).
/// Writes a grid (input, 0-2, 3-6, midpoint, 7-9 per row) when out_dir is
/// non-empty. Throws ConfigError if any of the three anchors is missing.
ProbeReport latent_linearity_probe(const Tensor& x, const Networks& gen,
                                   const std::string& out_dir = "");

/// n + (n-1) * frames_per_gap frames of one [1, R, R, 3] input, youngest
/// first. Anchor frames are rendered from the anchor latents directly.
std::vector<Tensor> lifespan_sweep(const Tensor& x, const Networks& gen,
                                   int frames_per_gap = 24);

/// Writes frames as frame_0000.png, frame_0001.png, ... and returns paths.
std::vector<std::string> write_frames(const std::vector<Tensor>& frames,
                                      const std::string& dir);

/// Schema and age-noise overrides applied on top of a base configuration.
struct AblationConfig {
  std::string name;
  std::optional<AgeClassSchema> schema;
  std::optional<double> age_noise;
};

/// two_anchor, three_anchor, k50_no_noise, k1_no_noise.
std::vector<AblationConfig> ablation_configs();
const AblationConfig& find_ablation(const std::string& name);

/// Returns copies of the base configs with the overrides applied.
std::pair<NetworkConfig, TrainConfig> apply_ablation(
    const AblationConfig& ablation, const NetworkConfig& net,
    const TrainConfig& train);

}  // namespace agesynth
