#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agesynth/config.hpp"
#include "agesynth/dataprep.hpp"
#include "agesynth/evalprobe.hpp"
#include "agesynth/runner.hpp"
#include "agesynth/synthetic.hpp"

namespace agesynth {

// Command bodies behind the CLI. Each validates paths before computing and
// writes a config echo next to its outputs.

struct PrepareResult {
  ManifestSet manifests;
  std::string train_manifest;
  std::string test_manifest;
  std::string report;
  int images_written = 0;
};

/// Reads config.data.labels (a ".csv" path is taken as the FFHQ-Aging label
/// CSV), prunes, splits and, when config.data.images_dir is set, masks,
/// aligns and resizes every kept image to the network resolution.
PrepareResult cmd_prepare_data(const RunConfig& config, const std::string& out_dir);

/// Trains from config.data.manifest for config.train.gender.
RunSummary cmd_train(const RunConfig& config, bool resume);

struct TransformTarget {
  std::optional<std::string> class_label;
  std::optional<double> age_years;
};

struct TransformResult {
  AnchorBlend blend;
  std::string out_path;
};

/// Renders one image at an anchor class or at a continuous age. Inputs at a
/// different square size are resampled to the network and back.
TransformResult cmd_transform(const RunConfig& config,
                              const std::string& checkpoint,
                              const std::string& image_path,
                              const TransformTarget& target,
                              const std::string& out_path);

std::vector<std::string> cmd_lifespan(const RunConfig& config,
                                      const std::string& checkpoint,
                                      const std::string& image_path,
                                      const std::string& out_dir);

/// Probe names: latent_linearity, roundtrip, identity, lifespan, ablations.
/// The ablations probe needs no checkpoint.
ProbeReport cmd_probe(const RunConfig& config, const std::string& checkpoint,
                      const std::string& probe,
                      const std::vector<std::string>& inputs,
                      const std::string& out_dir);

std::string cmd_make_synthetic(const RunConfig& config, const SyntheticSpec& spec,
                               const std::string& out_dir);

/// Loads a PNG as a [1, R, R, 3] network input; square images of another
/// size are resampled.
Tensor load_network_input(const std::string& path, int resolution);

}  // namespace agesynth
