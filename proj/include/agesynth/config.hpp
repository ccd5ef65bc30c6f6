#pragma once

#include <istream>
#include <string>
#include <vector>

#include "agesynth/dataprep.hpp"
#include "agesynth/evalprobe.hpp"
#include "agesynth/losses.hpp"
#include "agesynth/networks.hpp"
#include "agesynth/trainer.hpp"

namespace agesynth {

struct DataConfig {
  std::string labels;      // label file or FFHQ-Aging CSV (".csv")
  std::string images_dir;  // raw images named <id>.png
  std::string masks_dir;   // semantic label maps named <id>.png
  std::string palette;     // empty: the built-in 19-label palette
  std::string manifest;    // training manifest consumed by `train`
  int split_boundary = kDefaultSplitBoundary;
  double ramp_fraction = 0.1;
};

struct ProbeConfig {
  std::string weights = "ema";
  int frames_per_gap = 24;
};

/// Every tunable of a run. Defaults are the reference values.
struct RunConfig {
  std::string run_name = "agesynth";
  std::string output_dir = "runs";
  NetworkConfig network;
  TrainConfig train;
  LossWeights loss;
  PruneThresholds prune;
  DataConfig data;
  ProbeConfig probe;

  /// Sets a dotted key from its text form. Throws ConfigError naming the key
  /// when it is unknown or the value does not parse.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// All keys in echo order.
  static const std::vector<std::string>& keys();

  /// Throws ConfigError on any out-of-range value.
  void validate() const;
  /// Canonical "key = value" text that parses back to an equal config.
  std::string to_text() const;

  /// run_name joined onto output_dir.
  std::string run_dir() const;
};

/// Flat text format: one "section.key = value" per line; blank lines and
/// lines starting with '#' are ignored. Later lines win. Errors carry
/// source:line and the key.
RunConfig parse_run_config(std::istream& in, const std::string& source = "config",
                           RunConfig base = {});
RunConfig load_run_config(const std::string& path);

/// Applies one "key=value" override.
void apply_override(RunConfig& config, const std::string& assignment);

inline constexpr const char* kOutputDirEnv = "AGESYNTH_OUTPUT_DIR";
/// Replaces output_dir when the environment variable is set and non-empty.
void apply_env_overrides(RunConfig& config);

void write_config_echo(const RunConfig& config, const std::string& path);

}  // namespace agesynth
