#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "agesynth/trainer.hpp"

namespace agesynth {

/// Procedural stand-in for a face dataset: one textured disk per image.
/// Disk radius and stripe frequency both grow with the class index, so the
/// class is recoverable from pixels while identity (position, orientation,
/// colour) varies freely within a class.
struct SyntheticSpec {
  int resolution = 32;
  int classes = 6;
  int per_class = 60;
  std::uint64_t seed = 0;
};

/// One [1, R, R, 3] image in [-1, 1], quantized to 8-bit levels so memory
/// and PNG round trips agree exactly.
Tensor draw_synthetic_disk(int cls, const SyntheticSpec& spec,
                           std::mt19937_64& rng);

ClassDataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Writes every image as PNG under `dir` together with a manifest whose
/// class labels come from `schema`; returns the manifest path.
std::string write_synthetic_dataset(const SyntheticSpec& spec,
                                    const AgeClassSchema& schema,
                                    const std::string& dir);

}  // namespace agesynth
