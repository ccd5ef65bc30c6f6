#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agesynth/tensor.hpp"

namespace agesynth {

/// 8-bit value to [-1, 1]: v / 127.5 - 1.
inline double normalize_pixel(std::uint8_t v) { return v / 127.5 - 1.0; }
/// Inverse of normalize_pixel, clamped and rounded.
std::uint8_t denormalize_pixel(double v);

/// Reads an 8-bit PNG (gray, RGB or RGBA) as a [1, H, W, 3] tensor in [-1, 1].
Tensor read_png(const std::string& path);
/// Writes batch row `index` of an [N, H, W, 3] tensor in [-1, 1] as RGB.
void write_png(const std::string& path, const Tensor& images, int index = 0);

/// Single-channel 8-bit image, e.g. a semantic label map.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;
  std::uint8_t at(int y, int x) const { return labels[y * width + x]; }
};

LabelImage read_label_png(const std::string& path);
void write_label_png(const std::string& path, const LabelImage& image);

/// Tiles rows of [N, H, W, 3] images into a grid `columns` wide.
Tensor tile_grid(const std::vector<Tensor>& images, int columns);

}  // namespace agesynth
