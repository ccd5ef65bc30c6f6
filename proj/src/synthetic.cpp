#include "agesynth/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "agesynth/dataprep.hpp"
#include "agesynth/errors.hpp"
#include "agesynth/image_io.hpp"

namespace agesynth {

namespace {

void check(const SyntheticSpec& spec) {
  if (spec.resolution < 8) throw ArgumentError("synthetic resolution must be >= 8");
  if (spec.classes < 2) throw ArgumentError("synthetic classes must be >= 2");
  if (spec.per_class < 1) throw ArgumentError("synthetic per_class must be >= 1");
}

}  // namespace

Tensor draw_synthetic_disk(int cls, const SyntheticSpec& spec,
                           std::mt19937_64& rng) {
  check(spec);
  if (cls < 0 || cls >= spec.classes) {
    throw ArgumentError("synthetic class " + std::to_string(cls) +
                        " out of range");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = spec.resolution;
  // Geometry is expressed on a 32-pixel canvas and scaled to the resolution.
  const double scale = r / 32.0;
  const double progress = static_cast<double>(cls) / (spec.classes - 1);
  const double radius = scale * (3.0 + 11.0 * progress + (unit(rng) - 0.5));
  const double freq = (0.05 + 0.3 * progress) / scale;  // cycles per pixel
  const double cx = r / 2 + scale * 3.0 * (2 * unit(rng) - 1);
  const double cy = r / 2 + scale * 3.0 * (2 * unit(rng) - 1);
  const double theta = std::numbers::pi * unit(rng);
  const double phase = 2 * std::numbers::pi * unit(rng);
  double colour[3];
  for (double& c : colour) c = 0.7 + 0.3 * unit(rng);

  Tensor out(Shape{1, spec.resolution, spec.resolution, 3});
  for (int y = 0; y < spec.resolution; ++y)
    for (int x = 0; x < spec.resolution; ++x) {
      const double px = x + 0.5 - cx, py = y + 0.5 - cy;
      // One-pixel antialiased rim.
      const double cover =
          std::clamp(radius - std::hypot(px, py) + 0.5, 0.0, 1.0);
      const double along = px * std::cos(theta) + py * std::sin(theta);
      const double stripe =
          0.5 + 0.5 * std::sin(2 * std::numbers::pi * freq * along + phase);
      for (int c = 0; c < 3; ++c) {
        const double v = cover * colour[c] * (0.35 + 0.65 * stripe);
        out.at(0, y, x, c) = normalize_pixel(denormalize_pixel(2 * v - 1));
      }
    }
  return out;
}

ClassDataset make_synthetic_dataset(const SyntheticSpec& spec) {
  check(spec);
  std::mt19937_64 rng(spec.seed);
  ClassDataset data(spec.classes);
  for (int c = 0; c < spec.classes; ++c)
    for (int i = 0; i < spec.per_class; ++i) {
      data.add(c, draw_synthetic_disk(c, spec, rng));
    }
  return data;
}

std::string write_synthetic_dataset(const SyntheticSpec& spec,
                                    const AgeClassSchema& schema,
                                    const std::string& dir) {
  check(spec);
  if (schema.n() != spec.classes) {
    throw ConfigError("synthetic classes (" + std::to_string(spec.classes) +
                      ") differ from the schema's " + std::to_string(schema.n()));
  }
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  std::mt19937_64 rng(spec.seed);
  Manifest manifest;
  int id = 0;
  for (int c = 0; c < spec.classes; ++c)
    for (int i = 0; i < spec.per_class; ++i, ++id) {
      const Tensor img = draw_synthetic_disk(c, spec, rng);
      const std::string rel = "images/" + std::to_string(id) + ".png";
      write_png((fs::path(dir) / rel).string(), img, 0);
      // Both genders point at the same pixels so either model can train.
      for (Gender g : {Gender::male, Gender::female}) {
        manifest.push_back(ManifestEntry{id, g, schema[c].label, rel, ""});
      }
    }
  const std::string path = (fs::path(dir) / "train.tsv").string();
  write_manifest(path, manifest);
  return path;
}

}  // namespace agesynth
