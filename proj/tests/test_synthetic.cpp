#include "doctest.h"

#include "agesynth/dataprep.hpp"
#include "agesynth/errors.hpp"
#include "agesynth/image_io.hpp"
#include "agesynth/synthetic.hpp"
#include "tempdir.hpp"

using namespace agesynth;

namespace {

int covered_pixels(const Tensor& img) {
  int n = 0;
  for (int y = 0; y < img.shape().h; ++y)
    for (int x = 0; x < img.shape().w; ++x) {
      bool any = false;
      for (int c = 0; c < 3; ++c) any |= img.at(0, y, x, c) > -1.0;
      n += any;
    }
  return n;
}

}  // namespace

TEST_CASE("synthetic disks are quantized images in range") {
  const SyntheticSpec spec;
  std::mt19937_64 rng(1);
  for (int cls = 0; cls < spec.classes; ++cls) {
    const Tensor img = draw_synthetic_disk(cls, spec, rng);
    CHECK(img.shape() == Shape{1, 32, 32, 3});
    for (double v : img.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
      CHECK(v == normalize_pixel(denormalize_pixel(v)));
    }
    CHECK(covered_pixels(img) > 0);
  }
}

TEST_CASE("disk area grows with the class index") {
  SyntheticSpec spec;
  spec.resolution = 32;
  std::mt19937_64 rng(5);
  double previous = 0;
  for (int cls = 0; cls < spec.classes; ++cls) {
    double mean = 0;
    for (int i = 0; i < 40; ++i) mean += covered_pixels(draw_synthetic_disk(cls, spec, rng)) / 40.0;
    CHECK(mean > previous);
    previous = mean;
  }
}

TEST_CASE("datasets are seeded") {
  SyntheticSpec spec;
  spec.per_class = 3;
  spec.resolution = 16;
  const ClassDataset a = make_synthetic_dataset(spec);
  const ClassDataset b = make_synthetic_dataset(spec);
  spec.seed = 1;
  const ClassDataset c = make_synthetic_dataset(spec);
  CHECK(a.num_classes() == 6);
  CHECK(a.min_class_size() == 3);
  bool differs = false;
  for (int cls = 0; cls < 6; ++cls)
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.image(cls, i).values() == b.image(cls, i).values());
      differs |= a.image(cls, i).values() != c.image(cls, i).values();
    }
  CHECK(differs);
  spec.per_class = 0;
  CHECK_THROWS_AS(make_synthetic_dataset(spec), ArgumentError);
}

TEST_CASE("written dataset matches the in-memory one") {
  testing::TempDir dir("agesynth_synth");
  SyntheticSpec spec;
  spec.per_class = 2;
  spec.resolution = 16;
  const AgeClassSchema schema = AgeClassSchema::parse("0-2,3-6,7-9,10-14,15-19,30-39", 5);
  const std::string manifest = write_synthetic_dataset(spec, schema, dir.path.string());
  const Manifest entries = read_manifest(manifest);
  CHECK(entries.size() == 2 * 6 * 2);
  const ClassDataset memory = make_synthetic_dataset(spec);
  for (Gender g : {Gender::male, Gender::female}) {
    const ClassDataset disk = dataset_from_manifest(manifest, schema, g);
    CHECK(disk.num_classes() == 6);
    for (int cls = 0; cls < 6; ++cls)
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(disk.image(cls, i).values() == memory.image(cls, i).values());
      }
  }
  CHECK_THROWS_AS(write_synthetic_dataset(spec, AgeClassSchema::parse("0-2,3-6,7-9", 5),
                                          dir.file("other")),
                  ConfigError);
}
