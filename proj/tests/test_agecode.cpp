#include "doctest.h"

#include <cmath>
#include <random>
#include <tuple>

#include "agesynth/agecode.hpp"
#include "agesynth/errors.hpp"

using namespace agesynth;

TEST_CASE("reference schema") {
  const auto schema = AgeClassSchema::reference();
  CHECK(schema.n() == 6);
  CHECK(schema.k() == 50);
  CHECK(schema.code_length() == 300);
  CHECK(schema.labels() == "0-2,3-6,7-9,15-19,30-39,50-69");
  const double midpoints[] = {1.0, 4.5, 8.0, 17.0, 34.5, 59.5};
  for (int i = 0; i < 6; ++i) CHECK(schema[i].midpoint() == midpoints[i]);
  CHECK(AgeClassSchema::parse(schema.labels(), 50) == schema);
  CHECK(schema.index_of("15-19") == 3);
  CHECK_THROWS_AS(schema.index_of("20-29"), SchemaError);
}

TEST_CASE("schema validation") {
  CHECK_THROWS_AS(AgeClassSchema::parse("0-2", 50), SchemaError);
  CHECK_THROWS_AS(AgeClassSchema::parse("0-2,3-6", 0), SchemaError);
  CHECK_THROWS_AS(AgeClassSchema::parse("3-6,0-2", 5), SchemaError);
  CHECK_THROWS_AS(AgeClassSchema::parse("0-4,3-6", 5), SchemaError);
  CHECK_THROWS_AS(AgeClassSchema::parse("0-2,x", 5), SchemaError);
  CHECK_NOTHROW(AgeClassSchema::parse("0-2,50-69", 1));
}

TEST_CASE("one_hot_block") {
  const auto schema = AgeClassSchema::reference();
  for (int i = 0; i < schema.n(); ++i) {
    const AgeCode code = one_hot_block(i, schema);
    REQUIRE(code.values.size() == 300);
    int nonzero = 0;
    for (int j = 0; j < 300; ++j) {
      const bool inside = j >= 50 * i && j < 50 * (i + 1);
      CHECK(code.values[j] == (inside ? 1.0 : 0.0));
      nonzero += code.values[j] != 0.0;
    }
    CHECK(nonzero == 50);
    CHECK(code.source_class == i);
  }
  const auto tiny = AgeClassSchema::parse("0-2,3-6", 1);
  CHECK(one_hot_block(1, tiny).values == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(one_hot_block(6, schema), SchemaError);
  CHECK_THROWS_AS(one_hot_block(-1, schema), SchemaError);
}

TEST_CASE("sample_age_code") {
  const auto schema = AgeClassSchema::reference();
  std::mt19937_64 rng(5);
  CHECK(sample_age_code(3, schema, 0.0, rng).values ==
        one_hot_block(3, schema).values);
  CHECK_THROWS_AS(sample_age_code(0, schema, -0.1, rng), ArgumentError);
  CHECK(kDefaultAgeNoise == 0.2);

  std::mt19937_64 r1(42), r2(42);
  CHECK(sample_age_code(2, schema, 0.2, r1).values ==
        sample_age_code(2, schema, 0.2, r2).values);
}

TEST_CASE("interpolate_latent") {
  const LatentAgeVector a{{0.0, 0.0, 0.0}};
  const LatentAgeVector b{{1.0, 1.0, 1.0}};
  CHECK(interpolate_latent(a, b, 0.0).values == a.values);
  CHECK(interpolate_latent(a, b, 1.0).values == b.values);
  CHECK(interpolate_latent(a, b, 0.5).values ==
        std::vector<double>{0.5, 0.5, 0.5});
  CHECK_THROWS_AS(interpolate_latent(a, b, 1.5), ArgumentError);
  CHECK_THROWS_AS(interpolate_latent(a, b, -0.01), ArgumentError);
  CHECK_THROWS_AS(interpolate_latent(a, LatentAgeVector{{1.0}}, 0.5),
                  ShapeError);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    LatentAgeVector u, v;
    for (int i = 0; i < 16; ++i) {
      u.values.push_back(normal(rng));
      v.values.push_back(normal(rng));
    }
    const double alpha = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto p = interpolate_latent(u, v, alpha);
    const auto q = interpolate_latent(v, u, alpha);
    for (int i = 0; i < 16; ++i) {
      CHECK(p.values[i] + q.values[i] ==
            doctest::Approx(u.values[i] + v.values[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("target_age_to_anchor_blend") {
  const auto schema = AgeClassSchema::reference();
  auto blend = [&](double age) {
    const auto b = target_age_to_anchor_blend(age, schema);
    return std::make_tuple(b.t, b.t_next, b.alpha);
  };
  CHECK(blend(1.0) == std::make_tuple(0, 0, 0.0));
  CHECK(blend(4.5) == std::make_tuple(1, 1, 0.0));
  CHECK(blend(12.5) == std::make_tuple(2, 3, 0.5));
  CHECK(blend(69.0) == std::make_tuple(5, 5, 0.0));
  // 40..49 sits between 30-39 (midpoint 34.5) and 50-69 (midpoint 59.5).
  const auto gap = target_age_to_anchor_blend(47.0, schema);
  CHECK(gap.t == 4);
  CHECK(gap.t_next == 5);
  CHECK(gap.alpha == doctest::Approx((47.0 - 34.5) / 25.0));
  CHECK_THROWS_AS(target_age_to_anchor_blend(70.0, schema), ArgumentError);
  CHECK_THROWS_AS(target_age_to_anchor_blend(-1.0, schema), ArgumentError);

  // Monotone in lexicographic (t, alpha) order.
  std::tuple<int, double> previous{-1, 0.0};
  for (double age = 0.0; age <= 69.0; age += 0.05) {
    const auto b = target_age_to_anchor_blend(age, schema);
    const std::tuple<int, double> current{b.t, b.alpha};
    CHECK(current >= previous);
    previous = current;
  }
}
