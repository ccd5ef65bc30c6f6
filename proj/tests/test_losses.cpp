#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "agesynth/errors.hpp"
#include "agesynth/losses.hpp"
#include "gradcheck.hpp"

using namespace agesynth;
using agesynth::testing::grad_check;
using agesynth::testing::random_tensor;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.resolution = 16;
  c.base_channels = 4;
  c.latent_dim = 8;
  c.mapping_layers = 2;
  c.schema = AgeClassSchema::parse("0-2,3-6,7-9", 4);
  return c;
}

Var constant(Shape s, double v) { return ad::constant(Tensor(s, v)); }

double softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

}  // namespace

TEST_CASE("loss weights") {
  const LossWeights w;
  CHECK(w.lambda_rec == 10.0);
  CHECK(w.lambda_cyc == 10.0);
  CHECK(w.lambda_id == 1.0);
  CHECK(w.lambda_age == 1.0);
  CHECK(w.r1_gamma == 10.0);
  LossWeights bad;
  bad.lambda_id = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.r1_gamma = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("scalar adversarial losses") {
  LossWeights no_r1;
  no_r1.r1_gamma = 0;
  CHECK(adv_loss_d(0, 0, 0, no_r1) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-15));
  CHECK(adv_loss_d(60, -60, 0, no_r1) < 1e-25);
  CHECK(adv_loss_d(1.5, -0.3, 0.7, LossWeights{}) ==
        doctest::Approx(softplus(-1.5) + softplus(-0.3) + 5 * 0.7).epsilon(1e-14));
  CHECK(adv_loss_g(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(adv_loss_g(60) < 1e-25);
  // Slope -1 asymptote for very negative scores.
  CHECK(adv_loss_g(-40) - adv_loss_g(-39) == doctest::Approx(1.0).epsilon(1e-12));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adv_loss_g(inf), NumericError);
  CHECK_THROWS_AS(adv_loss_d(std::nan(""), 0, 0, no_r1), NumericError);
  CHECK_THROWS_AS(adv_loss_d(0, 0, -1, no_r1), NumericError);
}

TEST_CASE("combined generator loss") {
  const LossWeights w;
  CHECK(combine_generator_loss(1, 1, 1, 1, 1, w) == 23.0);
  LossWeights zero{0, 0, 0, 0, 10};
  CHECK(combine_generator_loss(0.4, 3, 2, 1, 5, zero) == 0.4);
  // Linear in every weight with the others held fixed.
  for (double lam : {0.0, 1.0, 2.5, 7.0}) {
    LossWeights v = w;
    v.lambda_cyc = lam;
    CHECK(combine_generator_loss(0.5, 0.2, 0.3, 0.4, 0.6, v) ==
          doctest::Approx(0.5 + 2.0 + lam * 0.3 + 0.4 + 0.6));
  }
}

TEST_CASE("l1 family") {
  const Shape s{2, 3, 3, 3};
  CHECK(l1_mean(constant(s, 0.5), constant(s, 0.25)).item() == 0.25);
  std::mt19937_64 rng(3);
  const Var a = ad::constant(random_tensor(s, rng));
  const Var b = ad::constant(random_tensor(s, rng));
  CHECK(l1_mean(a, a).item() == 0.0);
  CHECK(l1_mean(ad::mul_scalar(a, -3), ad::mul_scalar(b, -3)).item() ==
        doctest::Approx(3 * l1_mean(a, b).item()).epsilon(1e-14));
  CHECK_THROWS_AS(l1_mean(a, constant(Shape{1, 3, 3, 3}, 0)), ShapeError);
  CHECK(loss_rec(a, a).item() == 0.0);
  CHECK(loss_cyc(constant(s, 1), constant(s, -1)).item() == 2.0);
  CHECK(loss_id(a, b).item() == l1_mean(a, b).item());

  const Shape code{2, 1, 1, 12};
  CHECK(loss_age(constant(code, 1), constant(code, 0.25), constant(code, 0.5),
                 constant(code, 0.25))
            .item() == 0.5);
  CHECK(loss_age(a, b, a, b).item() == 0.0);
}

TEST_CASE("class score selection") {
  Tensor scores(Shape{3, 1, 1, 4});
  for (std::size_t i = 0; i < scores.numel(); ++i) scores[i] = static_cast<double>(i);
  const Var picked = select_class_scores(ad::constant(scores), {2, 0, 3});
  CHECK(picked.shape() == Shape{3, 1, 1, 1});
  CHECK(picked.value()[0] == 2.0);
  CHECK(picked.value()[1] == 4.0);
  CHECK(picked.value()[2] == 11.0);
  CHECK_THROWS_AS(select_class_scores(ad::constant(scores), {0, 4, 1}), ArgumentError);
  CHECK_THROWS_AS(select_class_scores(ad::constant(scores), {0, 1}), ShapeError);
}

TEST_CASE("r1 on linear discriminators") {
  for (double a : {0.5, -1.75, 3.0}) {
    const ScoreFn linear = [a](const Var& x) { return ad::mul_scalar(x, a); };
    const Tensor x(Shape{4, 1, 1, 1}, 0.3);
    const double r1 = r1_penalty(linear, x, {0, 0, 0, 0}).item();
    CHECK(r1 == doctest::Approx(a * a).epsilon(1e-15));
    LossWeights w;
    CHECK(adv_loss_d(0, 0, r1, w) - adv_loss_d(0, 0, 0, w) ==
          doctest::Approx(0.5 * w.r1_gamma * a * a).epsilon(1e-14));
  }
  // Image-shaped linear scorer: gradient norm squared is the sum of squares.
  std::mt19937_64 rng(11);
  const Tensor weights = random_tensor(Shape{1, 4, 4, 3}, rng);
  double norm_sq = 0;
  for (double v : weights.values()) norm_sq += v * v;
  const ScoreFn dot = [&](const Var& x) {
    return ad::reduce_to(ad::mul(x, ad::constant(weights)), Shape{x.shape().n, 1, 1, 1});
  };
  CHECK(r1_penalty(dot, random_tensor(Shape{3, 4, 4, 3}, rng), {0, 0, 0}).item() ==
        doctest::Approx(norm_sq).epsilon(1e-13));
}

TEST_CASE("discriminator loss matches its parts") {
  const NetworkConfig cfg = tiny_config();
  Networks nets(cfg, 5);
  std::mt19937_64 rng(2);
  const Tensor real = random_tensor(Shape{3, 16, 16, 3}, rng);
  const Tensor fake = random_tensor(Shape{3, 16, 16, 3}, rng);
  const std::vector<int> rc{0, 1, 2}, fc{2, 2, 0};
  const LossWeights w;
  const DiscriminatorLoss l = discriminator_loss(nets.discriminator, real, rc,
                                                 ad::constant(fake), fc, w);
  const Tensor rs = nets.discriminate(ad::constant(real)).value();
  const Tensor fs = nets.discriminate(ad::constant(fake)).value();
  double expect_real = 0, expect_fake = 0;
  for (int i = 0; i < 3; ++i) {
    expect_real += softplus(-rs[i * 3 + rc[i]]) / 3;
    expect_fake += softplus(fs[i * 3 + fc[i]]) / 3;
  }
  CHECK(l.real.item() == doctest::Approx(expect_real).epsilon(1e-13));
  CHECK(l.fake.item() == doctest::Approx(expect_fake).epsilon(1e-13));
  CHECK(l.r1.item() == doctest::Approx(r1_penalty(nets.discriminator, real, rc).item())
                           .epsilon(1e-12));
  CHECK(l.total.item() == doctest::Approx(l.real.item() + l.fake.item() + 5 * l.r1.item()));
  CHECK(l.total.item() >= 0);
}

TEST_CASE("generator loss composition and fixed points") {
  const NetworkConfig cfg = tiny_config();
  Networks nets(cfg, 9);
  std::mt19937_64 rng(4);
  const Var x = ad::constant(random_tensor(Shape{2, 16, 16, 3}, rng));
  const Var zs = stack_codes({one_hot_block(0, cfg.schema), one_hot_block(1, cfg.schema)});
  const Var zt = stack_codes({one_hot_block(2, cfg.schema), one_hot_block(0, cfg.schema)});
  const TriplePass pass = run_triple_pass(nets, x, zs, zt, {0, 1}, {2, 0});
  const LossWeights w;
  const GeneratorLoss l = total_generator_loss(pass, nets, w);
  CHECK(l.total.item() ==
        doctest::Approx(combine_generator_loss(l.adv.item(), l.rec.item(), l.cyc.item(),
                                               l.id.item(), l.age.item(), w))
            .epsilon(1e-13));
  // Pass outputs agree with direct generator calls.
  CHECK(pass.y_gen.value().values() == nets.generate(x, zt).value().values());
  CHECK(pass.y_rec.value().values() == nets.generate(x, zs).value().values());
  CHECK(pass.y_cyc.value().values() == nets.generate(pass.y_gen, zs).value().values());

  // A stubbed perfect pass zeroes every reconstruction-type term.
  TriplePass perfect = pass;
  perfect.y_rec = x;
  perfect.y_cyc = x;
  perfect.id_gen = perfect.id_x;
  CHECK(loss_rec(perfect.x, perfect.y_rec).item() == 0.0);
  CHECK(loss_cyc(perfect.x, perfect.y_cyc).item() == 0.0);
  CHECK(loss_id(perfect.id_x, perfect.id_gen).item() == 0.0);
  CHECK(loss_age(perfect.z_s, perfect.z_t, perfect.z_s, perfect.z_t).item() == 0.0);

  LossWeights zero{0, 0, 0, 0, 10};
  CHECK(total_generator_loss(pass, nets, zero).total.item() == l.adv.item());
}

TEST_CASE("loss gradients against finite differences") {
  const NetworkConfig cfg = tiny_config();
  Networks nets(cfg, 13);
  std::mt19937_64 rng(8);
  const Tensor xs = random_tensor(Shape{2, 16, 16, 3}, rng);
  const Var zs = stack_codes({sample_age_code(0, cfg.schema, 0.2, rng),
                              sample_age_code(1, cfg.schema, 0.2, rng)});
  const Var zt = stack_codes({sample_age_code(2, cfg.schema, 0.2, rng),
                              sample_age_code(0, cfg.schema, 0.2, rng)});
  const LossWeights w;
  auto params = [](const nn::NamedParams& p) {
    std::vector<Var> v;
    for (const auto& [name, var] : p) v.push_back(var);
    return v;
  };
  SUBCASE("generator") {
    auto loss = [&] {
      const TriplePass pass =
          run_triple_pass(nets, ad::constant(xs), zs, zt, {0, 1}, {2, 0});
      return total_generator_loss(pass, nets, w).total;
    };
    auto p = params(nets.generator_params());
    for (const auto& v : params(nets.age_encoder_params())) p.push_back(v);
    CHECK(grad_check(loss, p, 40, 21).max_rel_error < 1e-3);
  }
  SUBCASE("discriminator with r1") {
    const Tensor fake = random_tensor(Shape{2, 16, 16, 3}, rng);
    auto loss = [&] {
      return discriminator_loss(nets.discriminator, xs, {0, 1}, ad::constant(fake),
                                {2, 0}, w)
          .total;
    };
    CHECK(grad_check(loss, params(nets.discriminator_params()), 40, 22, 1e-6, true)
              .max_rel_error < 1e-3);
  }
}
