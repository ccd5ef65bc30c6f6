#include "agesynth/losses.hpp"

#include <cmath>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

double softplus(double v) {
  return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " is not finite");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + a.shape().str() +
                     " and " + b.shape().str() + " differ");
  }
}

// Batch mean of a [N, 1, 1, 1] column.
Var batch_mean(const Var& column) { return ad::mean(column); }

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"loss.lambda_rec", lambda_rec}, {"loss.lambda_cyc", lambda_cyc},
      {"loss.lambda_id", lambda_id},   {"loss.lambda_age", lambda_age},
      {"loss.r1_gamma", r1_gamma}};
  for (const auto& [name, v] : fields) {
    if (!std::isfinite(v) || v < 0) {
      throw ConfigError(std::string(name) + " must be finite and >= 0");
    }
  }
}

double adv_loss_d(double score_real_s, double score_fake_t,
                  double grad_norm_sq_real, const LossWeights& weights) {
  require_finite(score_real_s, "real score");
  require_finite(score_fake_t, "fake score");
  require_finite(grad_norm_sq_real, "R1 gradient norm");
  if (grad_norm_sq_real < 0) {
    throw NumericError("R1 gradient norm must be >= 0");
  }
  return softplus(-score_real_s) + softplus(score_fake_t) +
         0.5 * weights.r1_gamma * grad_norm_sq_real;
}

double adv_loss_g(double score_fake_t) {
  require_finite(score_fake_t, "fake score");
  return softplus(-score_fake_t);
}

double combine_generator_loss(double adv, double rec, double cyc, double id,
                              double age, const LossWeights& weights) {
  return adv + weights.lambda_rec * rec + weights.lambda_cyc * cyc +
         weights.lambda_id * id + weights.lambda_age * age;
}

Var l1_mean(const Var& a, const Var& b) {
  require_same_shape(a, b, "l1_mean");
  return ad::mean(ad::abs(a - b));
}

Var loss_rec(const Var& x, const Var& y_rec) { return l1_mean(x, y_rec); }

Var loss_cyc(const Var& x, const Var& y_cyc) { return l1_mean(x, y_cyc); }

Var loss_id(const Var& id_x, const Var& id_gen) {
  return l1_mean(id_x, id_gen);
}

Var loss_id(const Var& x, const Var& y_gen, const IdentityEncoder& encoder) {
  return loss_id(encoder.forward(x), encoder.forward(y_gen));
}

Var loss_age(const Var& age_x, const Var& age_gen, const Var& z_s,
             const Var& z_t) {
  return l1_mean(age_x, z_s) + l1_mean(age_gen, z_t);
}

Var loss_age(const Var& x, const Var& y_gen, const Var& z_s, const Var& z_t,
             const AgeEncoder& encoder) {
  return loss_age(encoder.forward(x), encoder.forward(y_gen), z_s, z_t);
}

Var select_class_scores(const Var& scores, const std::vector<int>& classes) {
  const Shape s = scores.shape();
  if (s.h != 1 || s.w != 1 || static_cast<int>(classes.size()) != s.n) {
    throw ShapeError("select_class_scores: " + std::to_string(classes.size()) +
                     " classes for scores " + s.str());
  }
  Tensor mask(s);
  for (int i = 0; i < s.n; ++i) {
    if (classes[i] < 0 || classes[i] >= s.c) {
      throw ArgumentError("class index " + std::to_string(classes[i]) +
                          " outside [0, " + std::to_string(s.c) + ")");
    }
    mask.at(i, 0, 0, classes[i]) = 1.0;
  }
  return ad::reduce_to(scores * ad::constant(std::move(mask)),
                       Shape{s.n, 1, 1, 1});
}

TriplePass run_triple_pass(const Networks& nets, const Var& x, const Var& z_s,
                           const Var& z_t, std::vector<int> s,
                           std::vector<int> t) {
  TriplePass p;
  p.x = x;
  p.z_s = z_s;
  p.z_t = z_t;
  p.s = std::move(s);
  p.t = std::move(t);
  const Var w_s = nets.map_age(z_s);
  const Var w_t = nets.map_age(z_t);
  p.id_x = nets.identity_encode(x);
  p.y_gen = nets.decode(p.id_x, w_t);
  p.y_rec = nets.decode(p.id_x, w_s);
  p.id_gen = nets.identity_encode(p.y_gen);
  p.y_cyc = nets.decode(p.id_gen, w_s);
  return p;
}

GeneratorLoss total_generator_loss(const TriplePass& pass,
                                   const Networks& nets,
                                   const LossWeights& weights) {
  GeneratorLoss l;
  const Var fake_scores =
      select_class_scores(nets.discriminate(pass.y_gen), pass.t);
  l.adv = batch_mean(ad::softplus(-fake_scores));
  l.rec = loss_rec(pass.x, pass.y_rec);
  l.cyc = loss_cyc(pass.x, pass.y_cyc);
  l.id = loss_id(pass.id_x, pass.id_gen);
  l.age = loss_age(nets.age_encode(pass.x), nets.age_encode(pass.y_gen),
                   pass.z_s, pass.z_t);
  l.total = l.adv + l.rec * weights.lambda_rec + l.cyc * weights.lambda_cyc +
            l.id * weights.lambda_id + l.age * weights.lambda_age;
  return l;
}

Var r1_penalty(const ScoreFn& score, const Tensor& real,
               const std::vector<int>& classes) {
  const Var x = ad::parameter(real);
  const Var picked = ad::sum(select_class_scores(score(x), classes));
  const Var g = ad::grad(picked, {x}, /*create_graph=*/true)[0];
  const Shape s = g.shape();
  return batch_mean(ad::reduce_to(ad::square(g), Shape{s.n, 1, 1, 1}));
}

Var r1_penalty(const Discriminator& disc, const Tensor& real,
               const std::vector<int>& classes) {
  return r1_penalty([&disc](const Var& x) { return disc.forward(x); }, real,
                    classes);
}

DiscriminatorLoss discriminator_loss(const Discriminator& disc,
                                     const Tensor& real,
                                     const std::vector<int>& real_classes,
                                     const Var& fake,
                                     const std::vector<int>& fake_classes,
                                     const LossWeights& weights) {
  DiscriminatorLoss l;
  // One forward over the reals serves both the loss and the R1 gradient.
  const bool penalize = weights.r1_gamma > 0;
  const Var x = penalize ? ad::parameter(real) : ad::constant(real);
  const Var real_scores = select_class_scores(disc.forward(x), real_classes);
  const Var fake_scores = select_class_scores(disc.forward(fake), fake_classes);
  l.real = batch_mean(ad::softplus(-real_scores));
  l.fake = batch_mean(ad::softplus(fake_scores));
  if (penalize) {
    const Var g = ad::grad(ad::sum(real_scores), {x}, true)[0];
    const Shape s = g.shape();
    l.r1 = batch_mean(ad::reduce_to(ad::square(g), Shape{s.n, 1, 1, 1}));
  } else {
    l.r1 = ad::constant(Tensor::scalar(0.0));
  }
  l.total = l.real + l.fake + l.r1 * (0.5 * weights.r1_gamma);
  return l;
}

}  // namespace agesynth
