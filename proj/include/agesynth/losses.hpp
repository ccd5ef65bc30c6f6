#pragma once

#include <functional>
#include <vector>

#include "agesynth/networks.hpp"

namespace agesynth {

struct LossWeights {
  double lambda_rec = 10.0;
  double lambda_cyc = 10.0;
  double lambda_id = 1.0;
  double lambda_age = 1.0;
  double r1_gamma = 10.0;

  /// Throws ConfigError on any negative or non-finite weight.
  void validate() const;
};

// Scalar forms, one sample at a time.

/// softplus(-real_s) + softplus(fake_t) + (gamma / 2) * grad_norm_sq_real.
double adv_loss_d(double score_real_s, double score_fake_t,
                  double grad_norm_sq_real, const LossWeights& weights);
/// softplus(-fake_t).
double adv_loss_g(double score_fake_t);
double combine_generator_loss(double adv, double rec, double cyc, double id,
                              double age, const LossWeights& weights);

// Differentiable batch forms.

Var l1_mean(const Var& a, const Var& b);
Var loss_rec(const Var& x, const Var& y_rec);
Var loss_cyc(const Var& x, const Var& y_cyc);
Var loss_id(const Var& id_x, const Var& id_gen);
Var loss_id(const Var& x, const Var& y_gen, const IdentityEncoder& encoder);
Var loss_age(const Var& age_x, const Var& age_gen, const Var& z_s,
             const Var& z_t);
Var loss_age(const Var& x, const Var& y_gen, const Var& z_s, const Var& z_t,
             const AgeEncoder& encoder);

/// Picks scores[i, classes[i]] from [N, 1, 1, n], giving [N, 1, 1, 1].
Var select_class_scores(const Var& scores, const std::vector<int>& classes);

/// One translation x -> target -> source with everything the generator
/// losses need. Identity features of x and y_gen are kept so no encoder
/// runs twice.
struct TriplePass {
  Var x;
  Var z_s, z_t;
  std::vector<int> s, t;
  Var id_x, id_gen;
  Var y_gen, y_rec, y_cyc;
};

/// y_gen = G(x, z_t), y_rec = G(x, z_s), y_cyc = G(y_gen, z_s).
TriplePass run_triple_pass(const Networks& nets, const Var& x, const Var& z_s,
                           const Var& z_t, std::vector<int> s,
                           std::vector<int> t);

struct GeneratorLoss {
  Var adv, rec, cyc, id, age, total;
};

GeneratorLoss total_generator_loss(const TriplePass& pass,
                                   const Networks& nets,
                                   const LossWeights& weights);

struct DiscriminatorLoss {
  Var real, fake, r1, total;
};

/// Non-saturating class-conditional loss with R1 on the reals. Real and
/// fake batches are scored in separate discriminator calls; `fake` should
/// be detached from the generator.
DiscriminatorLoss discriminator_loss(const Discriminator& disc,
                                     const Tensor& real,
                                     const std::vector<int>& real_classes,
                                     const Var& fake,
                                     const std::vector<int>& fake_classes,
                                     const LossWeights& weights);

/// Maps an image batch to [N, 1, 1, n] class scores.
using ScoreFn = std::function<Var(const Var&)>;

/// Mean over the batch of ||d D_c(x) / d x||^2, kept differentiable with
/// respect to whatever parameters `score` closes over.
Var r1_penalty(const ScoreFn& score, const Tensor& real,
               const std::vector<int>& classes);
Var r1_penalty(const Discriminator& disc, const Tensor& real,
               const std::vector<int>& classes);

}  // namespace agesynth
