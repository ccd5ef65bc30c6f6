#pragma once

// Central finite differences, used as the independent oracle for every
// analytic gradient in the test suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "agesynth/autograd.hpp"

namespace agesynth::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int coordinates = 0;
};

/// `floor` keeps gradients at the round-off level of the difference quotient
/// from producing meaningless ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Compares ad::grad of `loss()` against central differences on up to
/// `max_coords` randomly chosen coordinates spread over `params`.
/// Losses that differentiate internally need `record_graph` so the
/// perturbed evaluations still build the inner graph.
inline GradCheckResult grad_check(const std::function<ad::Var()>& loss,
                                  const std::vector<ad::Var>& params,
                                  int max_coords = 1 << 30,
                                  std::uint64_t seed = 7, double step = 1e-6,
                                  bool record_graph = false) {
  const ad::Var out = loss();
  const auto grads = ad::grad(out, params);
  // Round-off in a loss of magnitude |L| perturbs the quotient by about
  // eps * |L| / step per accumulated operation; allow a thousand of them.
  const double floor = std::max(
      1e-6, 1e3 * std::numeric_limits<double>::epsilon() *
                std::max(1.0, std::abs(out.item())) / step);

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].value().numel(); ++i) {
      coords.push_back({p, i});
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (static_cast<int>(coords.size()) > max_coords) coords.resize(max_coords);

  GradCheckResult result;
  for (const auto& c : coords) {
    double& v = params[c.param].mutable_value()[c.index];
    const double saved = v;
    v = saved + step;
    auto evaluate = [&] {
      if (record_graph) return loss().item();
      ad::NoGradGuard guard;
      return loss().item();
    };
    const double plus = evaluate();
    v = saved - step;
    const double minus = evaluate();
    v = saved;
    const double numeric = (plus - minus) / (2 * step);
    const double analytic = grads[c.param].value()[c.index];
    result.max_rel_error =
        std::max(result.max_rel_error, relative_error(analytic, numeric, floor));
    ++result.coordinates;
  }
  return result;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace agesynth::testing
