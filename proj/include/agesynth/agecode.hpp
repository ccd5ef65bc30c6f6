#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace agesynth {

/// One anchor age class, an inclusive range of years.
struct AgeClass {
  std::string label;
  int low_year = 0;
  int high_year = 0;

  double midpoint() const noexcept { return 0.5 * (low_year + high_year); }
  bool contains(double age) const noexcept {
    return age >= low_year && age <= high_year;
  }
};

/// The ordered anchor classes and the per-class block width of the age code.
class AgeClassSchema {
public:
  /// Six anchors 0-2, 3-6, 7-9, 15-19, 30-39, 50-69 with k = 50.
  static AgeClassSchema reference();

  /// Parses "0-2,3-6,..." into a schema with block width `k`.
  static AgeClassSchema parse(const std::string& classes, int k);

  AgeClassSchema(std::vector<AgeClass> classes, int k);

  int n() const noexcept { return static_cast<int>(classes_.size()); }
  int k() const noexcept { return k_; }
  int code_length() const noexcept { return k_ * n(); }
  const AgeClass& operator[](int i) const { return classes_.at(i); }
  const std::vector<AgeClass>& classes() const noexcept { return classes_; }

  std::optional<int> find(const std::string& label) const;
  /// Same as find() but throws SchemaError naming the label.
  int index_of(const std::string& label) const;

  /// Comma-separated labels, the inverse of parse().
  std::string labels() const;

  bool operator==(const AgeClassSchema&) const;

private:
  std::vector<AgeClass> classes_;
  int k_ = 50;
};

/// Point in the age input space: k*n values.
struct AgeCode {
  std::vector<double> values;
  std::optional<int> source_class;
};

/// Output of the mapping network.
struct LatentAgeVector {
  std::vector<double> values;
};

inline constexpr double kDefaultAgeNoise = 0.2;

/// Indicator block for class `i`: ones on [k*i, k*(i+1)), zeros elsewhere.
AgeCode one_hot_block(int i, const AgeClassSchema& schema);

/// one_hot_block(i) plus i.i.d. N(0, sigma^2) noise on every element.
AgeCode sample_age_code(int i, const AgeClassSchema& schema, double sigma,
                        std::mt19937_64& rng);

/// (1 - alpha) * a + alpha * b. Extrapolation (alpha outside [0, 1]) is rejected.
LatentAgeVector interpolate_latent(const LatentAgeVector& a,
                                   const LatentAgeVector& b, double alpha);

struct AnchorBlend {
  int t = 0;
  int t_next = 0;
  double alpha = 0.0;
};

/// Maps a scalar age onto two neighbouring anchors and a blend weight.
/// Ages inside an anchor range hit it exactly; ages in a gap interpolate
/// linearly between the two anchors' range midpoints.
AnchorBlend target_age_to_anchor_blend(double age_years,
                                       const AgeClassSchema& schema);

}  // namespace agesynth
