#include "agesynth/agecode.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

int parse_year(const std::string& text, const std::string& label) {
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw SchemaError("bad age class label '" + label + "'");
  }
  return value;
}

}  // namespace

AgeClassSchema AgeClassSchema::reference() {
  return parse("0-2,3-6,7-9,15-19,30-39,50-69", 50);
}

AgeClassSchema AgeClassSchema::parse(const std::string& classes, int k) {
  std::vector<AgeClass> out;
  std::stringstream ss(classes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               item.end());
    const auto dash = item.find('-');
    if (dash == std::string::npos || dash == 0) {
      throw SchemaError("bad age class label '" + item + "', expected low-high");
    }
    out.push_back({item, parse_year(item.substr(0, dash), item),
                   parse_year(item.substr(dash + 1), item)});
  }
  return AgeClassSchema(std::move(out), k);
}

AgeClassSchema::AgeClassSchema(std::vector<AgeClass> classes, int k)
    : classes_(std::move(classes)), k_(k) {
  if (k_ < 1) throw SchemaError("elements per class must be >= 1");
  if (classes_.size() < 2) throw SchemaError("need at least two age classes");
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& c = classes_[i];
    if (c.low_year < 0 || c.high_year < c.low_year) {
      throw SchemaError("age class '" + c.label + "' has an empty range");
    }
    if (i > 0 && c.low_year <= classes_[i - 1].high_year) {
      throw SchemaError("age classes must be disjoint and ascending at '" +
                        c.label + "'");
    }
  }
}

std::optional<int> AgeClassSchema::find(const std::string& label) const {
  for (int i = 0; i < n(); ++i) {
    if (classes_[i].label == label) return i;
  }
  return std::nullopt;
}

int AgeClassSchema::index_of(const std::string& label) const {
  if (auto i = find(label)) return *i;
  throw SchemaError("age class '" + label + "' is not in schema " + labels());
}

std::string AgeClassSchema::labels() const {
  std::string out;
  for (const auto& c : classes_) {
    if (!out.empty()) out += ',';
    out += c.label;
  }
  return out;
}

bool AgeClassSchema::operator==(const AgeClassSchema& other) const {
  if (k_ != other.k_ || classes_.size() != other.classes_.size()) return false;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].low_year != other.classes_[i].low_year ||
        classes_[i].high_year != other.classes_[i].high_year) {
      return false;
    }
  }
  return true;
}

AgeCode one_hot_block(int i, const AgeClassSchema& schema) {
  if (i < 0 || i >= schema.n()) {
    throw SchemaError("class index " + std::to_string(i) + " outside [0, " +
                      std::to_string(schema.n()) + ")");
  }
  AgeCode code;
  code.values.assign(schema.code_length(), 0.0);
  std::fill_n(code.values.begin() + schema.k() * i, schema.k(), 1.0);
  code.source_class = i;
  return code;
}

AgeCode sample_age_code(int i, const AgeClassSchema& schema, double sigma,
                        std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) {
    throw ArgumentError("age code noise stddev must be >= 0");
  }
  AgeCode code = one_hot_block(i, schema);
  if (sigma == 0.0) return code;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : code.values) v += noise(rng);
  return code;
}

LatentAgeVector interpolate_latent(const LatentAgeVector& a,
                                   const LatentAgeVector& b, double alpha) {
  if (a.values.size() != b.values.size()) {
    throw ShapeError("interpolate_latent: lengths " +
                     std::to_string(a.values.size()) + " and " +
                     std::to_string(b.values.size()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ArgumentError("interpolation weight must lie in [0, 1]");
  }
  LatentAgeVector out;
  out.values.resize(a.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (1.0 - alpha) * a.values[i] + alpha * b.values[i];
  }
  return out;
}

AnchorBlend target_age_to_anchor_blend(double age_years,
                                       const AgeClassSchema& schema) {
  const auto& classes = schema.classes();
  if (!std::isfinite(age_years) || age_years < 0.0) {
    throw ArgumentError("target age must be a non-negative number of years");
  }
  if (age_years > classes.back().high_year) {
    throw ArgumentError("target age " + std::to_string(age_years) +
                        " is beyond the last anchor " + classes.back().label);
  }
  if (age_years < classes.front().low_year) {
    throw ArgumentError("target age " + std::to_string(age_years) +
                        " is below the first anchor " + classes.front().label);
  }
  for (int i = 0; i < schema.n(); ++i) {
    if (classes[i].contains(age_years)) return {i, i, 0.0};
  }
  int below = 0;
  while (below + 1 < schema.n() && classes[below + 1].high_year < age_years) {
    ++below;
  }
  const double lo = classes[below].midpoint();
  const double hi = classes[below + 1].midpoint();
  const double alpha = std::clamp((age_years - lo) / (hi - lo), 0.0, 1.0);
  return {below, below + 1, alpha};
}

}  // namespace agesynth
