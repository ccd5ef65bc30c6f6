#include "agesynth/evalprobe.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "agesynth/errors.hpp"
#include "agesynth/image_io.hpp"

namespace agesynth {

namespace {

namespace fs = std::filesystem;

double l1_distance(const Tensor& a, const Tensor& b, int row) {
  const Shape s = a.shape();
  const std::size_t len = static_cast<std::size_t>(s.h) * s.w * s.c;
  const std::size_t base = row * len;
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += std::abs(a[base + i] - b[base + i]);
  return acc / len;
}

Var decode_rows(const Networks& gen, const Var& features,
                const LatentAgeVector& w) {
  std::vector<LatentAgeVector> rows(features.shape().n, w);
  return gen.decode(features, stack_latents(rows));
}

void check_batch(const Tensor& x, const Networks& gen, const char* op) {
  const Shape s = x.shape();
  const int r = gen.config().resolution;
  if (s.h != r || s.w != r || s.c != 3 || s.n < 1) {
    throw ShapeError(std::string(op) + ": expected [N, " + std::to_string(r) +
                     ", " + std::to_string(r) + ", 3], got " + s.str());
  }
}

}  // namespace

void ProbeReport::recompute_aggregates() {
  aggregates.clear();
  std::map<std::string, int> counts;
  for (const auto& sample : samples)
    for (const auto& [key, value] : sample.metrics) {
      aggregates["mean_" + key] += value;
      ++counts[key];
    }
  for (const auto& [key, n] : counts) aggregates["mean_" + key] /= n;
  if (probe == "latent_linearity" && aggregates.count("mean_adjacent_l1") &&
      aggregates["mean_adjacent_l1"] > 0) {
    aggregates["midpoint_to_adjacent_ratio"] =
        aggregates["mean_midpoint_l1"] / aggregates["mean_adjacent_l1"];
  }
}

nlohmann::json ProbeReport::to_json() const {
  nlohmann::json j;
  j["probe"] = probe;
  j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    j["samples"].push_back({{"name", s.name}, {"metrics", s.metrics}});
  }
  j["aggregates"] = aggregates;
  j["artifacts"] = artifacts;
  if (!note.empty()) j["note"] = note;
  return j;
}

void ProbeReport::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report '" + path + "'");
  out << to_json().dump(2) << '\n';
}

WeightSource parse_weight_source(const std::string& text) {
  if (text == "ema") return WeightSource::ema;
  if (text == "live") return WeightSource::live;
  throw ConfigError("weights must be 'ema' or 'live', got '" + text + "'");
}

const Networks& probe_generator(const LoadedModel& model, WeightSource source) {
  return source == WeightSource::ema ? model.ema : model.live;
}

LatentAgeVector anchor_latent(const Networks& gen, int cls) {
  ad::NoGradGuard no_grad;
  const Var z = stack_codes({one_hot_block(cls, gen.config().schema)});
  return latent_row(gen.map_age(z).value(), 0);
}

Tensor render_with_latent(const Networks& gen, const Tensor& x,
                          const LatentAgeVector& w) {
  check_batch(x, gen, "render_with_latent");
  ad::NoGradGuard no_grad;
  return decode_rows(gen, gen.identity_encode(Var(x)), w).value();
}

int predict_age_class(const Tensor& codes, int row,
                      const AgeClassSchema& schema) {
  const Shape s = codes.shape();
  if (s.h != 1 || s.w != 1 || s.c != schema.code_length() || row < 0 ||
      row >= s.n) {
    throw ShapeError("predict_age_class: codes " + s.str() +
                     " do not match the schema");
  }
  int best = 0;
  double best_mean = -INFINITY;
  for (int c = 0; c < schema.n(); ++c) {
    double acc = 0.0;
    for (int j = 0; j < schema.k(); ++j) {
      acc += codes[static_cast<std::size_t>(row) * s.c + c * schema.k() + j];
    }
    const double m = acc / schema.k();
    if (m > best_mean) {
      best_mean = m;
      best = c;
    }
  }
  return best;
}

double roundtrip_accuracy(const Tensor& codes, const std::vector<int>& targets,
                          const AgeClassSchema& schema) {
  if (static_cast<int>(targets.size()) != codes.shape().n || targets.empty()) {
    throw ShapeError("roundtrip_accuracy: one target per code row required");
  }
  int hits = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    hits += predict_age_class(codes, static_cast<int>(i), schema) == targets[i];
  }
  return static_cast<double>(hits) / targets.size();
}

double age_roundtrip_metric(const Tensor& x, const std::vector<int>& targets,
                            const Networks& gen, const Networks& encoder) {
  check_batch(x, gen, "age_roundtrip_metric");
  if (static_cast<int>(targets.size()) != x.shape().n) {
    throw ShapeError("age_roundtrip_metric: one target per image required");
  }
  const AgeClassSchema& schema = gen.config().schema;
  ad::NoGradGuard no_grad;
  std::vector<AgeCode> codes;
  for (int t : targets) codes.push_back(one_hot_block(t, schema));
  const Var y = gen.generate(Var(x), stack_codes(codes));
  return roundtrip_accuracy(encoder.age_encode(y).value(), targets, schema);
}

std::vector<double> identity_consistency(const Tensor& x,
                                         const std::vector<int>& targets,
                                         const Networks& gen) {
  check_batch(x, gen, "identity_consistency");
  if (static_cast<int>(targets.size()) != x.shape().n) {
    throw ShapeError("identity_consistency: one target per image required");
  }
  ad::NoGradGuard no_grad;
  std::vector<AgeCode> codes;
  for (int t : targets) codes.push_back(one_hot_block(t, gen.config().schema));
  const Var id_x = gen.identity_encode(Var(x));
  const Var y = gen.decode(id_x, gen.map_age(stack_codes(codes)));
  const Tensor id_y = gen.identity_encode(y).value();
  std::vector<double> out;
  for (int i = 0; i < x.shape().n; ++i) out.push_back(l1_distance(id_x.value(), id_y, i));
  return out;
}

ProbeReport latent_linearity_probe(const Tensor& x, const Networks& gen,
                                   const std::string& out_dir) {
  check_batch(x, gen, "latent_linearity_probe");
  const AgeClassSchema& schema = gen.config().schema;
  int idx[3];
  const char* labels[3] = {"0-2", "3-6", "7-9"};
  for (int i = 0; i < 3; ++i) {
    const auto found = schema.find(labels[i]);
    if (!found) {
      throw ConfigError(std::string("latent_linearity probe needs anchor '") +
                        labels[i] + "' in the schema (" + schema.labels() + ")");
    }
    idx[i] = *found;
  }
  const LatentAgeVector young = anchor_latent(gen, idx[0]);
  const LatentAgeVector middle = anchor_latent(gen, idx[1]);
  const LatentAgeVector old = anchor_latent(gen, idx[2]);
  const LatentAgeVector midpoint = interpolate_latent(young, old, 0.5);

  ad::NoGradGuard no_grad;
  const Var features = gen.identity_encode(Var(x));
  const Tensor out_young = decode_rows(gen, features, young).value();
  const Tensor out_middle = decode_rows(gen, features, middle).value();
  const Tensor out_mid = decode_rows(gen, features, midpoint).value();
  const Tensor out_old = decode_rows(gen, features, old).value();

  ProbeReport report;
  report.probe = "latent_linearity";
  report.note =
      "desk-scale proxy: the midpoint latent passes when its distance to the "
      "trained anchor is below twice the adjacent-anchor distance";
  for (int i = 0; i < x.shape().n; ++i) {
    ProbeSample s;
    s.name = "input_" + std::to_string(i);
    s.metrics["midpoint_l1"] = l1_distance(out_middle, out_mid, i);
    s.metrics["adjacent_l1"] = 0.5 * (l1_distance(out_middle, out_young, i) +
                                      l1_distance(out_middle, out_old, i));
    report.samples.push_back(std::move(s));
  }
  report.recompute_aggregates();

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::vector<Tensor> tiles;
    for (int i = 0; i < x.shape().n; ++i) {
      for (const Tensor* t : {&x, &out_young, &out_middle, &out_mid, &out_old}) {
        tiles.push_back(kernels::batch_rows(*t, i, 1));
      }
    }
    const std::string path = (fs::path(out_dir) / "linearity_grid.png").string();
    write_png(path, tile_grid(tiles, 5), 0);
    report.artifacts.push_back(path);
  }
  return report;
}

std::vector<Tensor> lifespan_sweep(const Tensor& x, const Networks& gen,
                                   int frames_per_gap) {
  check_batch(x, gen, "lifespan_sweep");
  if (x.shape().n != 1) throw ShapeError("lifespan_sweep takes one image");
  if (frames_per_gap < 0) throw ArgumentError("frames_per_gap must be >= 0");
  const int n = gen.config().schema.n();
  std::vector<LatentAgeVector> anchors;
  for (int i = 0; i < n; ++i) anchors.push_back(anchor_latent(gen, i));

  ad::NoGradGuard no_grad;
  const Var features = gen.identity_encode(Var(x));
  std::vector<Tensor> frames;
  frames.reserve(n + (n - 1) * frames_per_gap);
  for (int i = 0; i < n; ++i) {
    frames.push_back(decode_rows(gen, features, anchors[i]).value());
    if (i + 1 == n) break;
    for (int j = 1; j <= frames_per_gap; ++j) {
      const double alpha = static_cast<double>(j) / (frames_per_gap + 1);
      const LatentAgeVector w =
          interpolate_latent(anchors[i], anchors[i + 1], alpha);
      frames.push_back(decode_rows(gen, features, w).value());
    }
  }
  return frames;
}

std::vector<std::string> write_frames(const std::vector<Tensor>& frames,
                                      const std::string& dir) {
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << i << ".png";
    paths.push_back((fs::path(dir) / name.str()).string());
    write_png(paths.back(), frames[i], 0);
  }
  return paths;
}

std::vector<AblationConfig> ablation_configs() {
  const AgeClassSchema ref = AgeClassSchema::reference();
  return {
      {"two_anchor", AgeClassSchema::parse("0-2,50-69", 50), 0.2},
      {"three_anchor", AgeClassSchema::parse("0-2,15-19,50-69", 50), 0.2},
      {"k50_no_noise", AgeClassSchema(ref.classes(), 50), 0.0},
      {"k1_no_noise", AgeClassSchema(ref.classes(), 1), 0.0},
  };
}

const AblationConfig& find_ablation(const std::string& name) {
  static const std::vector<AblationConfig> all = ablation_configs();
  for (const auto& a : all) {
    if (a.name == name) return a;
  }
  throw ConfigError("unknown ablation '" + name +
                    "' (two_anchor, three_anchor, k50_no_noise, k1_no_noise)");
}

std::pair<NetworkConfig, TrainConfig> apply_ablation(
    const AblationConfig& ablation, const NetworkConfig& net,
    const TrainConfig& train) {
  std::pair<NetworkConfig, TrainConfig> out{net, train};
  if (ablation.schema) out.first.schema = *ablation.schema;
  if (ablation.age_noise) out.second.age_noise = *ablation.age_noise;
  return out;
}

}  // namespace agesynth
