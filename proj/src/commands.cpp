#include "agesynth/commands.hpp"

#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "agesynth/errors.hpp"
#include "agesynth/image_io.hpp"

namespace agesynth {

namespace {

namespace fs = std::filesystem;

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is required");
  if (!fs::is_regular_file(path)) {
    throw DataError(std::string(what) + " '" + path + "' does not exist");
  }
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) {
    throw DataError(std::string(what) + " '" + path + "' is not a directory");
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor resample_square(const Tensor& image, int resolution) {
  const Shape s = image.shape();
  if (s.h == resolution && s.w == resolution) return image;
  if (s.h != s.w) {
    throw DataError("input must be square, got " + std::to_string(s.w) + "x" +
                    std::to_string(s.h));
  }
  return crop_and_resize(image, full_frame_box(s.w), resolution);
}

LoadedModel load_checked(const std::string& checkpoint, const RunConfig& config,
                         bool check_gender) {
  require_file(checkpoint, "checkpoint");
  LoadedModel model = load_model(checkpoint);
  if (check_gender && model.gender && *model.gender != config.train.gender) {
    throw ConfigError(std::string("checkpoint holds the ") +
                      to_string(*model.gender) + " model but --gender is " +
                      to_string(config.train.gender));
  }
  return model;
}

}  // namespace

Tensor load_network_input(const std::string& path, int resolution) {
  require_file(path, "input image");
  return resample_square(read_png(path), resolution);
}

PrepareResult cmd_prepare_data(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  const DataConfig& dc = config.data;
  require_file(dc.labels, "labels");
  if (!dc.images_dir.empty()) require_dir(dc.images_dir, "images directory");
  if (!dc.masks_dir.empty()) require_dir(dc.masks_dir, "masks directory");
  const SemanticPalette palette =
      dc.palette.empty() ? face_parsing_palette() : read_palette(dc.palette);

  fs::create_directories(out_dir);
  write_config_echo(config, (fs::path(out_dir) / "config.txt").string());

  const std::vector<DatasetRecord> records = ends_with(dc.labels, ".csv")
                                                 ? import_ffhq_aging_csv(dc.labels)
                                                 : read_label_file(dc.labels);
  PrepareResult result;
  result.manifests = build_manifest(records, config.network.schema,
                                    dc.split_boundary, config.prune);

  if (!dc.images_dir.empty()) {
    std::unordered_map<int, const DatasetRecord*> by_id;
    for (const auto& r : records) by_id[r.image_id] = &r;
    fs::create_directories(fs::path(out_dir) / "images");
    const CropOptions crop{dc.ramp_fraction};
    for (Manifest* split : {&result.manifests.train, &result.manifests.test}) {
      for (ManifestEntry& e : *split) {
        const DatasetRecord& r = *by_id.at(e.image_id);
        const std::string name = std::to_string(e.image_id) + ".png";
        const std::string src = r.image_path.empty()
                                    ? (fs::path(dc.images_dir) / name).string()
                                    : r.image_path;
        Tensor image = read_png(src);
        std::string mask = r.mask_path;
        if (mask.empty() && !dc.masks_dir.empty()) {
          mask = (fs::path(dc.masks_dir) / name).string();
        }
        if (!mask.empty()) {
          image = mask_background(image, read_label_png(mask), palette);
        }
        const Shape s = image.shape();
        AlignmentBox box;
        if (r.landmarks) {
          box = compute_alignment_box(*r.landmarks);
        } else if (s.h == s.w) {
          box = full_frame_box(s.w);
        } else {
          throw GeometryError("image " + src + " has no landmarks and is not square");
        }
        const std::string rel = "images/" + name;
        write_png((fs::path(out_dir) / rel).string(),
                  crop_and_resize(image, box, config.network.resolution, crop), 0);
        e.image_path = rel;
        e.mask_path = mask;
        ++result.images_written;
      }
    }
  }

  result.train_manifest = (fs::path(out_dir) / "train.tsv").string();
  result.test_manifest = (fs::path(out_dir) / "test.tsv").string();
  write_manifest(result.train_manifest, result.manifests.train);
  write_manifest(result.test_manifest, result.manifests.test);

  const ManifestSet& m = result.manifests;
  nlohmann::json report{{"total", m.total},
                        {"kept", m.kept},
                        {"pruned", m.pruned},
                        {"reasons", m.reason_counts},
                        {"images_written", result.images_written}};
  for (const auto* counts : {&m.train_counts, &m.test_counts}) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& [key, n] : *counts) table[key.first][key.second] = n;
    report[counts == &m.train_counts ? "train_counts" : "test_counts"] = table;
  }
  result.report = (fs::path(out_dir) / "prepare_report.json").string();
  std::ofstream(result.report) << report.dump(2) << '\n';
  std::ofstream((fs::path(out_dir) / "counts.txt").string())
      << m.count_table(config.network.schema);
  return result;
}

RunSummary cmd_train(const RunConfig& config, bool resume) {
  config.validate();
  require_file(config.data.manifest, "training manifest");
  const ClassDataset data = dataset_from_manifest(
      config.data.manifest, config.network.schema, config.train.gender);
  return run_training(config, data, resume);
}

TransformResult cmd_transform(const RunConfig& config, const std::string& checkpoint,
                              const std::string& image_path,
                              const TransformTarget& target,
                              const std::string& out_path) {
  if (target.class_label.has_value() == target.age_years.has_value()) {
    throw ConfigError("transform needs exactly one of a class label or an age");
  }
  if (out_path.empty()) throw ConfigError("output path is required");
  require_file(image_path, "input image");
  const LoadedModel model = load_checked(checkpoint, config, true);
  const Networks& gen = probe_generator(model, parse_weight_source(config.probe.weights));
  const AgeClassSchema& schema = gen.config().schema;

  TransformResult result;
  if (target.class_label) {
    const int t = schema.index_of(*target.class_label);
    result.blend = {t, t, 0.0};
  } else {
    result.blend = target_age_to_anchor_blend(*target.age_years, schema);
  }

  const Tensor input = read_png(image_path);
  const Shape in = input.shape();
  const Tensor x = resample_square(input, gen.config().resolution);
  const LatentAgeVector w =
      interpolate_latent(anchor_latent(gen, result.blend.t),
                         anchor_latent(gen, result.blend.t_next), result.blend.alpha);
  Tensor y = render_with_latent(gen, x, w);
  if (in.h != y.shape().h) y = crop_and_resize(y, full_frame_box(y.shape().w), in.h);

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out_path, y, 0);
  write_config_echo(config, (out.parent_path() / "transform_config.txt").string());
  result.out_path = out_path;
  return result;
}

std::vector<std::string> cmd_lifespan(const RunConfig& config,
                                      const std::string& checkpoint,
                                      const std::string& image_path,
                                      const std::string& out_dir) {
  config.validate();
  require_file(image_path, "input image");
  const LoadedModel model = load_checked(checkpoint, config, false);
  const Networks& gen = probe_generator(model, parse_weight_source(config.probe.weights));
  const Tensor x = load_network_input(image_path, gen.config().resolution);
  fs::create_directories(out_dir);
  write_config_echo(config, (fs::path(out_dir) / "config.txt").string());
  return write_frames(lifespan_sweep(x, gen, config.probe.frames_per_gap), out_dir);
}

ProbeReport cmd_probe(const RunConfig& config, const std::string& checkpoint,
                      const std::string& probe,
                      const std::vector<std::string>& inputs,
                      const std::string& out_dir) {
  config.validate();
  if (out_dir.empty()) throw ConfigError("probe output directory is required");
  ProbeReport report;
  if (probe == "ablations") {
    fs::create_directories(out_dir);
    write_config_echo(config, (fs::path(out_dir) / "config.txt").string());
    report.probe = probe;
    for (const auto& a : ablation_configs()) {
      RunConfig variant = config;
      std::tie(variant.network, variant.train) =
          apply_ablation(a, config.network, config.train);
      variant.run_name = config.run_name + "_" + a.name;
      const std::string path = (fs::path(out_dir) / (a.name + ".txt")).string();
      write_config_echo(variant, path);
      report.artifacts.push_back(path);
      report.samples.push_back(
          {a.name,
           {{"classes", static_cast<double>(variant.network.schema.n())},
            {"k", static_cast<double>(variant.network.schema.k())},
            {"age_noise", variant.train.age_noise}}});
    }
    report.recompute_aggregates();
    report.write((fs::path(out_dir) / "ablations_report.json").string());
    return report;
  }

  static const std::vector<std::string> known{"latent_linearity", "roundtrip",
                                              "identity", "lifespan"};
  if (std::find(known.begin(), known.end(), probe) == known.end()) {
    throw ConfigError("unknown probe '" + probe +
                      "' (latent_linearity, roundtrip, identity, lifespan, ablations)");
  }
  if (inputs.empty()) throw ConfigError("probe '" + probe + "' needs input images");
  for (const auto& in : inputs) require_file(in, "input image");
  const LoadedModel model = load_checked(checkpoint, config, false);
  const Networks& gen = probe_generator(model, parse_weight_source(config.probe.weights));
  const int res = gen.config().resolution;
  const int n = gen.config().schema.n();
  std::vector<Tensor> rows;
  for (const auto& in : inputs) rows.push_back(load_network_input(in, res));
  const Tensor x = kernels::stack_batch(rows);

  fs::create_directories(out_dir);
  write_config_echo(config, (fs::path(out_dir) / "config.txt").string());
  if (probe == "latent_linearity") {
    report = latent_linearity_probe(x, gen, out_dir);
  } else {
    report.probe = probe;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Tensor xi = kernels::batch_rows(x, static_cast<int>(i), 1);
      ProbeSample s{inputs[i], {}};
      if (probe == "lifespan") {
        const auto dir = fs::path(out_dir) / ("input_" + std::to_string(i));
        const auto paths =
            write_frames(lifespan_sweep(xi, gen, config.probe.frames_per_gap), dir.string());
        s.metrics["frames"] = static_cast<double>(paths.size());
        report.artifacts.push_back(dir.string());
      } else {
        std::vector<int> targets(n);
        for (int t = 0; t < n; ++t) targets[t] = t;
        std::vector<Tensor> copies(n, xi);
        const Tensor batch = kernels::stack_batch(copies);
        if (probe == "roundtrip") {
          s.metrics["accuracy"] = age_roundtrip_metric(batch, targets, gen, model.live);
        } else {
          const auto d = identity_consistency(batch, targets, gen);
          double acc = 0.0;
          for (double v : d) acc += v;
          s.metrics["identity_l1"] = acc / d.size();
        }
      }
      report.samples.push_back(std::move(s));
    }
    report.recompute_aggregates();
  }
  report.write((fs::path(out_dir) / (probe + "_report.json")).string());
  return report;
}

std::string cmd_make_synthetic(const RunConfig& config, const SyntheticSpec& spec,
                               const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("output directory is required");
  fs::create_directories(out_dir);
  write_config_echo(config, (fs::path(out_dir) / "config.txt").string());
  return write_synthetic_dataset(spec, config.network.schema, out_dir);
}

}  // namespace agesynth
