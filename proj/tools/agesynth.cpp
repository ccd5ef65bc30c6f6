// Command-line entry point. Exit codes: 0 success, 2 configuration error,
// 3 data error (missing or malformed inputs, manifests, checkpoints,
// geometry), 4 numeric abort. Failures print one JSON line on stderr.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "agesynth/commands.hpp"
#include "agesynth/errors.hpp"
#include "json.hpp"

namespace {

using namespace agesynth;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::schema:
    case ErrorKind::argument:
      return 2;
    case ErrorKind::numeric:
      return 4;
    default:
      return 3;
  }
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}, {"exit", code}}.dump()
            << std::endl;
  return code;
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string gender;
  std::string weights;
};

void add_common(CLI::App* cmd, Common& c, bool gender_required) {
  cmd->add_option("-c,--config", c.config_path, "Run configuration file");
  cmd->add_option("--set", c.overrides, "Override a config key (key=value)");
  auto* g = cmd->add_option("--gender", c.gender, "Model to use: male or female");
  if (gender_required) g->required();
}

RunConfig resolve(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  apply_env_overrides(config);
  for (const auto& o : c.overrides) apply_override(config, o);
  if (!c.gender.empty()) config.set("train.gender", c.gender);
  if (!c.weights.empty()) config.set("probe.weights", c.weights);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age transformation model: data preparation, training and probes"};
  app.require_subcommand(1);

  Common prep_c;
  std::string prep_labels, prep_images, prep_masks, prep_out;
  auto* prep = app.add_subcommand("prepare-data", "Prune, split, mask and align a labelled dataset");
  add_common(prep, prep_c, false);
  prep->add_option("--labels", prep_labels, "Label file or FFHQ-Aging CSV");
  prep->add_option("--images", prep_images, "Directory of <id>.png images");
  prep->add_option("--masks", prep_masks, "Directory of <id>.png label maps");
  prep->add_option("--out", prep_out, "Output directory")->required();

  Common train_c;
  std::string train_manifest;
  bool train_resume = false;
  auto* train = app.add_subcommand("train", "Train one gender model");
  add_common(train, train_c, true);
  train->add_option("--manifest", train_manifest, "Training manifest");
  train->add_flag("--resume", train_resume, "Continue from the run's latest checkpoint");

  Common tr_c;
  std::string tr_ckpt, tr_image, tr_out, tr_target;
  double tr_age = 0;
  auto* transform = app.add_subcommand("transform", "Render one image at a target age");
  add_common(transform, tr_c, true);
  transform->add_option("--checkpoint", tr_ckpt)->required();
  transform->add_option("--image", tr_image)->required();
  transform->add_option("--out", tr_out)->required();
  transform->add_option("--weights", tr_c.weights, "ema or live");
  auto* opt_target = transform->add_option("--target", tr_target, "Anchor class label");
  auto* opt_age = transform->add_option("--age-years", tr_age, "Continuous target age");
  opt_target->excludes(opt_age);

  Common ls_c;
  std::string ls_ckpt, ls_image, ls_out;
  int ls_frames = -1;
  auto* lifespan = app.add_subcommand("lifespan", "Render a continuous lifespan frame sequence");
  add_common(lifespan, ls_c, false);
  lifespan->add_option("--checkpoint", ls_ckpt)->required();
  lifespan->add_option("--image", ls_image)->required();
  lifespan->add_option("--out-dir", ls_out)->required();
  lifespan->add_option("--frames-per-gap", ls_frames);
  lifespan->add_option("--weights", ls_c.weights, "ema or live");

  Common pr_c;
  std::string pr_ckpt, pr_name, pr_out;
  std::vector<std::string> pr_inputs;
  auto* probe = app.add_subcommand("probe", "Run an analysis probe");
  add_common(probe, pr_c, false);
  probe->add_option("--checkpoint", pr_ckpt);
  probe->add_option("--probe", pr_name,
                    "latent_linearity, roundtrip, identity, lifespan or ablations")
      ->required();
  probe->add_option("--inputs", pr_inputs, "Input images");
  probe->add_option("--out-dir", pr_out)->required();
  probe->add_option("--weights", pr_c.weights, "ema or live");

  Common syn_c;
  SyntheticSpec syn;
  std::string syn_out;
  auto* synth = app.add_subcommand("make-synthetic", "Write the procedural disk dataset");
  add_common(synth, syn_c, false);
  synth->add_option("--out-dir", syn_out)->required();
  synth->add_option("--resolution", syn.resolution);
  synth->add_option("--per-class", syn.per_class);
  synth->add_option("--seed", syn.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), 2);
  }

  try {
    nlohmann::json out;
    if (*prep) {
      if (!prep_labels.empty()) prep_c.overrides.push_back("data.labels=" + prep_labels);
      if (!prep_images.empty()) prep_c.overrides.push_back("data.images_dir=" + prep_images);
      if (!prep_masks.empty()) prep_c.overrides.push_back("data.masks_dir=" + prep_masks);
      const auto r = cmd_prepare_data(resolve(prep_c), prep_out);
      out = {{"train_manifest", r.train_manifest}, {"test_manifest", r.test_manifest},
             {"report", r.report}, {"kept", r.manifests.kept},
             {"pruned", r.manifests.pruned}, {"images_written", r.images_written}};
    } else if (*train) {
      if (!train_manifest.empty()) train_c.overrides.push_back("data.manifest=" + train_manifest);
      const auto s = cmd_train(resolve(train_c), train_resume);
      out = {{"run_dir", s.run_dir}, {"first_step", s.first_step},
             {"last_step", s.last_step}, {"checkpoint", s.final_checkpoint}};
    } else if (*transform) {
      TransformTarget target;
      if (*opt_target) target.class_label = tr_target;
      if (*opt_age) target.age_years = tr_age;
      const auto r = cmd_transform(resolve(tr_c), tr_ckpt, tr_image, target, tr_out);
      out = {{"out", r.out_path}, {"t", r.blend.t}, {"t_next", r.blend.t_next},
             {"alpha", r.blend.alpha}};
    } else if (*lifespan) {
      if (ls_frames >= 0) ls_c.overrides.push_back("probe.frames_per_gap=" + std::to_string(ls_frames));
      const auto frames = cmd_lifespan(resolve(ls_c), ls_ckpt, ls_image, ls_out);
      out = {{"frames", frames.size()}, {"out_dir", ls_out}};
    } else if (*probe) {
      const auto r = cmd_probe(resolve(pr_c), pr_ckpt, pr_name, pr_inputs, pr_out);
      out = r.to_json();
    } else if (*synth) {
      const RunConfig config = resolve(syn_c);
      syn.classes = config.network.schema.n();
      out = {{"manifest", cmd_make_synthetic(config, syn, syn_out)}};
    }
    std::cout << out.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return fail("data", e.what(), 3);
  }
}
