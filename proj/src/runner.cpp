#include "agesynth/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "agesynth/errors.hpp"
#include "agesynth/evalprobe.hpp"
#include "agesynth/image_io.hpp"

namespace agesynth {

namespace fs = std::filesystem;

Tensor sample_grid(const Networks& ema, const ClassDataset& data) {
  const int n = ema.config().schema.n();
  std::vector<LatentAgeVector> anchors;
  for (int t = 0; t < n; ++t) anchors.push_back(anchor_latent(ema, t));
  std::vector<Tensor> tiles;
  for (int s = 0; s < data.num_classes(); ++s) {
    const Tensor x = data.image(s, 0);
    tiles.push_back(x);
    for (const auto& w : anchors) tiles.push_back(render_with_latent(ema, x, w));
  }
  return tile_grid(tiles, n + 1);
}

RunSummary run_training(const RunConfig& config, const ClassDataset& data,
                        bool resume, const StepObserver& observer) {
  config.validate();
  if (data.num_classes() != config.network.schema.n()) {
    throw ConfigError("dataset has " + std::to_string(data.num_classes()) +
                      " classes but the schema has " +
                      std::to_string(config.network.schema.n()));
  }
  if (data.min_class_size() == 0) {
    throw DataError("every anchor class needs at least one training image");
  }
  RunSummary summary;
  summary.run_dir = config.run_dir();
  fs::create_directories(fs::path(summary.run_dir) / "samples");
  write_config_echo(config, (fs::path(summary.run_dir) / kConfigEcho).string());

  const TrainConfig& tc = config.train;
  TrainState state(config.network, tc);
  const std::string latest = (fs::path(summary.run_dir) / kLatestCheckpoint).string();
  const bool resuming = resume && fs::exists(latest);
  if (resuming) load_checkpoint(latest, state);
  summary.first_step = state.step;

  summary.steps_per_epoch = tc.steps_per_epoch > 0
                                ? tc.steps_per_epoch
                                : derive_steps_per_epoch(data, tc.batch_size);
  const long total = tc.max_steps > 0
                         ? tc.max_steps
                         : static_cast<long>(tc.epochs) * summary.steps_per_epoch;

  std::ofstream log((fs::path(summary.run_dir) / kTrainLog).string(),
                    resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open training log in " + summary.run_dir);

  auto checkpoint = [&](const std::string& name) {
    const std::string path = (fs::path(summary.run_dir) / name).string();
    save_checkpoint(path, state, tc);
    return path;
  };
  if (!resuming) checkpoint(kLatestCheckpoint);

  while (state.step < total) {
    const int epoch = static_cast<int>(state.step / summary.steps_per_epoch);
    const TrainBatch batch =
        sample_batch(data, config.network.schema, tc.batch_size, state.rng);
    const StepReport report = train_step(state, batch, epoch, tc, config.loss);
    if (report.step % tc.log_every == 0 || report.step == 1) {
      log << report.to_json() << '\n';
      log.flush();
    }
    if (observer) observer(report, state);
    if (tc.sample_every > 0 && report.step % tc.sample_every == 0) {
      std::ostringstream name;
      name << "step_" << std::setw(7) << std::setfill('0') << report.step << ".png";
      write_png((fs::path(summary.run_dir) / "samples" / name.str()).string(),
                sample_grid(state.ema, data), 0);
    }
    if (tc.checkpoint_every > 0 && report.step % tc.checkpoint_every == 0) {
      checkpoint(kLatestCheckpoint);
    }
  }
  checkpoint(kLatestCheckpoint);
  summary.final_checkpoint = checkpoint(kFinalCheckpoint);
  summary.last_step = state.step;
  return summary;
}

}  // namespace agesynth
