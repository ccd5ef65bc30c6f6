#pragma once

#include <functional>
#include <string>

#include "agesynth/config.hpp"
#include "agesynth/trainer.hpp"

namespace agesynth {

/// File names inside a run directory.
inline constexpr const char* kConfigEcho = "config.txt";
inline constexpr const char* kTrainLog = "train_log.jsonl";
inline constexpr const char* kLatestCheckpoint = "checkpoint_latest.ckpt";
inline constexpr const char* kFinalCheckpoint = "checkpoint_final.ckpt";

struct RunSummary {
  long first_step = 0;  // steps already done when the run started
  long last_step = 0;
  int steps_per_epoch = 0;
  std::string run_dir;
  std::string final_checkpoint;
};

using StepObserver = std::function<void(const StepReport&, const TrainState&)>;

/// Trains until max_steps (or epochs * steps_per_epoch) steps exist. Writes
/// the config echo, one JSON line per logged step, EMA sample grids and
/// periodic checkpoints under config.run_dir(). With `resume`, continues from
/// the latest checkpoint when present and appends to the log. A run with no
/// steps still writes its checkpoints. Minibatches and age codes both draw
/// from the state's generator, so a resumed run replays the unbroken one.
RunSummary run_training(const RunConfig& config, const ClassDataset& data,
                        bool resume = false, const StepObserver& observer = {});

/// One row per class of `data`: the class's first image, then its EMA
/// renderings at every anchor.
Tensor sample_grid(const Networks& ema, const ClassDataset& data);

}  // namespace agesynth
