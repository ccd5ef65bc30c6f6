#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "agesynth/checkpoint.hpp"
#include "agesynth/losses.hpp"
#include "agesynth/networks.hpp"

namespace agesynth {

enum class Gender { male, female };
const char* to_string(Gender g);
Gender parse_gender(const std::string& text);

struct TrainConfig {
  int batch_size = 12;
  int epochs = 400;
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Epoch milestone -> multiplicative factor, applied cumulatively.
  std::map<int, double> lr_decay{{50, 0.5}, {100, 0.5}};
  double mapping_lr_factor = 0.01;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  Gender gender = Gender::male;
  double age_noise = 0.2;
  /// When set, the image drawn from the target class is a second real
  /// example for D (slot t) besides x_s (slot s).
  bool both_reals = true;
  /// Iterations per epoch; 0 derives it from the dataset.
  int steps_per_epoch = 0;
  /// Hard stop; 0 runs epochs * steps_per_epoch iterations.
  long max_steps = 0;
  int log_every = 1;
  int sample_every = 500;
  int checkpoint_every = 1000;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LearningRates {
  double main = 0.0;
  double mapping = 0.0;
};

LearningRates lr_at(int epoch, const TrainConfig& config);

/// s uniform over classes, t uniform over the others.
std::pair<int, int> sample_class_pair(const AgeClassSchema& schema,
                                      std::mt19937_64& rng);

/// ema <- decay * ema + (1 - decay) * live, matched by name.
void update_ema(const nn::NamedParams& ema, const nn::NamedParams& live,
                double decay);

/// Adaptive-moment optimizer over a fixed, named parameter list. Each
/// parameter carries its own learning-rate multiplier.
class Adam {
public:
  Adam() = default;
  Adam(nn::NamedParams params, std::vector<double> lr_scale, double beta1,
       double beta2, double epsilon);

  const nn::NamedParams& params() const noexcept { return params_; }
  /// One update given gradients aligned with params().
  void step(const std::vector<Var>& grads, double lr);
  long steps() const noexcept { return t_; }

  void save(Archive& archive, const std::string& prefix) const;
  /// Throws LoadError if any moment is missing or misshapen.
  void load(const Archive& archive, const std::string& prefix);

private:
  nn::NamedParams params_;
  std::vector<double> lr_scale_;
  std::vector<Tensor> m_, v_;
  double beta1_ = 0.0, beta2_ = 0.999, epsilon_ = 1e-8;
  long t_ = 0;
};

/// Images grouped by anchor class, each [1, R, R, 3] in [-1, 1]. Entries
/// are either held in memory or loaded from PNG on every access.
class ClassDataset {
public:
  explicit ClassDataset(int num_classes);

  void add(int cls, Tensor image);
  void add_path(int cls, std::string path);

  int num_classes() const noexcept { return static_cast<int>(classes_.size()); }
  std::size_t size(int cls) const;
  std::size_t min_class_size() const;
  Tensor image(int cls, std::size_t index) const;

private:
  struct Entry {
    std::optional<Tensor> pixels;
    std::string path;
  };
  std::vector<std::vector<Entry>> classes_;
};

/// Everything that evolves during training. The EMA copy shadows E_id, M
/// and F; its other networks are unused.
struct TrainState {
  TrainState(const NetworkConfig& net_config, const TrainConfig& config);

  Networks nets;
  Networks ema;
  Adam opt_g;
  Adam opt_d;
  long step = 0;
  std::mt19937_64 rng;
};

struct StepReport {
  long step = 0;
  int epoch = 0;
  LearningRates lr;
  std::vector<int> s, t;
  double d_real = 0, d_fake = 0, r1 = 0, d_total = 0;
  double g_adv = 0, rec = 0, cyc = 0, id = 0, age = 0, g_total = 0;

  bool all_finite() const;
  /// One line of the structured training log.
  std::string to_json() const;
};

/// A sampled minibatch: one image of class s[i] and one of class t[i] per row.
struct TrainBatch {
  Tensor x_s, x_t;
  std::vector<int> s, t;
};

TrainBatch sample_batch(const ClassDataset& data, const AgeClassSchema& schema,
                        int batch_size, std::mt19937_64& rng);

/// One D update, one G update (E_id, M, F and E_age together) and one EMA
/// update. Age codes are drawn from state.rng. Throws NumericError, with the
/// partial report in the message, if any loss is non-finite.
StepReport train_step(TrainState& state, const TrainBatch& batch, int epoch,
                      const TrainConfig& config, const LossWeights& weights);

/// Iterations per epoch: the smallest class size times n, over the batch.
int derive_steps_per_epoch(const ClassDataset& data, int batch_size);

void save_checkpoint(const std::string& path, const TrainState& state,
                     const TrainConfig& config);
/// Restores into `state`, which must already have the checkpoint's network
/// configuration. Nothing is modified if loading fails.
void load_checkpoint(const std::string& path, TrainState& state);

/// Network configuration stored in a checkpoint.
NetworkConfig checkpoint_network_config(const Archive& archive);
/// Live networks plus, when present, EMA generator weights.
struct LoadedModel {
  Networks live;
  Networks ema;
  long step = 0;
  /// Model the checkpoint was trained as, when recorded.
  std::optional<Gender> gender;
};
LoadedModel load_model(const std::string& path);

nlohmann::json network_config_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& j);

}  // namespace agesynth
