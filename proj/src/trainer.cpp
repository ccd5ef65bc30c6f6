#include "agesynth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "agesynth/errors.hpp"
#include "agesynth/image_io.hpp"

namespace agesynth {

namespace {

std::vector<Var> gradients(const Var& loss, const nn::NamedParams& params) {
  std::vector<Var> inputs;
  inputs.reserve(params.size());
  for (const auto& [name, v] : params) inputs.push_back(v);
  return ad::grad(loss, inputs);
}

nn::NamedParams concat_params(nn::NamedParams a, const nn::NamedParams& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<double> generator_lr_scale(const Networks& nets,
                                       const nn::NamedParams& params,
                                       double mapping_factor) {
  std::vector<double> scale;
  scale.reserve(params.size());
  const auto mapping = nets.mapping_params();
  for (const auto& [name, v] : params) {
    const bool is_mapping =
        std::any_of(mapping.begin(), mapping.end(),
                    [&](const auto& m) { return m.first == name; });
    scale.push_back(is_mapping ? mapping_factor : 1.0);
  }
  return scale;
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw LoadError("corrupt rng state in checkpoint");
  return rng;
}

void save_params(Archive& a, const std::string& prefix,
                 const nn::NamedParams& params) {
  for (const auto& [name, v] : params) a.arrays[prefix + name] = v.value();
}

// Validates every array before returning the assignments, so a failure
// leaves the destination untouched.
std::vector<std::pair<Var, const Tensor*>> plan_params(
    const Archive& a, const std::string& prefix, const nn::NamedParams& params) {
  std::vector<std::pair<Var, const Tensor*>> plan;
  for (const auto& [name, v] : params) {
    const Tensor& t = a.array(prefix + name);
    if (t.shape() != v.shape()) {
      throw LoadError("checkpoint array '" + prefix + name + "' has shape " +
                      t.shape().str() + ", expected " + v.shape().str());
    }
    plan.emplace_back(v, &t);
  }
  return plan;
}

}  // namespace

const char* to_string(Gender g) {
  return g == Gender::male ? "male" : "female";
}

Gender parse_gender(const std::string& text) {
  if (text == "male") return Gender::male;
  if (text == "female") return Gender::female;
  throw ConfigError("gender must be 'male' or 'female', got '" + text + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (!(lr > 0)) throw ConfigError("train.lr must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw ConfigError("train.adam_epsilon must be > 0");
  if (!(mapping_lr_factor > 0)) {
    throw ConfigError("train.mapping_lr_factor must be > 0");
  }
  if (ema_decay < 0 || ema_decay >= 1) {
    throw ConfigError("train.ema_decay must lie in [0, 1)");
  }
  if (age_noise < 0) throw ConfigError("train.age_noise must be >= 0");
  for (const auto& [epoch, factor] : lr_decay) {
    if (epoch < 0 || !(factor > 0)) {
      throw ConfigError("train.lr_decay entries need epoch >= 0, factor > 0");
    }
  }
  if (steps_per_epoch < 0 || max_steps < 0) {
    throw ConfigError("train.steps_per_epoch and train.max_steps must be >= 0");
  }
  if (log_every < 1 || sample_every < 0 || checkpoint_every < 0) {
    throw ConfigError("train.log_every must be >= 1, sample/checkpoint >= 0");
  }
}

LearningRates lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw ArgumentError("epoch must be >= 0");
  double lr = config.lr;
  for (const auto& [milestone, factor] : config.lr_decay) {
    if (epoch >= milestone) lr *= factor;
  }
  return {lr, lr * config.mapping_lr_factor};
}

std::pair<int, int> sample_class_pair(const AgeClassSchema& schema,
                                      std::mt19937_64& rng) {
  const int n = schema.n();
  if (n < 2) throw ConfigError("class pairs need at least two classes");
  const int s = std::uniform_int_distribution<int>(0, n - 1)(rng);
  int t = std::uniform_int_distribution<int>(0, n - 2)(rng);
  if (t >= s) ++t;
  return {s, t};
}

void update_ema(const nn::NamedParams& ema, const nn::NamedParams& live,
                double decay) {
  if (ema.size() != live.size()) {
    throw ShapeError("update_ema: parameter lists differ in length");
  }
  for (std::size_t i = 0; i < ema.size(); ++i) {
    if (ema[i].first != live[i].first ||
        ema[i].second.shape() != live[i].second.shape()) {
      throw ShapeError("update_ema: mismatch at '" + live[i].first + "'");
    }
    auto dst = ema[i].second.mutable_value().data();
    const auto src = live[i].second.value().data();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] = decay * dst[j] + (1.0 - decay) * src[j];
    }
  }
}

// -- Adam --------------------------------------------------------------------

Adam::Adam(nn::NamedParams params, std::vector<double> lr_scale, double beta1,
           double beta2, double epsilon)
    : params_(std::move(params)),
      lr_scale_(std::move(lr_scale)),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {
  if (lr_scale_.size() != params_.size()) {
    throw ArgumentError("Adam: one learning-rate scale per parameter");
  }
  for (const auto& [name, v] : params_) {
    m_.emplace_back(v.shape());
    v_.emplace_back(v.shape());
  }
}

void Adam::step(const std::vector<Var>& grads, double lr) {
  if (grads.size() != params_.size()) {
    throw ArgumentError("Adam: gradient count does not match parameters");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto g = grads[i].value().data();
    auto w = params_[i].second.mutable_value().data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    const double step = lr * lr_scale_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= step * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + epsilon_);
    }
  }
}

void Adam::save(Archive& archive, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.arrays[prefix + "m/" + params_[i].first] = m_[i];
    archive.arrays[prefix + "v/" + params_[i].first] = v_[i];
  }
  archive.metadata[prefix + "steps"] = t_;
}

void Adam::load(const Archive& archive, const std::string& prefix) {
  std::vector<Tensor> m, v;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor& mi = archive.array(prefix + "m/" + params_[i].first);
    const Tensor& vi = archive.array(prefix + "v/" + params_[i].first);
    if (mi.shape() != m_[i].shape() || vi.shape() != v_[i].shape()) {
      throw LoadError("optimizer moment shape drift at '" + params_[i].first +
                      "'");
    }
    m.push_back(mi);
    v.push_back(vi);
  }
  if (!archive.metadata.contains(prefix + "steps")) {
    throw LoadError("checkpoint lacks '" + prefix + "steps'");
  }
  const long t = archive.metadata.at(prefix + "steps").get<long>();
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

// -- dataset -----------------------------------------------------------------

ClassDataset::ClassDataset(int num_classes) : classes_(num_classes) {
  if (num_classes < 1) throw ArgumentError("dataset needs >= 1 class");
}

void ClassDataset::add(int cls, Tensor image) {
  if (image.shape().n != 1 || image.shape().c != 3) {
    throw ShapeError("dataset images must be [1, H, W, 3], got " +
                     image.shape().str());
  }
  classes_.at(cls).push_back({std::move(image), {}});
}

void ClassDataset::add_path(int cls, std::string path) {
  classes_.at(cls).push_back({std::nullopt, std::move(path)});
}

std::size_t ClassDataset::size(int cls) const { return classes_.at(cls).size(); }

std::size_t ClassDataset::min_class_size() const {
  std::size_t m = classes_.front().size();
  for (const auto& c : classes_) m = std::min(m, c.size());
  return m;
}

Tensor ClassDataset::image(int cls, std::size_t index) const {
  const Entry& e = classes_.at(cls).at(index);
  return e.pixels ? *e.pixels : read_png(e.path);
}

// -- training ----------------------------------------------------------------

TrainState::TrainState(const NetworkConfig& net_config,
                       const TrainConfig& config)
    : nets(net_config, config.seed),
      ema(nets.clone()),
      rng(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  const auto g_params =
      concat_params(nets.generator_params(), nets.age_encoder_params());
  opt_g = Adam(g_params,
               generator_lr_scale(nets, g_params, config.mapping_lr_factor),
               config.beta1, config.beta2, config.adam_epsilon);
  const auto d_params = nets.discriminator_params();
  opt_d = Adam(d_params, std::vector<double>(d_params.size(), 1.0),
               config.beta1, config.beta2, config.adam_epsilon);
}

bool StepReport::all_finite() const {
  for (double v : {d_real, d_fake, r1, d_total, g_adv, rec, cyc, id, age,
                   g_total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string StepReport::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = lr.main;
  j["lr_mapping"] = lr.mapping;
  j["s"] = s;
  j["t"] = t;
  j["d_real"] = d_real;
  j["d_fake"] = d_fake;
  j["r1"] = r1;
  j["d_total"] = d_total;
  j["g_adv"] = g_adv;
  j["rec"] = rec;
  j["cyc"] = cyc;
  j["id"] = id;
  j["age"] = age;
  j["g_total"] = g_total;
  // Non-finite values are not representable in JSON; spell them out.
  for (auto& [key, value] : j.items()) {
    if (value.is_number_float() && !std::isfinite(value.get<double>())) {
      value = std::to_string(value.get<double>());
    }
  }
  return j.dump();
}

TrainBatch sample_batch(const ClassDataset& data, const AgeClassSchema& schema,
                        int batch_size, std::mt19937_64& rng) {
  if (data.num_classes() != schema.n()) {
    throw DataError("dataset has " + std::to_string(data.num_classes()) +
                    " classes, schema has " + std::to_string(schema.n()));
  }
  TrainBatch b;
  std::vector<Tensor> xs, xt;
  for (int i = 0; i < batch_size; ++i) {
    const auto [s, t] = sample_class_pair(schema, rng);
    for (int c : {s, t}) {
      if (data.size(c) == 0) {
        throw DataError("class '" + schema[c].label + "' has no images");
      }
    }
    const auto is = std::uniform_int_distribution<std::size_t>(
        0, data.size(s) - 1)(rng);
    const auto it = std::uniform_int_distribution<std::size_t>(
        0, data.size(t) - 1)(rng);
    xs.push_back(data.image(s, is));
    xt.push_back(data.image(t, it));
    b.s.push_back(s);
    b.t.push_back(t);
  }
  b.x_s = kernels::stack_batch(xs);
  b.x_t = kernels::stack_batch(xt);
  return b;
}

StepReport train_step(TrainState& state, const TrainBatch& batch, int epoch,
                      const TrainConfig& config, const LossWeights& weights) {
  const AgeClassSchema& schema = state.nets.config().schema;
  StepReport r;
  r.step = state.step + 1;
  r.epoch = epoch;
  r.lr = lr_at(epoch, config);
  r.s = batch.s;
  r.t = batch.t;

  std::vector<AgeCode> zs, zt;
  for (std::size_t i = 0; i < batch.s.size(); ++i) {
    zs.push_back(sample_age_code(batch.s[i], schema, config.age_noise, state.rng));
    zt.push_back(sample_age_code(batch.t[i], schema, config.age_noise, state.rng));
  }
  const Var x = ad::constant(batch.x_s);
  const TriplePass pass = run_triple_pass(state.nets, x, stack_codes(zs),
                                          stack_codes(zt), batch.s, batch.t);

  // D update. The generator graph is untouched by it: y_gen is detached and
  // the pass holds no discriminator parameters.
  {
    Tensor real = batch.x_s;
    std::vector<int> real_classes = batch.s;
    if (config.both_reals) {
      real = kernels::stack_batch({batch.x_s, batch.x_t});
      real_classes.insert(real_classes.end(), batch.t.begin(), batch.t.end());
    }
    const DiscriminatorLoss dl =
        discriminator_loss(state.nets.discriminator, real, real_classes,
                           ad::detach(pass.y_gen), batch.t, weights);
    r.d_real = dl.real.item();
    r.d_fake = dl.fake.item();
    r.r1 = dl.r1.item();
    r.d_total = dl.total.item();
    if (!std::isfinite(r.d_total)) {
      throw NumericError("non-finite discriminator loss: " + r.to_json());
    }
    state.opt_d.step(gradients(dl.total, state.opt_d.params()), r.lr.main);
  }

  // G update against the freshly updated discriminator.
  {
    const GeneratorLoss gl = total_generator_loss(pass, state.nets, weights);
    r.g_adv = gl.adv.item();
    r.rec = gl.rec.item();
    r.cyc = gl.cyc.item();
    r.id = gl.id.item();
    r.age = gl.age.item();
    r.g_total = gl.total.item();
    if (!r.all_finite()) {
      throw NumericError("non-finite generator loss: " + r.to_json());
    }
    state.opt_g.step(gradients(gl.total, state.opt_g.params()), r.lr.main);
  }

  update_ema(state.ema.generator_params(), state.nets.generator_params(),
             config.ema_decay);
  state.step = r.step;
  return r;
}

int derive_steps_per_epoch(const ClassDataset& data, int batch_size) {
  const std::size_t images = data.min_class_size() * data.num_classes();
  return std::max<int>(1, static_cast<int>(images / batch_size));
}

// -- checkpoints -------------------------------------------------------------

nlohmann::json network_config_json(const NetworkConfig& c) {
  return {{"resolution", c.resolution},
          {"base_channels", c.base_channels},
          {"latent_dim", c.latent_dim},
          {"mapping_layers", c.mapping_layers},
          {"classes", c.schema.labels()},
          {"k", c.schema.k()}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  try {
    NetworkConfig c;
    c.resolution = j.at("resolution").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.mapping_layers = j.at("mapping_layers").get<int>();
    c.schema = AgeClassSchema::parse(j.at("classes").get<std::string>(),
                                     j.at("k").get<int>());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt network configuration: ") + e.what());
  } catch (const SchemaError& e) {
    throw LoadError(std::string("corrupt schema in checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const TrainState& state,
                     const TrainConfig& config) {
  Archive a;
  a.metadata["network"] = network_config_json(state.nets.config());
  a.metadata["step"] = state.step;
  a.metadata["rng"] = rng_to_string(state.rng);
  a.metadata["gender"] = to_string(config.gender);
  save_params(a, "live/", state.nets.all_params());
  save_params(a, "ema/", state.ema.generator_params());
  state.opt_g.save(a, "adam_g/");
  state.opt_d.save(a, "adam_d/");
  a.save(path);
}

NetworkConfig checkpoint_network_config(const Archive& archive) {
  if (!archive.metadata.contains("network")) {
    throw LoadError("checkpoint lacks a network configuration");
  }
  return network_config_from_json(archive.metadata.at("network"));
}

void load_checkpoint(const std::string& path, TrainState& state) {
  const Archive a = Archive::load(path);
  const NetworkConfig stored = checkpoint_network_config(a);
  const NetworkConfig& mine = state.nets.config();
  if (network_config_json(stored) != network_config_json(mine)) {
    throw LoadError("checkpoint network " + network_config_json(stored).dump() +
                    " does not match " + network_config_json(mine).dump());
  }
  // Stage everything, then commit.
  const auto live = plan_params(a, "live/", state.nets.all_params());
  const auto ema = plan_params(a, "ema/", state.ema.generator_params());
  Adam opt_g = state.opt_g;
  Adam opt_d = state.opt_d;
  opt_g.load(a, "adam_g/");
  opt_d.load(a, "adam_d/");
  if (!a.metadata.contains("step") || !a.metadata.contains("rng")) {
    throw LoadError("checkpoint lacks step counter or rng state");
  }
  const long step = a.metadata.at("step").get<long>();
  std::mt19937_64 rng = rng_from_string(a.metadata.at("rng").get<std::string>());

  for (const auto& [v, t] : live) v.mutable_value() = *t;
  for (const auto& [v, t] : ema) v.mutable_value() = *t;
  state.opt_g = std::move(opt_g);
  state.opt_d = std::move(opt_d);
  state.step = step;
  state.rng = rng;
}

LoadedModel load_model(const std::string& path) {
  const Archive a = Archive::load(path);
  const NetworkConfig config = checkpoint_network_config(a);
  LoadedModel m{Networks(config, 0), Networks(config, 0), 0, std::nullopt};
  for (const auto& [v, t] : plan_params(a, "live/", m.live.all_params())) {
    v.mutable_value() = *t;
  }
  copy_parameter_values(m.live.all_params(), m.ema.all_params());
  for (const auto& [v, t] : plan_params(a, "ema/", m.ema.generator_params())) {
    v.mutable_value() = *t;
  }
  m.step = a.metadata.value("step", 0L);
  if (a.metadata.contains("gender")) {
    try {
      m.gender = parse_gender(a.metadata["gender"].get<std::string>());
    } catch (const std::exception& e) {
      throw LoadError(path + ": bad gender entry: " + e.what());
    }
  }
  return m;
}

}  // namespace agesynth
