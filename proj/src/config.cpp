#include "agesynth/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& text) {
  T v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::map<int, double> parse_decay(const std::string& text) {
  std::map<int, double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("expected epoch:factor, got '" + item + "'");
    }
    out[parse_number<int>(trim(item.substr(0, colon)))] =
        parse_number<double>(trim(item.substr(colon + 1)));
  }
  return out;
}

std::string format_decay(const std::map<int, double>& m) {
  std::string out;
  for (const auto& [epoch, factor] : m) {
    if (!out.empty()) out += ',';
    out += std::to_string(epoch) + ':' + format(factor);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
using Access = T& (*)(RunConfig&);

template <class T>
Field number(const char* key, Access<T> at) {
  return {key,
          [at](const RunConfig& c) {
            const T v = at(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return format(v);
            } else {
              return std::to_string(v);
            }
          },
          [at](RunConfig& c, const std::string& v) { at(c) = parse_number<T>(v); }};
}

Field text(const char* key, Access<std::string> at) {
  return {key, [at](const RunConfig& c) { return at(const_cast<RunConfig&>(c)); },
          [at](RunConfig& c, const std::string& v) { at(c) = v; }};
}

Field flag(const char* key, Access<bool> at) {
  return {key,
          [at](const RunConfig& c) {
            return std::string(at(const_cast<RunConfig&>(c)) ? "true" : "false");
          },
          [at](RunConfig& c, const std::string& v) { at(c) = parse_bool(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(text("run.name", [](RunConfig& c) -> std::string& { return c.run_name; }));
    f.push_back(text("run.output_dir", [](RunConfig& c) -> std::string& { return c.output_dir; }));

    f.push_back(number<int>("network.resolution", [](RunConfig& c) -> int& { return c.network.resolution; }));
    f.push_back(number<int>("network.base_channels", [](RunConfig& c) -> int& { return c.network.base_channels; }));
    f.push_back(number<int>("network.latent_dim", [](RunConfig& c) -> int& { return c.network.latent_dim; }));
    f.push_back(number<int>("network.mapping_layers", [](RunConfig& c) -> int& { return c.network.mapping_layers; }));
    f.push_back({"schema.classes",
                 [](const RunConfig& c) { return c.network.schema.labels(); },
                 [](RunConfig& c, const std::string& v) {
                   c.network.schema = AgeClassSchema::parse(v, c.network.schema.k());
                 }});
    f.push_back({"schema.k",
                 [](const RunConfig& c) { return std::to_string(c.network.schema.k()); },
                 [](RunConfig& c, const std::string& v) {
                   c.network.schema = AgeClassSchema(c.network.schema.classes(),
                                                     parse_number<int>(v));
                 }});

    f.push_back({"train.gender",
                 [](const RunConfig& c) { return std::string(to_string(c.train.gender)); },
                 [](RunConfig& c, const std::string& v) { c.train.gender = parse_gender(v); }});
    f.push_back(number<std::uint64_t>("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    f.push_back(number<int>("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }));
    f.push_back(number<int>("train.epochs", [](RunConfig& c) -> int& { return c.train.epochs; }));
    f.push_back(number<double>("train.lr", [](RunConfig& c) -> double& { return c.train.lr; }));
    f.push_back(number<double>("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; }));
    f.push_back(number<double>("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; }));
    f.push_back(number<double>("train.adam_epsilon", [](RunConfig& c) -> double& { return c.train.adam_epsilon; }));
    f.push_back({"train.lr_decay",
                 [](const RunConfig& c) { return format_decay(c.train.lr_decay); },
                 [](RunConfig& c, const std::string& v) { c.train.lr_decay = parse_decay(v); }});
    f.push_back(number<double>("train.mapping_lr_factor", [](RunConfig& c) -> double& { return c.train.mapping_lr_factor; }));
    f.push_back(number<double>("train.ema_decay", [](RunConfig& c) -> double& { return c.train.ema_decay; }));
    f.push_back(number<double>("train.age_noise", [](RunConfig& c) -> double& { return c.train.age_noise; }));
    f.push_back(flag("train.both_reals", [](RunConfig& c) -> bool& { return c.train.both_reals; }));
    f.push_back(number<int>("train.steps_per_epoch", [](RunConfig& c) -> int& { return c.train.steps_per_epoch; }));
    f.push_back(number<long>("train.max_steps", [](RunConfig& c) -> long& { return c.train.max_steps; }));
    f.push_back(number<int>("train.log_every", [](RunConfig& c) -> int& { return c.train.log_every; }));
    f.push_back(number<int>("train.sample_every", [](RunConfig& c) -> int& { return c.train.sample_every; }));
    f.push_back(number<int>("train.checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; }));

    f.push_back(number<double>("loss.lambda_rec", [](RunConfig& c) -> double& { return c.loss.lambda_rec; }));
    f.push_back(number<double>("loss.lambda_cyc", [](RunConfig& c) -> double& { return c.loss.lambda_cyc; }));
    f.push_back(number<double>("loss.lambda_id", [](RunConfig& c) -> double& { return c.loss.lambda_id; }));
    f.push_back(number<double>("loss.lambda_age", [](RunConfig& c) -> double& { return c.loss.lambda_age; }));
    f.push_back(number<double>("loss.r1_gamma", [](RunConfig& c) -> double& { return c.loss.r1_gamma; }));

    f.push_back(number<double>("prune.min_gender_confidence", [](RunConfig& c) -> double& { return c.prune.min_gender_confidence; }));
    f.push_back(number<double>("prune.min_age_confidence", [](RunConfig& c) -> double& { return c.prune.min_age_confidence; }));
    f.push_back(number<double>("prune.max_abs_yaw", [](RunConfig& c) -> double& { return c.prune.max_abs_yaw; }));
    f.push_back(number<double>("prune.max_abs_pitch", [](RunConfig& c) -> double& { return c.prune.max_abs_pitch; }));
    f.push_back(flag("prune.reject_dark_glasses", [](RunConfig& c) -> bool& { return c.prune.reject_dark_glasses; }));
    f.push_back(number<double>("prune.max_single_eye_occlusion", [](RunConfig& c) -> double& { return c.prune.max_single_eye_occlusion; }));
    f.push_back(number<double>("prune.max_both_eye_occlusion", [](RunConfig& c) -> double& { return c.prune.max_both_eye_occlusion; }));

    f.push_back(text("data.labels", [](RunConfig& c) -> std::string& { return c.data.labels; }));
    f.push_back(text("data.images_dir", [](RunConfig& c) -> std::string& { return c.data.images_dir; }));
    f.push_back(text("data.masks_dir", [](RunConfig& c) -> std::string& { return c.data.masks_dir; }));
    f.push_back(text("data.palette", [](RunConfig& c) -> std::string& { return c.data.palette; }));
    f.push_back(text("data.manifest", [](RunConfig& c) -> std::string& { return c.data.manifest; }));
    f.push_back(number<int>("data.split_boundary", [](RunConfig& c) -> int& { return c.data.split_boundary; }));
    f.push_back(number<double>("data.ramp_fraction", [](RunConfig& c) -> double& { return c.data.ramp_fraction; }));

    f.push_back(text("probe.weights", [](RunConfig& c) -> std::string& { return c.probe.weights; }));
    f.push_back(number<int>("probe.frames_per_gap", [](RunConfig& c) -> int& { return c.probe.frames_per_gap; }));
    return f;
  }();
  return all;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field& f = field(key);
  try {
    f.set(*this, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string RunConfig::get(const std::string& key) const {
  return field(key).get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return all;
}

void RunConfig::validate() const {
  if (run_name.empty()) throw ConfigError("run.name must not be empty");
  if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
  network.validate();
  train.validate();
  loss.validate();
  if (data.split_boundary < 0) throw ConfigError("data.split_boundary must be >= 0");
  if (!(data.ramp_fraction > 0)) throw ConfigError("data.ramp_fraction must be > 0");
  for (double v : {prune.min_gender_confidence, prune.min_age_confidence}) {
    if (!(v >= 0 && v <= 1)) throw ConfigError("prune confidences must lie in [0, 1]");
  }
  if (!(prune.max_abs_yaw >= 0) || !(prune.max_abs_pitch >= 0)) {
    throw ConfigError("prune angle limits must be >= 0");
  }
  parse_weight_source(probe.weights);
  if (probe.frames_per_gap < 0) throw ConfigError("probe.frames_per_gap must be >= 0");
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) os << '\n';
      section = s;
    }
    os << f.key << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

std::string RunConfig::run_dir() const {
  return (std::filesystem::path(output_dir) / run_name).string();
}

RunConfig parse_run_config(std::istream& in, const std::string& source,
                           RunConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    try {
      base.set(key, trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in, path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must be key=value");
  }
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void apply_env_overrides(RunConfig& config) {
  const char* dir = std::getenv(kOutputDirEnv);
  if (dir && *dir) config.output_dir = dir;
}

void write_config_echo(const RunConfig& config, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config echo '" + path + "'");
  out << "# agesynth run configuration\n" << config.to_text();
}

}  // namespace agesynth
