#include "rainsr/config.hpp"

#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "rainsr/error.hpp"
#include "rainsr/text_format.hpp"

namespace rainsr {

std::string to_string(Profile p) { return p == Profile::paper ? "paper" : "desk"; }

namespace {

std::string schedule_name(LrSchedule s) { return s == LrSchedule::linear_decay ? "linear_decay" : "constant"; }

LrSchedule parse_schedule(const std::string& v, const std::string& key, int line) {
  if (v == "constant") return LrSchedule::constant;
  if (v == "linear_decay") return LrSchedule::linear_decay;
  throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' expects constant|linear_decay, got '" + v + "'");
}

// Registry binding "section.key" names to config fields, shared by the
// parser and the canonical dump so they cannot drift apart.
class Fields {
 public:
  using Setter = std::function<void(const std::string&, int)>;
  using Getter = std::function<std::string()>;

  explicit Fields(TrainConfig& c) {
    add_u64("seed", c.seed);
    add_int("scale", c.scale);

    fields_["data.root"] = {[&c](const std::string& v, int) { c.data.root = v; },
                            [&c] { return c.data.root.generic_string(); }};
    add_int("data.scene_size", c.data.micro.scene_size);
    add_int("data.sunny", c.data.micro.sunny);
    add_int("data.rainy", c.data.micro.rainy);
    add_int("data.real_lr", c.data.micro.real_lr);
    add_int("data.eval", c.data.micro.eval);
    add_int("data.expected_sunny", c.data.expected_sunny);
    add_int("data.expected_rainy", c.data.expected_rainy);
    add_int("data.rain_streak_count", c.data.rain.streak_count);
    add_double("data.rain_length_px", c.data.rain.length_px);
    add_double("data.rain_width_px", c.data.rain.width_px);
    add_double("data.rain_angle_deg", c.data.rain.angle_deg);
    add_double("data.rain_opacity", c.data.rain.opacity);
    add_double("data.rain_contrast_dim", c.data.rain.contrast_dim);

    auto& t = c.translator;
    add_int("translator.steps", t.steps);
    add_int("translator.epochs", t.epochs);
    add_int("translator.batch_size", t.batch_size);
    add_int("translator.patch_size", t.patch_size);
    add_double("translator.lr", t.lr);
    add_double("translator.beta1", t.beta1);
    add_double("translator.beta2", t.beta2);
    add_double("translator.lambda_cyc", t.lambda_cyc);
    add_double("translator.lambda_id", t.lambda_id);
    add_int("translator.base_channels", t.base_channels);
    add_int("translator.residual_blocks", t.residual_blocks);
    add_int("translator.disc_channels", t.disc_channels);
    add_int("translator.buffer_capacity", t.buffer_capacity);
    add_schedule("translator.lr_schedule", t.schedule);

    auto& d = c.dsn;
    add_int("dsn.steps", d.steps);
    add_int("dsn.batch_size", d.batch_size);
    add_int("dsn.patch_size", d.patch_size);
    add_double("dsn.lr", d.lr);
    add_double("dsn.beta1", d.beta1);
    add_double("dsn.beta2", d.beta2);
    add_double("dsn.lambda_content", d.lambda_content);
    add_double("dsn.lambda_adv", d.lambda_adv);
    add_int("dsn.base_channels", d.base_channels);
    add_int("dsn.residual_blocks", d.residual_blocks);
    add_int("dsn.disc_channels", d.disc_channels);
    add_schedule("dsn.lr_schedule", d.schedule);

    auto& s = c.srn;
    add_int("srn.steps", s.steps);
    add_int("srn.batch_size", s.batch_size);
    add_int("srn.patch_size", s.patch_size);
    add_double("srn.lr", s.lr);
    add_double("srn.beta1", s.beta1);
    add_double("srn.beta2", s.beta2);
    add_double("srn.lambda_pix", s.lambda_pix);
    add_double("srn.lambda_adv", s.lambda_adv);
    add_int("srn.base_channels", s.base_channels);
    add_int("srn.residual_blocks", s.residual_blocks);
    add_int("srn.disc_channels", s.disc_channels);
    add_bool("srn.use_domain_weights", s.use_domain_weights);
    add_schedule("srn.lr_schedule", s.schedule);
  }

  const std::map<std::string, std::pair<Setter, Getter>>& all() const { return fields_; }

 private:
  void add_int(const std::string& k, int& f) {
    fields_[k] = {[&f, k](const std::string& v, int line) { f = parse_int(v, k, line); }, [&f] { return std::to_string(f); }};
  }
  void add_u64(const std::string& k, std::uint64_t& f) {
    fields_[k] = {[&f, k](const std::string& v, int line) { f = parse_u64(v, k, line); },
                  [&f] { return std::to_string(f); }};
  }
  void add_double(const std::string& k, double& f) {
    fields_[k] = {[&f, k](const std::string& v, int line) { f = parse_double(v, k, line); },
                  [&f] { return format_double(f); }};
  }
  void add_bool(const std::string& k, bool& f) {
    fields_[k] = {[&f, k](const std::string& v, int line) { f = parse_bool(v, k, line); },
                  [&f] { return std::string(f ? "true" : "false"); }};
  }
  void add_schedule(const std::string& k, LrSchedule& f) {
    fields_[k] = {[&f, k](const std::string& v, int line) { f = parse_schedule(v, k, line); },
                  [&f] { return schedule_name(f); }};
  }

  std::map<std::string, std::pair<Setter, Getter>> fields_;
};

void validate(const TrainConfig& c) {
  const auto positive = [](int v, const char* key) {
    if (v < 1) throw ConfigError("key '" + std::string(key) + "' must be positive");
  };
  if (c.scale != 4) throw ConfigError("key 'scale' is fixed at 4, got " + std::to_string(c.scale));
  positive(c.translator.batch_size, "translator.batch_size");
  positive(c.dsn.batch_size, "dsn.batch_size");
  positive(c.srn.batch_size, "srn.batch_size");
  if (c.translator.steps < 0 || c.translator.epochs < 0 || c.dsn.steps < 0 || c.srn.steps < 0) {
    throw ConfigError("step and epoch counts must be non-negative");
  }
  if (c.translator.patch_size % 8 != 0 || c.translator.patch_size < 8) {
    throw ConfigError("key 'translator.patch_size' must be a positive multiple of 8");
  }
  if (c.dsn.patch_size % 32 != 0 || c.dsn.patch_size < 32) {
    throw ConfigError("key 'dsn.patch_size' must be a positive multiple of 32 (LR patches feed an 8x discriminator)");
  }
  if (c.srn.patch_size % 32 != 0 || c.srn.patch_size < 32) {
    throw ConfigError("key 'srn.patch_size' must be a positive multiple of 32");
  }
  c.data.rain.validate();
  c.translator_settings().validate();
  c.dsn_settings().validate();
  c.srn_settings().validate();
}

}  // namespace

TrainConfig TrainConfig::defaults(Profile p) {
  TrainConfig c;
  c.profile = p;
  if (p == Profile::paper) {
    c.data.expected_sunny = 344;
    c.data.expected_rainy = 306;
    c.translator.steps = 0;
    c.translator.epochs = 3750;
    c.translator.batch_size = 1;
    c.translator.patch_size = 256;
    c.translator.base_channels = 64;
    c.translator.residual_blocks = 9;
    c.translator.disc_channels = 64;
    c.translator.schedule = LrSchedule::linear_decay;
    c.dsn.steps = 20000;
    c.dsn.batch_size = 16;
    c.dsn.patch_size = 128;
    c.dsn.base_channels = 64;
    c.dsn.residual_blocks = 4;
    c.dsn.disc_channels = 64;
    c.dsn.schedule = LrSchedule::linear_decay;
    c.srn.steps = 20000;
    c.srn.batch_size = 16;
    c.srn.patch_size = 128;
    c.srn.base_channels = 64;
    c.srn.residual_blocks = 16;
    c.srn.disc_channels = 64;
    c.srn.use_domain_weights = true;
    c.srn.schedule = LrSchedule::linear_decay;
  } else {
    c.data.root = "data";
  }
  return c;
}

std::string TrainConfig::canonical_text() const {
  TrainConfig copy = *this;
  Fields fields(copy);
  std::ostringstream os;
  os << "profile = " << to_string(profile) << "\n";
  for (const auto& [key, f] : fields.all()) os << key << " = " << f.second() << "\n";
  return os.str();
}

std::string TrainConfig::fingerprint() const {
  const std::string text = canonical_text();
  return hex64(fnv1a64(text.data(), text.size()));
}

TranslatorSettings TrainConfig::translator_settings() const {
  TranslatorSettings s;
  s.generator = NetworkSpec::translator_gen(translator.base_channels, translator.residual_blocks);
  s.discriminator = NetworkSpec::patch_disc(translator.disc_channels);
  s.adam = {translator.lr, translator.beta1, translator.beta2, 1e-8};
  s.lambda_cyc = translator.lambda_cyc;
  s.lambda_id = translator.lambda_id;
  s.buffer_capacity = translator.buffer_capacity;
  return s;
}

DsnSettings TrainConfig::dsn_settings() const {
  DsnSettings s;
  s.dsn = NetworkSpec::dsn(dsn.base_channels, dsn.residual_blocks);
  s.discriminator = NetworkSpec::patch_disc(dsn.disc_channels);
  s.adam = {dsn.lr, dsn.beta1, dsn.beta2, 1e-8};
  s.lambda_content = dsn.lambda_content;
  s.lambda_adv = dsn.lambda_adv;
  return s;
}

SrnSettings TrainConfig::srn_settings() const {
  SrnSettings s;
  s.srn = NetworkSpec::srn(srn.base_channels, srn.residual_blocks);
  s.discriminator = NetworkSpec::patch_disc(srn.disc_channels);
  s.adam = {srn.lr, srn.beta1, srn.beta2, 1e-8};
  s.lambda_pix = srn.lambda_pix;
  s.lambda_adv = srn.lambda_adv;
  s.use_domain_weights = srn.use_domain_weights;
  return s;
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
  const KeyValueDocument doc = parse_key_value(text, source);
  Profile profile = Profile::desk;
  for (const auto& l : doc.lines) {
    if (l.section.empty() && l.key == "profile") {
      if (l.value == "desk") {
        profile = Profile::desk;
      } else if (l.value == "paper") {
        profile = Profile::paper;
      } else {
        throw ConfigError(source + ":" + std::to_string(l.line) + ": key 'profile' expects desk|paper, got '" + l.value + "'");
      }
    }
  }
  TrainConfig c = TrainConfig::defaults(profile);
  Fields fields(c);
  bool root_given = false;
  for (const auto& l : doc.lines) {
    if (l.section.empty() && l.key == "profile") continue;
    const std::string full = l.section.empty() ? l.key : l.section + "." + l.key;
    auto it = fields.all().find(full);
    if (it == fields.all().end()) {
      throw ConfigError(source + ":" + std::to_string(l.line) + ": unknown key '" + full + "'");
    }
    try {
      it->second.first(l.value, l.line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.what());
    }
    if (full == "data.root") root_given = true;
  }
  if (!root_given) {
    if (const char* env = std::getenv("RAINSR_DATA_ROOT"); env && *env) c.data.root = env;
  }
  if (c.data.root.empty()) {
    throw ConfigError(source + ": missing key 'data.root' (set it in [data] or via RAINSR_DATA_ROOT)");
  }
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config(read_text_file(path), path.string());
}

double scheduled_lr(double base, LrSchedule schedule, std::uint64_t step, std::uint64_t total) {
  if (schedule == LrSchedule::constant || total == 0) return base;
  const std::uint64_t half = total / 2;
  if (step < half) return base;
  const double span = static_cast<double>(total - half);
  return base * (1.0 - static_cast<double>(step - half) / span);
}

}  // namespace rainsr
