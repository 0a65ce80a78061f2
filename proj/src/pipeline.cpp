#include "rainsr/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "rainsr/datasets.hpp"
#include "rainsr/error.hpp"
#include "rainsr/image_io.hpp"
#include "rainsr/rng.hpp"
#include "rainsr/text_format.hpp"

namespace rainsr {

namespace fs = std::filesystem;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::translator:
      return "translator";
    case Stage::dsn:
      return "dsn";
    case Stage::srn:
      return "srn";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  if (s == "translator") return Stage::translator;
  if (s == "dsn") return Stage::dsn;
  if (s == "srn") return Stage::srn;
  throw ConfigError("unknown stage '" + s + "' (expected translator, dsn or srn)");
}

std::uint64_t stage_seed(std::uint64_t master, Stage stage, SeedPurpose purpose) {
  return derive_seed(master, 256 * static_cast<std::uint64_t>(stage) + static_cast<std::uint64_t>(purpose));
}

void RunManifest::record(const StageRecord& r) {
  std::erase_if(records, [&](const StageRecord& x) { return x.stage >= r.stage; });
  records.push_back(r);
}

std::string RunManifest::to_text() const {
  std::ostringstream os;
  os << "# stage = fingerprint | checkpoint | loss log | wall seconds | steps\n";
  for (const auto& r : records) {
    os << to_string(r.stage) << " = " << r.config_fingerprint << " | " << r.checkpoint.generic_string() << " | "
       << r.loss_log.generic_string() << " | " << format_double(r.wall_seconds) << " | " << r.steps << "\n";
  }
  return os.str();
}

RunManifest RunManifest::parse(const std::string& text, const std::string& source) {
  RunManifest m;
  for (const auto& l : parse_key_value(text, source).lines) {
    std::vector<std::string> parts;
    std::stringstream ss(l.value);
    for (std::string p; std::getline(ss, p, '|');) parts.push_back(trim(p));
    if (parts.size() != 5) {
      throw ManifestError(source + ":" + std::to_string(l.line) + ": expected 5 '|'-separated fields");
    }
    StageRecord r;
    r.stage = stage_from_string(l.key);
    r.config_fingerprint = parts[0];
    r.checkpoint = parts[1];
    r.loss_log = parts[2];
    r.wall_seconds = parse_double(parts[3], l.key, l.line);
    r.steps = parse_u64(parts[4], l.key, l.line);
    m.records.push_back(r);
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& path) {
  if (!fs::exists(path)) return {};
  return parse(read_text_file(path), path.string());
}

DirectoryLock::DirectoryLock(const fs::path& out_dir) : path_(out_dir / ".rainsr.lock") {
  fs::create_directories(out_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw StateError("output directory " + out_dir.string() + " is locked by another run (remove " +
                     path_.string() + " if that run is gone)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

std::vector<Image> load_folder(const fs::path& dir, DomainLabel label, int expected) {
  DatasetIndex index = ingest_folder(dir, label);
  if (expected > 0 && static_cast<int>(index.entries.size()) != expected) {
    throw IngestError(dir.string() + ": expected " + std::to_string(expected) + " " + to_string(label) +
                      " images, found " + std::to_string(index.entries.size()));
  }
  return load_images(index);
}

const char* log_header(Stage s) {
  switch (s) {
    case Stage::translator:
      return "step,loss_g_adv,loss_cycle,loss_id,loss_d_rainy,loss_d_sunny";
    case Stage::dsn:
      return "step,loss_content,loss_g_adv,loss_d_lr";
    case Stage::srn:
      return "step,loss_pix,loss_g_adv,loss_d_hr,mean_weight";
  }
  return "";
}

// Keeps the header and rows with step <= `keep_steps` of an existing log.
void prepare_log(const fs::path& path, Stage stage, std::uint64_t keep_steps) {
  std::ostringstream kept;
  kept << log_header(stage) << "\n";
  if (keep_steps > 0 && fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      std::uint64_t step = 0;
      try {
        step = std::stoull(line.substr(0, comma));
      } catch (const std::exception&) {
        continue;
      }
      if (step <= keep_steps) kept << line << "\n";
    }
  }
  write_text_file(path, kept.str());
}

class LossLog {
 public:
  LossLog(const fs::path& path, Stage stage) : out_(path, std::ios::app), stage_(stage) {
    if (!out_) throw IoError("cannot append to " + path.string());
    std::string h = log_header(stage);
    std::stringstream ss(h);
    std::string col;
    std::getline(ss, col, ',');
    while (std::getline(ss, col, ',')) columns_.push_back(col);
  }

  void write(std::uint64_t step, const LossRecord& r) {
    out_ << step;
    for (const auto& c : columns_) out_ << ',' << format_double(r.get(c));
    out_ << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
  Stage stage_;
  std::vector<std::string> columns_;
};

BuiltNetwork<float> prerequisite(const fs::path& path, Stage stage, const std::string& role,
                                 const NetworkSpec& expected) {
  if (!fs::exists(path)) {
    throw SequencingError("stage requires the " + to_string(stage) + " checkpoint " + path.string() +
                          "; run that stage first");
  }
  const Checkpoint c = load_checkpoint(path);
  if (c.stage != to_string(stage)) throw VersionError(path.string() + " is not a " + to_string(stage) + " checkpoint");
  const std::string stored = c.meta_value("spec." + role);
  if (stored != expected.describe()) {
    throw VersionError(path.string() + ": network '" + role + "' is " + stored + " but the configuration expects " +
                       expected.describe());
  }
  return network_from_checkpoint(c, role);
}

// Shared driver: resume handling, schedule, logging, checkpointing.
template <typename State, typename StepFn, typename ToCkpt>
StageResult drive(State& state, Stage stage, std::uint64_t total, double base_lr, LrSchedule schedule,
                  const TrainConfig& config, const RunPaths& paths, const RunOptions& options, StepFn step_fn,
                  ToCkpt to_ckpt) {
  const auto t0 = std::chrono::steady_clock::now();
  StageResult result;
  result.total_steps = total;
  result.checkpoint_path = paths.checkpoint(stage);
  result.loss_log = paths.loss_log(stage);

  prepare_log(result.loss_log, stage, state.step);
  LossLog log(result.loss_log, stage);

  std::uint64_t stop = total;
  if (options.stop_after) stop = std::min(stop, *options.stop_after);
  while (state.step < stop) {
    const std::uint64_t i = state.step;
    state.set_learning_rate(scheduled_lr(base_lr, schedule, i, total));
    LossRecord r;
    try {
      r = step_fn(i);
    } catch (const DivergenceError& e) {
      throw DivergenceError(to_string(stage) + " step " + std::to_string(i + 1) + ": " + e.what());
    }
    log.write(i + 1, r);
    result.losses.push_back(r);
    if (std::find(options.snapshots.begin(), options.snapshots.end(), state.step) != options.snapshots.end()) {
      save_checkpoint(to_ckpt(state, config.fingerprint()), paths.snapshot(stage, state.step));
    }
    if (options.progress && options.progress_every > 0 && (state.step % options.progress_every == 0 || state.step == stop)) {
      *options.progress << to_string(stage) << " step " << state.step << "/" << total;
      for (const auto& [k, v] : r.terms()) *options.progress << ' ' << k << '=' << v;
      *options.progress << std::endl;
    }
  }

  result.checkpoint = to_ckpt(state, config.fingerprint());
  save_checkpoint(result.checkpoint, result.checkpoint_path);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunManifest manifest = RunManifest::load(paths.manifest());
  manifest.record({stage, config.fingerprint(), result.checkpoint_path.filename(), result.loss_log.filename(),
                   result.wall_seconds, state.step});
  write_text_file(paths.manifest(), manifest.to_text());
  return result;
}

template <typename State>
void check_resume(const Checkpoint& c, const TrainConfig& config) {
  if (c.config_fingerprint != config.fingerprint()) {
    throw VersionError("resume checkpoint was written under config " + c.config_fingerprint + ", current config is " +
                       config.fingerprint());
  }
}

StageResult run_translator(const TrainConfig& config, const RunPaths& paths, const RunOptions& options) {
  const TrainingData data = load_training_data(config, false);
  const std::uint64_t total = stage_total_steps(config, Stage::translator, data);
  const auto& tc = config.translator;
  const std::uint64_t seed = config.seed;

  TranslatorState state = [&] {
    if (!options.resume) {
      return TranslatorState::create(config.translator_settings(), stage_seed(seed, Stage::translator, SeedPurpose::init));
    }
    const Checkpoint c = load_checkpoint(*options.resume);
    check_resume<TranslatorState>(c, config);
    return translator_from_checkpoint(c, config.translator_settings());
  }();

  const BatchStream sunny(data.sunny, tc.patch_size, tc.batch_size, stage_seed(seed, Stage::translator, SeedPurpose::stream_a));
  const BatchStream rainy(data.rainy, tc.patch_size, tc.batch_size, stage_seed(seed, Stage::translator, SeedPurpose::stream_b));
  return drive(
      state, Stage::translator, total, tc.lr, tc.schedule, config, paths, options,
      [&](std::uint64_t i) { return train_step_translator(state, sunny.batch(i).tensor, rainy.batch(i).tensor); },
      [](const TranslatorState& s, const std::string& f) { return to_checkpoint(s, f); });
}

StageResult run_dsn(const TrainConfig& config, const RunPaths& paths, const RunOptions& options) {
  const TranslatorSettings ts = config.translator_settings();
  const BuiltNetwork<float> g_s2r = prerequisite(paths.checkpoint(Stage::translator), Stage::translator, "g_s2r", ts.generator);
  const TrainingData data = load_training_data(config, true);
  const std::uint64_t total = stage_total_steps(config, Stage::dsn, data);
  const auto& dc = config.dsn;
  const std::uint64_t seed = config.seed;

  DsnState state = [&] {
    if (!options.resume) return DsnState::create(config.dsn_settings(), stage_seed(seed, Stage::dsn, SeedPurpose::init));
    const Checkpoint c = load_checkpoint(*options.resume);
    check_resume<DsnState>(c, config);
    return dsn_from_checkpoint(c, config.dsn_settings());
  }();

  const BatchStream sunny(data.sunny, dc.patch_size, dc.batch_size, stage_seed(seed, Stage::dsn, SeedPurpose::stream_a));
  const BatchStream real_lr(data.real_lr, dc.patch_size / config.scale, dc.batch_size,
                            stage_seed(seed, Stage::dsn, SeedPurpose::stream_b));
  return drive(
      state, Stage::dsn, total, dc.lr, dc.schedule, config, paths, options,
      [&](std::uint64_t i) {
        std::vector<Image> translated;
        for (const Image& img : sunny.batch_images(i)) translated.push_back(translate_sunny_to_rainy(g_s2r, img));
        return train_step_dsn(state, to_model_range(std::span<const Image>(translated)), real_lr.batch(i).tensor);
      },
      [](const DsnState& s, const std::string& f) { return to_checkpoint(s, f); });
}

struct FrozenStages {
  BuiltNetwork<float> g_s2r;
  BuiltNetwork<float> dsn;
  BuiltNetwork<float> d_lr;
};

FrozenStages frozen_stages(const TrainConfig& config, const RunPaths& paths) {
  const TranslatorSettings ts = config.translator_settings();
  const DsnSettings ds = config.dsn_settings();
  return {prerequisite(paths.checkpoint(Stage::translator), Stage::translator, "g_s2r", ts.generator),
          prerequisite(paths.checkpoint(Stage::dsn), Stage::dsn, "dsn", ds.dsn),
          prerequisite(paths.checkpoint(Stage::dsn), Stage::dsn, "d_lr", ds.discriminator)};
}

std::vector<PseudoPair> pairs_for_step(const FrozenStages& f, const std::vector<Image>& sunny, int patch, int count,
                                       std::uint64_t seed, bool weights) {
  WeightFn wfn = nullptr;
  if (weights) wfn = [&f](const Image& lr) { return domain_distance_weight(f.d_lr, lr); };
  return make_pseudo_pairs([&f](const Image& h) { return translate_sunny_to_rainy(f.g_s2r, h); },
                           [&f](const Image& r) { return degrade(f.dsn, r); }, sunny, patch, count, seed, wfn);
}

StageResult run_srn(const TrainConfig& config, const RunPaths& paths, const RunOptions& options) {
  if (!fs::exists(paths.checkpoint(Stage::translator))) {
    throw SequencingError("stage srn requires the translator checkpoint " + paths.checkpoint(Stage::translator).string());
  }
  if (!fs::exists(paths.checkpoint(Stage::dsn))) {
    throw SequencingError("stage srn requires the dsn checkpoint " + paths.checkpoint(Stage::dsn).string());
  }
  const FrozenStages frozen = frozen_stages(config, paths);
  const TrainingData data = load_training_data(config, false);
  const std::uint64_t total = stage_total_steps(config, Stage::srn, data);
  const auto& sc = config.srn;
  const std::uint64_t seed = config.seed;

  SrnState state = [&] {
    if (!options.resume) return SrnState::create(config.srn_settings(), stage_seed(seed, Stage::srn, SeedPurpose::init));
    const Checkpoint c = load_checkpoint(*options.resume);
    check_resume<SrnState>(c, config);
    return srn_from_checkpoint(c, config.srn_settings());
  }();

  const std::uint64_t pair_seed = stage_seed(seed, Stage::srn, SeedPurpose::pairs);
  return drive(
      state, Stage::srn, total, sc.lr, sc.schedule, config, paths, options,
      [&](std::uint64_t i) {
        const auto pairs = pairs_for_step(frozen, data.sunny, sc.patch_size, sc.batch_size, derive_seed(pair_seed, i),
                                          sc.use_domain_weights);
        return train_step_srn(state, pairs);
      },
      [](const SrnState& s, const std::string& f) { return to_checkpoint(s, f); });
}

}  // namespace

TrainingData load_training_data(const TrainConfig& config, bool need_real_lr) {
  const fs::path& root = config.data.root;
  if (!fs::is_directory(root)) {
    throw IoError("dataset root " + root.string() + " does not exist (run `rainsr synth-data` or set data.root)");
  }
  TrainingData d;
  d.sunny = load_folder(root / "sunny_hr", DomainLabel::sunny_hr, config.data.expected_sunny);
  d.rainy = load_folder(root / "rainy_hr", DomainLabel::rainy_hr, config.data.expected_rainy);
  if (need_real_lr) d.real_lr = load_folder(root / "real_lr", DomainLabel::real_lr, 0);
  return d;
}

std::uint64_t stage_total_steps(const TrainConfig& config, Stage stage, const TrainingData& data) {
  switch (stage) {
    case Stage::translator: {
      const auto& t = config.translator;
      if (t.epochs == 0) return static_cast<std::uint64_t>(t.steps);
      const std::uint64_t smaller = std::min(data.sunny.size(), data.rainy.size());
      const std::uint64_t per_epoch = (smaller + t.batch_size - 1) / t.batch_size;
      return static_cast<std::uint64_t>(t.epochs) * std::max<std::uint64_t>(per_epoch, 1);
    }
    case Stage::dsn:
      return static_cast<std::uint64_t>(config.dsn.steps);
    case Stage::srn:
      return static_cast<std::uint64_t>(config.srn.steps);
  }
  return 0;
}

StageResult run_stage(const TrainConfig& config, Stage stage, const fs::path& out_dir, const RunOptions& options) {
  const RunPaths paths{out_dir};
  if (stage == Stage::dsn && !fs::exists(paths.checkpoint(Stage::translator))) {
    throw SequencingError("stage dsn requires the translator checkpoint " +
                          paths.checkpoint(Stage::translator).string() + "; run `train translator` first");
  }
  if (stage == Stage::srn) {
    for (Stage pre : {Stage::translator, Stage::dsn}) {
      if (!fs::exists(paths.checkpoint(pre))) {
        throw SequencingError("stage srn requires the " + to_string(pre) + " checkpoint " +
                              paths.checkpoint(pre).string() + "; run `train " + to_string(pre) + "` first");
      }
    }
  }
  DirectoryLock lock(out_dir);
  switch (stage) {
    case Stage::translator:
      return run_translator(config, paths, options);
    case Stage::dsn:
      return run_dsn(config, paths, options);
    case Stage::srn:
      return run_srn(config, paths, options);
  }
  throw StateError("unreachable stage");
}

MetricsReport evaluate_run(const TrainConfig& config, const fs::path& run_dir, const fs::path& eval_out,
                           const std::vector<ExternalBaseline>& baselines) {
  const RunPaths paths{run_dir};
  if (!fs::exists(paths.checkpoint(Stage::srn))) {
    throw SequencingError("evaluation requires the srn checkpoint " + paths.checkpoint(Stage::srn).string());
  }
  const Checkpoint c = load_checkpoint(paths.checkpoint(Stage::srn));
  const BuiltNetwork<float> srn = network_from_checkpoint(c, "srn");
  const MicroDatasetManifest manifest = read_manifest(config.data.root / "manifest.txt");
  EvaluateOptions opts;
  opts.out_dir = eval_out;
  opts.config_fingerprint = c.config_fingerprint;
  opts.baselines = baselines;
  return evaluate_pipeline([&srn](const Image& lr) { return super_resolve(srn, lr); }, manifest, opts);
}

void bake_pairs(const TrainConfig& config, const fs::path& run_dir, int count, const fs::path& dest) {
  if (count < 1) throw ConfigError("bake-pairs needs a positive count");
  const FrozenStages frozen = frozen_stages(config, RunPaths{run_dir});
  const TrainingData data = load_training_data(config, false);
  const auto pairs = pairs_for_step(frozen, data.sunny, config.srn.patch_size, count,
                                    stage_seed(config.seed, Stage::srn, SeedPurpose::pairs), false);
  fs::create_directories(dest);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%04zu", i);
    write_png(dest / (std::string(name) + "_lr.png"), pairs[i].lr_rainy);
    write_png(dest / (std::string(name) + "_hr.png"), pairs[i].hr_clean);
  }
}

}  // namespace rainsr
