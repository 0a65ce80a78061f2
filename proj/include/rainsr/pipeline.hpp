#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rainsr/checkpoint.hpp"
#include "rainsr/config.hpp"
#include "rainsr/evaluation.hpp"
#include "rainsr/losses.hpp"

namespace rainsr {

enum class Stage { translator = 1, dsn = 2, srn = 3 };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

// Seed splitting rule: derive_seed(master, 256 * stage index + purpose).
enum class SeedPurpose : std::uint64_t { init = 0, stream_a = 1, stream_b = 2, pairs = 3 };
std::uint64_t stage_seed(std::uint64_t master, Stage stage, SeedPurpose purpose);

struct RunPaths {
  std::filesystem::path out_dir;

  std::filesystem::path checkpoint(Stage s) const { return out_dir / (to_string(s) + ".ckpt"); }
  std::filesystem::path loss_log(Stage s) const { return out_dir / (to_string(s) + "_loss.csv"); }
  std::filesystem::path snapshot(Stage s, std::uint64_t step) const {
    return out_dir / (to_string(s) + "_step" + std::to_string(step) + ".ckpt");
  }
  std::filesystem::path manifest() const { return out_dir / "run_manifest.txt"; }
  std::filesystem::path lock() const { return out_dir / ".rainsr.lock"; }
};

struct StageRecord {
  Stage stage = Stage::translator;
  std::string config_fingerprint;
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
  double wall_seconds = 0.0;
  std::uint64_t steps = 0;
};

struct RunManifest {
  std::vector<StageRecord> records;

  // Drops records of `r.stage` and every later stage, then appends `r`, so
  // stages always appear in pipeline order.
  void record(const StageRecord& r);
  std::string to_text() const;
  static RunManifest parse(const std::string& text, const std::string& source);
  static RunManifest load(const std::filesystem::path& path);  // empty when absent
};

// Exclusive ownership of an output directory; released on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& out_dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct RunOptions {
  std::optional<std::filesystem::path> resume;  // checkpoint of this stage
  // Stop (and checkpoint) after this many completed steps even if the
  // configured length is longer. Resuming later continues bit-exactly.
  std::optional<std::uint64_t> stop_after;
  // Extra checkpoints written (to RunPaths::snapshot) when these step counts
  // are reached; training continues.
  std::vector<std::uint64_t> snapshots;
  std::ostream* progress = nullptr;
  int progress_every = 50;
};

struct StageResult {
  Checkpoint checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path loss_log;
  std::vector<LossRecord> losses;  // steps run by this call only
  double wall_seconds = 0.0;
  std::uint64_t total_steps = 0;
};

// Training images of one run, ingested from <data.root>/{sunny_hr,rainy_hr,real_lr}.
struct TrainingData {
  std::vector<Image> sunny;
  std::vector<Image> rainy;
  std::vector<Image> real_lr;
};

// Checks the expected folder sizes when the config sets them.
TrainingData load_training_data(const TrainConfig& config, bool need_real_lr);

std::uint64_t stage_total_steps(const TrainConfig& config, Stage stage, const TrainingData& data);

// Runs one stage in `out_dir` (locked for the duration). dsn needs the
// translator checkpoint and srn needs both, otherwise SequencingError.
StageResult run_stage(const TrainConfig& config, Stage stage, const std::filesystem::path& out_dir,
                      const RunOptions& options = {});

// The srn checkpoint of `run_dir` scored on <data.root>/manifest.txt.
MetricsReport evaluate_run(const TrainConfig& config, const std::filesystem::path& run_dir,
                           const std::filesystem::path& eval_out, const std::vector<ExternalBaseline>& baselines = {});

// Writes `count` pseudo-pairs of the trained run as pair_%04d_{lr,hr}.png.
void bake_pairs(const TrainConfig& config, const std::filesystem::path& run_dir, int count,
                const std::filesystem::path& dest);

}  // namespace rainsr
