#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "rainsr/datasets.hpp"
#include "rainsr/dsn.hpp"
#include "rainsr/srn.hpp"
#include "rainsr/translator.hpp"

namespace rainsr {

enum class Profile { desk, paper };

std::string to_string(Profile p);

enum class LrSchedule { constant, linear_decay };

struct DataConfig {
  std::filesystem::path root;
  MicroDatasetSizes micro;
  RainParams rain;
  // Expected folder sizes for ingestion checks; 0 disables the check.
  int expected_sunny = 0;
  int expected_rainy = 0;
};

struct TranslatorStageConfig {
  int steps = 300;  // used when epochs == 0
  int epochs = 0;   // one epoch = one pass over the smaller folder
  int batch_size = 4;
  int patch_size = 64;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  int base_channels = 16;
  int residual_blocks = 3;
  int disc_channels = 16;
  int buffer_capacity = 50;
  LrSchedule schedule = LrSchedule::constant;
};

struct DsnStageConfig {
  int steps = 200;
  int batch_size = 4;
  int patch_size = 64;  // HR side; LR patches are patch_size / 4
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_content = 1.0;
  double lambda_adv = 0.05;
  int base_channels = 16;
  int residual_blocks = 1;
  int disc_channels = 16;
  LrSchedule schedule = LrSchedule::constant;
};

struct SrnStageConfig {
  int steps = 300;
  int batch_size = 4;
  int patch_size = 64;  // HR side
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_pix = 1.0;
  double lambda_adv = 0.05;
  int base_channels = 32;
  int residual_blocks = 4;
  int disc_channels = 16;
  bool use_domain_weights = false;
  LrSchedule schedule = LrSchedule::constant;
};

struct TrainConfig {
  Profile profile = Profile::desk;
  std::uint64_t seed = 0;
  int scale = 4;
  DataConfig data;
  TranslatorStageConfig translator;
  DsnStageConfig dsn;
  SrnStageConfig srn;

  static TrainConfig defaults(Profile p);

  // Every effective setting as sorted "section.key = value" lines.
  std::string canonical_text() const;
  // Hex FNV-1a of canonical_text().
  std::string fingerprint() const;

  TranslatorSettings translator_settings() const;
  DsnSettings dsn_settings() const;
  SrnSettings srn_settings() const;
};

// Parses the key = value format with [translator]/[dsn]/[srn]/[data]
// sections. `profile` selects the defaults the file then overrides. Unknown
// keys, bad values, scale != 4, and a missing dataset root (paper profile,
// no RAINSR_DATA_ROOT) throw ConfigError naming the key and line.
TrainConfig parse_config(const std::string& text, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path);

// Learning rate at `step` of `total` under a schedule (linear decay runs to
// zero over the final half).
double scheduled_lr(double base, LrSchedule schedule, std::uint64_t step, std::uint64_t total);

}  // namespace rainsr
