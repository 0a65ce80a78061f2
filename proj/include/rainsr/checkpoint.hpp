#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rainsr/dsn.hpp"
#include "rainsr/srn.hpp"
#include "rainsr/tensor.hpp"
#include "rainsr/translator.hpp"

namespace rainsr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Generic container; see docs/checkpoint_format.md for the byte layout.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string stage;  // "translator", "dsn" or "srn"
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;  // kept in insertion order

  const Tensor<float>& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Rejects bad magic, a different format version (VersionError), truncation
// and checksum mismatch (IoError).
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

// Writes <path>.tmp.<pid>, flushes, then renames over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Writes bytes atomically (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

Checkpoint to_checkpoint(const TranslatorState& state, const std::string& fingerprint);
Checkpoint to_checkpoint(const DsnState& state, const std::string& fingerprint);
Checkpoint to_checkpoint(const SrnState& state, const std::string& fingerprint);

// Restore a trainer state. Network specs in the checkpoint must equal those in
// `settings`, otherwise VersionError. Loss weights come from `settings`; the
// optimizer settings (including a scheduled learning rate) come from the file.
TranslatorState translator_from_checkpoint(const Checkpoint& ckpt, const TranslatorSettings& settings);
DsnState dsn_from_checkpoint(const Checkpoint& ckpt, const DsnSettings& settings);
SrnState srn_from_checkpoint(const Checkpoint& ckpt, const SrnSettings& settings);

// Frozen network for inference, rebuilt from the spec stored in the file.
// `role` is one of g_s2r, g_r2s, d_rainy, d_sunny, dsn, d_lr, srn, d_hr.
BuiltNetwork<float> network_from_checkpoint(const Checkpoint& ckpt, const std::string& role);

}  // namespace rainsr
