#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rainsr/image.hpp"
#include "rainsr/tensor.hpp"

namespace rainsr {

enum class DomainLabel { sunny_hr, rainy_hr, real_lr };

std::string to_string(DomainLabel label);
DomainLabel domain_label_from_string(const std::string& s);

struct DatasetEntry {
  std::filesystem::path path;
  int height = 0;
  int width = 0;
};

struct RejectedFile {
  std::filesystem::path path;
  std::string reason;
};

struct DatasetIndex {
  DomainLabel domain_label = DomainLabel::sunny_hr;
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;   // byte-wise lexicographic by file name
  std::vector<RejectedFile> rejected;  // present but not decodable

  std::size_t size() const { return entries.size(); }
};

// Indexes every decodable raster directly inside `dir` (hidden files ignored).
// Undecodable files land in `rejected`; a file that cannot be opened at all
// throws IngestError; no decodable file at all throws EmptyDatasetError.
DatasetIndex ingest_folder(const std::filesystem::path& dir, DomainLabel label);

// Decodes every entry of an index, in index order.
std::vector<Image> load_images(const DatasetIndex& index);

struct RainParams {
  int streak_count = 14;
  double length_px = 9.0;
  double width_px = 1.0;
  double angle_deg = 12.0;  // from vertical
  double opacity = 0.3;
  double contrast_dim = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Streak {
  double x0, y0, x1, y1;
};

// Segment geometry drawn from p.seed for an h x w image.
std::vector<Streak> rain_streaks(const RainParams& p, int height, int width);

// Per-pixel coverage of a pixel centre by a streak of the given width.
double streak_coverage(const Streak& s, double width_px, double px, double py);

// clamp((1 - dim) img + dim / 2 + sum of anti-aliased bright streaks).
Image synth_rain(const Image& img, const RainParams& p);

// Procedural clean scene: gradient, shapes, and low-amplitude gratings.
Image make_scene(int size, std::uint64_t seed);

struct MicroDatasetSizes {
  int sunny = 40;
  int rainy = 40;
  int real_lr = 40;
  int eval = 8;
  int scene_size = 64;
};

struct EvalTriplet {
  std::string scene_id;
  std::filesystem::path clean_hr;  // relative to dataset root
  std::filesystem::path rainy_hr;
  std::filesystem::path rainy_lr;
};

struct MicroDatasetManifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  MicroDatasetSizes sizes;
  RainParams rain;  // seed field unused; each rainy scene derives its own
  bool paired_eval = true;
  // Domain folder -> (relative file, scene id) in file order.
  std::map<std::string, std::vector<std::pair<std::filesystem::path, std::string>>> files;
  std::vector<EvalTriplet> eval;
};

// Writes <out>/{sunny_hr,rainy_hr,real_lr,eval}/*.png and <out>/manifest.txt.
// Train folders use disjoint scenes; eval triplets are paired.
MicroDatasetManifest make_micro_dataset(const std::filesystem::path& out_dir, std::uint64_t base_seed,
                                        const MicroDatasetSizes& sizes, const RainParams& rain = {});

void write_manifest(const MicroDatasetManifest& m, const std::filesystem::path& path);
MicroDatasetManifest read_manifest(const std::filesystem::path& path);

struct PatchOrigin {
  int entry = 0;  // index into the source list
  int y = 0;
  int x = 0;
};

struct Batch {
  Tensor<float> tensor;  // N x 3 x P x P, model range
  std::vector<PatchOrigin> provenance;
};

// Infinite deterministic stream of random patches. Batch i depends only on
// (images, patch size, batch size, seed, i).
class BatchStream {
 public:
  BatchStream(std::vector<Image> images, int patch_size, int batch_size, std::uint64_t seed);

  static BatchStream from_index(const DatasetIndex& index, int patch_size, int batch_size, std::uint64_t seed);

  Batch batch(std::uint64_t i) const;
  Batch next() { return batch(cursor_++); }
  std::vector<Image> batch_images(std::uint64_t i) const;

  std::uint64_t cursor() const { return cursor_; }
  void seek(std::uint64_t i) { cursor_ = i; }
  int patch_size() const { return patch_size_; }
  int batch_size() const { return batch_size_; }
  std::size_t source_count() const { return images_.size(); }

 private:
  std::vector<PatchOrigin> origins(std::uint64_t i) const;

  std::vector<Image> images_;
  int patch_size_;
  int batch_size_;
  std::uint64_t seed_;
  std::uint64_t cursor_ = 0;
};

}  // namespace rainsr
