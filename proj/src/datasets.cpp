#include "rainsr/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rainsr/error.hpp"
#include "rainsr/image_io.hpp"
#include "rainsr/rng.hpp"
#include "rainsr/text_format.hpp"

namespace fs = std::filesystem;

namespace rainsr {

std::string to_string(DomainLabel label) {
  switch (label) {
    case DomainLabel::sunny_hr:
      return "sunny_hr";
    case DomainLabel::rainy_hr:
      return "rainy_hr";
    case DomainLabel::real_lr:
      return "real_lr";
  }
  return "unknown";
}

DomainLabel domain_label_from_string(const std::string& s) {
  if (s == "sunny_hr") return DomainLabel::sunny_hr;
  if (s == "rainy_hr") return DomainLabel::rainy_hr;
  if (s == "real_lr") return DomainLabel::real_lr;
  throw Error("unknown domain label: " + s);
}

DatasetIndex ingest_folder(const fs::path& dir, DomainLabel label) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IngestError("not a directory: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (e.is_regular_file()) files.push_back(e.path());
  }
  // Byte-wise comparison of the file names keeps order platform-independent.
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  DatasetIndex index;
  index.domain_label = label;
  index.root = dir;
  for (const auto& f : files) {
    {
      std::ifstream probe(f, std::ios::binary);
      if (!probe) throw IngestError("unreadable file: " + f.string());
    }
    try {
      const Image img = read_image(f);
      index.entries.push_back({f, img.height, img.width});
    } catch (const IngestError& e) {
      index.rejected.push_back({f, e.what()});
    }
  }
  if (index.entries.empty()) {
    std::string msg = "no decodable images in " + dir.string();
    if (!index.rejected.empty()) msg += " (" + std::to_string(index.rejected.size()) + " undecodable)";
    throw EmptyDatasetError(msg);
  }
  return index;
}

std::vector<Image> load_images(const DatasetIndex& index) {
  std::vector<Image> images;
  images.reserve(index.entries.size());
  for (const auto& e : index.entries) images.push_back(read_image(e.path));
  return images;
}

void RainParams::validate() const {
  if (streak_count < 0) throw RangeError("streak_count must be non-negative");
  if (!(length_px >= 0.0) || !(width_px >= 0.0)) throw RangeError("streak length/width must be non-negative");
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw RangeError("opacity must lie in [0, 1]");
  if (!(contrast_dim >= 0.0 && contrast_dim < 1.0)) throw RangeError("contrast_dim must lie in [0, 1)");
}

std::vector<Streak> rain_streaks(const RainParams& p, int height, int width) {
  Rng rng(p.seed);
  const double theta = p.angle_deg * std::numbers::pi / 180.0;
  const double dx = std::sin(theta) * p.length_px * 0.5;
  const double dy = std::cos(theta) * p.length_px * 0.5;
  std::vector<Streak> streaks;
  streaks.reserve(static_cast<std::size_t>(p.streak_count));
  for (int i = 0; i < p.streak_count; ++i) {
    const double cx = rng.uniform(0.0, width);
    const double cy = rng.uniform(0.0, height);
    streaks.push_back({cx - dx, cy - dy, cx + dx, cy + dy});
  }
  return streaks;
}

double streak_coverage(const Streak& s, double width_px, double px, double py) {
  const double vx = s.x1 - s.x0;
  const double vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - s.x0) * vx + (py - s.y0) * vy) / len2, 0.0, 1.0);
  const double ex = px - (s.x0 + t * vx);
  const double ey = py - (s.y0 + t * vy);
  const double d = std::sqrt(ex * ex + ey * ey);
  return std::clamp(width_px * 0.5 + 0.5 - d, 0.0, 1.0);
}

Image synth_rain(const Image& img, const RainParams& p) {
  p.validate();
  img.validate();
  std::vector<double> streak_sum(static_cast<std::size_t>(img.height) * img.width, 0.0);
  if (p.opacity > 0.0) {
    const double reach = p.width_px * 0.5 + 1.0;
    for (const Streak& s : rain_streaks(p, img.height, img.width)) {
      const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - reach)));
      const int y_hi = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + reach)));
      const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - reach)));
      const int x_hi = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + reach)));
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          streak_sum[static_cast<std::size_t>(y) * img.width + x] +=
              p.opacity * streak_coverage(s, p.width_px, x + 0.5, y + 0.5);
        }
      }
    }
  }
  Image out(img.height, img.width);
  const double keep = 1.0 - p.contrast_dim;
  const double lift = p.contrast_dim * 0.5;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double s = streak_sum[static_cast<std::size_t>(y) * img.width + x];
      for (int c = 0; c < Image::kChannels; ++c) {
        if (s == 0.0 && p.contrast_dim == 0.0) {
          out.at(y, x, c) = img.at(y, x, c);
          continue;
        }
        const double v = keep * img.at(y, x, c) + lift + s;
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

namespace {

struct Rgb {
  double r, g, b;
  double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
};

Rgb random_color(Rng& rng, double lo, double hi) { return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)}; }

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Image make_scene(int size, std::uint64_t seed) {
  Rng rng(seed);
  Image img(size, size);
  std::vector<double> acc(img.data.size());

  const Rgb c0 = random_color(rng, 0.15, 0.85);
  const Rgb c1 = random_color(rng, 0.15, 0.85);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double gx = std::cos(phi);
  const double gy = std::sin(phi);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = ((x + 0.5) / size - 0.5) * gx + ((y + 0.5) / size - 0.5) * gy + 0.5;
      const double t = std::clamp(u, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) acc[(static_cast<std::size_t>(y) * size + x) * 3 + c] = (1.0 - t) * c0[c] + t * c1[c];
    }
  }

  const int shapes = 3 + static_cast<int>(rng.below(5));
  for (int k = 0; k < shapes; ++k) {
    const Rgb col = random_color(rng, 0.05, 0.95);
    const bool disc = rng.uniform() < 0.5;
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double rx = rng.uniform(0.08, 0.3) * size;
    const double ry = disc ? rx : rng.uniform(0.08, 0.3) * size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double px = x + 0.5 - cx;
        const double py = y + 0.5 - cy;
        // Signed distance to the shape boundary (negative inside).
        const double d = disc ? std::sqrt(px * px + py * py) - rx : std::max(std::abs(px) - rx, std::abs(py) - ry);
        const double alpha = smoothstep01(0.5 - d);
        if (alpha <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          double& v = acc[(static_cast<std::size_t>(y) * size + x) * 3 + c];
          v = (1.0 - alpha) * v + alpha * col[c];
        }
      }
    }
  }

  const int gratings = 1 + static_cast<int>(rng.below(2));
  for (int k = 0; k < gratings; ++k) {
    const double amp = rng.uniform(0.02, 0.05);
    const double freq = rng.uniform(0.15, 0.6);
    const double dir = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double fx = freq * std::cos(dir);
    const double fy = freq * std::sin(dir);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double g = amp * std::sin(fx * x + fy * y + phase);
        for (int c = 0; c < 3; ++c) acc[(static_cast<std::size_t>(y) * size + x) * 3 + c] += g;
      }
    }
  }

  for (std::size_t i = 0; i < acc.size(); ++i) img.data[i] = static_cast<float>(std::clamp(acc[i], 0.0, 1.0));
  return img;
}

namespace {

constexpr const char* kManifestFormat = "rainsr-micro/1";

std::string scene_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05d", id);
  return buf;
}

// Each rainy scene gets its own streak layout.
RainParams rain_for_scene(const RainParams& base, std::uint64_t dataset_seed, int scene_id) {
  RainParams p = base;
  p.seed = derive_seed(derive_seed(dataset_seed, 0x5241494EULL), static_cast<std::uint64_t>(scene_id));
  return p;
}

}  // namespace

MicroDatasetManifest make_micro_dataset(const fs::path& out_dir, std::uint64_t base_seed, const MicroDatasetSizes& sizes,
                                        const RainParams& rain) {
  rain.validate();
  if (sizes.scene_size < 4 || sizes.scene_size % 4 != 0) throw DimensionError("scene size must be a positive multiple of 4");
  if (sizes.sunny < 0 || sizes.rainy < 0 || sizes.real_lr < 0 || sizes.eval < 0) throw RangeError("negative split size");

  std::error_code ec;
  for (const char* sub : {"sunny_hr", "rainy_hr", "real_lr", "eval"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  MicroDatasetManifest m;
  m.root = out_dir;
  m.seed = base_seed;
  m.sizes = sizes;
  m.rain = rain;
  m.rain.seed = 0;
  m.paired_eval = true;

  const std::uint64_t scene_seed_root = derive_seed(base_seed, 0x5343454EULL);
  auto scene = [&](int id) { return make_scene(sizes.scene_size, derive_seed(scene_seed_root, static_cast<std::uint64_t>(id))); };

  int next_id = 0;
  for (int i = 0; i < sizes.sunny; ++i, ++next_id) {
    const fs::path rel = fs::path("sunny_hr") / (scene_name(next_id) + ".png");
    write_png(out_dir / rel, scene(next_id));
    m.files["sunny_hr"].emplace_back(rel, scene_name(next_id));
  }
  for (int i = 0; i < sizes.rainy; ++i, ++next_id) {
    const fs::path rel = fs::path("rainy_hr") / (scene_name(next_id) + ".png");
    write_png(out_dir / rel, synth_rain(scene(next_id), rain_for_scene(rain, base_seed, next_id)));
    m.files["rainy_hr"].emplace_back(rel, scene_name(next_id));
  }
  for (int i = 0; i < sizes.real_lr; ++i, ++next_id) {
    const fs::path rel = fs::path("real_lr") / (scene_name(next_id) + ".png");
    const Image rainy = quantize8(synth_rain(scene(next_id), rain_for_scene(rain, base_seed, next_id)));
    write_png(out_dir / rel, resize_bicubic(rainy, {1, 4}));
    m.files["real_lr"].emplace_back(rel, scene_name(next_id));
  }
  for (int i = 0; i < sizes.eval; ++i, ++next_id) {
    const std::string id = scene_name(next_id);
    EvalTriplet t{id, fs::path("eval") / (id + "_clean_hr.png"), fs::path("eval") / (id + "_rainy_hr.png"),
                  fs::path("eval") / (id + "_rainy_lr.png")};
    const Image clean = scene(next_id);
    // LR is derived from the HR exactly as stored on disk.
    const Image rainy = quantize8(synth_rain(clean, rain_for_scene(rain, base_seed, next_id)));
    write_png(out_dir / t.clean_hr, clean);
    write_png(out_dir / t.rainy_hr, rainy);
    write_png(out_dir / t.rainy_lr, resize_bicubic(rainy, {1, 4}));
    m.eval.push_back(t);
  }
  write_manifest(m, out_dir / "manifest.txt");
  return m;
}

void write_manifest(const MicroDatasetManifest& m, const fs::path& path) {
  std::ostringstream os;
  os << "# procedural rain micro-dataset\n";
  os << "format = " << kManifestFormat << "\n";
  os << "seed = " << m.seed << "\n";
  os << "scene_size = " << m.sizes.scene_size << "\n";
  os << "count.sunny_hr = " << m.sizes.sunny << "\n";
  os << "count.rainy_hr = " << m.sizes.rainy << "\n";
  os << "count.real_lr = " << m.sizes.real_lr << "\n";
  os << "count.eval = " << m.sizes.eval << "\n";
  os << "rain.streak_count = " << m.rain.streak_count << "\n";
  os << "rain.length_px = " << format_double(m.rain.length_px) << "\n";
  os << "rain.width_px = " << format_double(m.rain.width_px) << "\n";
  os << "rain.angle_deg = " << format_double(m.rain.angle_deg) << "\n";
  os << "rain.opacity = " << format_double(m.rain.opacity) << "\n";
  os << "rain.contrast_dim = " << format_double(m.rain.contrast_dim) << "\n";
  os << "paired_eval = " << (m.paired_eval ? "true" : "false") << "\n";
  for (const char* domain : {"sunny_hr", "rainy_hr", "real_lr"}) {
    os << "\n[" << domain << "]\n";
    if (auto it = m.files.find(domain); it != m.files.end()) {
      for (const auto& [rel, scene] : it->second) os << rel.generic_string() << " = " << scene << "\n";
    }
  }
  os << "\n[eval]\n";
  for (const auto& t : m.eval) {
    os << t.scene_id << " = " << t.clean_hr.generic_string() << " | " << t.rainy_hr.generic_string() << " | "
       << t.rainy_lr.generic_string() << "\n";
  }
  write_text_file(path, os.str());
}

MicroDatasetManifest read_manifest(const fs::path& path) {
  const KeyValueDocument doc = parse_key_value(read_text_file(path), path.string());
  MicroDatasetManifest m;
  m.root = path.parent_path();
  bool saw_format = false;
  for (const auto& line : doc.lines) {
    auto fail = [&](const std::string& why) {
      throw ManifestError(path.string() + ":" + std::to_string(line.line) + ": " + why);
    };
    if (line.section.empty()) {
      const std::string& k = line.key;
      const std::string& v = line.value;
      if (k == "format") {
        if (v != kManifestFormat) fail("unsupported manifest format '" + v + "'");
        saw_format = true;
      } else if (k == "seed") {
        m.seed = parse_u64(v, k, line.line);
      } else if (k == "scene_size") {
        m.sizes.scene_size = parse_int(v, k, line.line);
      } else if (k == "count.sunny_hr") {
        m.sizes.sunny = parse_int(v, k, line.line);
      } else if (k == "count.rainy_hr") {
        m.sizes.rainy = parse_int(v, k, line.line);
      } else if (k == "count.real_lr") {
        m.sizes.real_lr = parse_int(v, k, line.line);
      } else if (k == "count.eval") {
        m.sizes.eval = parse_int(v, k, line.line);
      } else if (k == "rain.streak_count") {
        m.rain.streak_count = parse_int(v, k, line.line);
      } else if (k == "rain.length_px") {
        m.rain.length_px = parse_double(v, k, line.line);
      } else if (k == "rain.width_px") {
        m.rain.width_px = parse_double(v, k, line.line);
      } else if (k == "rain.angle_deg") {
        m.rain.angle_deg = parse_double(v, k, line.line);
      } else if (k == "rain.opacity") {
        m.rain.opacity = parse_double(v, k, line.line);
      } else if (k == "rain.contrast_dim") {
        m.rain.contrast_dim = parse_double(v, k, line.line);
      } else if (k == "paired_eval") {
        m.paired_eval = parse_bool(v, k, line.line);
      } else {
        fail("unknown key '" + k + "'");
      }
    } else if (line.section == "eval") {
      std::vector<std::string> parts;
      std::stringstream ss(line.value);
      std::string part;
      while (std::getline(ss, part, '|')) parts.push_back(trim(part));
      if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty()) {
        fail("eval entry needs 'clean_hr | rainy_hr | rainy_lr'");
      }
      m.eval.push_back({line.key, parts[0], parts[1], parts[2]});
    } else if (line.section == "sunny_hr" || line.section == "rainy_hr" || line.section == "real_lr") {
      m.files[line.section].emplace_back(fs::path(line.key), line.value);
    } else {
      fail("unknown section [" + line.section + "]");
    }
  }
  if (!saw_format) throw ManifestError(path.string() + ": missing 'format' key");
  return m;
}

BatchStream::BatchStream(std::vector<Image> images, int patch_size, int batch_size, std::uint64_t seed)
    : images_(std::move(images)), patch_size_(patch_size), batch_size_(batch_size), seed_(seed) {
  if (images_.empty()) throw EmptyDatasetError("batch stream over an empty image list");
  if (batch_size_ < 1) throw DimensionError("batch size must be positive");
  if (patch_size_ < 1) throw DimensionError("patch size must be positive");
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (images_[i].height < patch_size_ || images_[i].width < patch_size_) {
      throw DimensionError("image " + std::to_string(i) + " (" + std::to_string(images_[i].height) + "x" +
                           std::to_string(images_[i].width) + ") is smaller than patch size " +
                           std::to_string(patch_size_));
    }
  }
}

BatchStream BatchStream::from_index(const DatasetIndex& index, int patch_size, int batch_size, std::uint64_t seed) {
  return BatchStream(load_images(index), patch_size, batch_size, seed);
}

std::vector<PatchOrigin> BatchStream::origins(std::uint64_t i) const {
  Rng rng(derive_seed(seed_, i));
  std::vector<PatchOrigin> out;
  out.reserve(static_cast<std::size_t>(batch_size_));
  for (int b = 0; b < batch_size_; ++b) {
    PatchOrigin o;
    o.entry = static_cast<int>(rng.below(images_.size()));
    const Image& img = images_[static_cast<std::size_t>(o.entry)];
    o.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - patch_size_ + 1)));
    o.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - patch_size_ + 1)));
    out.push_back(o);
  }
  return out;
}

std::vector<Image> BatchStream::batch_images(std::uint64_t i) const {
  std::vector<Image> patches;
  for (const auto& o : origins(i)) {
    patches.push_back(crop(images_[static_cast<std::size_t>(o.entry)], o.y, o.x, patch_size_, patch_size_));
  }
  return patches;
}

Batch BatchStream::batch(std::uint64_t i) const {
  Batch b;
  b.provenance = origins(i);
  std::vector<Image> patches;
  for (const auto& o : b.provenance) {
    patches.push_back(crop(images_[static_cast<std::size_t>(o.entry)], o.y, o.x, patch_size_, patch_size_));
  }
  b.tensor = to_model_range(patches);
  return b;
}

}  // namespace rainsr
