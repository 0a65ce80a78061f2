#include "rainsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rainsr/resample.hpp"
#include "rainsr/rng.hpp"

namespace rainsr {

Image::Image(int h, int w, float fill) : height(h), width(w) {
  if (h < 1 || w < 1) throw DimensionError("image dimensions must be positive");
  data.assign(static_cast<std::size_t>(h) * w * kChannels, fill);
}

Image::Image(int h, int w, std::vector<float> values) : height(h), width(w), data(std::move(values)) {
  if (h < 1 || w < 1) throw DimensionError("image dimensions must be positive");
  if (data.size() != static_cast<std::size_t>(h) * w * kChannels) {
    throw DimensionError("image data size does not match " + std::to_string(h) + "x" + std::to_string(w) + "x3");
  }
}

void Image::validate() const {
  if (height < 1 || width < 1 || data.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw DimensionError("malformed image");
  }
  for (float v : data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) throw RangeError("image value outside [0, 1]: " + std::to_string(v));
  }
}

Image resize_bicubic(const Image& img, Scale scale) {
  const ResampleMatrix rows = bicubic_matrix(img.height, scale);
  const ResampleMatrix cols = bicubic_matrix(img.width, scale);
  Image out(rows.out, cols.out);
  // Accumulate in double so normalized weights reproduce constants exactly.
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * cols.out * Image::kChannels);
  for (int y = 0; y < img.height; ++y) {
    for (int o = 0; o < cols.out; ++o) {
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int x = 0; x < img.width; ++x) {
          const double w = cols(o, x);
          if (w != 0.0) acc += w * img.at(y, x, c);
        }
        tmp[(static_cast<std::size_t>(y) * cols.out + o) * Image::kChannels + c] = acc;
      }
    }
  }
  for (int o = 0; o < rows.out; ++o) {
    for (int q = 0; q < cols.out; ++q) {
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int y = 0; y < img.height; ++y) {
          const double w = rows(o, y);
          if (w != 0.0) acc += w * tmp[(static_cast<std::size_t>(y) * cols.out + q) * Image::kChannels + c];
        }
        out.at(o, q, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > img.height || x0 + w > img.width) {
    throw DimensionError("crop window outside image");
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = &img.data[(static_cast<std::size_t>(y0 + y) * img.width + x0) * Image::kChannels];
    std::copy(src, src + static_cast<std::ptrdiff_t>(w) * Image::kChannels,
              &out.data[static_cast<std::size_t>(y) * w * Image::kChannels]);
  }
  return out;
}

Image crop_to_multiple(const Image& img, int m) {
  if (m < 1) throw DimensionError("crop multiple must be positive");
  if (img.height < m || img.width < m) {
    throw DimensionError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                         " is smaller than multiple " + std::to_string(m));
  }
  return crop(img, 0, 0, img.height / m * m, img.width / m * m);
}

std::vector<std::pair<int, int>> sample_patch_origins(int height, int width, const PatchSampleSpec& spec) {
  if (spec.patch_size < 1 || spec.patch_size > std::min(height, width)) {
    throw DimensionError("patch size " + std::to_string(spec.patch_size) + " does not fit a " + std::to_string(height) +
                         "x" + std::to_string(width) + " image");
  }
  if (spec.count < 0) throw DimensionError("negative patch count");
  Rng rng(spec.seed);
  const auto ny = static_cast<std::uint64_t>(height - spec.patch_size + 1);
  const auto nx = static_cast<std::uint64_t>(width - spec.patch_size + 1);
  std::vector<std::pair<int, int>> origins;
  origins.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const int y = static_cast<int>(rng.below(ny));
    const int x = static_cast<int>(rng.below(nx));
    origins.emplace_back(y, x);
  }
  return origins;
}

std::vector<Image> extract_patches(const Image& img, const PatchSampleSpec& spec) {
  std::vector<Image> patches;
  for (auto [y, x] : sample_patch_origins(img.height, img.width, spec)) {
    patches.push_back(crop(img, y, x, spec.patch_size, spec.patch_size));
  }
  return patches;
}

double to_model_range(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw RangeError("value outside [0, 1]: " + std::to_string(v));
  return 2.0 * v - 1.0;
}

double from_model_range(double v) { return std::clamp((v + 1.0) * 0.5, 0.0, 1.0); }

Tensor<float> to_model_range(std::span<const Image> imgs) {
  if (imgs.empty()) throw DimensionError("empty image batch");
  const int h = imgs.front().height;
  const int w = imgs.front().width;
  auto t = Tensor<float>::nchw(static_cast<int>(imgs.size()), Image::kChannels, h, w);
  for (int n = 0; n < static_cast<int>(imgs.size()); ++n) {
    const Image& img = imgs[static_cast<std::size_t>(n)];
    if (img.height != h || img.width != w) throw DimensionError("images in a batch must share dimensions");
    img.validate();
    for (int c = 0; c < Image::kChannels; ++c) {
      float* dst = t.plane(n, c);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) dst[y * w + x] = 2.0f * img.at(y, x, c) - 1.0f;
      }
    }
  }
  return t;
}

Tensor<float> to_model_range(const Image& img) { return to_model_range(std::span<const Image>(&img, 1)); }

Image from_model_range(const Tensor<float>& t, int index) {
  if (t.rank() != 4 || t.c() != Image::kChannels || index < 0 || index >= t.n()) {
    throw DimensionError("expected N x 3 x H x W tensor, got " + shape_string(t.shape()));
  }
  Image img(t.h(), t.w());
  for (int c = 0; c < Image::kChannels; ++c) {
    const float* src = t.plane(index, c);
    for (int y = 0; y < t.h(); ++y) {
      for (int x = 0; x < t.w(); ++x) {
        const float v = src[y * t.w() + x];
        img.at(y, x, c) = std::isnan(v) ? 0.0f : std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
      }
    }
  }
  return img;
}

std::vector<Image> batch_from_model_range(const Tensor<float>& t) {
  std::vector<Image> out;
  for (int n = 0; n < t.n(); ++n) out.push_back(from_model_range(t, n));
  return out;
}

Image enlarge_nearest(const Image& img, int factor) {
  Image out(img.height * factor, img.width * factor);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = img.at(y / factor, x / factor, c);
    }
  }
  return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("mean_abs_diff: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return acc / static_cast<double>(a.data.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("max_abs_diff: dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return m;
}

}  // namespace rainsr
