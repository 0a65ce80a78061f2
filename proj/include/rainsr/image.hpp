#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rainsr/tensor.hpp"

namespace rainsr {

// H x W x 3 raster, channel-last, values in [0, 1].
struct Image {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);
  Image(int h, int w, std::vector<float> values);

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c]; }

  std::size_t size() const { return data.size(); }

  // Throws RangeError if any element is non-finite or outside [0, 1].
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// Positive rational scale factor num/den.
struct Scale {
  int num = 1;
  int den = 1;

  double value() const { return static_cast<double>(num) / den; }
};

// Separable Catmull-Rom (a = -0.5) resampling with edge-clamp borders.
// Downscaling widens the kernel by the reduction factor (antialiasing).
Image resize_bicubic(const Image& img, Scale scale);

// Largest top-left crop whose dimensions are multiples of m.
Image crop_to_multiple(const Image& img, int m);

struct PatchSampleSpec {
  int patch_size = 0;
  int count = 0;
  std::uint64_t seed = 0;
};

// Top-left coordinates (y, x) drawn uniformly with replacement from Rng(spec.seed).
std::vector<std::pair<int, int>> sample_patch_origins(int height, int width, const PatchSampleSpec& spec);

std::vector<Image> extract_patches(const Image& img, const PatchSampleSpec& spec);

Image crop(const Image& img, int y, int x, int h, int w);

// x -> 2x - 1. Throws RangeError for values outside [0, 1].
double to_model_range(double v);
// y -> (y + 1) / 2 clamped to [0, 1].
double from_model_range(double v);

// Image -> 1 x 3 x H x W tensor in [-1, 1].
Tensor<float> to_model_range(const Image& img);
// Several equally sized images -> N x 3 x H x W tensor.
Tensor<float> to_model_range(std::span<const Image> imgs);
// Sample `index` of an N x 3 x H x W tensor back to an Image, clamping.
Image from_model_range(const Tensor<float>& t, int index = 0);
std::vector<Image> batch_from_model_range(const Tensor<float>& t);

// Nearest-neighbour enlargement by an integer factor (used for display grids).
Image enlarge_nearest(const Image& img, int factor);

double mean_abs_diff(const Image& a, const Image& b);
double max_abs_diff(const Image& a, const Image& b);

}  // namespace rainsr
