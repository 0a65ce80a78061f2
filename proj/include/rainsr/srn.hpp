#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rainsr/dsn.hpp"
#include "rainsr/image.hpp"
#include "rainsr/losses.hpp"
#include "rainsr/nets.hpp"

namespace rainsr {

struct SrnSettings {
  NetworkSpec srn = NetworkSpec::srn(32, 4);
  NetworkSpec discriminator = NetworkSpec::patch_disc(16);
  AdamSettings adam{2e-4, 0.5, 0.999, 1e-8};
  double lambda_pix = 1.0;
  double lambda_adv = 0.05;
  bool use_domain_weights = false;

  void validate() const;
};

struct SrnState {
  SrnSettings settings;
  std::uint64_t seed = 0;
  BuiltNetwork<float> srn;
  BuiltNetwork<float> d_hr;
  OptimizerState<float> opt_srn;
  OptimizerState<float> opt_d_hr;
  std::uint64_t step = 0;

  static SrnState create(const SrnSettings& settings, std::uint64_t seed);
  void set_learning_rate(double lr);
};

struct PseudoPair {
  Image lr_rainy;  // H/4 x W/4
  Image hr_clean;  // H x W
  std::optional<WeightMap> weight_map;  // LR resolution
  int source_entry = -1;  // index into the sunny image list
};

using ImageFn = std::function<Image(const Image&)>;
using WeightFn = std::function<WeightMap(const Image&)>;

// Samples `count` sunny HR patches h (uniform over images and positions, from
// Rng(seed)) and returns (degrade(translate(h)), h) pairs. `weights`, when set,
// attaches a domain-distance map computed on each LR image.
std::vector<PseudoPair> make_pseudo_pairs(const ImageFn& translate, const ImageFn& degrade_fn,
                                          std::span<const Image> sunny, int patch_size, int count, std::uint64_t seed,
                                          const WeightFn& weights = nullptr);

// mean(w * |sr - hr|) / mean(w), w = weight map nearest-upscaled x4 (all ones
// when absent). Gradient w.r.t. sr. `weights` is N x 1 x h x w at LR size.
LossValue loss_pix_weighted(const Tensor<float>& sr, const Tensor<float>& hr,
                            const std::optional<Tensor<float>>& weights = std::nullopt);

// Terms: loss_pix, loss_g_adv, loss_d_hr, mean_weight.
LossRecord train_step_srn(SrnState& state, std::span<const PseudoPair> pairs);

// Output is exactly 4x the input in both dimensions, clamped to [0, 1].
Image super_resolve(const BuiltNetwork<float>& srn, const Image& lr_img);
Image super_resolve(const SrnState& state, const Image& lr_img);

// Inputs smaller than this in either dimension are rejected.
inline constexpr int kMinSuperResolveInput = 8;

}  // namespace rainsr
