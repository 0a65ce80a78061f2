#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rainsr/image.hpp"
#include "rainsr/losses.hpp"
#include "rainsr/nets.hpp"

namespace rainsr {

struct DsnSettings {
  NetworkSpec dsn = NetworkSpec::dsn(16, 1);
  NetworkSpec discriminator = NetworkSpec::patch_disc(16);
  AdamSettings adam{2e-4, 0.5, 0.999, 1e-8};
  double lambda_content = 1.0;
  double lambda_adv = 0.05;

  void validate() const;
};

struct DsnState {
  DsnSettings settings;
  std::uint64_t seed = 0;
  BuiltNetwork<float> dsn;
  BuiltNetwork<float> d_lr;
  OptimizerState<float> opt_dsn;
  OptimizerState<float> opt_d_lr;
  std::uint64_t step = 0;

  static DsnState create(const DsnSettings& settings, std::uint64_t seed);
  void set_learning_rate(double lr);
};

// l1(blur3(dsn_out), blur3(bicubic(src_hr, 1/4))) with its gradient w.r.t. dsn_out.
LossValue loss_content_lowfreq(const Tensor<float>& dsn_out, const Tensor<float>& src_hr);

// DSN update on lambda_content * content + lambda_adv * ls(D_lr(DSN(hr)), real),
// then one D_lr update. Terms: loss_content, loss_g_adv, loss_d_lr.
LossRecord train_step_dsn(DsnState& state, const Tensor<float>& rainy_hr_batch, const Tensor<float>& real_lr_batch);

Image degrade(const BuiltNetwork<float>& dsn, const Image& img);
Image degrade(const DsnState& state, const Image& img);

// Single-channel map at some resolution, values in [0, 1].
struct WeightMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double mean() const;
};

// Raw discriminator output on a model-range batch (N x 1 x h x w).
using DiscFn = std::function<Tensor<float>(const Tensor<float>&)>;

// clamp(D_lr(lr), 0, 1) bilinearly resized to the LR image dimensions.
WeightMap domain_distance_weight(const DiscFn& d_lr, const Image& lr_img);
WeightMap domain_distance_weight(const BuiltNetwork<float>& d_lr, const Image& lr_img);

}  // namespace rainsr
