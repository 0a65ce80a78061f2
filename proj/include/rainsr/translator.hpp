#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rainsr/image.hpp"
#include "rainsr/losses.hpp"
#include "rainsr/nets.hpp"
#include "rainsr/rng.hpp"

namespace rainsr {

struct TranslatorSettings {
  NetworkSpec generator = NetworkSpec::translator_gen(16, 3);
  NetworkSpec discriminator = NetworkSpec::patch_disc(16);
  AdamSettings adam{2e-4, 0.5, 0.999, 1e-8};
  double lambda_cyc = 10.0;
  double lambda_id = 5.0;
  int buffer_capacity = 50;

  void validate() const;
};

// Pool of past generator outputs shown to a discriminator. Each query either
// passes a fresh fake through or swaps it with a stored one (probability 1/2
// once full), driven entirely by the supplied Rng.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 50) : capacity_(capacity) {}

  Tensor<float> query(const Tensor<float>& fakes, Rng& rng);

  int capacity() const { return capacity_; }
  std::size_t size() const { return images_.size(); }
  const std::vector<Tensor<float>>& images() const { return images_; }
  void restore(std::vector<Tensor<float>> images);

  friend bool operator==(const ReplayBuffer& a, const ReplayBuffer& b) {
    return a.capacity_ == b.capacity_ && a.images_ == b.images_;
  }

 private:
  int capacity_;
  std::vector<Tensor<float>> images_;  // each 1 x 3 x H x W
};

struct TranslatorState {
  TranslatorSettings settings;
  std::uint64_t seed = 0;
  BuiltNetwork<float> g_s2r;  // sunny -> rainy
  BuiltNetwork<float> g_r2s;  // rainy -> sunny
  BuiltNetwork<float> d_rainy;
  BuiltNetwork<float> d_sunny;
  OptimizerState<float> opt_g_s2r;
  OptimizerState<float> opt_g_r2s;
  OptimizerState<float> opt_d_rainy;
  OptimizerState<float> opt_d_sunny;
  std::uint64_t step = 0;
  ReplayBuffer buffer_rainy;
  ReplayBuffer buffer_sunny;

  static TranslatorState create(const TranslatorSettings& settings, std::uint64_t seed);
  void set_learning_rate(double lr);
};

// One generator update (adversarial + cycle + identity) followed by one update
// of each discriminator on real vs replayed fakes. Terms recorded:
// loss_g_adv, loss_cycle, loss_id, loss_d_rainy, loss_d_sunny (unweighted).
LossRecord train_step_translator(TranslatorState& state, const Tensor<float>& sunny_batch,
                                 const Tensor<float>& rainy_batch);

using TensorFn = std::function<Tensor<float>(const Tensor<float>&)>;

// l1(G_s2r(r), r) + l1(G_r2s(s), s) for arbitrary generator callables.
double translator_identity_loss(const TensorFn& g_s2r, const TensorFn& g_r2s, const Tensor<float>& sunny,
                                const Tensor<float>& rainy);

Image translate_sunny_to_rainy(const BuiltNetwork<float>& g_s2r, const Image& img);
Image translate_sunny_to_rainy(const TranslatorState& state, const Image& img);

}  // namespace rainsr
