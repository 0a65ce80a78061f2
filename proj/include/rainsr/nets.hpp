#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rainsr/image.hpp"
#include "rainsr/tensor.hpp"

namespace rainsr {

enum class Family { translator_gen, patch_disc, dsn, srn };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct NetworkSpec {
  Family family = Family::translator_gen;
  int base_channels = 16;
  int residual_blocks = 3;
  Scale scale_factor{1, 1};

  static NetworkSpec translator_gen(int base_channels = 16, int residual_blocks = 3);
  static NetworkSpec patch_disc(int base_channels = 16);
  static NetworkSpec dsn(int base_channels = 16, int residual_blocks = 1);
  static NetworkSpec srn(int base_channels = 32, int residual_blocks = 4);

  // Throws DimensionError when the family/scale pairing is inconsistent.
  void validate() const;
  // Required divisor of input H and W.
  int input_multiple() const;
  Shape output_shape(const Shape& input) const;
  // Stable text form stored in checkpoints, e.g. "srn/c32/r4/x4:1".
  std::string describe() const;
  static NetworkSpec parse(const std::string& text);

  friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
    return a.family == b.family && a.base_channels == b.base_channels && a.residual_blocks == b.residual_blocks &&
           a.scale_factor.num == b.scale_factor.num && a.scale_factor.den == b.scale_factor.den;
  }
};

template <typename T>
struct ParamEntry {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Ordered named parameters, each with a gradient slot of the same shape.
// `version` changes whenever values are mutated through the store, which is
// how stale forward traces are detected.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  int add(std::string name, Tensor<T> value);

  std::size_t size() const { return entries_.size(); }
  ParamEntry<T>& entry(std::size_t i) { return entries_[i]; }
  const ParamEntry<T>& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }

  const Tensor<T>& value(int i) const { return entries_[static_cast<std::size_t>(i)].value; }
  Tensor<T>& grad(int i) { return entries_[static_cast<std::size_t>(i)].grad; }

  std::optional<std::size_t> find(const std::string& name) const;

  // Mutable access to a value bumps the version.
  Tensor<T>& mutable_value(std::size_t i) {
    ++version_;
    return entries_[i].value;
  }

  void zero_grad();
  std::size_t parameter_count() const;
  std::uint64_t seed() const { return seed_; }
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<ParamEntry<T>> entries_;
  std::map<std::string, std::size_t> by_name_;
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 0;
};

// Intermediates retained by a forward pass for the matching backward pass.
template <typename T>
class Trace {
 public:
  void push(Tensor<T> t) { saved_.push_back(std::move(t)); }
  Tensor<T> pop();

  bool armed() const { return armed_; }

 private:
  template <typename>
  friend class Network;

  std::vector<Tensor<T>> saved_;
  std::uint64_t version_ = 0;
  const void* owner_ = nullptr;
  bool armed_ = false;
};

template <typename T>
class Layer;

template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, std::shared_ptr<const Layer<T>> root);

  const NetworkSpec& spec() const { return spec_; }

  // Deterministic and free of side effects on `params`. When `trace` is given
  // it is reset and filled for a later backward().
  Tensor<T> forward(const ParamStore<T>& params, const Tensor<T>& x, Trace<T>* trace = nullptr) const;

  // Accumulates parameter gradients into `params` and returns dL/dx. The trace
  // is consumed; reusing it, or using one recorded before the parameters
  // changed, throws StateError.
  Tensor<T> backward(ParamStore<T>& params, Trace<T>& trace, const Tensor<T>& grad_out) const;

  void check_input(const Shape& s) const;

 private:
  NetworkSpec spec_;
  std::shared_ptr<const Layer<T>> root_;
};

struct InitOptions {
  double weight_std = 0.02;
  // When set, std = weight_std / sqrt(fan_in).
  bool fan_in_scaled = false;
  double bias_std = 0.0;
};

template <typename T>
struct BuiltNetwork {
  Network<T> net;
  ParamStore<T> params;

  Tensor<T> operator()(const Tensor<T>& x) const { return net.forward(params, x); }
};

// Pure function of (spec, seed, init). Weights are Gaussian, biases zero by default.
template <typename T>
BuiltNetwork<T> build_network(const NetworkSpec& spec, std::uint64_t seed, const InitOptions& init = {});

// Layer graph only; parameters come from elsewhere (e.g. a checkpoint).
template <typename T>
Network<T> make_network(const NetworkSpec& spec);

struct AdamSettings {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;
  AdamSettings settings;

  static OptimizerState init(const ParamStore<T>& params, const AdamSettings& settings);
};

// Adam with bias correction, reading gradients from the store's slots. Throws
// DivergenceError naming the first parameter with a non-finite gradient
// (before anything is modified).
template <typename T>
void opt_step(ParamStore<T>& params, OptimizerState<T>& state);

struct GradCheckResult {
  double max_rel_error = 0.0;  // over parameter tensors
  double max_abs_error = 0.0;  // over single elements
  std::string worst_parameter;
  std::size_t worst_element = 0;  // largest absolute error within worst_parameter
  std::size_t checked = 0;
};

// Fills the gradient slots of `params` with dL/dtheta for the check loss.
using GradientFn = std::function<void(ParamStore<double>& params)>;
using LossFn = std::function<double(const ParamStore<double>& params)>;

// Central differences over every parameter element. Each parameter tensor is
// scored by ||analytic - fd|| / max(||analytic||, ||fd||) (L2 norms); the
// result holds the worst tensor.
GradCheckResult grad_check(ParamStore<double>& params, const LossFn& loss, const GradientFn& gradient, double eps);

// While alive on the current thread, rectifier layers reuse the sign pattern
// recorded by the first forward pass after construction (or after replay()).
// Finite-difference probes then evaluate the network piece that contains the
// base point, which agrees with the true function in a neighbourhood of it,
// so a perturbation never straddles a kink.
class ActivationPatternFreeze {
 public:
  ActivationPatternFreeze();
  ~ActivationPatternFreeze();
  ActivationPatternFreeze(const ActivationPatternFreeze&) = delete;
  ActivationPatternFreeze& operator=(const ActivationPatternFreeze&) = delete;

  // Switch from recording to replaying; also rewinds.
  void replay();
  // Start the next forward pass at the first recorded pattern.
  void rewind() { cursor_ = 0; }
  bool recording() const { return recording_; }
  // Pattern slot for the next rectifier in forward order.
  std::vector<bool>& next(std::size_t size);

  static ActivationPatternFreeze* current();

 private:
  std::vector<std::vector<bool>> patterns_;
  std::size_t cursor_ = 0;
  bool recording_ = true;
  ActivationPatternFreeze* previous_;
};

// Probe input for a family: 16x16 (8x8 for srn). Smaller maps make instance
// normalization curved enough to spoil central differences at eps 1e-3.
Shape grad_check_input_shape(const NetworkSpec& spec);

// Builds `spec` in 64-bit, probes it with a seeded random input and a fixed
// random projection of the output as the scalar loss. Finite differences run
// under an ActivationPatternFreeze taken at the unperturbed parameters.
GradCheckResult grad_check(const NetworkSpec& spec, std::uint64_t seed, double eps = 1e-3);

// Smallest network of each family used by grad-check.
NetworkSpec minimal_spec(Family f);

}  // namespace rainsr
