#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rainsr/tensor.hpp"

namespace rainsr {

// Scalar loss value plus its gradient with respect to the first argument.
struct LossValue {
  double value = 0.0;
  Tensor<float> grad;
};

enum class Target { fake = 0, real = 1 };

// mean((d - target)^2)
LossValue loss_adv_ls(const Tensor<float>& disc_out, Target target);

// mean(|a - b|); gradient w.r.t. a uses sign(0) = 0.
LossValue loss_l1(const Tensor<float>& a, const Tensor<float>& b);

// Ordered named loss terms from one training step.
class LossRecord {
 public:
  void set(const std::string& name, double value);
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, double>>& terms() const { return terms_; }

  // Throws DivergenceError naming the first non-finite term.
  void require_finite(const std::string& stage) const;

 private:
  std::vector<std::pair<std::string, double>> terms_;
};

// Multiplies every element in place.
void scale_in_place(Tensor<float>& t, float s);

}  // namespace rainsr
