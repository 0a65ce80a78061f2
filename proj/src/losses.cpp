#include "rainsr/losses.hpp"

#include <cmath>

#include "rainsr/error.hpp"

namespace rainsr {

LossValue loss_adv_ls(const Tensor<float>& disc_out, Target target) {
  if (disc_out.empty()) throw DimensionError("loss_adv_ls: empty discriminator output");
  const double t = target == Target::real ? 1.0 : 0.0;
  const double n = static_cast<double>(disc_out.size());
  LossValue out{0.0, Tensor<float>(disc_out.shape())};
  double acc = 0.0;
  for (std::size_t i = 0; i < disc_out.size(); ++i) {
    const double d = disc_out[i] - t;
    acc += d * d;
    out.grad[i] = static_cast<float>(2.0 * d / n);
  }
  out.value = acc / n;
  return out;
}

LossValue loss_l1(const Tensor<float>& a, const Tensor<float>& b) {
  a.require_same_shape(b, "loss_l1");
  if (a.empty()) throw DimensionError("loss_l1: empty tensors");
  const double n = static_cast<double>(a.size());
  LossValue out{0.0, Tensor<float>(a.shape())};
  double acc = 0.0;
  const float g = static_cast<float>(1.0 / n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += std::abs(d);
    out.grad[i] = d > 0.0 ? g : (d < 0.0 ? -g : 0.0f);
  }
  out.value = acc / n;
  return out;
}

void LossRecord::set(const std::string& name, double value) {
  for (auto& [k, v] : terms_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  terms_.emplace_back(name, value);
}

double LossRecord::get(const std::string& name) const {
  for (const auto& [k, v] : terms_) {
    if (k == name) return v;
  }
  throw Error("loss record has no term '" + name + "'");
}

bool LossRecord::has(const std::string& name) const {
  for (const auto& [k, v] : terms_) {
    if (k == name) return true;
  }
  return false;
}

void LossRecord::require_finite(const std::string& stage) const {
  for (const auto& [k, v] : terms_) {
    if (!std::isfinite(v)) throw DivergenceError(stage + ": non-finite loss term '" + k + "'");
  }
}

void scale_in_place(Tensor<float>& t, float s) {
  for (auto& v : t.values()) v *= s;
}

}  // namespace rainsr
