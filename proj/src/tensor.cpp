#include "rainsr/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace rainsr {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ')';
  return os.str();
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_batch: no tensors");
  Shape shape = parts.front().shape();
  if (shape.size() != 4) throw DimensionError("concat_batch: expected rank-4 tensors");
  int total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 4 || p.c() != shape[1] || p.h() != shape[2] || p.w() != shape[3]) {
      throw DimensionError("concat_batch: mismatched shapes " + shape_string(shape) + " vs " + shape_string(p.shape()));
    }
    total += p.n();
  }
  shape[0] = total;
  std::vector<T> data;
  data.reserve(shape_size(shape));
  for (const auto& p : parts) data.insert(data.end(), p.values().begin(), p.values().end());
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> slice_sample(const Tensor<T>& t, int index) {
  if (t.rank() != 4 || index < 0 || index >= t.n()) throw DimensionError("slice_sample: index out of range");
  const std::size_t per = static_cast<std::size_t>(t.c()) * t.plane_size();
  std::vector<T> data(t.values().begin() + static_cast<std::ptrdiff_t>(per * index),
                      t.values().begin() + static_cast<std::ptrdiff_t>(per * (index + 1)));
  return Tensor<T>({1, t.c(), t.h(), t.w()}, std::move(data));
}

template Tensor<float> concat_batch(std::span<const Tensor<float>>);
template Tensor<double> concat_batch(std::span<const Tensor<double>>);
template Tensor<float> slice_sample(const Tensor<float>&, int);
template Tensor<double> slice_sample(const Tensor<double>&, int);

}  // namespace rainsr
