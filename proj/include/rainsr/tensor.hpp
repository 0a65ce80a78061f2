#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rainsr/error.hpp"

namespace rainsr {

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string shape_string(const Shape& s);

// Dense row-major tensor. Activations use N x C x H x W; parameters use
// whatever rank the layer needs.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data size does not match shape " + shape_string(shape_));
    }
  }

  static Tensor nchw(int n, int c, int h, int w, T fill = T{0}) { return Tensor({n, c, h, w}, fill); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // NCHW accessors; valid only for rank-4 tensors.
  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  std::size_t plane_size() const { return static_cast<std::size_t>(shape_[2]) * static_cast<std::size_t>(shape_[3]); }

  T& at(int in, int ic, int iy, int ix) { return data_[offset(in, ic, iy, ix)]; }
  const T& at(int in, int ic, int iy, int ix) const { return data_[offset(in, ic, iy, ix)]; }

  T* plane(int in, int ic) { return data_.data() + offset(in, ic, 0, 0); }
  const T* plane(int in, int ic) const { return data_.data() + offset(in, ic, 0, 0); }

  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  void require_same_shape(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) {
      throw DimensionError(std::string(what) + ": shape " + shape_string(shape_) + " vs " + shape_string(o.shape_));
    }
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  std::size_t offset(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(ic)) *
                static_cast<std::size_t>(shape_[2]) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(shape_[3]) +
           static_cast<std::size_t>(ix);
  }

  Shape shape_;
  std::vector<T> data_;
};

// Concatenates rank-4 tensors along the batch axis.
template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts);

// Copies sample `index` of a rank-4 tensor into a 1 x C x H x W tensor.
template <typename T>
Tensor<T> slice_sample(const Tensor<T>& t, int index);

}  // namespace rainsr
