#pragma once

#include <vector>

#include "rainsr/image.hpp"
#include "rainsr/tensor.hpp"

namespace rainsr {

// Catmull-Rom cubic kernel with a = -0.5.
double catmull_rom(double x);

// Dense 1-D resampling matrix (out x in, row-major) shared by the image-level
// resize and the differentiable network skip connections.
struct ResampleMatrix {
  int in = 0;
  int out = 0;
  std::vector<double> weights;

  double operator()(int o, int i) const { return weights[static_cast<std::size_t>(o) * in + i]; }
};

ResampleMatrix bicubic_matrix(int in, Scale scale);
ResampleMatrix bilinear_matrix(int in, int out);

// Linear plane resampler: out = Ry * X * Rx^T for every (sample, channel) plane.
// No clamping, so it is an exact linear operator with an exact adjoint.
class PlaneResampler {
 public:
  PlaneResampler(ResampleMatrix rows, ResampleMatrix cols);

  static PlaneResampler bicubic(int h, int w, Scale scale);
  static PlaneResampler bilinear(int in_h, int in_w, int out_h, int out_w);

  int in_h() const { return rows_.in; }
  int in_w() const { return cols_.in; }
  int out_h() const { return rows_.out; }
  int out_w() const { return cols_.out; }

  template <typename T>
  Tensor<T> apply(const Tensor<T>& x) const;
  template <typename T>
  Tensor<T> adjoint(const Tensor<T>& g) const;

 private:
  ResampleMatrix rows_;
  ResampleMatrix cols_;
};

// Differentiable tensor bicubic resize (no clamp).
template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& x, Scale scale);

// 3 x 3 box filter with edge-clamp borders, and its adjoint.
template <typename T>
Tensor<T> box_blur3(const Tensor<T>& x);
template <typename T>
Tensor<T> box_blur3_adjoint(const Tensor<T>& g);

// Output dimension for `in` under `scale`; throws DimensionError if not integral.
int scaled_dim(int in, Scale scale);

}  // namespace rainsr
