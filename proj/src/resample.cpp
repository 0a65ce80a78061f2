#include "rainsr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rainsr {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  const double t = std::abs(x);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

int scaled_dim(int in, Scale scale) {
  if (scale.num <= 0 || scale.den <= 0) throw DimensionError("scale must be positive");
  const long long prod = static_cast<long long>(in) * scale.num;
  if (in <= 0 || prod % scale.den != 0 || prod / scale.den <= 0) {
    throw DimensionError("dimension " + std::to_string(in) + " times " + std::to_string(scale.num) + "/" +
                         std::to_string(scale.den) + " is not a positive integer");
  }
  return static_cast<int>(prod / scale.den);
}

ResampleMatrix bicubic_matrix(int in, Scale scale) {
  ResampleMatrix m;
  m.in = in;
  m.out = scaled_dim(in, scale);
  m.weights.assign(static_cast<std::size_t>(m.out) * in, 0.0);
  const double s = static_cast<double>(m.out) / in;
  const double shrink = std::min(s, 1.0);
  const double half_support = 2.0 / shrink;
  for (int o = 0; o < m.out; ++o) {
    const double u = (o + 0.5) / s - 0.5;
    const int first = static_cast<int>(std::floor(u - half_support));
    const int last = static_cast<int>(std::ceil(u + half_support));
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      const double w = catmull_rom((u - i) * shrink);
      if (w == 0.0) continue;
      const int src = std::clamp(i, 0, in - 1);
      m.weights[static_cast<std::size_t>(o) * in + src] += w;
      total += w;
    }
    for (int i = 0; i < in; ++i) m.weights[static_cast<std::size_t>(o) * in + i] /= total;
  }
  return m;
}

ResampleMatrix bilinear_matrix(int in, int out) {
  if (in <= 0 || out <= 0) throw DimensionError("bilinear_matrix: non-positive size");
  ResampleMatrix m;
  m.in = in;
  m.out = out;
  m.weights.assign(static_cast<std::size_t>(out) * in, 0.0);
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double u = (o + 0.5) * ratio - 0.5;
    const int i0 = static_cast<int>(std::floor(u));
    const double f = u - i0;
    m.weights[static_cast<std::size_t>(o) * in + std::clamp(i0, 0, in - 1)] += 1.0 - f;
    m.weights[static_cast<std::size_t>(o) * in + std::clamp(i0 + 1, 0, in - 1)] += f;
  }
  return m;
}

PlaneResampler::PlaneResampler(ResampleMatrix rows, ResampleMatrix cols) : rows_(std::move(rows)), cols_(std::move(cols)) {}

PlaneResampler PlaneResampler::bicubic(int h, int w, Scale scale) {
  return PlaneResampler(bicubic_matrix(h, scale), bicubic_matrix(w, scale));
}

PlaneResampler PlaneResampler::bilinear(int in_h, int in_w, int out_h, int out_w) {
  return PlaneResampler(bilinear_matrix(in_h, out_h), bilinear_matrix(in_w, out_w));
}

template <typename T>
Tensor<T> PlaneResampler::apply(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.h() != rows_.in || x.w() != cols_.in) {
    throw DimensionError("resampler expects planes of " + std::to_string(rows_.in) + "x" + std::to_string(cols_.in) +
                         ", got " + shape_string(x.shape()));
  }
  auto y = Tensor<T>::nchw(x.n(), x.c(), rows_.out, cols_.out);
  std::vector<double> tmp(static_cast<std::size_t>(rows_.in) * cols_.out);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.plane(n, c);
      // Horizontal pass: tmp[i][o] = sum_j X[i][j] Rx[o][j].
      for (int i = 0; i < rows_.in; ++i) {
        for (int o = 0; o < cols_.out; ++o) {
          double acc = 0.0;
          for (int j = 0; j < cols_.in; ++j) acc += cols_(o, j) * static_cast<double>(src[i * cols_.in + j]);
          tmp[static_cast<std::size_t>(i) * cols_.out + o] = acc;
        }
      }
      T* dst = y.plane(n, c);
      for (int o = 0; o < rows_.out; ++o) {
        for (int q = 0; q < cols_.out; ++q) {
          double acc = 0.0;
          for (int i = 0; i < rows_.in; ++i) acc += rows_(o, i) * tmp[static_cast<std::size_t>(i) * cols_.out + q];
          dst[o * cols_.out + q] = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> PlaneResampler::adjoint(const Tensor<T>& g) const {
  if (g.rank() != 4 || g.h() != rows_.out || g.w() != cols_.out) {
    throw DimensionError("resampler adjoint shape mismatch: " + shape_string(g.shape()));
  }
  auto x = Tensor<T>::nchw(g.n(), g.c(), rows_.in, cols_.in);
  std::vector<double> tmp(static_cast<std::size_t>(rows_.in) * cols_.out);
  for (int n = 0; n < g.n(); ++n) {
    for (int c = 0; c < g.c(); ++c) {
      const T* src = g.plane(n, c);
      // tmp = Ry^T G
      for (int i = 0; i < rows_.in; ++i) {
        for (int q = 0; q < cols_.out; ++q) {
          double acc = 0.0;
          for (int o = 0; o < rows_.out; ++o) acc += rows_(o, i) * static_cast<double>(src[o * cols_.out + q]);
          tmp[static_cast<std::size_t>(i) * cols_.out + q] = acc;
        }
      }
      T* dst = x.plane(n, c);
      // X = tmp Rx
      for (int i = 0; i < rows_.in; ++i) {
        for (int j = 0; j < cols_.in; ++j) {
          double acc = 0.0;
          for (int q = 0; q < cols_.out; ++q) acc += tmp[static_cast<std::size_t>(i) * cols_.out + q] * cols_(q, j);
          dst[i * cols_.in + j] = static_cast<T>(acc);
        }
      }
    }
  }
  return x;
}

template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& x, Scale scale) {
  return PlaneResampler::bicubic(x.h(), x.w(), scale).apply(x);
}

namespace {

template <typename T>
void box_pass(const Tensor<T>& in, Tensor<T>& out, bool adjoint) {
  const int h = in.h();
  const int w = in.w();
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      const T* src = in.plane(n, c);
      T* dst = out.plane(n, c);
      std::fill(dst, dst + static_cast<std::ptrdiff_t>(h) * w, T{0});
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          for (int dy = -1; dy <= 1; ++dy) {
            const int sy = std::clamp(y + dy, 0, h - 1);
            for (int dx = -1; dx <= 1; ++dx) {
              const int sx = std::clamp(x + dx, 0, w - 1);
              if (adjoint) {
                dst[sy * w + sx] += src[y * w + x] / T{9};
              } else {
                dst[y * w + x] += src[sy * w + sx] / T{9};
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> box_blur3(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  box_pass(x, y, false);
  return y;
}

template <typename T>
Tensor<T> box_blur3_adjoint(const Tensor<T>& g) {
  Tensor<T> x(g.shape());
  box_pass(g, x, true);
  return x;
}

template Tensor<float> PlaneResampler::apply(const Tensor<float>&) const;
template Tensor<double> PlaneResampler::apply(const Tensor<double>&) const;
template Tensor<float> PlaneResampler::adjoint(const Tensor<float>&) const;
template Tensor<double> PlaneResampler::adjoint(const Tensor<double>&) const;
template Tensor<float> resize_bicubic(const Tensor<float>&, Scale);
template Tensor<double> resize_bicubic(const Tensor<double>&, Scale);
template Tensor<float> box_blur3(const Tensor<float>&);
template Tensor<double> box_blur3(const Tensor<double>&);
template Tensor<float> box_blur3_adjoint(const Tensor<float>&);
template Tensor<double> box_blur3_adjoint(const Tensor<double>&);

}  // namespace rainsr
