#pragma once

// Internal layer implementations behind rainsr::Network.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rainsr/nets.hpp"
#include "rainsr/resample.hpp"

namespace rainsr {

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Trace<T>* tr) const = 0;
  virtual Tensor<T> backward(ParamStore<T>& p, Trace<T>& tr, const Tensor<T>& gy) const = 0;
};

namespace layers {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int weight, int bias, int in_ch, int out_ch, int kernel, int stride, int pad)
      : weight_(weight), bias_(bias), in_(in_ch), out_(out_ch), k_(kernel), stride_(stride), pad_(pad) {}

  int out_dim(int d) const { return (d + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Trace<T>* tr) const override {
    if (x.rank() != 4 || x.c() != in_) {
      throw DimensionError("conv expects " + std::to_string(in_) + " input channels, got " + shape_string(x.shape()));
    }
    const int ho = out_dim(x.h());
    const int wo = out_dim(x.w());
    if (ho < 1 || wo < 1) throw DimensionError("conv input too small: " + shape_string(x.shape()));
    auto y = Tensor<T>::nchw(x.n(), out_, ho, wo);
    const int kk = in_ * k_ * k_;
    const int pix = ho * wo;
    RowMat<T> col(kk, pix);
    Eigen::Map<const RowMat<T>> w(p.value(weight_).data(), out_, kk);
    for (int n = 0; n < x.n(); ++n) {
      im2col(x, n, ho, wo, col);
      Eigen::Map<RowMat<T>> out(y.plane(n, 0), out_, pix);
      out.noalias() = w * col;
      if (bias_ >= 0) {
        const T* b = p.value(bias_).data();
        for (int c = 0; c < out_; ++c) out.row(c).array() += b[c];
      }
    }
    if (tr) tr->push(x);
    return y;
  }

  Tensor<T> backward(ParamStore<T>& p, Trace<T>& tr, const Tensor<T>& gy) const override {
    const Tensor<T> x = tr.pop();
    const int ho = gy.h();
    const int wo = gy.w();
    const int kk = in_ * k_ * k_;
    const int pix = ho * wo;
    RowMat<T> col(kk, pix);
    RowMat<T> dcol(kk, pix);
    Eigen::Map<const RowMat<T>> w(p.value(weight_).data(), out_, kk);
    Eigen::Map<RowMat<T>> dw(p.grad(weight_).data(), out_, kk);
    Tensor<T> dx(x.shape());
    for (int n = 0; n < x.n(); ++n) {
      Eigen::Map<const RowMat<T>> g(gy.plane(n, 0), out_, pix);
      im2col(x, n, ho, wo, col);
      dw.noalias() += g * col.transpose();
      if (bias_ >= 0) {
        T* db = p.grad(bias_).data();
        // Plain loop: Eigen's vectorized sum peels by address, which would make
        // the rounding depend on where the plane happens to be allocated.
        for (int c = 0; c < out_; ++c) {
          const T* gr = gy.plane(n, c);
          T acc{0};
          for (int i = 0; i < pix; ++i) acc += gr[i];
          db[c] += acc;
        }
      }
      dcol.noalias() = w.transpose() * g;
      col2im(dcol, n, ho, wo, dx);
    }
    return dx;
  }

 private:
  void im2col(const Tensor<T>& x, int n, int ho, int wo, RowMat<T>& col) const {
    const int h = x.h();
    const int w = x.w();
    for (int c = 0; c < in_; ++c) {
      const T* src = x.plane(n, c);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          T* dst = col.data() + static_cast<std::ptrdiff_t>((c * k_ + ky) * k_ + kx) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            T* row = dst + static_cast<std::ptrdiff_t>(oy) * wo;
            if (iy < 0 || iy >= h) {
              std::fill(row, row + wo, T{0});
              continue;
            }
            const T* srow = src + static_cast<std::ptrdiff_t>(iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              row[ox] = (ix >= 0 && ix < w) ? srow[ix] : T{0};
            }
          }
        }
      }
    }
  }

  void col2im(const RowMat<T>& dcol, int n, int ho, int wo, Tensor<T>& dx) const {
    const int h = dx.h();
    const int w = dx.w();
    for (int c = 0; c < in_; ++c) {
      T* dst = dx.plane(n, c);
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const T* src = dcol.data() + static_cast<std::ptrdiff_t>((c * k_ + ky) * k_ + kx) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            const T* row = src + static_cast<std::ptrdiff_t>(oy) * wo;
            T* drow = dst + static_cast<std::ptrdiff_t>(iy) * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) drow[ix] += row[ox];
            }
          }
        }
      }
    }
  }

  int weight_;
  int bias_;
  int in_;
  int out_;
  int k_;
  int stride_;
  int pad_;
};

// Per-sample, per-channel normalization without affine parameters.
template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  static constexpr double kEps = 1e-5;

  Tensor<T> forward(const ParamStore<T>&, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> y(x.shape());
    Tensor<T> inv_std({x.n() * x.c()});
    const std::size_t m = x.plane_size();
    for (int n = 0; n < x.n(); ++n) {
      for (int c = 0; c < x.c(); ++c) {
        const T* src = x.plane(n, c);
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += src[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) var += (src[i] - mean) * (src[i] - mean);
        var /= static_cast<double>(m);
        const double is = 1.0 / std::sqrt(var + kEps);
        T* dst = y.plane(n, c);
        for (std::size_t i = 0; i < m; ++i) dst[i] = static_cast<T>((src[i] - mean) * is);
        inv_std[static_cast<std::size_t>(n * x.c() + c)] = static_cast<T>(is);
      }
    }
    if (tr) {
      tr->push(y);
      tr->push(std::move(inv_std));
    }
    return y;
  }

  Tensor<T> backward(ParamStore<T>&, Trace<T>& tr, const Tensor<T>& gy) const override {
    const Tensor<T> inv_std = tr.pop();
    const Tensor<T> y = tr.pop();
    Tensor<T> dx(gy.shape());
    const std::size_t m = gy.plane_size();
    for (int n = 0; n < gy.n(); ++n) {
      for (int c = 0; c < gy.c(); ++c) {
        const T* g = gy.plane(n, c);
        const T* yy = y.plane(n, c);
        double mg = 0.0;
        double mgy = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          mg += g[i];
          mgy += static_cast<double>(g[i]) * yy[i];
        }
        mg /= static_cast<double>(m);
        mgy /= static_cast<double>(m);
        const double is = inv_std[static_cast<std::size_t>(n * gy.c() + c)];
        T* d = dx.plane(n, c);
        for (std::size_t i = 0; i < m; ++i) d[i] = static_cast<T>(is * (g[i] - mg - yy[i] * mgy));
      }
    }
    return dx;
  }
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(T slope) : slope_(slope) {}

  Tensor<T> forward(const ParamStore<T>&, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> y = x;
    if (auto* freeze = ActivationPatternFreeze::current()) {
      std::vector<bool>& positive = freeze->next(x.size());
      if (freeze->recording()) {
        for (std::size_t i = 0; i < x.size(); ++i) positive[i] = x[i] > T{0};
      }
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (!positive[i]) y[i] *= slope_;
      }
    } else {
      for (auto& v : y.values()) v = v > T{0} ? v : v * slope_;
    }
    if (tr) tr->push(x);
    return y;
  }

  Tensor<T> backward(ParamStore<T>&, Trace<T>& tr, const Tensor<T>& gy) const override {
    const Tensor<T> x = tr.pop();
    Tensor<T> dx = gy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(x[i] > T{0})) dx[i] *= slope_;
    }
    return dx;
  }

 private:
  T slope_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Tensor<T> forward(const ParamStore<T>&, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> y = x;
    for (auto& v : y.values()) v = std::tanh(v);
    if (tr) tr->push(y);
    return y;
  }

  Tensor<T> backward(ParamStore<T>&, Trace<T>& tr, const Tensor<T>& gy) const override {
    const Tensor<T> y = tr.pop();
    Tensor<T> dx = gy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= T{1} - y[i] * y[i];
    return dx;
  }
};

template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  Tensor<T> forward(const ParamStore<T>&, const Tensor<T>& x, Trace<T>*) const override {
    auto y = Tensor<T>::nchw(x.n(), x.c(), x.h() * 2, x.w() * 2);
    const int w2 = x.w() * 2;
    for (int n = 0; n < x.n(); ++n) {
      for (int c = 0; c < x.c(); ++c) {
        const T* src = x.plane(n, c);
        T* dst = y.plane(n, c);
        for (int yy = 0; yy < x.h() * 2; ++yy) {
          for (int xx = 0; xx < w2; ++xx) dst[yy * w2 + xx] = src[(yy / 2) * x.w() + xx / 2];
        }
      }
    }
    return y;
  }

  Tensor<T> backward(ParamStore<T>&, Trace<T>&, const Tensor<T>& gy) const override {
    auto dx = Tensor<T>::nchw(gy.n(), gy.c(), gy.h() / 2, gy.w() / 2);
    for (int n = 0; n < gy.n(); ++n) {
      for (int c = 0; c < gy.c(); ++c) {
        const T* src = gy.plane(n, c);
        T* dst = dx.plane(n, c);
        for (int yy = 0; yy < gy.h(); ++yy) {
          for (int xx = 0; xx < gy.w(); ++xx) dst[(yy / 2) * dx.w() + xx / 2] += src[yy * gy.w() + xx];
        }
      }
    }
    return dx;
  }
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> h = x;
    for (const auto& l : layers_) h = l->forward(p, h, tr);
    return h;
  }

  Tensor<T> backward(ParamStore<T>& p, Trace<T>& tr, const Tensor<T>& gy) const override {
    Tensor<T> g = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(p, tr, g);
    return g;
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// y = x + body(x)
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(std::unique_ptr<Layer<T>> body) : body_(std::move(body)) {}

  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> y = body_->forward(p, x, tr);
    y += x;
    return y;
  }

  Tensor<T> backward(ParamStore<T>& p, Trace<T>& tr, const Tensor<T>& gy) const override {
    Tensor<T> g = body_->backward(p, tr, gy);
    g += gy;
    return g;
  }

 private:
  std::unique_ptr<Layer<T>> body_;
};

// y = body(x) + bicubic(x, scale): anchors the output to plain resampling.
template <typename T>
class BicubicSkip final : public Layer<T> {
 public:
  BicubicSkip(std::unique_ptr<Layer<T>> body, Scale scale) : body_(std::move(body)), scale_(scale) {}

  Tensor<T> forward(const ParamStore<T>& p, const Tensor<T>& x, Trace<T>* tr) const override {
    Tensor<T> y = body_->forward(p, x, tr);
    y += PlaneResampler::bicubic(x.h(), x.w(), scale_).apply(x);
    if (tr) tr->push(Tensor<T>({2}, {static_cast<T>(x.h()), static_cast<T>(x.w())}));
    return y;
  }

  Tensor<T> backward(ParamStore<T>& p, Trace<T>& tr, const Tensor<T>& gy) const override {
    const Tensor<T> dims = tr.pop();
    const int h = static_cast<int>(dims[0]);
    const int w = static_cast<int>(dims[1]);
    Tensor<T> g = body_->backward(p, tr, gy);
    g += PlaneResampler::bicubic(h, w, scale_).adjoint(gy);
    return g;
  }

 private:
  std::unique_ptr<Layer<T>> body_;
  Scale scale_;
};

}  // namespace layers
}  // namespace rainsr
