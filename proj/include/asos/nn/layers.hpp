#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "asos/tensor.hpp"

namespace asos::nn {

// Small CPU layer zoo: tensors in (n, c, h, w) order, explicit
// forward/backward, Eigen GEMM behind convolution and linear layers.
// Everything is templated on the scalar type so tests can run the exact
// same graph in double precision; production code uses float.
// Forward caches activations only in training mode; inference passes keep
// no state besides batch-norm running statistics.

template <typename T>
using MatrixRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatrixRM<T>>;

/// Trainable tensor plus its gradient accumulator.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Param(std::vector<std::size_t> shape)
      : value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(T(0)); }
};

/// Visitor over (name, param) used by the optimizer and checkpointing.
template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;
/// Visitor over non-trainable state (batch-norm running stats).
template <typename T>
using BufferVisitor = std::function<void(const std::string&, Tensor<T>&)>;

/// Fan-in scaled uniform init, Var(w) = gain^2 / fan_in. Gain sqrt(2) keeps
/// variance flat through ReLU layers (He); gain 1 suits tanh/sigmoid heads.
/// Draws in float regardless of T so float and double models initialized
/// from one seed hold identical values.
template <typename T>
void init_uniform_fan_in(Tensor<T>& t, std::size_t fan_in, float gain,
                         std::mt19937_64& rng) {
  const float bound = gain * std::sqrt(3.0f / float(fan_in));
  std::uniform_real_distribution<float> u(-bound, bound);
  for (T& v : t) v = T(u(rng));
}

template <typename T>
class Conv2d {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
         std::size_t stride, std::size_t pad)
      : in_(in_ch),
        out_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        weight_({out_ch, in_ch * kernel * kernel}),
        bias_({out_ch}) {}

  void init(std::mt19937_64& rng, float gain) {
    init_uniform_fan_in(weight_.value, in_ * k_ * k_, gain, rng);
    init_uniform_fan_in(bias_.value, in_ * k_ * k_, 1.0f, rng);
  }

  std::size_t out_size(std::size_t in) const {
    return (in + 2 * pad_ - k_) / stride_ + 1;
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_)
      throw NumericError("conv input has " + std::to_string(x.dim(1)) +
                         " channels, layer expects " + std::to_string(in_));
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_)
      throw NumericError("conv input smaller than kernel");
    const std::size_t oh = out_size(h), ow = out_size(w);
    Tensor<T> y({n, out_, oh, ow});

    std::vector<T> col(in_ * k_ * k_ * oh * ow);
    ConstMatMap<T> wmat(weight_.value.data(), out_, in_ * k_ * k_);
    for (std::size_t i = 0; i < n; ++i) {
      im2col(x, i, col.data(), oh, ow);
      ConstMatMap<T> cmat(col.data(), in_ * k_ * k_, oh * ow);
      MatMap<T> ymat(&y(i, 0, 0, 0), out_, oh * ow);
      ymat.noalias() = wmat * cmat;
      for (std::size_t c = 0; c < out_; ++c)
        ymat.row(c).array() += bias_.value[c];
    }
    if (training) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::size_t oh = dy.dim(2), ow = dy.dim(3);
    Tensor<T> dx({n, in_, h, w}, T(0));

    std::vector<T> col(in_ * k_ * k_ * oh * ow);
    std::vector<T> dcol(col.size());
    MatMap<T> dwmat(weight_.grad.data(), out_, in_ * k_ * k_);
    ConstMatMap<T> wmat(weight_.value.data(), out_, in_ * k_ * k_);
    for (std::size_t i = 0; i < n; ++i) {
      im2col(x_, i, col.data(), oh, ow);
      ConstMatMap<T> cmat(col.data(), in_ * k_ * k_, oh * ow);
      ConstMatMap<T> dymat(&dy(i, 0, 0, 0), out_, oh * ow);
      dwmat.noalias() += dymat * cmat.transpose();
      for (std::size_t c = 0; c < out_; ++c)
        bias_.grad[c] += dymat.row(c).sum();
      MatMap<T> dcmat(dcol.data(), in_ * k_ * k_, oh * ow);
      dcmat.noalias() = wmat.transpose() * dymat;
      col2im(dcol.data(), dx, i, oh, ow);
    }
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight_);
    fn(prefix + ".bias", bias_);
  }

  std::size_t n_params() const {
    return weight_.value.size() + bias_.value.size();
  }

 private:
  void im2col(const Tensor<T>& x, std::size_t i, T* col, std::size_t oh,
              std::size_t ow) const {
    const std::size_t h = x.dim(2), w = x.dim(3);
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx, ++r) {
          T* dst = col + r * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                std::ptrdiff_t(oy * stride_ + ky) - std::ptrdiff_t(pad_);
            if (iy < 0 || iy >= std::ptrdiff_t(h)) {
              std::fill(dst, dst + ow, T(0));
              dst += ow;
              continue;
            }
            const T* src = &x(i, c, std::size_t(iy), 0);
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  std::ptrdiff_t(ox * stride_ + kx) - std::ptrdiff_t(pad_);
              *dst++ = (ix < 0 || ix >= std::ptrdiff_t(w))
                           ? T(0)
                           : src[std::size_t(ix)];
            }
          }
        }
  }

  void col2im(const T* dcol, Tensor<T>& dx, std::size_t i, std::size_t oh,
              std::size_t ow) const {
    const std::size_t h = dx.dim(2), w = dx.dim(3);
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx, ++r) {
          const T* src = dcol + r * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                std::ptrdiff_t(oy * stride_ + ky) - std::ptrdiff_t(pad_);
            if (iy < 0 || iy >= std::ptrdiff_t(h)) {
              src += ow;
              continue;
            }
            T* dst = &dx(i, c, std::size_t(iy), 0);
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  std::ptrdiff_t(ox * stride_ + kx) - std::ptrdiff_t(pad_);
              if (ix >= 0 && ix < std::ptrdiff_t(w))
                dst[std::size_t(ix)] += src[ox];
            }
            src += ow;
          }
        }
  }

  std::size_t in_, out_, k_, stride_, pad_;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> x_;
};

template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::size_t channels, T momentum = T(0.1),
                       T eps = T(1e-5))
      : c_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_({channels}),
        beta_({channels}),
        running_mean_({channels}, T(0)),
        running_var_({channels}, T(1)) {
    gamma_.value.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t m = n * h * w;
    Tensor<T> y(x.shape());
    if (!training) {
      for (std::size_t c = 0; c < c_; ++c) {
        const T inv = T(1) / std::sqrt(running_var_[c] + eps_);
        const T g = gamma_.value[c] * inv;
        const T b = beta_.value[c] - running_mean_[c] * g;
        for (std::size_t i = 0; i < n; ++i) {
          const T* xs = &x(i, c, 0, 0);
          T* ys = &y(i, c, 0, 0);
          for (std::size_t p = 0; p < h * w; ++p) ys[p] = xs[p] * g + b;
        }
      }
      return y;
    }

    mean_.assign(c_, 0.0);
    invstd_.assign(c_, 0.0);
    for (std::size_t c = 0; c < c_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* xs = &x(i, c, 0, 0);
        for (std::size_t p = 0; p < h * w; ++p) {
          sum += double(xs[p]);
          sq += double(xs[p]) * double(xs[p]);
        }
      }
      const double mu = sum / double(m);
      const double var = std::max(0.0, sq / double(m) - mu * mu);
      mean_[c] = mu;
      invstd_[c] = 1.0 / std::sqrt(var + double(eps_));
      running_mean_[c] =
          (T(1) - momentum_) * running_mean_[c] + momentum_ * T(mu);
      const double var_unbiased = m > 1 ? var * double(m) / double(m - 1) : var;
      running_var_[c] =
          (T(1) - momentum_) * running_var_[c] + momentum_ * T(var_unbiased);
    }
    xhat_ = Tensor<T>(x.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      const T mu = T(mean_[c]), inv = T(invstd_[c]);
      const T g = gamma_.value[c], b = beta_.value[c];
      for (std::size_t i = 0; i < n; ++i) {
        const T* xs = &x(i, c, 0, 0);
        T* xh = &xhat_(i, c, 0, 0);
        T* ys = &y(i, c, 0, 0);
        for (std::size_t p = 0; p < h * w; ++p) {
          xh[p] = (xs[p] - mu) * inv;
          ys[p] = xh[p] * g + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const std::size_t m = n * h * w;
    Tensor<T> dx(dy.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      double dbeta = 0.0, dgamma = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* dys = &dy(i, c, 0, 0);
        const T* xh = &xhat_(i, c, 0, 0);
        for (std::size_t p = 0; p < h * w; ++p) {
          dbeta += double(dys[p]);
          dgamma += double(dys[p]) * double(xh[p]);
        }
      }
      beta_.grad[c] += T(dbeta);
      gamma_.grad[c] += T(dgamma);
      const T scale = gamma_.value[c] * T(invstd_[c]) / T(m);
      for (std::size_t i = 0; i < n; ++i) {
        const T* dys = &dy(i, c, 0, 0);
        const T* xh = &xhat_(i, c, 0, 0);
        T* dxs = &dx(i, c, 0, 0);
        for (std::size_t p = 0; p < h * w; ++p)
          dxs[p] =
              scale * (T(m) * dys[p] - T(dbeta) - xh[p] * T(dgamma));
      }
    }
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".gamma", gamma_);
    fn(prefix + ".beta", beta_);
  }
  void visit_buffers(const std::string& prefix, const BufferVisitor<T>& fn) {
    fn(prefix + ".running_mean", running_mean_);
    fn(prefix + ".running_var", running_var_);
  }

  std::size_t n_params() const { return 2 * c_; }

 private:
  std::size_t c_;
  T momentum_, eps_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  std::vector<double> mean_, invstd_;
  Tensor<T> xhat_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
      y[i] = x[i] > T(0) ? x[i] : T(0);
    if (training) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = y_[i] > T(0) ? dy[i] : T(0);
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    if (training) y_ = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i)
      dx[i] = dy[i] * (T(1) - y_[i] * y_[i]);
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class MaxPool2d {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
      throw NumericError("max-pool input dims must be even");
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor<T> y({n, c, oh, ow});
    if (training) {
      argmax_.assign(n * c * oh * ow, 0);
      in_shape_ = x.shape();
    }
    std::size_t o = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
            std::size_t best_idx = 0;
            T best = std::numeric_limits<T>::lowest();
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t yy = oy * 2 + dy, xx = ox * 2 + dx;
                const T v = x(i, ch, yy, xx);
                if (v > best) {
                  best = v;
                  best_idx = yy * w + xx;
                }
              }
            y[o] = best;
            if (training) argmax_[o] = best_idx;
          }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(in_shape_, T(0));
    const std::size_t n = dy.dim(0), c = dy.dim(1);
    std::size_t o = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        T* dxp = &dx(i, ch, 0, 0);
        for (std::size_t p = 0; p < dy.dim(2) * dy.dim(3); ++p, ++o)
          dxp[argmax_[o]] += dy[o];
      }
    return dx;
  }

 private:
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

/// 2x bilinear upsampling with half-pixel centers (align_corners = false).
template <typename T>
class BilinearUp2x {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h * 2, ow = w * 2;
    if (training) in_shape_ = x.shape();
    Tensor<T> y({n, c, oh, ow});
    for (std::size_t oy = 0; oy < oh; ++oy) {
      std::size_t y0, y1;
      T wy;
      src_pos(oy, h, y0, y1, wy);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t x0, x1;
        T wx;
        src_pos(ox, w, x0, x1, wx);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T a = x(i, ch, y0, x0), b = x(i, ch, y0, x1);
            const T d = x(i, ch, y1, x0), e = x(i, ch, y1, x1);
            y(i, ch, oy, ox) = (T(1) - wy) * ((T(1) - wx) * a + wx * b) +
                               wy * ((T(1) - wx) * d + wx * e);
          }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t n = dy.dim(0), c = dy.dim(1);
    const std::size_t oh = dy.dim(2), ow = dy.dim(3);
    const std::size_t h = in_shape_[2], w = in_shape_[3];
    Tensor<T> dx(in_shape_, T(0));
    for (std::size_t oy = 0; oy < oh; ++oy) {
      std::size_t y0, y1;
      T wy;
      src_pos(oy, h, y0, y1, wy);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t x0, x1;
        T wx;
        src_pos(ox, w, x0, x1, wx);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T g = dy(i, ch, oy, ox);
            dx(i, ch, y0, x0) += (T(1) - wy) * (T(1) - wx) * g;
            dx(i, ch, y0, x1) += (T(1) - wy) * wx * g;
            dx(i, ch, y1, x0) += wy * (T(1) - wx) * g;
            dx(i, ch, y1, x1) += wy * wx * g;
          }
      }
    }
    return dx;
  }

 private:
  static void src_pos(std::size_t o, std::size_t limit, std::size_t& i0,
                      std::size_t& i1, T& w1) {
    T s = (T(o) + T(0.5)) / T(2) - T(0.5);
    if (s < T(0)) s = T(0);
    const T fl = std::floor(s);
    i0 = std::size_t(fl);
    i1 = std::min(i0 + 1, limit - 1);
    w1 = s - fl;
  }

  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Linear {
 public:
  Linear(std::size_t in, std::size_t out)
      : in_(in), out_(out), weight_({out, in}), bias_({out}) {}

  void init(std::mt19937_64& rng, float gain) {
    init_uniform_fan_in(weight_.value, in_, gain, rng);
    init_uniform_fan_in(bias_.value, in_, 1.0f, rng);
  }

  /// x: (n, in) -> (n, out)
  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const std::size_t n = x.dim(0);
    if (x.dim(1) != in_)
      throw NumericError("linear layer input size mismatch");
    Tensor<T> y({n, out_});
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out_; ++o) y(i, o) += bias_.value[o];
    if (training) x_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const std::size_t n = dy.dim(0);
    Tensor<T> dx({n, in_});
    ConstMatMap<T> dym(dy.data(), n, out_);
    ConstMatMap<T> xm(x_.data(), n, in_);
    ConstMatMap<T> wm(weight_.value.data(), out_, in_);
    MatMap<T> dwm(weight_.grad.data(), out_, in_);
    dwm.noalias() += dym.transpose() * xm;
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += dym.col(o).sum();
    MatMap<T> dxm(dx.data(), n, in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", weight_);
    fn(prefix + ".bias", bias_);
  }

  std::size_t n_params() const {
    return weight_.value.size() + bias_.value.size();
  }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> x_;
};

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Concatenate two (n, c, h, w) tensors along channels.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t h = a.dim(2), w = a.dim(3);
  if (b.dim(0) != n || b.dim(2) != h || b.dim(3) != w)
    throw NumericError("channel concat shape mismatch");
  Tensor<T> y({n, ca + cb, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(&a(i, 0, 0, 0), &a(i, 0, 0, 0) + ca * h * w, &y(i, 0, 0, 0));
    std::copy(&b(i, 0, 0, 0), &b(i, 0, 0, 0) + cb * h * w, &y(i, ca, 0, 0));
  }
  return y;
}

/// Split a gradient over a channel concat back into the two inputs.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& d,
                                               std::size_t ca,
                                               std::size_t cb) {
  const std::size_t n = d.dim(0), h = d.dim(2), w = d.dim(3);
  Tensor<T> da({n, ca, h, w}), db({n, cb, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(&d(i, 0, 0, 0), &d(i, 0, 0, 0) + ca * h * w, &da(i, 0, 0, 0));
    std::copy(&d(i, ca, 0, 0), &d(i, ca, 0, 0) + cb * h * w, &db(i, 0, 0, 0));
  }
  return {std::move(da), std::move(db)};
}

}  // namespace asos::nn
