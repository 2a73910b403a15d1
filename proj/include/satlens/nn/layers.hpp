#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/rng.hpp"
#include "satlens/tensor.hpp"

namespace satlens::nn {

/// Channel/height/width of one sample flowing through the network.
struct DataShape {
  std::size_t c = 0, h = 0, w = 0;

  bool flat() const noexcept { return h == 1 && w == 1; }
  std::size_t numel() const noexcept { return c * h * w; }
  std::string to_string() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
  friend bool operator==(const DataShape&, const DataShape&) = default;
};

/// Sequential-network layer. forward caches whatever backward needs, so a
/// backward call must follow a forward call on the same batch.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual const char* kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  /// Registers trainable parameters and their gradient buffers.
  virtual void collect_params(std::vector<Tensor<T>*>& params, std::vector<Tensor<T>*>& grads) {
    (void)params;
    (void)grads;
  }

  std::string name;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::size_t in_features, std::size_t units, CounterRng rng)
      : in_(in_features), units_(units),
        weight_(units, in_features, 1, 1), bias_(units, 1, 1, 1),
        grad_weight_(units, in_features, 1, 1), grad_bias_(units, 1, 1, 1) {
    require(units >= 1, ErrorKind::ConfigError, "dense units must be at least 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(in_features));
    for (auto& v : weight_.data) v = static_cast<T>(rng.next_uniform(-bound, bound));
  }

  const char* kind() const override { return "dense"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    require(x.flat() && x.c == in_, ErrorKind::ShapeMismatch,
            this->name + " expects flat input of " + std::to_string(in_) + " features, got " +
                x.shape_string());
    input_ = x;
    Tensor<T> y(x.n, units_, 1, 1);
    for (std::size_t ni = 0; ni < x.n; ++ni) {
      const T* xin = &x.data[ni * in_];
      T* yout = &y.data[ni * units_];
      for (std::size_t o = 0; o < units_; ++o) {
        const T* wrow = &weight_.data[o * in_];
        T acc = bias_.data[o];
        for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * xin[i];
        yout[o] = acc;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::size_t n = input_.n;
    grad_weight_.fill(T(0));
    grad_bias_.fill(T(0));
    Tensor<T> dx(n, in_, 1, 1);
    for (std::size_t ni = 0; ni < n; ++ni) {
      const T* xin = &input_.data[ni * in_];
      const T* gout = &grad_out.data[ni * units_];
      T* gx = &dx.data[ni * in_];
      for (std::size_t o = 0; o < units_; ++o) {
        const T g = gout[o];
        grad_bias_.data[o] += g;
        const T* wrow = &weight_.data[o * in_];
        T* gwrow = &grad_weight_.data[o * in_];
        for (std::size_t i = 0; i < in_; ++i) {
          gwrow[i] += g * xin[i];
          gx[i] += g * wrow[i];
        }
      }
    }
    return dx;
  }

  void collect_params(std::vector<Tensor<T>*>& params, std::vector<Tensor<T>*>& grads) override {
    params.push_back(&weight_);
    params.push_back(&bias_);
    grads.push_back(&grad_weight_);
    grads.push_back(&grad_bias_);
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_, units_;
  Tensor<T> weight_, bias_, grad_weight_, grad_bias_, input_;
};

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t stride,
              std::size_t padding, CounterRng rng)
      : in_c_(in_channels), filters_(filters), kernel_(kernel), stride_(stride), padding_(padding),
        weight_(filters, in_channels, kernel, kernel), bias_(filters, 1, 1, 1),
        grad_weight_(filters, in_channels, kernel, kernel), grad_bias_(filters, 1, 1, 1) {
    require(filters >= 1 && kernel >= 1 && stride >= 1, ErrorKind::ConfigError,
            "conv2d needs filters >= 1, kernel >= 1, stride >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(in_channels * kernel * kernel));
    for (auto& v : weight_.data) v = static_cast<T>(rng.next_uniform(-bound, bound));
  }

  const char* kind() const override { return "conv2d"; }

  static std::size_t out_side(std::size_t in, std::size_t kernel, std::size_t stride,
                              std::size_t padding) {
    require(in + 2 * padding >= kernel, ErrorKind::ShapeMismatch,
            "conv2d kernel larger than padded input");
    return (in + 2 * padding - kernel) / stride + 1;
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    require(x.c == in_c_, ErrorKind::ShapeMismatch,
            this->name + " expects " + std::to_string(in_c_) + " channels, got " +
                x.shape_string());
    input_ = x;
    const std::size_t oh = out_side(x.h, kernel_, stride_, padding_);
    const std::size_t ow = out_side(x.w, kernel_, stride_, padding_);
    Tensor<T> y(x.n, filters_, oh, ow);

    for (std::size_t ni = 0; ni < x.n; ++ni) {
      for (std::size_t f = 0; f < filters_; ++f) {
        T* ybase = &y.data[((ni * filters_ + f) * oh) * ow];
        const T b = bias_.data[f];
        for (std::size_t i = 0; i < oh * ow; ++i) ybase[i] = b;
        for (std::size_t c = 0; c < in_c_; ++c) {
          for (std::size_t kh = 0; kh < kernel_; ++kh) {
            for (std::size_t kw = 0; kw < kernel_; ++kw) {
              const T wv = weight_.at(f, c, kh, kw);
              if (wv == T(0)) continue;
              for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * stride_ + kh) - static_cast<std::ptrdiff_t>(padding_);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.h)) continue;
                const T* xrow = &x.data[((ni * in_c_ + c) * x.h + iy) * x.w];
                T* yrow = ybase + oy * ow;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  const std::ptrdiff_t ix =
                      static_cast<std::ptrdiff_t>(ox * stride_ + kw) - static_cast<std::ptrdiff_t>(padding_);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.w)) continue;
                  yrow[ox] += wv * xrow[ix];
                }
              }
            }
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const Tensor<T>& x = input_;
    const std::size_t oh = grad_out.h;
    const std::size_t ow = grad_out.w;
    grad_weight_.fill(T(0));
    grad_bias_.fill(T(0));
    Tensor<T> dx(x.n, x.c, x.h, x.w);

    for (std::size_t ni = 0; ni < x.n; ++ni) {
      for (std::size_t f = 0; f < filters_; ++f) {
        const T* gbase = &grad_out.data[((ni * filters_ + f) * oh) * ow];
        T gb = T(0);
        for (std::size_t i = 0; i < oh * ow; ++i) gb += gbase[i];
        grad_bias_.data[f] += gb;
        for (std::size_t c = 0; c < in_c_; ++c) {
          for (std::size_t kh = 0; kh < kernel_; ++kh) {
            for (std::size_t kw = 0; kw < kernel_; ++kw) {
              const T wv = weight_.at(f, c, kh, kw);
              T gw = T(0);
              for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::ptrdiff_t iy =
                    static_cast<std::ptrdiff_t>(oy * stride_ + kh) - static_cast<std::ptrdiff_t>(padding_);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.h)) continue;
                const T* xrow = &x.data[((ni * in_c_ + c) * x.h + iy) * x.w];
                T* dxrow = &dx.data[((ni * in_c_ + c) * x.h + iy) * x.w];
                const T* grow = gbase + oy * ow;
                for (std::size_t ox = 0; ox < ow; ++ox) {
                  const std::ptrdiff_t ix =
                      static_cast<std::ptrdiff_t>(ox * stride_ + kw) - static_cast<std::ptrdiff_t>(padding_);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.w)) continue;
                  gw += grow[ox] * xrow[ix];
                  dxrow[ix] += grow[ox] * wv;
                }
              }
              grad_weight_.at(f, c, kh, kw) += gw;
            }
          }
        }
      }
    }
    return dx;
  }

  void collect_params(std::vector<Tensor<T>*>& params, std::vector<Tensor<T>*>& grads) override {
    params.push_back(&weight_);
    params.push_back(&bias_);
    grads.push_back(&grad_weight_);
    grads.push_back(&grad_bias_);
  }

  std::size_t filters() const noexcept { return filters_; }
  std::size_t kernel() const noexcept { return kernel_; }
  std::size_t stride() const noexcept { return stride_; }
  std::size_t padding() const noexcept { return padding_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  std::size_t in_c_, filters_, kernel_, stride_, padding_;
  Tensor<T> weight_, bias_, grad_weight_, grad_bias_, input_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  const char* kind() const override { return "relu"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    mask_.assign(x.numel(), false);
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      if (y.data[i] > T(0)) {
        mask_[i] = true;
      } else {
        y.data[i] = T(0);
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx = grad_out;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (!mask_[i]) dx.data[i] = T(0);
    return dx;
  }

 private:
  std::vector<bool> mask_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  MaxPoolLayer(std::size_t kernel, std::size_t stride) : kernel_(kernel), stride_(stride) {
    require(kernel >= 1 && stride >= 1, ErrorKind::ConfigError,
            "maxpool needs kernel >= 1 and stride >= 1");
  }

  const char* kind() const override { return "maxpool"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    require(x.h >= kernel_ && x.w >= kernel_, ErrorKind::ShapeMismatch,
            this->name + " pool window larger than input " + x.shape_string());
    in_shape_ = {x.c, x.h, x.w};
    const std::size_t oh = (x.h - kernel_) / stride_ + 1;
    const std::size_t ow = (x.w - kernel_) / stride_ + 1;
    Tensor<T> y(x.n, x.c, oh, ow);
    argmax_.assign(y.numel(), 0);
    for (std::size_t ni = 0; ni < x.n; ++ni)
      for (std::size_t ci = 0; ci < x.c; ++ci)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            T best = std::numeric_limits<T>::lowest();
            std::size_t best_idx = 0;
            for (std::size_t kh = 0; kh < kernel_; ++kh)
              for (std::size_t kw = 0; kw < kernel_; ++kw) {
                const std::size_t iy = oy * stride_ + kh;
                const std::size_t ix = ox * stride_ + kw;
                const std::size_t idx = ((ni * x.c + ci) * x.h + iy) * x.w + ix;
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  best_idx = idx;
                }
              }
            const std::size_t oidx = ((ni * x.c + ci) * oh + oy) * ow + ox;
            y.data[oidx] = best;
            argmax_[oidx] = best_idx;
          }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx(grad_out.n, in_shape_.c, in_shape_.h, in_shape_.w);
    for (std::size_t i = 0; i < grad_out.data.size(); ++i)
      dx.data[argmax_[i]] += grad_out.data[i];
    return dx;
  }

  std::size_t kernel() const noexcept { return kernel_; }
  std::size_t stride() const noexcept { return stride_; }

 private:
  std::size_t kernel_, stride_;
  DataShape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// Channel-wise batch normalization. Training passes normalize with the
/// batch statistics (population variance) and update the running estimates
/// with momentum 0.9; evaluation passes use the running estimates only.
template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(std::size_t channels)
      : channels_(channels),
        gamma_(channels, 1, 1, 1, T(1)), beta_(channels, 1, 1, 1),
        grad_gamma_(channels, 1, 1, 1), grad_beta_(channels, 1, 1, 1),
        running_mean_(channels, 0.0), running_var_(channels, 1.0) {}

  const char* kind() const override { return "batchnorm"; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    require(x.c == channels_, ErrorKind::ShapeMismatch,
            this->name + " expects " + std::to_string(channels_) + " channels, got " +
                x.shape_string());
    const std::size_t spatial = x.h * x.w;
    const std::size_t m = x.n * spatial;
    Tensor<T> y(x.n, x.c, x.h, x.w);
    xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(channels_, 0.0);

    for (std::size_t ci = 0; ci < channels_; ++ci) {
      double mean, var;
      if (train) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t ni = 0; ni < x.n; ++ni) {
          const T* base = &x.data[(ni * x.c + ci) * spatial];
          for (std::size_t s = 0; s < spatial; ++s) {
            const double v = static_cast<double>(base[s]);
            sum += v;
            sq += v * v;
          }
        }
        mean = sum / static_cast<double>(m);
        var = std::max(0.0, sq / static_cast<double>(m) - mean * mean);
        const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
        running_mean_[ci] = momentum_ * running_mean_[ci] + (1.0 - momentum_) * mean;
        running_var_[ci] = momentum_ * running_var_[ci] + (1.0 - momentum_) * unbiased;
      } else {
        mean = running_mean_[ci];
        var = running_var_[ci];
      }
      const double inv_std = 1.0 / std::sqrt(var + epsilon_);
      inv_std_[ci] = inv_std;
      const T g = gamma_.data[ci];
      const T b = beta_.data[ci];
      for (std::size_t ni = 0; ni < x.n; ++ni) {
        const T* base = &x.data[(ni * x.c + ci) * spatial];
        T* xh = &xhat_.data[(ni * x.c + ci) * spatial];
        T* yb = &y.data[(ni * x.c + ci) * spatial];
        for (std::size_t s = 0; s < spatial; ++s) {
          const T nrm = static_cast<T>((static_cast<double>(base[s]) - mean) * inv_std);
          xh[s] = nrm;
          yb[s] = g * nrm + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::size_t spatial = grad_out.h * grad_out.w;
    const std::size_t m = grad_out.n * spatial;
    grad_gamma_.fill(T(0));
    grad_beta_.fill(T(0));
    Tensor<T> dx(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
    for (std::size_t ci = 0; ci < channels_; ++ci) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t ni = 0; ni < grad_out.n; ++ni) {
        const T* g = &grad_out.data[(ni * grad_out.c + ci) * spatial];
        const T* xh = &xhat_.data[(ni * grad_out.c + ci) * spatial];
        for (std::size_t s = 0; s < spatial; ++s) {
          sum_dy += static_cast<double>(g[s]);
          sum_dy_xhat += static_cast<double>(g[s]) * static_cast<double>(xh[s]);
        }
      }
      grad_gamma_.data[ci] += static_cast<T>(sum_dy_xhat);
      grad_beta_.data[ci] += static_cast<T>(sum_dy);

      const double gamma = static_cast<double>(gamma_.data[ci]);
      const double inv_std = inv_std_[ci];
      const double mean_dy = sum_dy / static_cast<double>(m);
      const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
      for (std::size_t ni = 0; ni < grad_out.n; ++ni) {
        const T* g = &grad_out.data[(ni * grad_out.c + ci) * spatial];
        const T* xh = &xhat_.data[(ni * grad_out.c + ci) * spatial];
        T* d = &dx.data[(ni * grad_out.c + ci) * spatial];
        for (std::size_t s = 0; s < spatial; ++s) {
          const double v = gamma * inv_std *
                           (static_cast<double>(g[s]) - mean_dy -
                            static_cast<double>(xh[s]) * mean_dy_xhat);
          d[s] = static_cast<T>(v);
        }
      }
    }
    return dx;
  }

  void collect_params(std::vector<Tensor<T>*>& params, std::vector<Tensor<T>*>& grads) override {
    params.push_back(&gamma_);
    params.push_back(&beta_);
    grads.push_back(&grad_gamma_);
    grads.push_back(&grad_beta_);
  }

  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }

 private:
  std::size_t channels_;
  Tensor<T> gamma_, beta_, grad_gamma_, grad_beta_, xhat_;
  std::vector<double> running_mean_, running_var_, inv_std_;
  double momentum_ = 0.9;
  double epsilon_ = 1e-5;
};

/// Adaptive average pooling with the floor/ceil bin convention: output bin i
/// along an axis of length L covers [floor(i*L/out), ceil((i+1)*L/out)).
template <typename T>
class AdaptiveAvgPoolLayer final : public Layer<T> {
 public:
  AdaptiveAvgPoolLayer(std::size_t out_h, std::size_t out_w) : out_h_(out_h), out_w_(out_w) {
    require(out_h >= 1 && out_w >= 1, ErrorKind::ConfigError, "pool target must be at least 1x1");
  }

  const char* kind() const override { return "adaptive_avg_pool"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = {x.c, x.h, x.w};
    Tensor<T> y(x.n, x.c, out_h_, out_w_);
    for (std::size_t ni = 0; ni < x.n; ++ni)
      for (std::size_t ci = 0; ci < x.c; ++ci)
        for (std::size_t oy = 0; oy < out_h_; ++oy) {
          const auto [h0, h1] = bin(oy, x.h, out_h_);
          for (std::size_t ox = 0; ox < out_w_; ++ox) {
            const auto [w0, w1] = bin(ox, x.w, out_w_);
            double acc = 0.0;
            for (std::size_t iy = h0; iy < h1; ++iy)
              for (std::size_t ix = w0; ix < w1; ++ix)
                acc += static_cast<double>(x.at(ni, ci, iy, ix));
            y.at(ni, ci, oy, ox) =
                static_cast<T>(acc / static_cast<double>((h1 - h0) * (w1 - w0)));
          }
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx(grad_out.n, in_shape_.c, in_shape_.h, in_shape_.w);
    for (std::size_t ni = 0; ni < grad_out.n; ++ni)
      for (std::size_t ci = 0; ci < in_shape_.c; ++ci)
        for (std::size_t oy = 0; oy < out_h_; ++oy) {
          const auto [h0, h1] = bin(oy, in_shape_.h, out_h_);
          for (std::size_t ox = 0; ox < out_w_; ++ox) {
            const auto [w0, w1] = bin(ox, in_shape_.w, out_w_);
            const T share = static_cast<T>(
                static_cast<double>(grad_out.at(ni, ci, oy, ox)) /
                static_cast<double>((h1 - h0) * (w1 - w0)));
            for (std::size_t iy = h0; iy < h1; ++iy)
              for (std::size_t ix = w0; ix < w1; ++ix) dx.at(ni, ci, iy, ix) += share;
          }
        }
    return dx;
  }

  static std::pair<std::size_t, std::size_t> bin(std::size_t i, std::size_t in, std::size_t out) {
    const std::size_t lo = i * in / out;
    const std::size_t hi = ((i + 1) * in + out - 1) / out;
    return {lo, std::max(hi, lo + 1)};
  }

  std::size_t out_h() const noexcept { return out_h_; }
  std::size_t out_w() const noexcept { return out_w_; }

 private:
  std::size_t out_h_, out_w_;
  DataShape in_shape_;
};

template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
 public:
  const char* kind() const override { return "global_avg_pool"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = {x.c, x.h, x.w};
    const std::size_t spatial = x.h * x.w;
    Tensor<T> y(x.n, x.c, 1, 1);
    for (std::size_t ni = 0; ni < x.n; ++ni)
      for (std::size_t ci = 0; ci < x.c; ++ci) {
        const T* base = &x.data[(ni * x.c + ci) * spatial];
        double acc = 0.0;
        for (std::size_t s = 0; s < spatial; ++s) acc += static_cast<double>(base[s]);
        y.at(ni, ci, 0, 0) = static_cast<T>(acc / static_cast<double>(spatial));
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    const std::size_t spatial = in_shape_.h * in_shape_.w;
    Tensor<T> dx(grad_out.n, in_shape_.c, in_shape_.h, in_shape_.w);
    for (std::size_t ni = 0; ni < grad_out.n; ++ni)
      for (std::size_t ci = 0; ci < in_shape_.c; ++ci) {
        const T share = static_cast<T>(static_cast<double>(grad_out.at(ni, ci, 0, 0)) /
                                       static_cast<double>(spatial));
        T* base = &dx.data[(ni * in_shape_.c + ci) * spatial];
        for (std::size_t s = 0; s < spatial; ++s) base[s] = share;
      }
    return dx;
  }

 private:
  DataShape in_shape_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  const char* kind() const override { return "flatten"; }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = {x.c, x.h, x.w};
    Tensor<T> y = x;
    y.c = x.c * x.h * x.w;
    y.h = 1;
    y.w = 1;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) override {
    Tensor<T> dx = grad_out;
    dx.c = in_shape_.c;
    dx.h = in_shape_.h;
    dx.w = in_shape_.w;
    return dx;
  }

 private:
  DataShape in_shape_;
};

/// Explicit analysis-point marker; a pass-through in both directions.
template <typename T>
class ProbePointLayer final : public Layer<T> {
 public:
  const char* kind() const override { return "pca_probe_point"; }
  Tensor<T> forward(const Tensor<T>& x, bool) override { return x; }
  Tensor<T> backward(const Tensor<T>& grad_out) override { return grad_out; }
};

/// Mean softmax cross-entropy over the batch, with the gradient w.r.t. the
/// logits. Throws NonFiniteLoss when the loss degenerates.
template <typename T>
inline std::pair<double, Tensor<T>> softmax_cross_entropy(const Tensor<T>& logits,
                                                          const std::vector<int>& labels) {
  require(logits.flat(), ErrorKind::ShapeMismatch, "loss expects flat logits");
  require(logits.n == labels.size(), ErrorKind::ShapeMismatch,
          "batch size does not match label count");
  const std::size_t n = logits.n;
  const std::size_t k = logits.c;
  Tensor<T> grad(n, k, 1, 1);
  double loss = 0.0;
  std::vector<double> probs(k);
  for (std::size_t ni = 0; ni < n; ++ni) {
    const T* row = &logits.data[ni * k];
    require(labels[ni] >= 0 && static_cast<std::size_t>(labels[ni]) < k, ErrorKind::ShapeMismatch,
            "label out of range");
    double peak = static_cast<double>(row[0]);
    for (std::size_t j = 1; j < k; ++j) peak = std::max(peak, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[j] = std::exp(static_cast<double>(row[j]) - peak);
      z += probs[j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[j] /= z;
    loss -= std::log(std::max(probs[static_cast<std::size_t>(labels[ni])], 1e-300));
    for (std::size_t j = 0; j < k; ++j) {
      double g = probs[j];
      if (j == static_cast<std::size_t>(labels[ni])) g -= 1.0;
      grad.data[ni * k + j] = static_cast<T>(g / static_cast<double>(n));
    }
  }
  loss /= static_cast<double>(n);
  require(std::isfinite(loss), ErrorKind::NonFiniteLoss, "training loss is not finite");
  return {loss, std::move(grad)};
}

}  // namespace satlens::nn
