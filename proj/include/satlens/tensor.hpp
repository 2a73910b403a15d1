#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "satlens/error.hpp"

namespace satlens {

/// Dense NCHW activation/parameter tensor. Flat (vector) data uses h = w = 1.
template <typename T>
struct Tensor {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, fill) {}

  std::size_t numel() const noexcept { return data.size(); }
  std::size_t per_sample() const noexcept { return c * h * w; }
  bool flat() const noexcept { return h == 1 && w == 1; }

  T& at(std::size_t ni, std::size_t ci, std::size_t hi, std::size_t wi) {
    return data[((ni * c + ci) * h + hi) * w + wi];
  }
  T at(std::size_t ni, std::size_t ci, std::size_t hi, std::size_t wi) const {
    return data[((ni * c + ci) * h + hi) * w + wi];
  }

  bool same_shape(const Tensor& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  void fill(T value) { std::fill(data.begin(), data.end(), value); }
};

}  // namespace satlens
