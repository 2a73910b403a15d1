#pragma once

#include <algorithm>
#include <cstddef>

#include "satlens/error.hpp"
#include "satlens/matrix.hpp"
#include "satlens/nn/layers.hpp"
#include "satlens/tensor.hpp"

namespace satlens::nn {

/// Adaptive average pooling as a free function (same bin convention as the
/// layer): bin i along an axis of length L covers
/// [floor(i*L/out), ceil((i+1)*L/out)).
template <typename T>
inline Tensor<T> adaptive_avg_pool(const Tensor<T>& t, std::size_t out_h, std::size_t out_w) {
  require(out_h >= 1 && out_w >= 1, ErrorKind::DomainError, "pool target must be at least 1x1");
  Tensor<T> out(t.n, t.c, out_h, out_w);
  for (std::size_t ni = 0; ni < t.n; ++ni)
    for (std::size_t ci = 0; ci < t.c; ++ci)
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const auto [h0, h1] = AdaptiveAvgPoolLayer<T>::bin(oy, t.h, out_h);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const auto [w0, w1] = AdaptiveAvgPoolLayer<T>::bin(ox, t.w, out_w);
          double acc = 0.0;
          for (std::size_t iy = h0; iy < h1; ++iy)
            for (std::size_t ix = w0; ix < w1; ++ix)
              acc += static_cast<double>(t.at(ni, ci, iy, ix));
          out.at(ni, ci, oy, ox) = static_cast<T>(acc / static_cast<double>((h1 - h0) * (w1 - w0)));
        }
      }
  return out;
}

/// Probe features from one activation batch: convolutional maps are adaptive
/// average pooled to at most 4x4 and flattened to N x (pooledH*pooledW*C);
/// flat activations pass through unchanged. Output is double precision.
template <typename T>
inline Matrix extract_probe_features(const Tensor<T>& activation) {
  if (activation.flat()) {
    Matrix out(activation.n, activation.c);
    for (std::size_t ni = 0; ni < activation.n; ++ni)
      for (std::size_t ci = 0; ci < activation.c; ++ci)
        out(ni, ci) = static_cast<double>(activation.at(ni, ci, 0, 0));
    return out;
  }
  const std::size_t ph = std::min<std::size_t>(activation.h, 4);
  const std::size_t pw = std::min<std::size_t>(activation.w, 4);
  const Tensor<T> pooled = adaptive_avg_pool(activation, ph, pw);
  Matrix out(activation.n, pooled.per_sample());
  for (std::size_t ni = 0; ni < pooled.n; ++ni)
    for (std::size_t f = 0; f < pooled.per_sample(); ++f)
      out(ni, f) = static_cast<double>(pooled.data[ni * pooled.per_sample() + f]);
  return out;
}

}  // namespace satlens::nn
