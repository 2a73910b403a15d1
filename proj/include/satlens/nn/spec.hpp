#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "satlens/error.hpp"

namespace satlens::nn {

enum class LayerKind {
  dense,
  conv2d,
  relu,
  maxpool,
  batchnorm,
  adaptive_avg_pool,
  global_avg_pool,
  flatten,
  pca_probe_point,
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::adaptive_avg_pool: return "adaptive_avg_pool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::pca_probe_point: return "pca_probe_point";
  }
  return "unknown";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "relu") return LayerKind::relu;
  if (s == "maxpool") return LayerKind::maxpool;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "adaptive_avg_pool") return LayerKind::adaptive_avg_pool;
  if (s == "global_avg_pool") return LayerKind::global_avg_pool;
  if (s == "flatten") return LayerKind::flatten;
  if (s == "pca_probe_point") return LayerKind::pca_probe_point;
  fail(ErrorKind::ConfigError, "unknown layer kind '" + s + "'");
}

/// One architecture entry. Unused fields stay at their defaults for kinds
/// that do not need them.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;    // dense
  std::size_t filters = 0;  // conv2d
  std::size_t kernel = 0;   // conv2d / maxpool
  std::size_t stride = 1;   // conv2d / maxpool
  std::size_t padding = 0;  // conv2d
  std::size_t out_h = 0;    // adaptive_avg_pool
  std::size_t out_w = 0;    // adaptive_avg_pool

  void validate() const {
    switch (kind) {
      case LayerKind::dense:
        require(units >= 1, ErrorKind::ConfigError, "dense layer needs units >= 1");
        break;
      case LayerKind::conv2d:
        require(filters >= 1, ErrorKind::ConfigError, "conv2d needs filters >= 1");
        require(kernel >= 1, ErrorKind::ConfigError, "conv2d needs kernel >= 1");
        require(stride >= 1, ErrorKind::ConfigError, "conv2d needs stride >= 1");
        break;
      case LayerKind::maxpool:
        require(kernel >= 1, ErrorKind::ConfigError, "maxpool needs kernel >= 1");
        require(stride >= 1, ErrorKind::ConfigError, "maxpool needs stride >= 1");
        break;
      case LayerKind::adaptive_avg_pool:
        require(out_h >= 1 && out_w >= 1, ErrorKind::ConfigError,
                "adaptive_avg_pool target must be at least 1x1");
        break;
      default:
        break;
    }
  }

  static LayerSpec dense_of(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
  }
  static LayerSpec conv2d_of(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                             std::size_t padding = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec relu_of() { return LayerSpec{LayerKind::relu}; }
  static LayerSpec maxpool_of(std::size_t kernel, std::size_t stride = 0) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.kernel = kernel;
    s.stride = stride == 0 ? kernel : stride;
    return s;
  }
  static LayerSpec batchnorm_of() { return LayerSpec{LayerKind::batchnorm}; }
  static LayerSpec adaptive_avg_pool_of(std::size_t out_h, std::size_t out_w) {
    LayerSpec s;
    s.kind = LayerKind::adaptive_avg_pool;
    s.out_h = out_h;
    s.out_w = out_w;
    return s;
  }
  static LayerSpec global_avg_pool_of() { return LayerSpec{LayerKind::global_avg_pool}; }
  static LayerSpec flatten_of() { return LayerSpec{LayerKind::flatten}; }
  static LayerSpec probe_point_of() { return LayerSpec{LayerKind::pca_probe_point}; }
};

/// Architecture description: named sequential layer list. Only sequential
/// topologies are supported; the field exists so configs can state the
/// assumption explicitly.
struct Architecture {
  std::string name = "unnamed";
  std::string topology = "sequential";
  std::vector<LayerSpec> layers;
};

}  // namespace satlens::nn
