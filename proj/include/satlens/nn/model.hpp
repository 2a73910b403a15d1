#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "satlens/covariance.hpp"
#include "satlens/eigenspace.hpp"
#include "satlens/error.hpp"
#include "satlens/nn/layers.hpp"
#include "satlens/nn/spec.hpp"
#include "satlens/rng.hpp"
#include "satlens/tensor.hpp"

namespace satlens::nn {

enum class RunMode { train, eval };

/// Builds one layer for the given input shape and returns the output shape
/// through `shape`. Templated so tests can instantiate double-precision
/// layers for finite-difference checks.
template <typename T>
inline std::unique_ptr<Layer<T>> build_layer(const LayerSpec& spec, DataShape& shape,
                                             CounterRng rng) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::dense: {
      require(shape.flat(), ErrorKind::ConfigError,
              "dense layer needs flat input; insert flatten or global_avg_pool first");
      auto layer = std::make_unique<DenseLayer<T>>(shape.c, spec.units, rng);
      shape = {spec.units, 1, 1};
      return layer;
    }
    case LayerKind::conv2d: {
      auto layer = std::make_unique<Conv2dLayer<T>>(shape.c, spec.filters, spec.kernel,
                                                    spec.stride, spec.padding, rng);
      shape = {spec.filters,
               Conv2dLayer<T>::out_side(shape.h, spec.kernel, spec.stride, spec.padding),
               Conv2dLayer<T>::out_side(shape.w, spec.kernel, spec.stride, spec.padding)};
      return layer;
    }
    case LayerKind::relu:
      return std::make_unique<ReluLayer<T>>();
    case LayerKind::maxpool: {
      require(shape.h >= spec.kernel && shape.w >= spec.kernel, ErrorKind::ConfigError,
              "maxpool window larger than input " + shape.to_string());
      shape = {shape.c, (shape.h - spec.kernel) / spec.stride + 1,
               (shape.w - spec.kernel) / spec.stride + 1};
      return std::make_unique<MaxPoolLayer<T>>(spec.kernel, spec.stride);
    }
    case LayerKind::batchnorm:
      return std::make_unique<BatchNormLayer<T>>(shape.c);
    case LayerKind::adaptive_avg_pool:
      shape = {shape.c, spec.out_h, spec.out_w};
      return std::make_unique<AdaptiveAvgPoolLayer<T>>(spec.out_h, spec.out_w);
    case LayerKind::global_avg_pool:
      shape = {shape.c, 1, 1};
      return std::make_unique<GlobalAvgPoolLayer<T>>();
    case LayerKind::flatten:
      shape = {shape.numel(), 1, 1};
      return std::make_unique<FlattenLayer<T>>();
    case LayerKind::pca_probe_point:
      return std::make_unique<ProbePointLayer<T>>();
  }
  fail(ErrorKind::ConfigError, "unhandled layer kind");
}

/// Covariance/eigenspace state attached after one dense or conv2d layer.
struct AnalysisPoint {
  std::size_t layer_index = 0;
  std::string name;
  std::size_t width = 0;
  bool is_conv = false;
  CovarianceAccumulator accumulator;
  std::optional<Eigenspace> eigenspace;
  std::optional<ProjectionOperator> projector;
};

/// Sequential trainable network with analysis points.
///
/// Analysis points record activation statistics during training forward
/// passes and, when projection is enabled, project activations onto their
/// eigenspaces during evaluation passes. By default a point is attached
/// after every dense/conv2d layer except the output layer; placing explicit
/// pca_probe_point markers in the architecture overrides that choice.
class Model {
 public:
  Model(Architecture arch, DataShape input, std::uint64_t seed)
      : arch_(std::move(arch)), input_shape_(input) {
    require(arch_.topology == "sequential", ErrorKind::UnsupportedTopology,
            "only sequential architectures are supported, got '" + arch_.topology + "'");
    require(!arch_.layers.empty(), ErrorKind::ConfigError, "architecture has no layers");

    CounterRng init_rng = CounterRng(seed).split(0x696e6974ULL);
    DataShape shape = input;
    bool explicit_points = false;
    for (const auto& spec : arch_.layers)
      if (spec.kind == LayerKind::pca_probe_point) explicit_points = true;

    std::size_t last_trainable = arch_.layers.size();
    for (std::size_t i = 0; i < arch_.layers.size(); ++i)
      if (arch_.layers[i].kind == LayerKind::dense || arch_.layers[i].kind == LayerKind::conv2d)
        last_trainable = i;
    require(last_trainable != arch_.layers.size(), ErrorKind::ConfigError,
            "architecture has no trainable layers");

    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerSpec& spec = arch_.layers[i];
      DataShape before = shape;
      layers_.push_back(build_layer<float>(spec, shape, init_rng.split(i)));
      layers_.back()->name = std::string(to_string(spec.kind)) + "_" + std::to_string(i);
      shapes_.push_back(shape);

      const bool trainable_kind =
          spec.kind == LayerKind::dense || spec.kind == LayerKind::conv2d;
      if (explicit_points) {
        if (spec.kind == LayerKind::pca_probe_point) {
          require(i > 0 && (arch_.layers[i - 1].kind == LayerKind::dense ||
                            arch_.layers[i - 1].kind == LayerKind::conv2d),
                  ErrorKind::ConfigError,
                  "pca_probe_point must directly follow a dense or conv2d layer");
          attach_point(i - 1, before);
        }
      } else if (trainable_kind && i != last_trainable) {
        attach_point(i, shape);
      }
    }
    output_shape_ = shape;
    require(output_shape_.flat(), ErrorKind::ConfigError,
            "network output must be flat logits; end with flatten/global_avg_pool + dense");
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const DataShape& input_shape() const noexcept { return input_shape_; }
  const DataShape& output_shape() const noexcept { return output_shape_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  Layer<float>& layer(std::size_t i) { return *layers_[i]; }
  const Layer<float>& layer(std::size_t i) const { return *layers_[i]; }

  std::vector<AnalysisPoint>& analysis_points() noexcept { return points_; }
  const std::vector<AnalysisPoint>& analysis_points() const noexcept { return points_; }

  bool projection_enabled() const noexcept { return projection_on_; }
  void set_projection(bool on) {
    if (on)
      for (const auto& p : points_)
        require(p.projector.has_value(), ErrorKind::MissingEigenspace,
                "no projection operator at " + p.name + "; compute eigenspaces first");
    projection_on_ = on;
  }

  /// When > 0, activations recorded at convolutional analysis points are
  /// nearest-downsampled so their larger spatial side does not exceed the
  /// cap. Disabled (0) by default.
  void set_downsample_cap(std::size_t cap) { downsample_cap_ = cap; }
  std::size_t downsample_cap() const noexcept { return downsample_cap_; }

  void collect_params(std::vector<Tensor<float>*>& params, std::vector<Tensor<float>*>& grads) {
    for (auto& l : layers_) l->collect_params(params, grads);
  }

  /// Runs the network. In train mode analysis points optionally record
  /// statistics; in eval mode with projection enabled they project the
  /// activation through P = E E^T (computed in double precision, activations
  /// cast at the boundary).
  Tensor<float> forward(const Tensor<float>& batch, RunMode mode, bool record = false) {
    require(batch.c == input_shape_.c && batch.h == input_shape_.h && batch.w == input_shape_.w,
            ErrorKind::ShapeMismatch,
            "input batch " + batch.shape_string() + " does not match model input " +
                input_shape_.to_string());
    Tensor<float> x = batch;
    std::size_t next_point = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i]->forward(x, mode == RunMode::train);
      while (next_point < points_.size() && points_[next_point].layer_index == i) {
        AnalysisPoint& point = points_[next_point];
        if (mode == RunMode::train && record) {
          record_activation(point, x);
        } else if (mode == RunMode::eval && projection_on_) {
          require(point.projector.has_value(), ErrorKind::MissingEigenspace,
                  "no projection operator at " + point.name);
          x = point.is_conv ? project_conv(x, *point.projector)
                            : project_flat(x, *point.projector);
        }
        ++next_point;
      }
    }
    return x;
  }

  /// Backpropagates the loss gradient; parameter gradients land in the
  /// layers' gradient buffers.
  void backward(const Tensor<float>& grad_logits) {
    Tensor<float> g = grad_logits;
    for (std::size_t i = layers_.size(); i > 0; --i) g = layers_[i - 1]->backward(g);
  }

  /// Finalizes every accumulator, eigendecomposes and selects eigenspaces at
  /// `delta`, and refreshes the projection operators.
  void select_eigenspaces(double delta, SelectionPolicy policy = SelectionPolicy::at_least) {
    for (auto& point : points_) {
      const Matrix q = point.accumulator.finalize();
      const EighResult eig = sym_eigh(q);
      point.eigenspace = select_eigenspace(eig, delta, policy);
      point.projector = projection_operator(*point.eigenspace);
    }
  }

  /// Replaces every analysis point's operator by a projector onto a random
  /// orthonormal subspace of matching rank (the baseline of the
  /// eigenspace-vs-random comparison).
  void set_random_projection(std::uint64_t seed) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      AnalysisPoint& point = points_[i];
      require(point.eigenspace.has_value(), ErrorKind::MissingEigenspace,
              "compute eigenspaces before requesting a random projection at " + point.name);
      const std::uint64_t layer_seed =
          satlens::detail::mix64(seed ^ (0x9e3779b97f4a7c15ULL * (point.layer_index + 1)));
      const Matrix basis =
          random_orthonormal_basis(point.width, point.eigenspace->k, layer_seed);
      point.projector = projection_operator_from_basis(basis);
    }
  }

  /// Restores the eigenspace projectors after set_random_projection.
  void restore_eigenspace_projection() {
    for (auto& point : points_) {
      require(point.eigenspace.has_value(), ErrorKind::MissingEigenspace,
              "no eigenspace at " + point.name);
      point.projector = projection_operator(*point.eigenspace);
    }
  }

  void reset_accumulators() {
    for (auto& point : points_) point.accumulator.reset();
  }

  /// Activations at every analysis point for one batch (eval mode, no
  /// projection); feeds the probe pipeline.
  std::vector<Tensor<float>> collect_activations(const Tensor<float>& batch) {
    std::vector<Tensor<float>> captured;
    captured.reserve(points_.size());
    Tensor<float> x = batch;
    std::size_t next_point = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i]->forward(x, false);
      while (next_point < points_.size() && points_[next_point].layer_index == i) {
        captured.push_back(x);
        ++next_point;
      }
    }
    return captured;
  }

 private:
  void attach_point(std::size_t layer_index, const DataShape& shape_after) {
    AnalysisPoint point;
    point.layer_index = layer_index;
    point.name = layers_[layer_index]->name;
    point.width = shape_after.c;
    point.is_conv = arch_.layers[layer_index].kind == LayerKind::conv2d;
    point.accumulator = CovarianceAccumulator(point.width);
    points_.push_back(std::move(point));
  }

  void record_activation(AnalysisPoint& point, const Tensor<float>& x) {
    if (point.is_conv) {
      if (downsample_cap_ > 0) {
        point.accumulator.update(unfold_conv(nearest_downsample(x, downsample_cap_)));
      } else {
        point.accumulator.update(unfold_conv(x));
      }
    } else {
      point.accumulator.update(x);
    }
  }

  static Tensor<float> project_flat(const Tensor<float>& x, const ProjectionOperator& op) {
    ObservationMatrix a(x.n, x.c);
    for (std::size_t ni = 0; ni < x.n; ++ni)
      for (std::size_t ci = 0; ci < x.c; ++ci) a(ni, ci) = static_cast<double>(x.at(ni, ci, 0, 0));
    const ObservationMatrix projected = project_dense(a, op);
    Tensor<float> out(x.n, x.c, 1, 1);
    for (std::size_t ni = 0; ni < x.n; ++ni)
      for (std::size_t ci = 0; ci < x.c; ++ci)
        out.at(ni, ci, 0, 0) = static_cast<float>(projected(ni, ci));
    return out;
  }

  Architecture arch_;
  DataShape input_shape_;
  DataShape output_shape_;
  std::vector<std::unique_ptr<Layer<float>>> layers_;
  std::vector<DataShape> shapes_;
  std::vector<AnalysisPoint> points_;
  bool projection_on_ = false;
  std::size_t downsample_cap_ = 0;
};

}  // namespace satlens::nn
