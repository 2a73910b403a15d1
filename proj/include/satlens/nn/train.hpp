#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "satlens/diagnostics.hpp"
#include "satlens/eigenspace.hpp"
#include "satlens/error.hpp"
#include "satlens/nn/dataset.hpp"
#include "satlens/nn/model.hpp"
#include "satlens/nn/optimizer.hpp"
#include "satlens/rng.hpp"

namespace satlens::nn {

/// Training hyperparameters. Analysis statistics are always computed in
/// double precision regardless of the (single-precision) training math.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double delta = 0.99;
  SelectionPolicy policy = SelectionPolicy::at_least;
  bool augment = false;  // pad-4 random crop + horizontal flip for images

  void validate() const {
    require(epochs >= 1, ErrorKind::ConfigError, "epochs must be at least 1");
    require(batch_size >= 1, ErrorKind::ConfigError, "batch size must be at least 1");
    require(learning_rate > 0.0, ErrorKind::ConfigError, "learning rate must be positive");
    require(delta > 0.0 && delta <= 1.0, ErrorKind::ConfigError, "delta must lie in (0, 1]");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  SaturationReport saturation;
};

/// Accuracy of the model on one split, optionally with eigenspace
/// projection. Deterministic: fixed order, fixed batching, running-stat
/// batchnorm.
inline double evaluate(Model& model, const Tensor<float>& x, const std::vector<int>& y,
                       bool projection, std::size_t batch_size = 64) {
  require(x.n == y.size(), ErrorKind::ShapeMismatch, "evaluate: sample/label count mismatch");
  require(x.n >= 1, ErrorKind::ShapeMismatch, "evaluate: empty split");
  const bool was_on = model.projection_enabled();
  model.set_projection(projection);
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < x.n; begin += batch_size) {
    const std::size_t end = std::min(x.n, begin + batch_size);
    const Tensor<float> batch = slice_batch(x, begin, end);
    const Tensor<float> logits = model.forward(batch, RunMode::eval);
    for (std::size_t i = 0; i < logits.n; ++i) {
      const float* row = &logits.data[i * logits.c];
      std::size_t best = 0;
      for (std::size_t j = 1; j < logits.c; ++j)
        if (row[j] > row[best]) best = j;
      if (static_cast<int>(best) == y[begin + i]) ++correct;
    }
  }
  model.set_projection(was_on);
  return static_cast<double>(correct) / static_cast<double>(x.n);
}

namespace detail {

// Pad-4 random crop plus 50% horizontal flip, applied per sample.
inline Tensor<float> augment_batch(const Tensor<float>& batch, CounterRng& rng) {
  constexpr std::size_t pad = 4;
  Tensor<float> out(batch.n, batch.c, batch.h, batch.w);
  for (std::size_t ni = 0; ni < batch.n; ++ni) {
    const std::size_t oy = rng.next_below(2 * pad + 1);
    const std::size_t ox = rng.next_below(2 * pad + 1);
    const bool flip = rng.next_double() < 0.5;
    for (std::size_t ci = 0; ci < batch.c; ++ci)
      for (std::size_t hi = 0; hi < batch.h; ++hi)
        for (std::size_t wi = 0; wi < batch.w; ++wi) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(hi + oy) - pad;
          std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(wi + ox) - pad;
          if (flip && sx >= 0 && sx < static_cast<std::ptrdiff_t>(batch.w))
            sx = static_cast<std::ptrdiff_t>(batch.w) - 1 - sx;
          float v = 0.0f;
          if (sy >= 0 && sy < static_cast<std::ptrdiff_t>(batch.h) && sx >= 0 &&
              sx < static_cast<std::ptrdiff_t>(batch.w))
            v = batch.at(ni, ci, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
          out.at(ni, ci, hi, wi) = v;
        }
  }
  return out;
}

}  // namespace detail

/// Trains the model and produces one record per epoch.
///
/// Each epoch: accumulators are reset, the training set is reshuffled from
/// the seeded stream, statistics are recorded during the training forward
/// passes, and at the epoch end the covariances are finalized, eigenspaces
/// selected at cfg.delta, projection operators refreshed, and validation
/// accuracy measured (projection off).
inline std::vector<EpochRecord> train(Model& model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(data.shape() == model.input_shape(), ErrorKind::ShapeMismatch,
          "dataset shape does not match model input");

  std::vector<Tensor<float>*> params, grads;
  model.collect_params(params, grads);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, params,
                grads);

  CounterRng shuffle_rng = CounterRng(cfg.seed).split(0x73687566ULL);
  CounterRng augment_rng = CounterRng(cfg.seed).split(0x61756700ULL);
  std::vector<std::size_t> order(data.train_x.n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const bool image_data = data.train_x.h > 1 || data.train_x.w > 1;
  std::vector<EpochRecord> records;
  records.reserve(cfg.epochs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    model.reset_accumulators();
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      Tensor<float> batch = gather_batch(data.train_x, order, begin, end);
      if (cfg.augment && image_data) batch = detail::augment_batch(batch, augment_rng);
      std::vector<int> labels(end - begin);
      for (std::size_t i = begin; i < end; ++i) labels[i - begin] = data.train_y[order[i]];

      const Tensor<float> logits = model.forward(batch, RunMode::train, /*record=*/true);
      auto [loss, grad] = softmax_cross_entropy(logits, labels);
      loss_sum += loss;
      ++batches;
      model.backward(grad);
      opt.step();
    }

    model.select_eigenspaces(cfg.delta, cfg.policy);

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(batches);
    std::vector<SaturationLayer> layers;
    for (const auto& point : model.analysis_points()) {
      SaturationLayer l;
      l.name = point.name;
      l.width = point.width;
      l.k = point.eigenspace->k;
      layers.push_back(std::move(l));
    }
    record.saturation = make_saturation_report(epoch, std::move(layers));
    record.val_accuracy = evaluate(model, data.val_x, data.val_y, /*projection=*/false);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace satlens::nn
