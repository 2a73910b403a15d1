#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/matrix.hpp"
#include "satlens/nn/dataset.hpp"
#include "satlens/nn/model.hpp"
#include "satlens/nn/probe_features.hpp"
#include "satlens/nn/train.hpp"

namespace satlens {

/// Multinomial logistic-regression probe. Trained by deterministic
/// full-batch gradient descent (fixed schedule: learning rate 0.1, 100
/// epochs, L2 penalty 1e-4 on the weights) over features standardized with
/// train-split statistics.
class ProbeModel {
 public:
  ProbeModel() = default;

  std::size_t feature_count() const noexcept { return weights_.rows(); }
  std::size_t class_count() const noexcept { return weights_.cols(); }
  double final_loss() const noexcept { return final_loss_; }
  double initial_loss() const noexcept { return initial_loss_; }
  const Matrix& weights() const noexcept { return weights_; }

  std::vector<int> predict(const Matrix& features) const {
    const std::size_t n = features.rows();
    require(features.cols() == feature_count(), ErrorKind::DimensionMismatch,
            "probe feature width mismatch");
    std::vector<int> out(n);
    std::vector<double> logits(class_count());
    for (std::size_t i = 0; i < n; ++i) {
      scores(features, i, logits);
      out[i] = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    return out;
  }

  /// Class probabilities for one row (softmax of the linear scores).
  std::vector<double> probabilities(const Matrix& features, std::size_t row) const {
    std::vector<double> logits(class_count());
    scores(features, row, logits);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& v : logits) {
      v = std::exp(v - peak);
      z += v;
    }
    for (double& v : logits) v /= z;
    return logits;
  }

  double accuracy(const Matrix& features, const std::vector<int>& labels) const {
    require(features.rows() == labels.size(), ErrorKind::DimensionMismatch,
            "probe accuracy: feature/label count mismatch");
    const std::vector<int> predictions = predict(features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
  }

  static ProbeModel fit(const Matrix& features, const std::vector<int>& labels,
                        std::size_t classes, std::size_t epochs);

 private:
  void scores(const Matrix& features, std::size_t row, std::vector<double>& logits) const {
    const std::size_t f = feature_count();
    const std::size_t k = class_count();
    for (std::size_t j = 0; j < k; ++j) logits[j] = bias_[j];
    for (std::size_t d = 0; d < f; ++d) {
      const double v = (features(row, d) - mean_[d]) * inv_scale_[d];
      for (std::size_t j = 0; j < k; ++j) logits[j] += v * weights_(d, j);
    }
  }

  Matrix weights_;             // features x classes
  std::vector<double> bias_;   // classes
  std::vector<double> mean_;   // per-feature standardization offset
  std::vector<double> inv_scale_;
  double initial_loss_ = 0.0;
  double final_loss_ = 0.0;
};

/// Fits a probe on raw (unstandardized) features; standardization statistics
/// are computed here from the given training split and stored in the model.
inline ProbeModel train_probe(const Matrix& features, const std::vector<int>& labels,
                              std::size_t classes, std::size_t epochs = 100) {
  return ProbeModel::fit(features, labels, classes, epochs);
}

inline ProbeModel ProbeModel::fit(const Matrix& features, const std::vector<int>& labels,
                                  std::size_t classes, std::size_t epochs) {
  const std::size_t n = features.rows();
  const std::size_t f = features.cols();
  require(n == labels.size(), ErrorKind::DimensionMismatch,
          "train_probe: feature/label count mismatch");
  require(n >= 2, ErrorKind::DegenerateLabels, "train_probe needs at least 2 samples");
  require(epochs >= 1, ErrorKind::DomainError, "train_probe needs epochs >= 1");
  require(classes >= 2, ErrorKind::DegenerateLabels, "train_probe needs at least 2 classes");
  {
    std::set<int> seen(labels.begin(), labels.end());
    require(seen.size() >= 2, ErrorKind::DegenerateLabels,
            "train_probe: only one class present in the labels");
    for (int y : labels)
      require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::DomainError,
              "train_probe: label out of range");
  }

  ProbeModel model;
  model.mean_.assign(f, 0.0);
  model.inv_scale_.assign(f, 1.0);
  for (std::size_t d = 0; d < f; ++d) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += features(i, d);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = features(i, d) - mean;
      ss += c * c;
    }
    const double variance = ss / static_cast<double>(n);
    model.mean_[d] = mean;
    model.inv_scale_[d] = variance > 1e-24 ? 1.0 / std::sqrt(variance) : 1.0;
  }

  Matrix standardized(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < f; ++d)
      standardized(i, d) = (features(i, d) - model.mean_[d]) * model.inv_scale_[d];

  constexpr double kLearningRate = 0.1;
  constexpr double kL2 = 1e-4;
  model.weights_ = Matrix(f, classes);
  model.bias_.assign(classes, 0.0);

  Matrix grad_w(f, classes);
  std::vector<double> grad_b(classes);
  std::vector<double> probs(classes);

  const auto epoch_pass = [&](bool apply) {
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (auto& v : grad_w.data()) v = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double peak = model.bias_[0];
      for (std::size_t j = 0; j < classes; ++j) {
        double s = model.bias_[j];
        for (std::size_t d = 0; d < f; ++d) s += standardized(i, d) * model.weights_(d, j);
        probs[j] = s;
        peak = std::max(peak, s);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        probs[j] = std::exp(probs[j] - peak);
        z += probs[j];
      }
      for (std::size_t j = 0; j < classes; ++j) probs[j] /= z;
      loss -= std::log(std::max(probs[static_cast<std::size_t>(labels[i])], 1e-300));
      if (!apply) continue;
      for (std::size_t j = 0; j < classes; ++j) {
        double g = probs[j];
        if (j == static_cast<std::size_t>(labels[i])) g -= 1.0;
        grad_b[j] += g;
        for (std::size_t d = 0; d < f; ++d) grad_w(d, j) += g * standardized(i, d);
      }
    }
    loss /= static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t d = 0; d < f; ++d)
      for (std::size_t j = 0; j < classes; ++j) penalty += model.weights_(d, j) * model.weights_(d, j);
    loss += 0.5 * kL2 * penalty;
    if (apply) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t j = 0; j < classes; ++j)
        model.bias_[j] -= kLearningRate * grad_b[j] * inv_n;
      for (std::size_t d = 0; d < f; ++d)
        for (std::size_t j = 0; j < classes; ++j)
          model.weights_(d, j) -=
              kLearningRate * (grad_w(d, j) * inv_n + kL2 * model.weights_(d, j));
    }
    return loss;
  };

  model.initial_loss_ = epoch_pass(false);
  for (std::size_t e = 0; e < epochs; ++e) epoch_pass(true);
  model.final_loss_ = epoch_pass(false);
  return model;
}

/// Per-analysis-point probe accuracies in forward-pass order, plus the model
/// reference accuracy on the same validation split.
struct ProbeSweep {
  std::vector<std::string> names;
  std::vector<double> accuracies;
  double model_accuracy = 0.0;
};

/// For each analysis point: pooled features from the train split feed a
/// probe that is then scored on the validation split. Probes see eval-mode
/// activations without projection. `threads` > 1 trains layer probes
/// concurrently (results are identical either way).
inline ProbeSweep probe_sweep(nn::Model& model, const nn::Dataset& data,
                              std::size_t probe_epochs = 100, std::size_t threads = 1) {
  const std::size_t point_count = model.analysis_points().size();
  require(point_count >= 1, ErrorKind::TooFewLayers, "model has no analysis points");

  std::vector<Matrix> train_features(point_count);
  std::vector<Matrix> val_features(point_count);

  const auto collect = [&](const Tensor<float>& x, std::vector<Matrix>& features) {
    constexpr std::size_t kBatch = 64;
    std::vector<std::vector<Matrix>> chunks(point_count);
    for (std::size_t begin = 0; begin < x.n; begin += kBatch) {
      const std::size_t end = std::min(x.n, begin + kBatch);
      const auto activations = model.collect_activations(nn::slice_batch(x, begin, end));
      for (std::size_t p = 0; p < point_count; ++p)
        chunks[p].push_back(nn::extract_probe_features(activations[p]));
    }
    for (std::size_t p = 0; p < point_count; ++p) {
      std::size_t rows = 0;
      for (const auto& m : chunks[p]) rows += m.rows();
      Matrix merged(rows, chunks[p].front().cols());
      std::size_t at = 0;
      for (const auto& m : chunks[p]) {
        std::copy(m.data().begin(), m.data().end(), merged.data().begin() + at * merged.cols());
        at += m.rows();
      }
      features[p] = std::move(merged);
    }
  };
  collect(data.train_x, train_features);
  collect(data.val_x, val_features);

  ProbeSweep sweep;
  sweep.names.resize(point_count);
  sweep.accuracies.assign(point_count, 0.0);
  for (std::size_t p = 0; p < point_count; ++p)
    sweep.names[p] = model.analysis_points()[p].name;

  const auto run_probe = [&](std::size_t p) {
    const ProbeModel probe =
        train_probe(train_features[p], data.train_y, data.classes, probe_epochs);
    sweep.accuracies[p] = probe.accuracy(val_features[p], data.val_y);
  };

  if (threads <= 1 || point_count <= 1) {
    for (std::size_t p = 0; p < point_count; ++p) run_probe(p);
  } else {
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(threads, point_count);
    std::atomic<std::size_t> cursor{0};
    for (std::size_t t = 0; t < workers; ++t)
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t p = cursor.fetch_add(1);
          if (p >= point_count) return;
          run_probe(p);
        }
      });
    for (auto& th : pool) th.join();
  }

  sweep.model_accuracy = nn::evaluate(model, data.val_x, data.val_y, /*projection=*/false);
  return sweep;
}

}  // namespace satlens
