#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "satlens/nn/dataset.hpp"
#include "satlens/nn/model.hpp"
#include "satlens/nn/train.hpp"
#include "satlens/probes.hpp"
#include "satlens/rng.hpp"

using namespace satlens;
using namespace satlens::nn;

namespace {

// Planted two-class problem that a linear classifier separates perfectly.
std::pair<Matrix, std::vector<int>> separable_features(std::size_t n, std::size_t dims,
                                                       CounterRng& rng, double gap = 4.0) {
  Matrix x(n, dims);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    const double offset = y[i] == 0 ? -gap : gap;
    for (std::size_t d = 0; d < dims; ++d)
      x(i, d) = rng.next_normal() + (d == 0 ? offset : 0.0);
  }
  return {x, y};
}

}  // namespace

TEST_CASE("probe separates linearly separable blobs") {
  CounterRng rng(900);
  auto [x, y] = separable_features(300, 4, rng);
  const ProbeModel probe = train_probe(x, y, 2);
  REQUIRE(probe.accuracy(x, y) >= 0.99);
  REQUIRE(probe.final_loss() <= probe.initial_loss());
}

TEST_CASE("probe on shuffled labels sits near chance") {
  CounterRng rng(901);
  const std::size_t n = 2000;
  Matrix x(n, 6);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 6; ++d) x(i, d) = rng.next_normal();
    y[i] = static_cast<int>(rng.next_below(4));
  }
  const ProbeModel probe = train_probe(x, y, 4);
  // Labels carry no signal: accuracy within 5 points of 1/4 at n = 2000.
  REQUIRE(std::fabs(probe.accuracy(x, y) - 0.25) <= 0.05);
}

TEST_CASE("probe training is deterministic") {
  CounterRng rng(902);
  auto [x, y] = separable_features(150, 5, rng, 2.0);
  const ProbeModel a = train_probe(x, y, 2);
  const ProbeModel b = train_probe(x, y, 2);
  REQUIRE(a.weights() == b.weights());  // bitwise
  REQUIRE(a.final_loss() == b.final_loss());
}

TEST_CASE("duplicated feature columns keep symmetric weights and predictions") {
  CounterRng rng(903);
  auto [x, y] = separable_features(200, 3, rng, 3.0);

  Matrix doubled(200, 6);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t d = 0; d < 3; ++d) {
      doubled(i, d) = x(i, d);
      doubled(i, d + 3) = x(i, d);
    }
  const ProbeModel single = train_probe(x, y, 2);
  const ProbeModel dual = train_probe(doubled, y, 2);

  // The L2 penalty ties the duplicated columns to identical weights.
  for (std::size_t d = 0; d < 3; ++d)
    for (std::size_t k = 0; k < 2; ++k)
      REQUIRE(dual.weights()(d, k) == Catch::Approx(dual.weights()(d + 3, k)).margin(1e-12));

  // Class predictions match the single-copy probe.
  const auto pred_single = single.predict(x);
  const auto pred_dual = dual.predict(doubled);
  REQUIRE(pred_single == pred_dual);
}

TEST_CASE("standardization makes probes invariant to per-feature affine rescaling") {
  CounterRng rng(904);
  auto [x, y] = separable_features(240, 4, rng, 2.5);
  Matrix rescaled = x;
  const double scales[4] = {5.0, 0.01, 120.0, 3.0};
  const double shifts[4] = {-2.0, 7.0, 0.5, 100.0};
  for (std::size_t i = 0; i < rescaled.rows(); ++i)
    for (std::size_t d = 0; d < 4; ++d) rescaled(i, d) = scales[d] * x(i, d) + shifts[d];

  const ProbeModel plain = train_probe(x, y, 2);
  const ProbeModel scaled = train_probe(rescaled, y, 2);
  REQUIRE(plain.accuracy(x, y) == Catch::Approx(scaled.accuracy(rescaled, y)).margin(1e-6));
  for (std::size_t i = 0; i < 10; ++i) {
    const auto p1 = plain.probabilities(x, i);
    const auto p2 = scaled.probabilities(rescaled, i);
    for (std::size_t k = 0; k < 2; ++k) REQUIRE(p1[k] == Catch::Approx(p2[k]).margin(1e-6));
  }
}

TEST_CASE("probe rejects degenerate labels") {
  Matrix x(10, 2);
  std::vector<int> y(10, 1);
  try {
    train_probe(x, y, 2);
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DegenerateLabels);
  }
}

TEST_CASE("probe sweep runs per analysis point and tracks the model") {
  const Dataset data = synth_dataset(SynthKind::blobs, 2, 500, 3, 41);
  Architecture arch;
  arch.layers = {LayerSpec::dense_of(12), LayerSpec::relu_of(), LayerSpec::dense_of(8),
                 LayerSpec::relu_of(), LayerSpec::dense_of(2)};
  Model model(arch, data.shape(), 41);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 32;
  cfg.seed = 41;
  train(model, data, cfg);

  const ProbeSweep sweep = probe_sweep(model, data);
  REQUIRE(sweep.names.size() == 2);  // two hidden dense layers
  REQUIRE(sweep.accuracies.size() == 2);
  for (double acc : sweep.accuracies) {
    REQUIRE(acc >= 0.0);
    REQUIRE(acc <= 1.0);
  }
  // The last pre-output feature layer linearly decodes at least as well as
  // the model head, give or take two points.
  REQUIRE(sweep.accuracies.back() >= sweep.model_accuracy - 0.02);

  // Probe on raw blobs input: the construction is linearly separable, so a
  // direct input probe also lands high; sanity-check via the first layer.
  REQUIRE(sweep.accuracies.front() >= 0.9);

  // Threaded sweep gives identical results.
  const ProbeSweep threaded = probe_sweep(model, data, 100, 4);
  REQUIRE(threaded.accuracies == sweep.accuracies);

  // Single-analysis-point model gives a length-1 sweep.
  Architecture small;
  small.layers = {LayerSpec::dense_of(6), LayerSpec::relu_of(), LayerSpec::dense_of(2)};
  Model tiny(small, data.shape(), 7);
  train(tiny, data, cfg);
  REQUIRE(probe_sweep(tiny, data).accuracies.size() == 1);
}

TEST_CASE("probe on raw separable inputs approaches the construction's accuracy") {
  const Dataset data = synth_dataset(SynthKind::blobs, 2, 600, 2, 55);
  Matrix train_features(data.train_x.n, 2);
  for (std::size_t i = 0; i < data.train_x.n; ++i)
    for (std::size_t d = 0; d < 2; ++d)
      train_features(i, d) = static_cast<double>(data.train_x.data[i * 2 + d]);
  const ProbeModel probe = train_probe(train_features, data.train_y, 2);

  Matrix val_features(data.val_x.n, 2);
  for (std::size_t i = 0; i < data.val_x.n; ++i)
    for (std::size_t d = 0; d < 2; ++d)
      val_features(i, d) = static_cast<double>(data.val_x.data[i * 2 + d]);
  // Means 12 standard deviations apart: essentially every sample is on the
  // right side of the linear boundary.
  REQUIRE(probe.accuracy(val_features, data.val_y) >= 0.95);
}
