#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "satlens/covariance.hpp"
#include "satlens/matrix.hpp"
#include "satlens/rng.hpp"
#include "satlens/tensor.hpp"

using namespace satlens;

namespace {

// Independent two-pass covariance: center first, then average outer products
// (population denominator).
Matrix two_pass_covariance(const ObservationMatrix& data) {
  const std::size_t n = data.rows();
  const std::size_t w = data.cols();
  std::vector<double> mean(w, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < w; ++c) mean[c] += data(r, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix q(w, w);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = 0; j < w; ++j)
        q(i, j) += (data(r, i) - mean[i]) * (data(r, j) - mean[j]);
  for (auto& v : q.data()) v /= static_cast<double>(n);
  return q;
}

ObservationMatrix uniform_data(std::size_t rows, std::size_t cols, CounterRng& rng,
                              double scale = 1.0) {
  ObservationMatrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.next_uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("fresh accumulators are empty and sized") {
  CovarianceAccumulator acc(3);
  REQUIRE(acc.width() == 3);
  REQUIRE(acc.count() == 0);
  REQUIRE(acc.running_squares().max_abs() == 0.0);
  try {
    acc.finalize();
    FAIL("expected EmptyAccumulator");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::EmptyAccumulator);
  }
  CovarianceAccumulator scalar(1);
  REQUIRE(scalar.width() == 1);
  try {
    CovarianceAccumulator bad(0);
    FAIL("expected DimensionError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DimensionError);
  }
}

TEST_CASE("update accumulates sums and counts") {
  CovarianceAccumulator acc(2);
  ObservationMatrix row(1, 2);
  row(0, 0) = 0.0;
  row(0, 1) = 2.0;
  acc.update(row);
  REQUIRE(acc.count() == 1);
  REQUIRE(acc.running_sum()[0] == 0.0);
  REQUIRE(acc.running_sum()[1] == 2.0);

  CounterRng rng(1);
  CovarianceAccumulator counts(5);
  counts.update(uniform_data(5, 5, rng));
  counts.update(uniform_data(5, 5, rng));
  REQUIRE(counts.count() == 10);

  ObservationMatrix wrong(1, 3);
  try {
    acc.update(wrong);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("running squares stay exactly symmetric") {
  CounterRng rng(17);
  CovarianceAccumulator acc(8);
  for (int b = 0; b < 7; ++b) {
    acc.update(uniform_data(1 + rng.next_below(50), 8, rng, 3.0));
    const Matrix& s = acc.running_squares();
    REQUIRE(max_abs_difference(s, s.transposed()) <= 1e-12);
  }
}

TEST_CASE("finalize matches hand-computed cases") {
  // 1-d data {0, 2}: Q = (0 + 4)/2 - 1^2 = 1.
  CovarianceAccumulator acc(1);
  ObservationMatrix d(2, 1);
  d(0, 0) = 0.0;
  d(1, 0) = 2.0;
  acc.update(d);
  REQUIRE(acc.finalize()(0, 0) == Catch::Approx(1.0).margin(1e-15));

  // A single observation has no spread.
  CovarianceAccumulator single(3);
  ObservationMatrix one(1, 3);
  one(0, 0) = 4.0;
  one(0, 1) = -1.0;
  one(0, 2) = 0.5;
  single.update(one);
  REQUIRE(single.finalize().max_abs() == 0.0);

  // Perfectly correlated columns (x, x): rank-1, off-diagonal equals diagonal.
  CovarianceAccumulator corr(2);
  ObservationMatrix xs(3, 2);
  for (std::size_t r = 0; r < 3; ++r) {
    xs(r, 0) = static_cast<double>(r) + 1.0;
    xs(r, 1) = static_cast<double>(r) + 1.0;
  }
  corr.update(xs);
  const Matrix q = corr.finalize();
  REQUIRE(q(0, 0) == Catch::Approx(q(0, 1)).margin(1e-15));
  REQUIRE(q(1, 1) == Catch::Approx(q(1, 0)).margin(1e-15));
  REQUIRE(q(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("streaming covariance equals the two-pass oracle") {
  CounterRng rng(23);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t rows = 2 + rng.next_below(300);
    const std::size_t cols = 1 + rng.next_below(24);
    const ObservationMatrix data = uniform_data(rows, cols, rng, rng.next_uniform(0.5, 20.0));

    CovarianceAccumulator acc(cols);
    // Feed in random batch sizes.
    std::size_t at = 0;
    while (at < rows) {
      const std::size_t take = std::min<std::size_t>(rows - at, 1 + rng.next_below(64));
      ObservationMatrix batch(take, cols);
      for (std::size_t r = 0; r < take; ++r)
        for (std::size_t c = 0; c < cols; ++c) batch(r, c) = data(at + r, c);
      acc.update(batch);
      at += take;
    }

    const Matrix streamed = acc.finalize();
    const Matrix oracle = two_pass_covariance(data);
    const double scale = std::max(1e-30, oracle.frobenius_norm());
    REQUIRE(frobenius_difference(streamed, oracle) <= 1e-10 * std::max(1.0, scale));
  }
}

TEST_CASE("merge equals single-pass over concatenated data") {
  CounterRng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t cols = 1 + rng.next_below(16);
    const std::size_t rows = 4 + rng.next_below(200);
    const ObservationMatrix data = uniform_data(rows, cols, rng, 5.0);

    CovarianceAccumulator whole(cols);
    whole.update(data);

    // Random binary partition of the rows into two shards.
    ObservationMatrix shard_a(rows, cols), shard_b(rows, cols);
    std::size_t na = 0, nb = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (rng.next_double() < 0.5) {
        for (std::size_t c = 0; c < cols; ++c) shard_a(na, c) = data(r, c);
        ++na;
      } else {
        for (std::size_t c = 0; c < cols; ++c) shard_b(nb, c) = data(r, c);
        ++nb;
      }
    }
    CovarianceAccumulator a(cols), b(cols);
    if (na > 0) {
      ObservationMatrix sa(na, cols);
      for (std::size_t r = 0; r < na; ++r)
        for (std::size_t c = 0; c < cols; ++c) sa(r, c) = shard_a(r, c);
      a.update(sa);
    }
    if (nb > 0) {
      ObservationMatrix sb(nb, cols);
      for (std::size_t r = 0; r < nb; ++r)
        for (std::size_t c = 0; c < cols; ++c) sb(r, c) = shard_b(r, c);
      b.update(sb);
    }

    const CovarianceAccumulator ab = merge(a, b);
    const CovarianceAccumulator ba = merge(b, a);
    REQUIRE(frobenius_difference(ab.finalize(), whole.finalize()) <= 1e-12);
    REQUIRE(frobenius_difference(ab.finalize(), ba.finalize()) <= 1e-12);
  }
}

TEST_CASE("merging with an empty accumulator is the identity") {
  CounterRng rng(5);
  CovarianceAccumulator acc(4);
  acc.update(uniform_data(20, 4, rng));
  const CovarianceAccumulator merged = merge(acc, CovarianceAccumulator(4));
  REQUIRE(merged.count() == acc.count());
  REQUIRE(frobenius_difference(merged.finalize(), acc.finalize()) == 0.0);

  try {
    merge(acc, CovarianceAccumulator(5));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("scaling inputs by c scales the covariance by c squared") {
  CounterRng rng(41);
  for (double c : {2.0, 0.5, 10.0}) {
    const ObservationMatrix data = uniform_data(100, 6, rng);
    ObservationMatrix scaled = data;
    for (auto& v : scaled.data()) v *= c;
    CovarianceAccumulator acc(6), acc_scaled(6);
    acc.update(data);
    acc_scaled.update(scaled);
    const Matrix q = acc.finalize();
    const Matrix expected = q * (c * c);
    const Matrix got = acc_scaled.finalize();
    REQUIRE(frobenius_difference(got, expected) <= 1e-10 * std::max(1.0, expected.frobenius_norm()));
  }
}

TEST_CASE("reset clears sums and preserves the width") {
  CounterRng rng(3);
  CovarianceAccumulator acc(7);
  acc.update(uniform_data(10, 7, rng));
  acc.reset();
  REQUIRE(acc.width() == 7);
  REQUIRE(acc.count() == 0);
  try {
    acc.finalize();
    FAIL("expected EmptyAccumulator");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::EmptyAccumulator);
  }

  // update/reset/update equals the second update alone.
  const ObservationMatrix first = uniform_data(12, 7, rng);
  const ObservationMatrix second = uniform_data(9, 7, rng);
  CovarianceAccumulator once(7), twice(7);
  once.update(second);
  twice.update(first);
  twice.reset();
  twice.update(second);
  REQUIRE(once.count() == twice.count());
  REQUIRE(frobenius_difference(once.finalize(), twice.finalize()) == 0.0);
}

TEST_CASE("unfold_conv layout") {
  // No spatial extent: the channel vector passes through.
  Tensor<double> point(1, 4, 1, 1);
  for (std::size_t c = 0; c < 4; ++c) point.at(0, c, 0, 0) = static_cast<double>(c) * 1.5;
  const ObservationMatrix flat = unfold_conv(point);
  REQUIRE(flat.rows() == 1);
  REQUIRE(flat.cols() == 4);
  for (std::size_t c = 0; c < 4; ++c) REQUIRE(flat(0, c) == point.at(0, c, 0, 0));

  // Shape arithmetic.
  Tensor<double> block(2, 3, 2, 2);
  const ObservationMatrix unfolded = unfold_conv(block);
  REQUIRE(unfolded.rows() == 8);
  REQUIRE(unfolded.cols() == 3);
}

TEST_CASE("unfold_conv row order matches exhaustive index enumeration") {
  Tensor<double> t(2, 3, 2, 3);
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(i);
  const ObservationMatrix m = unfold_conv(t);
  // Row order is n-major, then h, then w; column is the channel.
  for (std::size_t n = 0; n < t.n; ++n)
    for (std::size_t h = 0; h < t.h; ++h)
      for (std::size_t w = 0; w < t.w; ++w)
        for (std::size_t c = 0; c < t.c; ++c) {
          const std::size_t row = (n * t.h + h) * t.w + w;
          REQUIRE(m(row, c) == t.at(n, c, h, w));
        }
  // Spot-check the documented position (n=1, c=2, h=0, w=1).
  const std::size_t row = (1 * t.h + 0) * t.w + 1;
  REQUIRE(m(row, 2) == t.at(1, 2, 0, 1));

  // The multiset of values is preserved.
  std::vector<double> folded = m.data();
  std::vector<double> original = t.data;
  std::sort(folded.begin(), folded.end());
  std::sort(original.begin(), original.end());
  REQUIRE(folded == original);
}

TEST_CASE("nearest_downsample caps the larger side") {
  Tensor<float> small(1, 2, 16, 16);
  CounterRng rng(9);
  for (auto& v : small.data) v = static_cast<float>(rng.next_double());
  const Tensor<float> same = nearest_downsample(small, 32);
  REQUIRE(same.data == small.data);

  Tensor<float> big(1, 1, 64, 64);
  for (auto& v : big.data) v = static_cast<float>(rng.next_double());
  const Tensor<float> reduced = nearest_downsample(big, 32);
  REQUIRE(reduced.h == 32);
  REQUIRE(reduced.w == 32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      REQUIRE(reduced.at(0, 0, y, x) == big.at(0, 0, y * 64 / 32, x * 64 / 32));

  Tensor<float> constant(2, 3, 40, 20, 0.25f);
  const Tensor<float> reduced_const = nearest_downsample(constant, 8);
  REQUIRE(reduced_const.h == 8);
  REQUIRE(reduced_const.w == 4);
  for (float v : reduced_const.data) REQUIRE(v == 0.25f);
}

TEST_CASE("accumulator consumes float tensors in double precision") {
  Tensor<float> batch(3, 2, 1, 1);
  batch.at(0, 0, 0, 0) = 1.5f;
  batch.at(0, 1, 0, 0) = -2.0f;
  batch.at(1, 0, 0, 0) = 0.25f;
  batch.at(1, 1, 0, 0) = 4.0f;
  batch.at(2, 0, 0, 0) = -1.0f;
  batch.at(2, 1, 0, 0) = 0.5f;
  CovarianceAccumulator acc(2);
  acc.update(batch);
  REQUIRE(acc.count() == 3);
  REQUIRE(acc.running_sum()[0] == Catch::Approx(0.75).margin(1e-12));
}
