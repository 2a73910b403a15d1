#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/matrix.hpp"
#include "satlens/tensor.hpp"

namespace satlens {

/// Online covariance estimator for one layer: keeps the running squares
/// matrix, the running sum vector and the observation count, all in double
/// precision. Accumulators over disjoint data shards merge by field-wise
/// addition.
class CovarianceAccumulator {
 public:
  CovarianceAccumulator() = default;

  explicit CovarianceAccumulator(std::size_t width)
      : width_(width), running_squares_(width, width), running_sum_(width, 0.0) {
    require(width >= 1, ErrorKind::DimensionError, "accumulator width must be at least 1");
  }

  std::size_t width() const noexcept { return width_; }
  std::uint64_t count() const noexcept { return count_; }
  const Matrix& running_squares() const noexcept { return running_squares_; }
  const std::vector<double>& running_sum() const noexcept { return running_sum_; }

  /// Accumulates one batch: squares += B^T B, sum += column sums, count +=
  /// rows. Entries are consumed in double precision; the squares matrix is
  /// built symmetrically so it stays exactly symmetric.
  void update(const ObservationMatrix& batch) {
    require(batch.cols() == width_, ErrorKind::DimensionMismatch,
            "batch has " + std::to_string(batch.cols()) + " features, accumulator width is " +
                std::to_string(width_));
    require(batch.rows() >= 1, ErrorKind::DimensionMismatch, "batch must have at least one row");
    const std::size_t rows = batch.rows();
    for (std::size_t i = 0; i < width_; ++i) {
      for (std::size_t j = i; j < width_; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += batch(r, i) * batch(r, j);
        running_squares_(i, j) += s;
        if (j != i) running_squares_(j, i) = running_squares_(i, j);
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = batch.row_ptr(r);
      for (std::size_t i = 0; i < width_; ++i) running_sum_[i] += row[i];
    }
    count_ += rows;
  }

  /// Casts a single-precision batch to double before accumulating.
  void update(const Tensor<float>& flat_batch) {
    require(flat_batch.flat(), ErrorKind::ShapeMismatch, "expected a flat N x F tensor");
    ObservationMatrix batch(flat_batch.n, flat_batch.c);
    for (std::size_t r = 0; r < flat_batch.n; ++r)
      for (std::size_t f = 0; f < flat_batch.c; ++f)
        batch(r, f) = static_cast<double>(flat_batch.at(r, f, 0, 0));
    update(batch);
  }

  void merge(const CovarianceAccumulator& other) {
    require(other.width_ == width_, ErrorKind::DimensionMismatch,
            "cannot merge accumulators of widths " + std::to_string(width_) + " and " +
                std::to_string(other.width_));
    running_squares_ += other.running_squares_;
    for (std::size_t i = 0; i < width_; ++i) running_sum_[i] += other.running_sum_[i];
    count_ += other.count_;
  }

  /// Covariance in the population form: Q = squares/n - mean (x) mean.
  /// Symmetrized before return so the eigensolver sees an exactly symmetric
  /// matrix.
  Matrix finalize() const {
    require(count_ >= 1, ErrorKind::EmptyAccumulator, "finalize on an empty accumulator");
    const double n = static_cast<double>(count_);
    Matrix q(width_, width_);
    std::vector<double> mean(width_);
    for (std::size_t i = 0; i < width_; ++i) mean[i] = running_sum_[i] / n;
    for (std::size_t i = 0; i < width_; ++i)
      for (std::size_t j = i; j < width_; ++j) {
        const double v = running_squares_(i, j) / n - mean[i] * mean[j];
        q(i, j) = v;
        q(j, i) = v;
      }
    for (std::size_t i = 0; i < width_; ++i)
      for (std::size_t j = i + 1; j < width_; ++j) {
        const double v = 0.5 * (q(i, j) + q(j, i));
        q(i, j) = v;
        q(j, i) = v;
      }
    return q;
  }

  std::vector<double> mean() const {
    require(count_ >= 1, ErrorKind::EmptyAccumulator, "mean of an empty accumulator");
    std::vector<double> m(width_);
    for (std::size_t i = 0; i < width_; ++i) m[i] = running_sum_[i] / static_cast<double>(count_);
    return m;
  }

  /// Zeroes all sums and the count; width is preserved.
  void reset() {
    running_squares_ = Matrix(width_, width_);
    std::fill(running_sum_.begin(), running_sum_.end(), 0.0);
    count_ = 0;
  }

  /// Rebuilds an accumulator from a serialized snapshot.
  static CovarianceAccumulator restore(std::size_t width, std::uint64_t count,
                                       std::vector<double> running_sum, Matrix running_squares) {
    CovarianceAccumulator acc(width);
    require(running_sum.size() == width && running_squares.rows() == width &&
                running_squares.cols() == width,
            ErrorKind::DimensionMismatch, "accumulator snapshot fields are inconsistent");
    acc.running_sum_ = std::move(running_sum);
    acc.running_squares_ = std::move(running_squares);
    acc.count_ = count;
    return acc;
  }

 private:
  std::size_t width_ = 0;
  Matrix running_squares_;
  std::vector<double> running_sum_;
  std::uint64_t count_ = 0;
};

inline CovarianceAccumulator merge(const CovarianceAccumulator& a, const CovarianceAccumulator& b) {
  CovarianceAccumulator out = a;
  out.merge(b);
  return out;
}

/// Unfolds an N x C x H x W activation tensor into an (N*H*W) x C observation
/// matrix: every kernel position becomes one observation. Row order is
/// n-major, then h, then w.
template <typename T>
inline ObservationMatrix unfold_conv(const Tensor<T>& t) {
  require(t.n >= 1 && t.c >= 1 && t.h >= 1 && t.w >= 1, ErrorKind::ShapeMismatch,
          "unfold_conv requires a non-empty tensor");
  ObservationMatrix out(t.n * t.h * t.w, t.c);
  std::size_t row = 0;
  for (std::size_t ni = 0; ni < t.n; ++ni)
    for (std::size_t hi = 0; hi < t.h; ++hi)
      for (std::size_t wi = 0; wi < t.w; ++wi, ++row)
        for (std::size_t ci = 0; ci < t.c; ++ci)
          out(row, ci) = static_cast<double>(t.at(ni, ci, hi, wi));
  return out;
}

/// Folds an (N*H*W) x C observation matrix (unfold_conv row order) back into
/// an N x C x H x W tensor.
template <typename T>
inline Tensor<T> fold_conv(const ObservationMatrix& m, std::size_t n, std::size_t c, std::size_t h,
                           std::size_t w) {
  require(m.rows() == n * h * w && m.cols() == c, ErrorKind::ShapeMismatch,
          "fold_conv shape mismatch");
  Tensor<T> out(n, c, h, w);
  std::size_t row = 0;
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t hi = 0; hi < h; ++hi)
      for (std::size_t wi = 0; wi < w; ++wi, ++row)
        for (std::size_t ci = 0; ci < c; ++ci)
          out.at(ni, ci, hi, wi) = static_cast<T>(m(row, ci));
  return out;
}

/// Nearest-neighbor spatial reduction: when max(H, W) exceeds `cap`, the
/// larger side is resampled to `cap` with the aspect ratio preserved by
/// rounding. Output pixel i copies source index floor(i*src/dst). Inputs at
/// or below the cap pass through unchanged. Off by default in the analysis
/// pipeline.
template <typename T>
inline Tensor<T> nearest_downsample(const Tensor<T>& t, std::size_t cap) {
  require(cap >= 1, ErrorKind::DomainError, "downsample cap must be at least 1");
  const std::size_t larger = std::max(t.h, t.w);
  if (larger <= cap) return t;
  const double scale = static_cast<double>(cap) / static_cast<double>(larger);
  std::size_t out_h = t.h == larger ? cap : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(t.h * scale)));
  std::size_t out_w = t.w == larger ? cap : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(t.w * scale)));

  Tensor<T> out(t.n, t.c, out_h, out_w);
  for (std::size_t ni = 0; ni < t.n; ++ni)
    for (std::size_t ci = 0; ci < t.c; ++ci)
      for (std::size_t hi = 0; hi < out_h; ++hi) {
        const std::size_t src_h = hi * t.h / out_h;
        for (std::size_t wi = 0; wi < out_w; ++wi) {
          const std::size_t src_w = wi * t.w / out_w;
          out.at(ni, ci, hi, wi) = t.at(ni, ci, src_h, src_w);
        }
      }
  return out;
}

}  // namespace satlens
