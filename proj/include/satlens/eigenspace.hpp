#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "satlens/covariance.hpp"
#include "satlens/eigh.hpp"
#include "satlens/error.hpp"
#include "satlens/matrix.hpp"
#include "satlens/tensor.hpp"

namespace satlens {

/// How the eigenspace dimension k is chosen against the variance threshold.
///
/// `at_least` (default, the SVCCA-style convention): smallest k whose
/// cumulative explained-variance ratio reaches delta. `at_most_plus_slack`:
/// largest k whose ratio stays at or below delta, extended by one dimension
/// when the shortfall is within 0.02. Both floor k at 1.
enum class SelectionPolicy { at_least, at_most_plus_slack };

inline const char* to_string(SelectionPolicy p) {
  return p == SelectionPolicy::at_least ? "at_least" : "at_most_plus_slack";
}

inline SelectionPolicy selection_policy_from_string(const std::string& s) {
  if (s == "at_least") return SelectionPolicy::at_least;
  if (s == "at_most_plus_slack") return SelectionPolicy::at_most_plus_slack;
  fail(ErrorKind::ConfigError, "unknown selection policy '" + s + "'");
}

/// Top-k variance eigenspace of one layer: orthonormal basis columns, the
/// full descending eigenvalue vector (clamped at zero), and the achieved
/// cumulative variance ratio.
struct Eigenspace {
  Matrix basis;                    // w x k, orthonormal columns
  std::vector<double> eigenvalues; // all w, descending, clamped at 0
  std::size_t k = 0;
  double delta = 0.0;
  double explained = 0.0;

  std::size_t width() const noexcept { return basis.rows(); }
};

/// Selects the eigenspace dimension for threshold `delta` from a descending
/// eigendecomposition. Negative eigenvalues (rounding artifacts of a PSD
/// covariance) are clamped to zero before ratios are formed.
inline Eigenspace select_eigenspace(const EighResult& eig, double delta,
                                    SelectionPolicy policy = SelectionPolicy::at_least) {
  require(delta > 0.0 && delta <= 1.0, ErrorKind::DomainError,
          "delta must lie in (0, 1], got " + std::to_string(delta));
  const std::size_t w = eig.eigenvalues.size();
  require(w >= 1 && eig.eigenvectors.rows() == w && eig.eigenvectors.cols() == w,
          ErrorKind::DimensionMismatch, "eigendecomposition is inconsistent");

  std::vector<double> clamped(w);
  for (std::size_t i = 0; i < w; ++i) clamped[i] = std::max(0.0, eig.eigenvalues[i]);

  std::vector<double> cumulative(w);
  double running = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    running += clamped[i];
    cumulative[i] = running;
  }
  const double total = cumulative[w - 1];
  require(total > 0.0, ErrorKind::ZeroVariance, "total variance is zero");

  std::size_t k = w;
  if (policy == SelectionPolicy::at_least) {
    // delta = 1 always means the full space, even when trailing eigenvalues
    // are exactly zero.
    if (delta < 1.0) {
      for (std::size_t i = 0; i < w; ++i) {
        if (cumulative[i] / total >= delta) {
          k = i + 1;
          break;
        }
      }
    }
  } else {
    // Largest k with ratio <= delta; 0 when even the first direction
    // overshoots.
    std::size_t at_most = 0;
    for (std::size_t i = 0; i < w; ++i) {
      if (cumulative[i] / total <= delta) at_most = i + 1;
    }
    k = at_most;
    if (k > 0 && k < w) {
      const double shortfall = delta - cumulative[k - 1] / total;
      if (shortfall > 0.0 && shortfall <= 0.02) ++k;
    }
    if (k == 0) k = 1;  // a single dimension already exceeds delta
  }

  Eigenspace space;
  space.eigenvalues = std::move(clamped);
  space.k = k;
  space.delta = delta;
  space.explained = cumulative[k - 1] / total;
  space.basis = Matrix(w, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < w; ++i) space.basis(i, j) = eig.eigenvectors(i, j);
  return space;
}

/// Layer saturation: the fraction of the output space occupied by the
/// selected eigenspace, s = k / width.
inline double saturation(std::size_t k, std::size_t width) {
  require(width >= 1 && k >= 1 && k <= width, ErrorKind::DomainError,
          "saturation requires 1 <= k <= width");
  return static_cast<double>(k) / static_cast<double>(width);
}

/// Symmetric idempotent projector P = E E^T onto an eigenspace.
struct ProjectionOperator {
  Matrix p;  // w x w
  std::size_t rank = 0;

  std::size_t width() const noexcept { return p.rows(); }
};

inline ProjectionOperator projection_operator(const Eigenspace& e) {
  const std::size_t w = e.width();
  ProjectionOperator op;
  op.rank = e.k;
  op.p = Matrix(w, w);
  // P = E E^T accumulated column by column, symmetric by construction.
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = i; j < w; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < e.k; ++r) s += e.basis(i, r) * e.basis(j, r);
      op.p(i, j) = s;
      op.p(j, i) = s;
    }
  return op;
}

/// Projector onto the span of an arbitrary orthonormal basis (used for the
/// random-subspace baseline).
inline ProjectionOperator projection_operator_from_basis(const Matrix& basis) {
  const std::size_t w = basis.rows();
  const std::size_t k = basis.cols();
  ProjectionOperator op;
  op.rank = k;
  op.p = Matrix(w, w);
  for (std::size_t i = 0; i < w; ++i)
    for (std::size_t j = i; j < w; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += basis(i, r) * basis(j, r);
      op.p(i, j) = s;
      op.p(j, i) = s;
    }
  return op;
}

/// Projects dense observations: rows of `a` are mapped to a * P.
inline ObservationMatrix project_dense(const ObservationMatrix& a, const ProjectionOperator& p) {
  require(a.cols() == p.width(), ErrorKind::DimensionMismatch,
          "observation width " + std::to_string(a.cols()) + " does not match projector width " +
              std::to_string(p.width()));
  return a * p.p;
}

/// Projects convolutional activations channel-wise, the 1x1-convolution view
/// of the projector. Implemented literally as unfold -> project -> fold so it
/// matches the dense path exactly.
template <typename T>
inline Tensor<T> project_conv(const Tensor<T>& t, const ProjectionOperator& p) {
  require(t.c == p.width(), ErrorKind::DimensionMismatch,
          "channel count " + std::to_string(t.c) + " does not match projector width " +
              std::to_string(p.width()));
  const ObservationMatrix unfolded = unfold_conv(t);
  const ObservationMatrix projected = project_dense(unfolded, p);
  return fold_conv<T>(projected, t.n, t.c, t.h, t.w);
}

}  // namespace satlens
