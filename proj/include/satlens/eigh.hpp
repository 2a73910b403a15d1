#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/matrix.hpp"

namespace satlens {

/// Eigendecomposition of a symmetric matrix. eigenvalues[i] pairs with
/// column i of eigenvectors; eigenvalues are sorted descending.
struct EighResult {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps rotate every off-diagonal pair until the off-diagonal norm falls
/// below 1e-12 relative to the input scale, capped at 100 sweeps. The input
/// must be square and symmetric within 1e-9 absolute. Eigenvector signs are
/// fixed so the largest-magnitude entry of each column is positive.
inline EighResult sym_eigh(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorKind::NonSquare,
          "sym_eigh needs a square matrix, got " + std::to_string(m.rows()) + "x" +
              std::to_string(m.cols()));
  const std::size_t n = m.rows();
  require(n >= 1, ErrorKind::NonSquare, "sym_eigh needs a non-empty matrix");

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::fabs(m(i, j) - m(j, i)) <= 1e-9, ErrorKind::AsymmetricInput,
              "matrix asymmetric beyond 1e-9 at (" + std::to_string(i) + "," + std::to_string(j) +
                  ")");

  Matrix a = m;
  // Work on the exactly symmetrized copy so rotations stay consistent.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }

  Matrix v = Matrix::identity(n);
  const double tol = 1e-12 * std::max(1.0, a.frobenius_norm());
  const int max_sweeps = 100;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = off_norm() <= tol;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= tol / (static_cast<double>(n) * static_cast<double>(n))) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
    converged = off_norm() <= tol;
  }
  require(converged, ErrorKind::NoConvergence, "Jacobi sweep cap reached before convergence");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

  EighResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    result.eigenvalues[j] = diag[src];
    std::size_t peak = 0;
    double peak_abs = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double av = std::fabs(v(i, src));
      if (av > peak_abs) {
        peak_abs = av;
        peak = i;
      }
    }
    const double sign = v(peak, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) result.eigenvectors(i, j) = sign * v(i, src);
  }
  return result;
}

}  // namespace satlens
