#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "satlens/eigenspace.hpp"
#include "satlens/eigh.hpp"
#include "satlens/matrix.hpp"
#include "satlens/rng.hpp"

using namespace satlens;

namespace {

EighResult eigh_of_diagonal(const std::vector<double>& values) {
  const std::size_t n = values.size();
  EighResult eig;
  eig.eigenvalues = values;
  eig.eigenvectors = Matrix::identity(n);
  return eig;
}

}  // namespace

TEST_CASE("select_eigenspace at delta=1 takes the full space") {
  const auto eig = eigh_of_diagonal({4.0, 3.0, 2.0, 1.0});
  const Eigenspace space = select_eigenspace(eig, 1.0);
  REQUIRE(space.k == 4);
  REQUIRE(space.explained == 1.0);
}

TEST_CASE("select_eigenspace follows the cumulative ratios") {
  // Eigenvalues (4,3,2,1): cumulative ratios 0.4, 0.7, 0.9, 1.0.
  const auto eig = eigh_of_diagonal({4.0, 3.0, 2.0, 1.0});
  REQUIRE(select_eigenspace(eig, 0.9).k == 3);
  REQUIRE(select_eigenspace(eig, 0.91).k == 4);
  REQUIRE(select_eigenspace(eig, 0.4).k == 1);
  REQUIRE(select_eigenspace(eig, 0.1).k == 1);
}

TEST_CASE("select_eigenspace floors k at one when the top direction overshoots") {
  const auto eig = eigh_of_diagonal({0.995, 0.005});
  const Eigenspace at_least = select_eigenspace(eig, 0.99, SelectionPolicy::at_least);
  REQUIRE(at_least.k == 1);
  const Eigenspace soft = select_eigenspace(eig, 0.99, SelectionPolicy::at_most_plus_slack);
  REQUIRE(soft.k == 1);
}

TEST_CASE("at_most_plus_slack adds a dimension only within the slack") {
  // (0.5, 0.3, 0.15, 0.05): cumulative 0.5, 0.8, 0.95, 1.0.
  const auto eig = eigh_of_diagonal({0.5, 0.3, 0.15, 0.05});
  // ratio(2) = 0.8, shortfall 0.01 <= 0.02: extend to 3.
  REQUIRE(select_eigenspace(eig, 0.81, SelectionPolicy::at_most_plus_slack).k == 3);
  // shortfall 0.1 > 0.02: stay at 2.
  REQUIRE(select_eigenspace(eig, 0.9, SelectionPolicy::at_most_plus_slack).k == 2);
  // exact hit, no shortfall.
  REQUIRE(select_eigenspace(eig, 0.8, SelectionPolicy::at_most_plus_slack).k == 2);
}

TEST_CASE("select_eigenspace rejects zero variance and bad deltas") {
  const auto zero = eigh_of_diagonal({0.0, 0.0});
  try {
    select_eigenspace(zero, 0.9);
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::ZeroVariance);
  }
  const auto eig = eigh_of_diagonal({1.0, 1.0});
  try {
    select_eigenspace(eig, 0.0);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DomainError);
  }
  try {
    select_eigenspace(eig, 1.5);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DomainError);
  }
}

TEST_CASE("negative rounding eigenvalues are clamped before ratios") {
  const auto eig = eigh_of_diagonal({2.0, 1.0, -1e-14});
  const Eigenspace space = select_eigenspace(eig, 1.0);
  REQUIRE(space.k == 3);
  REQUIRE(space.eigenvalues[2] == 0.0);
  REQUIRE(space.explained == 1.0);
}

TEST_CASE("k is monotone in delta under at_least") {
  CounterRng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 2 + rng.next_below(24);
    std::vector<double> values(w);
    for (auto& v : values) v = rng.next_uniform(0.0, 5.0);
    std::sort(values.rbegin(), values.rend());
    if (values[0] <= 0.0) values[0] = 1.0;
    const auto eig = eigh_of_diagonal(values);
    std::size_t prev_k = 0;
    for (double delta = 0.05; delta <= 1.0 + 1e-12; delta += 0.05) {
      const std::size_t k = select_eigenspace(eig, std::min(delta, 1.0)).k;
      REQUIRE(k >= prev_k);
      prev_k = k;
    }
  }
}

TEST_CASE("explained meets delta under at_least except the k=1 floor") {
  CounterRng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 2 + rng.next_below(16);
    std::vector<double> values(w);
    for (auto& v : values) v = rng.next_uniform(0.0, 3.0);
    std::sort(values.rbegin(), values.rend());
    if (values[0] <= 0.0) values[0] = 1.0;
    const auto eig = eigh_of_diagonal(values);
    const double delta = rng.next_uniform(0.01, 1.0);
    const Eigenspace space = select_eigenspace(eig, delta);
    if (space.k > 1) {
      REQUIRE(space.explained >= delta);
    } else {
      double total = 0.0;
      for (double v : values) total += v;
      REQUIRE(space.explained == Catch::Approx(values[0] / total).margin(1e-12));
    }
  }
}

TEST_CASE("saturation is k over width") {
  REQUIRE(saturation(16, 64) == 0.25);
  REQUIRE(saturation(8, 8) == 1.0);
  REQUIRE(saturation(1, 512) == Catch::Approx(1.0 / 512.0).margin(1e-18));
  try {
    saturation(0, 4);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DomainError);
  }
  try {
    saturation(5, 4);
    FAIL("expected DomainError");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DomainError);
  }
}

TEST_CASE("isotropic covariance saturates fully near delta one") {
  // Identity covariance: every direction carries equal variance, so any
  // delta above (w-1)/w selects the full space.
  for (std::size_t w : {2, 7, 33, 64}) {
    const auto eig = sym_eigh(Matrix::identity(w));
    for (double delta : {0.99, 1.0}) {
      if (delta <= 1.0 - 1.0 / static_cast<double>(w)) continue;
      const Eigenspace space = select_eigenspace(eig, delta);
      REQUIRE(saturation(space.k, w) == 1.0);
    }
  }
}

TEST_CASE("projection operator is symmetric idempotent with trace k") {
  CounterRng rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t w = 2 + rng.next_below(24);
    Matrix m(w, w);
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = i; j < w; ++j) {
        const double v = rng.next_uniform(-1.0, 1.0);
        m(i, j) = v;
        m(j, i) = v;
      }
    const Matrix psd = m * m.transposed();
    const Matrix sym = (psd + psd.transposed()) * 0.5;
    const auto eig = sym_eigh(sym);
    const Eigenspace space = select_eigenspace(eig, rng.next_uniform(0.3, 1.0));
    const ProjectionOperator op = projection_operator(space);

    REQUIRE(op.rank == space.k);
    REQUIRE(max_abs_difference(op.p, op.p.transposed()) == 0.0);
    REQUIRE(max_abs_difference(op.p * op.p, op.p) <= 1e-9);
    REQUIRE(op.p.trace() == Catch::Approx(static_cast<double>(space.k)).margin(1e-8));
  }
}

TEST_CASE("full-rank projection operator is the identity") {
  const auto eig = sym_eigh(Matrix::identity(6));
  const Eigenspace space = select_eigenspace(eig, 1.0);
  const ProjectionOperator op = projection_operator(space);
  REQUIRE(max_abs_difference(op.p, Matrix::identity(6)) <= 1e-10);
}

TEST_CASE("vectors already in the span are fixed points") {
  CounterRng rng(41);
  const Matrix basis = random_orthonormal_basis(10, 3, 555);
  Eigenspace space;
  space.basis = basis;
  space.k = 3;
  space.eigenvalues.assign(10, 0.0);
  const ProjectionOperator op = projection_operator(space);

  // A combination of basis columns must pass through unchanged.
  ObservationMatrix in_span(1, 10);
  for (std::size_t i = 0; i < 10; ++i)
    in_span(0, i) = 2.0 * basis(i, 0) - basis(i, 1) + 0.5 * basis(i, 2);
  const ObservationMatrix projected = project_dense(in_span, op);
  REQUIRE(max_abs_difference(projected, in_span) <= 1e-9);
}

TEST_CASE("project_dense basics") {
  ProjectionOperator identity_op;
  identity_op.p = Matrix::identity(3);
  identity_op.rank = 3;

  CounterRng rng(43);
  ObservationMatrix a(5, 3);
  for (auto& v : a.data()) v = rng.next_uniform(-2.0, 2.0);
  REQUIRE(max_abs_difference(project_dense(a, identity_op), a) == 0.0);

  // Rank-1 projector onto e1 keeps only the first coordinate; checked
  // against an explicit matmul.
  ProjectionOperator e1;
  e1.p = Matrix(3, 3);
  e1.p(0, 0) = 1.0;
  e1.rank = 1;
  const ObservationMatrix projected = project_dense(a, e1);
  const ObservationMatrix expected = a * e1.p;
  REQUIRE(max_abs_difference(projected, expected) == 0.0);
  for (std::size_t r = 0; r < 5; ++r) {
    REQUIRE(projected(r, 0) == a(r, 0));
    REQUIRE(projected(r, 1) == 0.0);
    REQUIRE(projected(r, 2) == 0.0);
  }

  ObservationMatrix zero(4, 3);
  REQUIRE(project_dense(zero, identity_op).max_abs() == 0.0);

  ObservationMatrix wrong(2, 4);
  try {
    project_dense(wrong, identity_op);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("projection is non-expansive") {
  CounterRng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t w = 2 + rng.next_below(16);
    const std::size_t k = 1 + rng.next_below(w);
    const ProjectionOperator op =
        projection_operator_from_basis(random_orthonormal_basis(w, k, 900 + trial));
    ObservationMatrix a(3 + rng.next_below(20), w);
    for (auto& v : a.data()) v = rng.next_uniform(-5.0, 5.0);
    REQUIRE(project_dense(a, op).frobenius_norm() <= a.frobenius_norm() + 1e-9);
  }
}

TEST_CASE("project_conv equals unfold-project-fold and degenerates to dense") {
  CounterRng rng(53);
  Tensor<float> t(2, 4, 3, 3);
  for (auto& v : t.data) v = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  const ProjectionOperator op =
      projection_operator_from_basis(random_orthonormal_basis(4, 2, 321));

  const Tensor<float> projected = project_conv(t, op);
  const ObservationMatrix expected = project_dense(unfold_conv(t), op);
  const Tensor<float> refolded = fold_conv<float>(expected, t.n, t.c, t.h, t.w);
  REQUIRE(projected.data == refolded.data);  // bitwise

  // H = W = 1 reduces to dense projection.
  Tensor<float> flat(3, 4, 1, 1);
  for (auto& v : flat.data) v = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  const Tensor<float> conv_path = project_conv(flat, op);
  const ObservationMatrix dense_path = project_dense(unfold_conv(flat), op);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t c = 0; c < 4; ++c)
      REQUIRE(conv_path.at(n, c, 0, 0) == static_cast<float>(dense_path(n, c)));

  // Identity projector leaves the tensor unchanged up to the double round-trip.
  ProjectionOperator ident;
  ident.p = Matrix::identity(4);
  ident.rank = 4;
  const Tensor<float> same = project_conv(t, ident);
  REQUIRE(same.data == t.data);
}
