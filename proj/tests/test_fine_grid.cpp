#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "mswave/fine_grid.hpp"

using namespace mswave;

namespace {

double symmetry_error(const SpMat& A) {
  SpMat D = SpMat(A.transpose()) - A;
  double e = 0.0;
  for (int c = 0; c < D.outerSize(); ++c)
    for (SpMat::InnerIterator it(D, c); it; ++it) e = std::max(e, std::abs(it.value()));
  return e;
}

// Gershgorin-style scan: negative diagonal dominating the absolute row sum.
bool diagonally_dominant_nonpositive(const SpMat& A, double tol = 1e-12) {
  for (int col = 0; col < A.outerSize(); ++col) {
    double diag = 0.0, off = 0.0;
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      if (it.row() == col) diag = it.value();
      else off += std::abs(it.value());
    }
    if (diag > tol) return false;
    if (off > -diag + tol * std::max(1.0, off)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("1d assembly matches the second-order stencil") {
  // n=2, h=0.5: three interior nodes, diag -8, off-diag 4
  GridMedium m = make_uniform_medium({5}, 0.5, 1.0);
  SparsePencil p = assemble_1d(m);
  REQUIRE(p.n() == 3);
  CHECK(p.A.coeff(0, 0) == doctest::Approx(-8.0));
  CHECK(p.A.coeff(1, 1) == doctest::Approx(-8.0));
  CHECK(p.A.coeff(0, 1) == doctest::Approx(4.0));
  CHECK(p.A.coeff(1, 2) == doctest::Approx(4.0));
  CHECK(p.A.coeff(0, 2) == 0.0);
  CHECK(p.B.isApprox(Vec::Ones(3)));
  CHECK(symmetry_error(p.A) == 0.0);
}

TEST_CASE("1d interior rows away from the boundary sum to zero") {
  GridMedium m = make_uniform_medium({11}, 0.25, 2.0);
  SparsePencil p = assemble_1d(m);
  for (long k = 1; k + 1 < p.n(); ++k) {
    double row_sum = 0.0;
    for (SpMat::InnerIterator it(p.A, k); it; ++it) row_sum += it.value();
    CHECK(std::abs(row_sum) < 1e-12);
  }
  // boundary-adjacent rows keep the edge into the eliminated node
  double first = 0.0;
  for (SpMat::InnerIterator it(p.A, 0); it; ++it) first += it.value();
  CHECK(first < 0.0);
}

TEST_CASE("1d variable sigma matches a hand-assembled conservative scheme") {
  // sigma(x) = 1 + x on 7 nodes (5 interior), h = 0.1, x_i = i*h
  const int nn = 7;
  const double h = 0.1;
  GridMedium m = make_uniform_medium({nn}, h, 1.0);
  for (int i = 0; i < nn; ++i) m.sigma[i] = 1.0 + i * h;
  SparsePencil p = assemble_1d(m);

  // hand assembly: edge (i,i+1) carries the mean of the node values
  Mat expect = Mat::Zero(5, 5);
  auto edge = [&](int i) { return 0.5 * (m.sigma[i] + m.sigma[i + 1]) / (h * h); };
  for (int k = 0; k < 5; ++k) {
    const int i = k + 1;  // full-grid node
    expect(k, k) = -(edge(i - 1) + edge(i));
    if (k > 0) expect(k, k - 1) = edge(i - 1);
    if (k < 4) expect(k, k + 1) = edge(i);
  }
  CHECK((Mat(p.A) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("2d and 3d stencils") {
  GridMedium m2 = make_uniform_medium({5, 5}, 1.0, 1.0);
  SparsePencil p2 = assemble_nd(m2);
  REQUIRE(p2.n() == 9);
  CHECK(p2.A.coeff(4, 4) == doctest::Approx(-4.0));  // center of the 3x3 interior
  CHECK(p2.A.coeff(4, 1) == doctest::Approx(1.0));
  CHECK(p2.A.coeff(4, 3) == doctest::Approx(1.0));
  CHECK(symmetry_error(p2.A) == 0.0);

  GridMedium m3 = make_uniform_medium({4, 4, 4}, 1.0, 1.0);
  SparsePencil p3 = assemble_nd(m3);
  REQUIRE(p3.n() == 8);
  CHECK(p3.A.coeff(0, 0) == doctest::Approx(-6.0));
  int neighbors = 0;
  for (SpMat::InnerIterator it(p3.A, 0); it; ++it)
    if (it.row() != 0) {
      CHECK(it.value() == doctest::Approx(1.0));
      ++neighbors;
    }
  CHECK(neighbors == 3);  // interior of 2^3: three in-range neighbors
}

TEST_CASE("piecewise medium stays nonpositive definite (dense eigencheck)") {
  GridMedium m = make_uniform_medium({20, 20}, 0.05, 1.0);
  // blocky inclusion with sigma = 1/3
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      if (i >= 6 && i < 14 && j >= 9) m.sigma[i * 20 + j] = 1.0 / 3.0;
  SparsePencil p = assemble_nd(m);
  CHECK(diagonally_dominant_nonpositive(p.A));

  Mat Ad = Mat(p.A);
  Eigen::SelfAdjointEigenSolver<Mat> es(Ad, Eigen::EigenvaluesOnly);
  const double lam_max = es.eigenvalues().maxCoeff();
  CHECK(lam_max <= 1e-10 * Ad.cwiseAbs().maxCoeff());
}

TEST_CASE("nonpositivity scan up to 24^3") {
  GridMedium m = make_uniform_medium({24, 24, 24}, 0.2, 1.5, 2.0);
  for (long i = 0; i < m.node_count(); ++i) m.sigma[i] = 1.5 + 0.4 * std::sin(0.13 * i);
  SparsePencil p = assemble_nd(m);
  CHECK(symmetry_error(p.A) == 0.0);
  CHECK(diagonally_dominant_nonpositive(p.A));
  CHECK(p.B.minCoeff() > 0.0);
}

TEST_CASE("assembly rejections") {
  CHECK_THROWS_AS(assemble_1d(make_uniform_medium({2}, 1.0, 1.0)), ConfigError);
  CHECK_THROWS_AS(assemble_nd(make_uniform_medium({5, 2}, 1.0, 1.0)), ConfigError);
  GridMedium bad = make_uniform_medium({5}, 1.0, 1.0);
  bad.rho[2] = 0.0;
  CHECK_THROWS_AS(assemble_1d(bad), ConfigError);
}

TEST_CASE("point sources and receivers") {
  GridMedium m = make_uniform_medium({7, 7}, 0.5, 1.0, 2.0);
  SparsePencil p = assemble_nd(m);

  SourceReceiver sr = make_source(p, {3, 3});
  CHECK(sr.g.sum() == doctest::Approx(1.0));
  CHECK(sr.g_support.size() == 1);

  set_receiver(sr, p, {3, 3});
  CHECK(sr.q.dot(sr.g) == doctest::Approx(1.0));

  SourceReceiver imp = make_source(p, {3, 3}, SourceKind::UnitImpulse);
  const long k = p.node_of({3, 3});
  CHECK(imp.g[k] * p.B[k] == doctest::Approx(1.0));

  CHECK_THROWS_AS(make_source(p, {0, 3}), ConfigError);   // boundary node
  CHECK_THROWS_AS(make_source(p, {9, 3}), ConfigError);   // outside
}

TEST_CASE("taper source normalizes to unit total weight") {
  GridMedium m = make_uniform_medium({9, 9}, 0.5, 1.0);
  SparsePencil p = assemble_nd(m);
  SourceReceiver sr = make_source(p, {4, 4}, SourceKind::Taper, 0, 1.5);
  CHECK(sr.g.sum() == doctest::Approx(1.0));
  CHECK(sr.g_support.size() > 1);
  for (long row : sr.g_support) CHECK(p.coords[row][0] == 4);  // on the face
  // smooth decay away from the center
  CHECK(sr.g[p.node_of({4, 4})] > sr.g[p.node_of({4, 6})]);
}
