#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "mswave/fine_grid.hpp"
#include "mswave/partition.hpp"
#include "mswave/reference.hpp"
#include "mswave/romgen.hpp"

using namespace mswave;

namespace {

SparsePencil single_dof(double a, double b) {
  SparsePencil p;
  p.A = Mat(Mat::Constant(1, 1, a)).sparseView();
  p.B = Vec::Constant(1, b);
  p.ndim = 0;
  return p;
}

}  // namespace

TEST_CASE("leapfrog impulse response of the unit oscillator") {
  SparsePencil p = single_dof(-1.0, 1.0);
  Vec g = Vec::Ones(1), q = Vec::Ones(1);

  Wavelet w;
  w.kind = Wavelet::Kind::Gaussian;
  w.omega_cut = 350.0;  // tau = 0.01: effectively an impulse of area tau*sqrt(2pi)
  const double tau = w.tau();
  const double amp = tau * std::sqrt(2.0 * M_PI) * std::exp(-0.5 * tau * tau);

  auto max_err = [&](double dt) {
    Trace t = fine_leapfrog(p, g, q, w, 10.0, dt);
    double e = 0.0;
    for (size_t i = 0; i < t.times.size(); ++i) {
      if (t.times[i] < w.delay() + 5.0 * tau) continue;
      e = std::max(e, std::abs(t.values[i] - amp * std::sin(t.times[i] - w.delay())));
    }
    return e / amp;
  };

  const double e1 = max_err(2e-3), e2 = max_err(1e-3);
  CHECK(e1 < 1e-4);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.2));  // second order in dt
}

TEST_CASE("zero source gives a zero trace") {
  GridMedium m = make_uniform_medium({9, 9}, 0.5, 1.0);
  SparsePencil p = assemble_nd(m);
  Vec g = Vec::Zero(p.n()), q = Vec::Zero(p.n());
  q[10] = 1.0;
  Wavelet w;
  Trace t = fine_leapfrog(p, g, q, w, 2.0, 0.05);
  for (double v : t.values) CHECK(v == 0.0);
}

TEST_CASE("instability is detected with a step index") {
  SparsePencil p = single_dof(-100.0, 1.0);
  Vec g = Vec::Ones(1), q = Vec::Ones(1);
  Wavelet w;
  w.omega_cut = 10.0;
  CHECK_THROWS_AS(fine_leapfrog(p, g, q, w, 50.0, 1.0), NumericalError);  // dt > 2/10
}

TEST_CASE("fine cfl on known spectra") {
  // 1D sigma=1: lambda_max -> 4/h^2, dt_max -> h
  GridMedium m1 = make_uniform_medium({41}, 0.25, 1.0);
  SparsePencil p1 = assemble_1d(m1);
  CHECK(fine_cfl(p1) == doctest::Approx(0.25).epsilon(0.01));

  // scaling sigma by 4 halves the stable step
  GridMedium m4 = make_uniform_medium({41}, 0.25, 4.0);
  SparsePencil p4 = assemble_1d(m4);
  CHECK(fine_cfl(p4) / fine_cfl(p1) == doctest::Approx(0.5).epsilon(0.01));

  // 2D vs dense eigensolve
  GridMedium m2 = make_uniform_medium({21, 21}, 0.5, 1.3);
  SparsePencil p2 = assemble_nd(m2);
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(-p2.A), Eigen::EigenvaluesOnly);
  const double dt_exact = 2.0 / std::sqrt(es.eigenvalues().maxCoeff());
  CHECK(fine_cfl(p2) == doctest::Approx(dt_exact).epsilon(0.01));
}

TEST_CASE("eigenmode evolution matches the discrete dispersion relation") {
  // Dirichlet box mode: the leapfrog solution is exactly v * cos(n wt dt)
  // with sin(wt dt/2) = sqrt(lambda) dt / 2; at 20 points per wavelength the
  // discrete frequency is within 1% of the continuum one.
  const int nn = 41;
  const double h = 0.25, sigma = 1.0;
  GridMedium m = make_uniform_medium({nn, nn}, h, sigma);
  SparsePencil p = assemble_nd(m);

  const int n1 = nn - 1;  // intervals per axis
  const int k = n1 / 10;  // wavelength = 20 h
  Vec v(p.n());
  for (long r = 0; r < p.n(); ++r)
    v[r] = std::sin(M_PI * k * p.coords[r][0] / double(n1)) *
           std::sin(M_PI * k * p.coords[r][1] / double(n1));

  const double lam = (4.0 * sigma / (h * h)) *
                     (std::pow(std::sin(0.5 * M_PI * k / n1), 2) +
                      std::pow(std::sin(0.5 * M_PI * k / n1), 2));
  // v is an exact discrete eigenvector
  CHECK((-(p.A * v) - lam * v).cwiseAbs().maxCoeff() < 1e-10 * lam);

  const double dt = 0.2 * fine_cfl(p);
  const double wt = 2.0 / dt * std::asin(0.5 * std::sqrt(lam) * dt);

  Vec u = v, u_prev = std::cos(wt * dt) * v, u_next(p.n());
  const int steps = 200;
  for (int s = 0; s < steps; ++s) {
    Vec rhs = p.A * u;
    rhs.array() /= p.B.array();
    u_next = 2.0 * u - u_prev + dt * dt * rhs;
    u_prev.swap(u);
    u.swap(u_next);
  }
  CHECK((u - std::cos(steps * wt * dt) * v).cwiseAbs().maxCoeff() < 1e-8);

  const double w_cont = std::sqrt(sigma) * std::sqrt(2.0) * M_PI * k / (n1 * h);
  CHECK(std::abs(std::sqrt(lam) - w_cont) / w_cont < 0.01);
}

TEST_CASE("reference trace converges at second order (richardson)") {
  GridMedium m = make_uniform_medium({21, 21}, 0.5, 1.0);
  SparsePencil p = assemble_nd(m);
  SourceReceiver sr = make_source(p, {5, 10});
  set_receiver(sr, p, {15, 10});
  Wavelet w;
  w.omega_cut = 3.0;

  const double dt = 0.5 * fine_cfl(p);
  Trace t1 = fine_leapfrog(p, sr.g, sr.q, w, 6.0, dt);
  Trace t2 = fine_leapfrog(p, sr.g, sr.q, w, 6.0, dt / 2);
  Trace t4 = fine_leapfrog(p, sr.g, sr.q, w, 6.0, dt / 4);

  double e1 = 0.0, e2 = 0.0;
  for (size_t i = 0; i < t1.values.size(); ++i) {
    e1 = std::max(e1, std::abs(t1.values[i] - t2.values[2 * i]));
    e2 = std::max(e2, std::abs(t2.values[2 * i] - t4.values[4 * i]));
  }
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.075));  // ratio 4 +- 0.3
}

TEST_CASE("skeleton transfer: 1d composition, symmetry, stieltjes sign") {
  GridMedium m = make_uniform_medium({19}, 0.5, 1.0);
  SparsePencil p = assemble_1d(m);
  PartitionResult pr = divide_and_conquer(p, 9);
  REQUIRE(pr.partition.skeleton.size() == 1);

  for (int rep = 0; rep < 4; ++rep) {
    const Cpx w2(0.5 + rep, 1.0 + 0.3 * rep);
    CMat F = dense_skeleton_transfer(p, pr.partition.skeleton, w2);

    // the single-node skeleton value composes the two cell maps:
    // F = (F1^-1 + F2^-1)^-1
    CMat F1 = exact_transfer(pr.splits[0],
                             local_indices(pr.partition.cells[0], pr.partition.boundaries[0]),
                             w2);
    CMat F2 = exact_transfer(pr.splits[1],
                             local_indices(pr.partition.cells[1], pr.partition.boundaries[1]),
                             w2);
    const Cpx composed = 1.0 / (1.0 / F1(0, 0) + 1.0 / F2(0, 0));
    CHECK(std::abs(F(0, 0) - composed) < 1e-12 * std::abs(composed));
  }

  // 2D: symmetry and the definite imaginary part in the upper half-plane
  GridMedium m2 = make_uniform_medium({13, 13}, 0.5, 1.0);
  SparsePencil p2 = assemble_nd(m2);
  PartitionResult pr2 = regular_partition(p2, {2, 1});
  for (int rep = 0; rep < 3; ++rep) {
    const Cpx w2(-1.0 + rep, 0.7);
    CMat F = dense_skeleton_transfer(p2, pr2.partition.skeleton, w2);
    CHECK(max_abs(CMat(F - F.transpose())) < 1e-12 * max_abs(F));
    // -F is the Stieltjes object under the (-A, B) sign convention
    CMat im = 0.5 * (F - F.adjoint()) / Cpx(0.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(im.real(), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().maxCoeff() < 1e-12 * max_abs(F));

    // condition 3 analog on the negative real axis: -F(x) is PSD
    CMat Fx = dense_skeleton_transfer(p2, pr2.partition.skeleton, Cpx(-2.0 - rep, 0.0));
    Eigen::SelfAdjointEigenSolver<Mat> es2(-Fx.real(), Eigen::EigenvaluesOnly);
    CHECK(es2.eigenvalues().minCoeff() > 0.0);
  }
}
