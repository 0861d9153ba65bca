#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <random>

#include "mswave/msolver.hpp"
#include "mswave/trace_io.hpp"
#include "test_helpers.hpp"

using namespace mswave;
using mswave::testing::BuiltSystem;
using mswave::testing::build_regular;
using mswave::testing::scalar_oscillator;

namespace {

std::mt19937 rng(77);

void randomize_state(const MultiscaleSystem& sys, WaveState& st, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : st.u_cur)
    for (long i = 0; i < v.size(); ++i) v[i] = u(rng);
  for (auto& v : st.u_prev)
    for (long i = 0; i < v.size(); ++i) v[i] = u(rng);
  // restore the conjugation invariant
  for (size_t f = 0; f < sys.ifaces.size(); ++f) {
    const auto& cf = sys.ifaces[f];
    st.ubar_cur[f] = st.u_cur[cf.ci].segment(sys.roms[cf.ci].block_offset(cf.li), cf.size);
    st.ubar_prev[f] = st.u_prev[cf.ci].segment(sys.roms[cf.ci].block_offset(cf.li), cf.size);
    if (cf.cj >= 0) {
      st.u_cur[cf.cj].segment(sys.roms[cf.cj].block_offset(cf.lj), cf.size) = st.ubar_cur[f];
      st.u_prev[cf.cj].segment(sys.roms[cf.cj].block_offset(cf.lj), cf.size) = st.ubar_prev[f];
    }
  }
}

}  // namespace

TEST_CASE("two 1d cells sharing a node: scalar shared-mass formula") {
  RomOptions opt;
  opt.m = 3;
  opt.omega_max = 3.0;
  BuiltSystem b = build_regular({17}, 1.0, {2}, opt, {8, 0, 0}, {8, 0, 0});
  REQUIRE(b.system.ifaces.size() == 1);
  const double l1 = b.system.roms[0].ladder_hat[0](0, 0);
  const double l2 = b.system.roms[1].ladder_hat[0](0, 0);
  CHECK(b.system.ifaces[0].mass(0, 0) == doctest::Approx(1.0 / (1.0 / l1 + 1.0 / l2)));
}

TEST_CASE("single-cell system degenerates to first-layer dynamics") {
  MultiscaleSystem sys = scalar_oscillator(1.0, 4.0);
  WaveState st = make_state(sys, 0.1);
  st.ubar_cur[0][0] = st.ubar_prev[0][0] = 0.3;
  st.u_cur[0][0] = st.u_prev[0][0] = 0.3;
  // u'' = -4 u: one step of leapfrog from rest at 0.3
  step(sys, st, 0.0);
  CHECK(st.ubar_cur[0][0] == doctest::Approx(0.3 + 0.01 * (-4.0 * 0.3)));
  CHECK(estimate_dt(sys, 1.0) == doctest::Approx(2.0 / std::sqrt(4.0)).epsilon(1e-6));
}

TEST_CASE("zero state and zero source stay zero") {
  RomOptions opt;
  opt.m = 2;
  opt.omega_max = 3.0;
  BuiltSystem b = build_regular({17}, 1.0, {2}, opt, {8, 0, 0}, {8, 0, 0});
  WaveState st = make_state(b.system, 0.1);
  for (int s = 0; s < 10; ++s) step(b.system, st, 0.0);
  for (const auto& v : st.u_cur) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar layer follows the leapfrog-dispersed oscillation") {
  MultiscaleSystem sys = scalar_oscillator(1.0, 4.0);  // w0^2 = 4
  const double dt = 0.2;
  WaveState st = make_state(sys, dt);
  step(sys, st, 1.0 / dt);  // discrete impulse: u1 = dt
  CHECK(st.ubar_cur[0][0] == doctest::Approx(dt));

  const double wt = 2.0 / dt * std::asin(0.5 * 2.0 * dt);  // dispersed frequency
  for (int n = 2; n <= 50; ++n) {
    step(sys, st, 0.0);
    const double expect = dt * std::sin(n * wt * dt) / std::sin(wt * dt);
    CHECK(st.ubar_cur[0][0] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("full-order 1d multiscale trace equals the fine leapfrog trace") {
  // untruncated basis, m = N_i: the coupled ROM system is an exact
  // congruence of the fine pencil, so the traces agree to roundoff
  GridMedium m = make_uniform_medium({19}, 1.0, 1.0);
  SparsePencil p = assemble_1d(m);
  PartitionResult pr = regular_partition(p, {2});
  RomOptions opt;
  opt.m = static_cast<int>(pr.splits[0].A.rows());
  opt.omega_max = 2.5;
  opt.epsilon_rel = 1e-14;
  BoundaryBasis basis = build_boundary_basis(p, pr.partition, opt);
  SourceReceiver io = make_source(p, {9, 0, 0});
  set_receiver(io, p, {9, 0, 0});
  auto roms = build_all_roms(pr.partition, pr.splits, basis, io.g, io.q, opt);
  MultiscaleSystem sys = assemble_system(pr.partition, basis, std::move(roms), p.B);

  Wavelet w;
  w.omega_cut = 2.5;
  const double dt = 0.9 * fine_cfl(p);
  const double t_final = 500 * dt;

  RunResult ms = run_simulation(sys, w, t_final, dt);
  Trace fine = fine_leapfrog(p, io.g, io.q, w, t_final, dt);

  REQUIRE(ms.trace.values.size() == fine.values.size());
  double scale = 0.0, err = 0.0;
  for (size_t i = 0; i < fine.values.size(); ++i) {
    scale = std::max(scale, std::abs(fine.values[i]));
    err = std::max(err, std::abs(fine.values[i] - ms.trace.values[i]));
  }
  CHECK(err < 1e-10 * std::max(1.0, scale));
}

TEST_CASE("assembled operator matches an independently assembled monolithic system") {
  RomOptions opt;
  opt.m = 3;
  opt.omega_max = 4.0;
  opt.epsilon_rel = 1e-3;
  opt.max_basis_per_interface = 4;
  BuiltSystem b = build_regular({17, 17}, 0.5, {2, 2}, opt, {8, 4, 0}, {8, 12, 0});
  const MultiscaleSystem& sys = b.system;

  // test-local monolithic assembly over [ubar blocks; interior layers]
  long n_io = 0;
  for (const auto& f : sys.ifaces) n_io += f.size;
  long n = n_io;
  std::vector<long> cell_off(sys.roms.size());
  for (size_t c = 0; c < sys.roms.size(); ++c) {
    cell_off[c] = n;
    n += static_cast<long>(sys.roms[c].m - 1) * sys.roms[c].ktilde;
  }
  std::vector<long> iface_off(sys.ifaces.size());
  {
    long off = 0;
    for (size_t f = 0; f < sys.ifaces.size(); ++f) {
      iface_off[f] = off;
      off += sys.ifaces[f].size;
    }
  }

  // index of layer-k (1-based) block element j of cell c in the flat vector
  auto layer_index = [&](int c, int k, int j) -> long {
    if (k == 1) {
      // layer 1 lives in the interface blocks
      const SubdomainROM& r = sys.roms[c];
      for (size_t f = 0; f < sys.ifaces.size(); ++f) {
        const auto& cf = sys.ifaces[f];
        int li = cf.ci == c ? cf.li : (cf.cj == c ? cf.lj : -1);
        if (li < 0) continue;
        const int o = r.block_offset(li);
        if (j >= o && j < o + cf.size) return iface_off[f] + (j - o);
      }
      REQUIRE(false);
      return -1;
    }
    return cell_off[c] + static_cast<long>(k - 2) * sys.roms[c].ktilde + j;
  };

  const Cpx w2(1.3, 0.9);
  CMat M = CMat::Zero(n, n);
  // interface rows: w2 * massform * ubar - sum of L^1 (U^2 - U^1) restrictions
  for (size_t f = 0; f < sys.ifaces.size(); ++f) {
    const auto& cf = sys.ifaces[f];
    M.block(iface_off[f], iface_off[f], cf.size, cf.size) += w2 * cf.mass_form.cast<Cpx>();
    for (int side = 0; side < 2; ++side) {
      const int c = side == 0 ? cf.ci : cf.cj;
      const int li = side == 0 ? cf.li : cf.lj;
      if (c < 0) continue;
      const SubdomainROM& r = sys.roms[c];
      const int o = r.block_offset(li);
      for (int i = 0; i < cf.size; ++i)
        for (int j = 0; j < r.ktilde; ++j) {
          const double l1 = r.ladder[0](o + i, j);
          if (r.m >= 2) M(iface_off[f] + i, layer_index(c, 2, j)) -= l1;
          M(iface_off[f] + i, layer_index(c, 1, j)) += l1;
        }
    }
  }
  // interior rows k = 2..m
  for (size_t c = 0; c < sys.roms.size(); ++c) {
    const SubdomainROM& r = sys.roms[c];
    const int kt = r.ktilde;
    for (int k = 2; k <= r.m; ++k) {
      for (int i = 0; i < kt; ++i) {
        const long row = layer_index(c, k, i);
        for (int j = 0; j < kt; ++j) {
          const Mat hat_inv = r.ladder_hat[k - 1].llt().solve(Mat::Identity(kt, kt));
          M(row, layer_index(c, k, j)) += w2 * hat_inv(i, j);
          M(row, layer_index(c, k, j)) += (r.ladder[k - 2](i, j) +
                                           (k < r.m ? r.ladder[k - 1](i, j) : r.ladder[k - 1](i, j)));
          M(row, layer_index(c, k - 1, j)) -= r.ladder[k - 2](i, j);
          if (k < r.m) M(row, layer_index(c, k + 1, j)) -= r.ladder[k - 1](i, j);
        }
      }
    }
  }

  CMat rhs = CMat::Zero(n, n_io);
  rhs.topLeftCorner(n_io, n_io).setIdentity();
  CMat sol = M.partialPivLu().solve(rhs);
  CMat expect = sol.topRows(n_io);

  CMat got = frequency_response(sys, w2);
  CHECK(max_abs(CMat(got - expect)) < 1e-10 * std::max(1.0, max_abs(expect)));
}

TEST_CASE("dt estimate: two-cell 1d full order is within 5% of the fine cfl") {
  GridMedium m = make_uniform_medium({19}, 1.0, 1.0);
  SparsePencil p = assemble_1d(m);
  PartitionResult pr = regular_partition(p, {2});
  RomOptions opt;
  opt.m = static_cast<int>(pr.splits[0].A.rows());
  opt.omega_max = 2.5;
  BoundaryBasis basis = build_boundary_basis(p, pr.partition, opt);
  SourceReceiver io = make_source(p, {9, 0, 0});
  set_receiver(io, p, {9, 0, 0});
  auto roms = build_all_roms(pr.partition, pr.splits, basis, io.g, io.q, opt);
  MultiscaleSystem sys = assemble_system(pr.partition, basis, std::move(roms), p.B);

  CHECK(estimate_dt(sys, 1.0) == doctest::Approx(fine_cfl(p)).epsilon(0.05));

  // scaling sigma up can only shrink the stable step
  GridMedium m4 = make_uniform_medium({19}, 1.0, 4.0);
  SparsePencil p4 = assemble_1d(m4);
  PartitionResult pr4 = regular_partition(p4, {2});
  BoundaryBasis basis4 = build_boundary_basis(p4, pr4.partition, opt);
  auto roms4 = build_all_roms(pr4.partition, pr4.splits, basis4, io.g, io.q, opt);
  MultiscaleSystem sys4 = assemble_system(pr4.partition, basis4, std::move(roms4), p4.B);
  CHECK(estimate_dt(sys4, 1.0) < estimate_dt(sys, 1.0));
}

TEST_CASE("conjugation invariant holds bit-exactly after every step") {
  RomOptions opt;
  opt.m = 3;
  opt.omega_max = 4.0;
  opt.epsilon_rel = 1e-3;
  opt.max_basis_per_interface = 4;
  BuiltSystem b = build_regular({17, 17}, 0.5, {2, 2}, opt, {8, 4, 0}, {8, 12, 0});
  Wavelet w;
  w.omega_cut = 4.0;
  WaveState st = make_state(b.system, 0.5 * estimate_dt(b.system, 1.0));
  for (int s = 0; s < 50; ++s) {
    step(b.system, st, w(st.t));
    for (size_t f = 0; f < b.system.ifaces.size(); ++f) {
      const auto& cf = b.system.ifaces[f];
      const Vec a =
          st.u_cur[cf.ci].segment(b.system.roms[cf.ci].block_offset(cf.li), cf.size);
      const Vec c =
          st.u_cur[cf.cj].segment(b.system.roms[cf.cj].block_offset(cf.lj), cf.size);
      CHECK((a - st.ubar_cur[f]).cwiseAbs().maxCoeff() == 0.0);
      CHECK((c - st.ubar_cur[f]).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("time reversal returns the initial state") {
  RomOptions opt;
  opt.m = 2;
  opt.omega_max = 3.0;
  opt.epsilon_rel = 1e-3;
  opt.max_basis_per_interface = 3;
  BuiltSystem b = build_regular({13, 13}, 0.5, {2, 1}, opt, {6, 4, 0}, {6, 8, 0});
  WaveState st = make_state(b.system, 0.4 * estimate_dt(b.system, 1.0));
  randomize_state(b.system, st, 0.1);
  const WaveState init = st;

  const int n = 40;
  for (int s = 0; s < n; ++s) step(b.system, st, 0.0);
  std::swap(st.u_cur, st.u_prev);
  std::swap(st.ubar_cur, st.ubar_prev);
  for (int s = 0; s < n; ++s) step(b.system, st, 0.0);

  for (size_t c = 0; c < st.u_cur.size(); ++c)
    CHECK((st.u_prev[c] - init.u_cur[c]).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("source-free energy is conserved to roundoff") {
  RomOptions opt;
  opt.m = 3;
  opt.omega_max = 4.0;
  opt.epsilon_rel = 1e-3;
  opt.max_basis_per_interface = 4;
  BuiltSystem b = build_regular({17, 17}, 0.5, {2, 2}, opt, {8, 4, 0}, {8, 12, 0});
  WaveState st = make_state(b.system, 0.5 * estimate_dt(b.system, 1.0));
  randomize_state(b.system, st, 0.2);

  const double e0 = energy(b.system, st);
  REQUIRE(std::abs(e0) > 0.0);
  double drift = 0.0;
  for (int s = 0; s < 300; ++s) {
    step(b.system, st, 0.0);
    drift = std::max(drift, std::abs(energy(b.system, st) - e0) / std::abs(e0));
  }
  CHECK(drift < 1e-8);
}

TEST_CASE("corner correction: mass-weighted mean of hanging values") {
  MultiscaleSystem sys;
  for (int f = 0; f < 2; ++f) {
    CoupledInterface cf;
    cf.part_iface = f;
    cf.ci = 0;
    cf.li = 0;
    cf.size = 2;
    cf.S = Mat::Identity(2, 2);
    cf.mass = cf.mass_form = Mat::Identity(2, 2);
    cf.g_proj = cf.q_proj = Vec::Zero(2);
    sys.ifaces.push_back(cf);
  }
  SubdomainROM rom;  // placeholder cell so segment writes have a target
  rom.cell = 0;
  rom.m = 1;
  rom.ktilde = 4;
  rom.iface_ids = {0, 1};
  rom.iface_offsets = {0, 2, 4};
  sys.roms.push_back(rom);
  sys.ifaces[0].lj = -1;
  sys.ifaces[1].li = 1;

  CornerGroup grp;
  grp.parent = 0;
  grp.copies = {{0, 0, 1.0}, {1, 1, 1.0}};
  sys.corners.push_back(grp);

  WaveState st = make_state(sys, 0.1);
  SUBCASE("equal values are untouched") {
    st.ubar_cur[0] << 2.5, 9.0;
    st.ubar_cur[1] << 7.0, 2.5;
    st.u_cur[0] << 2.5, 9.0, 7.0, 2.5;
    corner_correct(sys, st);
    CHECK(st.ubar_cur[0][0] == 2.5);
    CHECK(st.ubar_cur[1][1] == 2.5);
    CHECK(st.ubar_cur[0][1] == 9.0);
  }
  SUBCASE("values 1 and 3 with equal masses average to 2") {
    st.ubar_cur[0] << 1.0, 0.0;
    st.ubar_cur[1] << 0.0, 3.0;
    st.u_cur[0] << 1.0, 0.0, 0.0, 3.0;
    corner_correct(sys, st);
    CHECK(st.ubar_cur[0][0] == doctest::Approx(2.0));
    CHECK(st.ubar_cur[1][1] == doctest::Approx(2.0));
  }
  SUBCASE("unequal masses weight the mean") {
    sys.corners[0].copies[1].mass = 3.0;
    st.ubar_cur[0] << 1.0, 0.0;
    st.ubar_cur[1] << 0.0, 3.0;
    st.u_cur[0] << 1.0, 0.0, 0.0, 3.0;
    corner_correct(sys, st);
    CHECK(st.ubar_cur[0][0] == doctest::Approx(2.5));
    CHECK(st.ubar_cur[1][1] == doctest::Approx(2.5));
  }
}

TEST_CASE("corner correction reduces the trace error on a smooth 2d run") {
  RomOptions opt;
  opt.m = 4;
  opt.omega_max = 2.0 * M_PI;
  opt.epsilon_rel = 1e-7;
  BuiltSystem b = build_regular({41, 41}, 0.05, {2, 2}, opt, {20, 10, 0}, {20, 30, 0});
  REQUIRE(!b.system.corners.empty());

  Wavelet w;
  w.omega_cut = opt.omega_max;
  w.delay_factor = 5.0;
  const double dt = 0.9 * fine_cfl(b.original_pencil);
  const double t_final = 6.0;

  SourceReceiver io_fine = make_source(b.original_pencil, {20, 10, 0});
  set_receiver(io_fine, b.original_pencil, {20, 30, 0});
  Trace fine = fine_leapfrog(b.original_pencil, io_fine.g, io_fine.q, w, t_final, dt);

  RunResult off = run_simulation(b.system, w, t_final, dt, false);
  RunResult on = run_simulation(b.system, w, t_final, dt, true);

  const double err_off = compare_traces(off.trace, fine).rel_l2_error;
  const double err_on = compare_traces(on.trace, fine).rel_l2_error;
  MESSAGE("corner correction off: ", err_off, " on: ", err_on);
  CHECK(err_on < err_off);  // measured improvement, not a fixed factor
}

TEST_CASE("receivers orthogonal to the excited interfaces record zero") {
  RomOptions opt;
  opt.m = 2;
  opt.omega_max = 3.0;
  BuiltSystem b = build_regular({17}, 1.0, {2}, opt, {8, 0, 0}, {8, 0, 0});
  for (auto& f : b.system.ifaces) f.q_proj.setZero();
  Wavelet w;
  w.omega_cut = 3.0;
  RunResult res = run_simulation(b.system, w, 2.0, 0.1);
  for (double v : res.trace.values) CHECK(v == 0.0);
}

TEST_CASE("global frequency map has the stieltjes sign in the upper half-plane") {
  RomOptions opt;
  opt.m = 3;
  opt.omega_max = 4.0;
  opt.epsilon_rel = 1e-3;
  opt.max_basis_per_interface = 4;
  BuiltSystem b = build_regular({17, 17}, 0.5, {2, 2}, opt, {8, 4, 0}, {8, 12, 0});
  for (int rep = 0; rep < 5; ++rep) {
    const Cpx w2(-2.0 + rep, 0.8 + 0.2 * rep);
    CMat F = frequency_response(b.system, w2);
    CMat im = 0.5 * (F - F.adjoint()) / Cpx(0.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(im.real(), Eigen::EigenvaluesOnly);
    // -F is the Stieltjes object under the (-A, B) sign convention
    CHECK(es.eigenvalues().maxCoeff() < 1e-10 * std::max(1.0, max_abs(F)));
  }
}

TEST_CASE("instability reports the step index") {
  MultiscaleSystem sys = scalar_oscillator(1.0, 100.0);
  WaveState st = make_state(sys, 1.0);  // far beyond 2/10
  st.ubar_cur[0][0] = 1.0;
  st.u_cur[0][0] = 1.0;
  CHECK_THROWS_WITH_AS(
      [&] {
        for (int s = 0; s < 200; ++s) step(sys, st, 0.0);
      }(),
      doctest::Contains("instability at step"), NumericalError);
}
