#include "mswave/msolver.hpp"

#include <algorithm>
#include <cmath>

namespace mswave {

int MultiscaleSystem::total_reduced_io() const {
  int k = 0;
  for (const auto& f : ifaces) k += f.size;
  return k;
}

long MultiscaleSystem::reduced_dof() const {
  long k = 0;
  for (const auto& r : roms) k += static_cast<long>(r.m) * r.ktilde;
  return k;
}

long MultiscaleSystem::flops_per_step() const {
  long flops = 0;
  for (const auto& r : roms) {
    const long kt = r.ktilde;
    flops += 2 * kt * kt;                                // first-layer flux
    flops += static_cast<long>(r.m - 1) * 3 * 2 * kt * kt;  // interior layers
  }
  for (const auto& f : ifaces) flops += 2L * f.size * f.size;  // shared mass apply
  return flops;
}

MultiscaleSystem assemble_system(const Partition& partition, const BoundaryBasis& basis,
                                 std::vector<SubdomainROM> roms, const Vec& B_diag) {
  MultiscaleSystem sys;
  sys.roms = std::move(roms);

  for (int f = 0; f < static_cast<int>(partition.interfaces.size()); ++f) {
    const Interface& pf = partition.interfaces[f];
    CoupledInterface cf;
    cf.part_iface = f;
    cf.ci = pf.ci;
    cf.cj = pf.cj;
    cf.S = basis.S[f];
    cf.size = static_cast<int>(cf.S.cols());

    auto find_local = [&](int cell) {
      const auto& ids = sys.roms[cell].iface_ids;
      const auto it = std::find(ids.begin(), ids.end(), f);
      if (it == ids.end())
        throw ConfigError("cell " + std::to_string(cell) + " is missing interface " +
                          std::to_string(f));
      return static_cast<int>(it - ids.begin());
    };
    cf.li = find_local(pf.ci);
    cf.lj = find_local(pf.cj);

    const SubdomainROM& ri = sys.roms[pf.ci];
    const SubdomainROM& rj = sys.roms[pf.cj];
    if (ri.block_size(cf.li) != cf.size || rj.block_size(cf.lj) != cf.size)
      throw ConfigError("mismatched interface bases between cells " + std::to_string(pf.ci) +
                        " and " + std::to_string(pf.cj));
    if ((ri.g_proj[cf.li] - rj.g_proj[cf.lj]).cwiseAbs().maxCoeff() != 0.0 ||
        (ri.q_proj[cf.li] - rj.q_proj[cf.lj]).cwiseAbs().maxCoeff() != 0.0)
      throw ConfigError("projected I/O disagrees between the two sides of interface " +
                        std::to_string(f));

    const Mat Mi = ri.ladder_hat[0].block(ri.block_offset(cf.li), ri.block_offset(cf.li),
                                          cf.size, cf.size);
    const Mat Mj = rj.ladder_hat[0].block(rj.block_offset(cf.lj), rj.block_offset(cf.lj),
                                          cf.size, cf.size);
    const Mat I = Mat::Identity(cf.size, cf.size);
    cf.mass_form = Mi.llt().solve(I) + Mj.llt().solve(I);
    cf.mass_form = 0.5 * (cf.mass_form + cf.mass_form.transpose());
    cf.mass = cf.mass_form.llt().solve(I);
    cf.mass = 0.5 * (cf.mass + cf.mass.transpose());

    cf.g_proj = ri.g_proj[cf.li];
    cf.q_proj = ri.q_proj[cf.li];
    sys.ifaces.push_back(std::move(cf));
  }

  // Hanging-node bookkeeping for the optional corner correction.
  std::map<long, CornerGroup> groups;
  for (const HangingNode& hn : partition.hanging) {
    int f = -1;
    for (int i = 0; i < static_cast<int>(partition.interfaces.size()); ++i) {
      if (partition.interfaces[i].ci == hn.ci && partition.interfaces[i].cj == hn.cj &&
          std::binary_search(partition.interfaces[i].nodes.begin(),
                             partition.interfaces[i].nodes.end(), hn.id)) {
        f = i;
        break;
      }
    }
    if (f < 0) throw ConfigError("hanging node without a matching interface");
    const auto& nodes = partition.interfaces[f].nodes;
    CornerGroup::Copy copy;
    copy.iface = f;
    copy.row = static_cast<int>(
        std::lower_bound(nodes.begin(), nodes.end(), hn.id) - nodes.begin());
    copy.mass = B_diag[hn.id];
    auto& grp = groups[hn.parent];
    grp.parent = hn.parent;
    grp.copies.push_back(copy);
  }
  for (auto& [parent, grp] : groups) sys.corners.push_back(std::move(grp));
  return sys;
}

WaveState make_state(const MultiscaleSystem& system, double dt) {
  if (dt <= 0.0) throw ConfigError("dt must be positive");
  WaveState st;
  st.dt = dt;
  for (const auto& r : system.roms) {
    st.u_cur.push_back(Vec::Zero(static_cast<long>(r.m) * r.ktilde));
    st.u_prev.push_back(Vec::Zero(static_cast<long>(r.m) * r.ktilde));
  }
  for (const auto& f : system.ifaces) {
    st.ubar_cur.push_back(Vec::Zero(f.size));
    st.ubar_prev.push_back(Vec::Zero(f.size));
  }
  return st;
}

namespace {

// First-layer flux L^1 (U^2 - U^1) of one cell.
Vec first_layer_flux(const SubdomainROM& r, const Vec& u) {
  const long kt = r.ktilde;
  if (r.m == 1) return r.ladder[0] * (-u.head(kt));
  return r.ladder[0] * (u.segment(kt, kt) - u.head(kt));
}

// Interior-layer accelerations (layers 2..m); the first-layer slot is left 0.
Vec interior_accelerations(const SubdomainROM& r, const Vec& u) {
  const long kt = r.ktilde;
  Vec acc = Vec::Zero(u.size());
  for (int k = 2; k <= r.m; ++k) {
    const auto uk = u.segment((k - 1) * kt, kt);
    const auto ukm = u.segment((k - 2) * kt, kt);
    Vec flux = -(r.ladder[k - 2] * (uk - ukm));
    if (k < r.m) flux += r.ladder[k - 1] * (u.segment(static_cast<long>(k) * kt, kt) - uk);
    else flux += r.ladder[k - 1] * (-uk);
    acc.segment((k - 1) * kt, kt) = r.ladder_hat[k - 1] * flux;
  }
  return acc;
}

void check_finite(double amp, long step_index) {
  if (!std::isfinite(amp) || amp > 1e12)
    throw NumericalError("multiscale step: instability at step " + std::to_string(step_index));
}

}  // namespace

void step(const MultiscaleSystem& system, WaveState& state, double source_value) {
  const int nc = static_cast<int>(system.roms.size());
  const int nf = static_cast<int>(system.ifaces.size());
  const double dt2 = state.dt * state.dt;

  // (2.1) publish first-layer fluxes per cell, restrict per interface
  std::vector<Vec> flux(nc);
  for (int c = 0; c < nc; ++c) flux[c] = first_layer_flux(system.roms[c], state.u_cur[c]);

  // (2.2) interior updates, independent per cell
  std::vector<Vec> u_next(nc);
  for (int c = 0; c < nc; ++c) {
    const Vec acc = interior_accelerations(system.roms[c], state.u_cur[c]);
    u_next[c] = 2.0 * state.u_cur[c] - state.u_prev[c] + dt2 * acc;
  }

  // (2.3) conjugated boundary updates; one shared value per interface
  for (int f = 0; f < nf; ++f) {
    const CoupledInterface& cf = system.ifaces[f];
    Vec phi = flux[cf.ci].segment(system.roms[cf.ci].block_offset(cf.li), cf.size);
    if (cf.cj >= 0) phi += flux[cf.cj].segment(system.roms[cf.cj].block_offset(cf.lj), cf.size);
    phi += source_value * cf.g_proj;
    const Vec acc = cf.mass * phi;
    Vec nb = 2.0 * state.ubar_cur[f] - state.ubar_prev[f] + dt2 * acc;
    u_next[cf.ci].segment(system.roms[cf.ci].block_offset(cf.li), cf.size) = nb;
    if (cf.cj >= 0)
      u_next[cf.cj].segment(system.roms[cf.cj].block_offset(cf.lj), cf.size) = nb;
    state.ubar_prev[f] = state.ubar_cur[f];
    state.ubar_cur[f] = std::move(nb);
  }

  double amp = 0.0;
  for (int c = 0; c < nc; ++c) {
    state.u_prev[c] = std::move(state.u_cur[c]);
    state.u_cur[c] = std::move(u_next[c]);
    amp = std::max(amp, state.u_cur[c].size() ? state.u_cur[c].cwiseAbs().maxCoeff() : 0.0);
  }
  state.t += state.dt;
  ++state.step_index;
  check_finite(amp, state.step_index);
}

void corner_correct(const MultiscaleSystem& system, WaveState& state) {
  if (system.corners.empty()) return;
  std::vector<Vec> delta(system.ifaces.size());
  for (size_t f = 0; f < system.ifaces.size(); ++f) delta[f] = Vec::Zero(system.ifaces[f].size);

  for (const CornerGroup& grp : system.corners) {
    double num = 0.0, den = 0.0;
    std::vector<double> values(grp.copies.size());
    for (size_t i = 0; i < grp.copies.size(); ++i) {
      const auto& cp = grp.copies[i];
      values[i] = system.ifaces[cp.iface].S.row(cp.row).dot(state.ubar_cur[cp.iface]);
      num += values[i] * cp.mass;
      den += cp.mass;
    }
    const double mean = den > 0.0 ? num / den : 0.0;
    for (size_t i = 0; i < grp.copies.size(); ++i) {
      const auto& cp = grp.copies[i];
      delta[cp.iface] += system.ifaces[cp.iface].S.row(cp.row).transpose() * (mean - values[i]);
    }
  }

  for (size_t f = 0; f < system.ifaces.size(); ++f) {
    if (delta[f].cwiseAbs().maxCoeff() == 0.0) continue;
    state.ubar_cur[f] += delta[f];
    const CoupledInterface& cf = system.ifaces[f];
    state.u_cur[cf.ci].segment(system.roms[cf.ci].block_offset(cf.li), cf.size) =
        state.ubar_cur[f];
    if (cf.cj >= 0)
      state.u_cur[cf.cj].segment(system.roms[cf.cj].block_offset(cf.lj), cf.size) =
          state.ubar_cur[f];
  }
}

namespace {

// Flattened acceleration operator x -> acc(x) used for spectrum estimates and
// the energy form.  Layout: interface blocks first, then interior layers.
struct FlatOps {
  const MultiscaleSystem& sys;
  long n = 0;

  explicit FlatOps(const MultiscaleSystem& s) : sys(s) {
    for (const auto& f : sys.ifaces) n += f.size;
    for (const auto& r : sys.roms) n += static_cast<long>(r.m - 1) * r.ktilde;
  }

  // scatter flat -> per-cell layer vectors (conjugation-consistent)
  std::vector<Vec> cells(const Vec& x) const {
    std::vector<Vec> u;
    for (const auto& r : sys.roms) u.push_back(Vec::Zero(static_cast<long>(r.m) * r.ktilde));
    long off = 0;
    for (const auto& f : sys.ifaces) {
      u[f.ci].segment(sys.roms[f.ci].block_offset(f.li), f.size) = x.segment(off, f.size);
      if (f.cj >= 0)
        u[f.cj].segment(sys.roms[f.cj].block_offset(f.lj), f.size) = x.segment(off, f.size);
      off += f.size;
    }
    for (size_t c = 0; c < sys.roms.size(); ++c) {
      const long tail = static_cast<long>(sys.roms[c].m - 1) * sys.roms[c].ktilde;
      u[c].tail(tail) = x.segment(off, tail);
      off += tail;
    }
    return u;
  }

  Vec acc(const Vec& x) const {
    const std::vector<Vec> u = cells(x);
    Vec out = Vec::Zero(n);
    std::vector<Vec> flux(sys.roms.size());
    for (size_t c = 0; c < sys.roms.size(); ++c)
      flux[c] = first_layer_flux(sys.roms[c], u[c]);
    long off = 0;
    for (const auto& f : sys.ifaces) {
      Vec phi = flux[f.ci].segment(sys.roms[f.ci].block_offset(f.li), f.size);
      if (f.cj >= 0) phi += flux[f.cj].segment(sys.roms[f.cj].block_offset(f.lj), f.size);
      out.segment(off, f.size) = f.mass * phi;
      off += f.size;
    }
    for (size_t c = 0; c < sys.roms.size(); ++c) {
      const Vec a = interior_accelerations(sys.roms[c], u[c]);
      const long tail = static_cast<long>(sys.roms[c].m - 1) * sys.roms[c].ktilde;
      out.segment(off, tail) = a.tail(tail);
      off += tail;
    }
    return out;
  }

  // M-weighted flux image: returns the per-DOF "force" M * acc(x); used for
  // the energy form without applying mass inverses.
  Vec force(const Vec& x) const {
    const std::vector<Vec> u = cells(x);
    Vec out = Vec::Zero(n);
    std::vector<Vec> flux(sys.roms.size());
    for (size_t c = 0; c < sys.roms.size(); ++c)
      flux[c] = first_layer_flux(sys.roms[c], u[c]);
    long off = 0;
    for (const auto& f : sys.ifaces) {
      Vec phi = flux[f.ci].segment(sys.roms[f.ci].block_offset(f.li), f.size);
      if (f.cj >= 0) phi += flux[f.cj].segment(sys.roms[f.cj].block_offset(f.lj), f.size);
      out.segment(off, f.size) = phi;
      off += f.size;
    }
    for (size_t c = 0; c < sys.roms.size(); ++c) {
      const SubdomainROM& r = sys.roms[c];
      const long kt = r.ktilde;
      for (int k = 2; k <= r.m; ++k) {
        const auto uk = u[c].segment((k - 1) * kt, kt);
        const auto ukm = u[c].segment((k - 2) * kt, kt);
        Vec fk = -(r.ladder[k - 2] * (uk - ukm));
        if (k < r.m) fk += r.ladder[k - 1] * (u[c].segment(static_cast<long>(k) * kt, kt) - uk);
        else fk += r.ladder[k - 1] * (-uk);
        out.segment(off, kt) = fk;
        off += kt;
      }
    }
    return out;
  }

  Vec mass_apply(const Vec& x) const {
    Vec out = Vec::Zero(n);
    long off = 0;
    for (const auto& f : sys.ifaces) {
      out.segment(off, f.size) = f.mass_form * x.segment(off, f.size);
      off += f.size;
    }
    for (const auto& r : sys.roms) {
      const long kt = r.ktilde;
      for (int k = 2; k <= r.m; ++k) {
        out.segment(off, kt) = r.ladder_hat[k - 1].llt().solve(x.segment(off, kt));
        off += kt;
      }
    }
    return out;
  }

  Vec flatten(const std::vector<Vec>& u_cells, const std::vector<Vec>& ubar) const {
    Vec x = Vec::Zero(n);
    long off = 0;
    for (size_t f = 0; f < sys.ifaces.size(); ++f) {
      x.segment(off, sys.ifaces[f].size) = ubar[f];
      off += sys.ifaces[f].size;
    }
    for (size_t c = 0; c < sys.roms.size(); ++c) {
      const long tail = static_cast<long>(sys.roms[c].m - 1) * sys.roms[c].ktilde;
      x.segment(off, tail) = u_cells[c].tail(tail);
      off += tail;
    }
    return x;
  }
};

}  // namespace

double estimate_dt(const MultiscaleSystem& system, double safety) {
  FlatOps ops(system);
  Vec x(ops.n);
  for (long i = 0; i < ops.n; ++i) x[i] = std::sin(1.3 * static_cast<double>(i) + 0.7) + 1e-3;
  x.normalize();

  double lambda = 0.0;
  bool converged = false;
  for (int it = 0; it < 500; ++it) {
    Vec y = -ops.acc(x);
    const double next = x.dot(y);
    const double delta = std::abs(next - lambda);
    lambda = next;
    const double norm = y.norm();
    if (norm == 0.0) break;
    x = y / norm;
    if (it > 16 && delta <= 1e-8 * std::abs(lambda)) {
      converged = true;
      break;
    }
  }
  if (!converged || !(lambda > 0.0)) {
    // Gershgorin row-sum bound of the assembled operator.
    double bound = 0.0;
    Vec e = Vec::Zero(ops.n);
    Mat cols(ops.n, ops.n);
    for (long j = 0; j < ops.n; ++j) {
      e.setZero();
      e[j] = 1.0;
      cols.col(j) = ops.acc(e);
    }
    for (long i = 0; i < ops.n; ++i) bound = std::max(bound, cols.row(i).cwiseAbs().sum());
    lambda = std::max(lambda, bound);
    if (!(lambda > 0.0)) throw NumericalError("estimate_dt: could not bound the spectrum");
  }
  return safety * 2.0 / std::sqrt(lambda);
}

double energy(const MultiscaleSystem& system, const WaveState& state) {
  FlatOps ops(system);
  const Vec xc = ops.flatten(state.u_cur, state.ubar_cur);
  const Vec xp = ops.flatten(state.u_prev, state.ubar_prev);
  const Vec d = xc - xp;
  const double kinetic = 0.5 * d.dot(ops.mass_apply(d)) / (state.dt * state.dt);
  const double potential = -0.5 * xp.dot(ops.force(xc));
  return kinetic + potential;
}

RunResult run_simulation(const MultiscaleSystem& system, const Wavelet& wavelet, double t_final,
                         double dt, bool corner_correction, long energy_stride) {
  RunResult res;
  WaveState st = make_state(system, dt);
  const long steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
  res.steps = steps;
  res.trace.dt = dt;

  auto sample = [&]() {
    double v = 0.0;
    for (size_t f = 0; f < system.ifaces.size(); ++f)
      v += system.ifaces[f].q_proj.dot(st.ubar_cur[f]);
    res.trace.times.push_back(st.t);
    res.trace.values.push_back(v);
  };

  sample();
  for (long s = 0; s < steps; ++s) {
    step(system, st, wavelet(st.t));
    if (corner_correction) corner_correct(system, st);
    sample();
    if (energy_stride > 0 && (s + 1) % energy_stride == 0) {
      res.energy_times.push_back(st.t);
      res.energy_values.push_back(energy(system, st));
    }
  }
  return res;
}

CMat frequency_response(const MultiscaleSystem& system, Cpx w2) {
  FlatOps ops(system);
  const long n = ops.n;
  long io = 0;
  for (const auto& f : system.ifaces) io += f.size;

  // Dense assembly of M(w2) x = [g; 0] with rows scaled by the mass forms:
  // row = w2 * mass_form * x - force(x).
  CMat M(n, n);
  Vec e = Vec::Zero(n);
  for (long j = 0; j < n; ++j) {
    e.setZero();
    e[j] = 1.0;
    const Vec fj = ops.force(e);
    const Vec mj = ops.mass_apply(e);
    M.col(j) = (w2 * mj.cast<Cpx>() - fj.cast<Cpx>());
  }
  CMat rhs = CMat::Zero(n, io);
  rhs.topLeftCorner(io, io).setIdentity();
  const CMat sol = M.partialPivLu().solve(rhs);
  if (!sol.allFinite()) throw NumericalError("frequency_response: singular system");
  return sol.topRows(io);
}

}  // namespace mswave
