#ifndef MSWAVE_MSOLVER_HPP
#define MSWAVE_MSOLVER_HPP

#include <vector>

#include "mswave/reference.hpp"
#include "mswave/romgen.hpp"
#include "mswave/types.hpp"
#include "mswave/wavelet.hpp"

namespace mswave {

// One conjugated interface of the coupled system.  cj/lj stay -1 for
// single-sided (test) systems whose boundary reduces to the cell's own
// first-layer dynamics.
struct CoupledInterface {
  int part_iface = -1;
  int ci = -1, cj = -1;  // owning cells
  int li = -1, lj = -1;  // position within each cell's interface list
  int size = 0;          // reduced interface dimension M_ij
  Mat S;                 // shared interface basis
  Mat mass;              // [sum of (P~^T Lhat^1 P~)^-1]^-1 : multiplies the flux sum
  Mat mass_form;         // its inverse, the quadratic mass form of u~
  Vec g_proj, q_proj;
};

// Hanging copies of one removed corner node, for the optional correction.
struct CornerGroup {
  struct Copy {
    int iface = -1;  // system interface index
    int row = -1;    // node position within the interface
    double mass = 0.0;
  };
  long parent = -1;
  std::vector<Copy> copies;
};

struct MultiscaleSystem {
  std::vector<SubdomainROM> roms;
  std::vector<CoupledInterface> ifaces;
  std::vector<CornerGroup> corners;

  int total_reduced_io() const;
  long reduced_dof() const;      // sum of m * ktilde
  long flops_per_step() const;   // analytic multiply-add count, informational
};

MultiscaleSystem assemble_system(const Partition& partition, const BoundaryBasis& basis,
                                 std::vector<SubdomainROM> roms, const Vec& B_diag);

// Per-cell layer solutions at steps n and n-1 plus the shared interface
// values; the conjugation invariant P~_ij U^1_i = u~_ij holds bit-exactly.
struct WaveState {
  std::vector<Vec> u_cur, u_prev;        // per cell, m * ktilde
  std::vector<Vec> ubar_cur, ubar_prev;  // per interface, size M_ij
  double t = 0.0;
  double dt = 0.0;
  long step_index = 0;
};

WaveState make_state(const MultiscaleSystem& system, double dt);

// Central-difference update: publish first-layer fluxes, advance interior
// layers, then advance the conjugated boundary values.  source_value is the
// wavelet sample at the current time.
void step(const MultiscaleSystem& system, WaveState& state, double source_value);

// Appendix-style corner correction: replaces each corner's hanging values by
// their mass-weighted mean, projected back onto the interface bases.  No-op
// when the partition had no corner set.
void corner_correct(const MultiscaleSystem& system, WaveState& state);

// Stable-step estimate safety * 2/sqrt(lambda_max) by power iteration on the
// assembled second-order operator.
double estimate_dt(const MultiscaleSystem& system, double safety);

// Discrete leapfrog energy (exactly conserved by source-free stepping).
double energy(const MultiscaleSystem& system, const WaveState& state);

struct RunResult {
  Trace trace;
  std::vector<double> energy_times, energy_values;
  long steps = 0;
};

RunResult run_simulation(const MultiscaleSystem& system, const Wavelet& wavelet, double t_final,
                         double dt, bool corner_correction = false, long energy_stride = 0);

// Frequency-domain map of stacked projected sources to stacked interface
// values, by direct solve of the coupled layered system.
CMat frequency_response(const MultiscaleSystem& system, Cpx w2);

}  // namespace mswave

#endif  // MSWAVE_MSOLVER_HPP
