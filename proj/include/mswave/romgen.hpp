#ifndef MSWAVE_ROMGEN_HPP
#define MSWAVE_ROMGEN_HPP

#include <vector>

#include "mswave/partition.hpp"
#include "mswave/types.hpp"

namespace mswave {

// Shared interface bases from frequency-limited Gramians.  S[f] has one
// orthonormal column per kept Gramian eigenvector of interface f.
struct BoundaryBasis {
  double omega_max = 0.0;
  double epsilon = 0.0;
  std::vector<Mat> S;          // per interface, K_ij x M_ij
  std::vector<Vec> kept_eigs;  // descending
  std::vector<double> tail;    // sum of discarded eigenvalues
};

// Reduced model of one coarse cell: projected pencil, block-tridiagonal
// realization and the S-fraction coefficient ladders.
struct SubdomainROM {
  int cell = -1;
  int m = 0;       // Krylov order / number of layers
  int ktilde = 0;  // reduced boundary size, sum of interface block sizes
  double shift = 0.0;

  std::vector<int> iface_ids;      // interface indices, ascending
  std::vector<int> iface_offsets;  // block offset per interface, plus total

  Mat V;            // N_i x m*ktilde orthonormal Krylov basis
  Mat Am, Bm, Sm;   // projected pencil and input block
  Mat T;            // block tridiagonal, m*ktilde square
  Mat beta1;        // ktilde block, R = [beta1; 0; ...]
  std::vector<Mat> ladder_hat;  // Lhat^1..Lhat^m, SPD
  std::vector<Mat> ladder;      // L^1..L^m, SPD

  std::vector<Vec> g_proj, q_proj;  // per interface, length M_ij

  int block_offset(int local_iface) const { return iface_offsets[local_iface]; }
  int block_size(int local_iface) const {
    return iface_offsets[local_iface + 1] - iface_offsets[local_iface];
  }
};

// Local row positions of `subset` (sorted global ids) within `nodes`.
std::vector<long> local_indices(const std::vector<long>& nodes, const std::vector<long>& subset);

// Dense Neumann-to-Dirichlet map of one cell:
// F(w2) = P^T (A_i + w2 B_i)^{-1} P restricted to boundary rows.
CMat exact_transfer(const SubdomainSplit& split, const std::vector<long>& boundary_local, Cpx w2);

// Frequency-limited boundary Gramian of interface `iface_nodes` computed by a
// dense eigendecomposition of (-A, B) restricted to `collar_nodes` (a
// surrogate neighborhood; pass all nodes for the exact desk-scale route).
Mat boundary_gramian(const SpMat& A, const Vec& B, const std::vector<long>& iface_nodes,
                     double omega_max, const std::vector<long>& collar_nodes);

struct TruncatedBasis {
  Mat S;
  Vec kept;     // eigenvalues above the threshold, descending
  double tail;  // sum of the discarded eigenvalues
};

// Eigenvectors of the SPSD Gramian above epsilon (optionally capped at
// max_cols columns), deterministic sign: largest-magnitude entry positive.
TruncatedBasis truncate_basis(const Mat& G, double epsilon, int max_cols = 0);

// Orthonormal basis of the block rational Krylov space
// span{PS, (A+sB)^{-1} PS, ..., (A+sB)^{-m+1} PS}; the zero-power block is
// kept verbatim so first-layer masses stay interface-block-diagonal.
Mat rational_krylov(const SubdomainSplit& split, const Mat& PS, double s, int m);

struct ProjectedPencil {
  Mat Am, Bm, Sm;
};
ProjectedPencil project_pencil(const SubdomainSplit& split, const Mat& V, const Mat& PS);

struct LanczosForm {
  Mat T;      // block tridiagonal
  Mat beta1;  // leading block of R
  Mat Qb;     // B-orthonormal Lanczos basis (diagnostics)
};

// Block Lanczos in the Bm inner product reducing (Am, Sm) to block
// tridiagonal form with R^T (T + w2 I)^{-1} R = Sm^T (Am + w2 Bm)^{-1} Sm.
LanczosForm block_lanczos(const Mat& Am, const Mat& Bm, const Mat& Sm, int m, int ktilde);

struct Ladders {
  std::vector<Mat> hat;  // Lhat^k
  std::vector<Mat> main; // L^k
};

// S-fraction coefficient ladders from the block-tridiagonal form via the
// recursive block-diagonal congruence; throws if any ladder entry fails SPD.
Ladders sfraction_coeffs(const Mat& T, const Mat& beta1, int m, int ktilde);

// Continued-fraction evaluation: solves the three-term layered system with
// U^{m+1} = 0 and returns U^1.
CMat evaluate_sfraction(const std::vector<Mat>& ladder_hat, const std::vector<Mat>& ladder,
                        Cpx w2);
Mat evaluate_sfraction_real(const std::vector<Mat>& ladder_hat, const std::vector<Mat>& ladder,
                            double w2);
inline CMat evaluate_sfraction(const SubdomainROM& rom, Cpx w2) {
  return evaluate_sfraction(rom.ladder_hat, rom.ladder, w2);
}

// Partial-fraction evaluation of the projected transfer function from the
// eigendecomposition of (Am, Bm); independent route for equivalence checks.
CMat partial_fraction_transfer(const Mat& Am, const Mat& Bm, const Mat& Sm, Cpx w2);

// Block-resolvent evaluation R^T (T + w2 I)^{-1} R.
CMat resolvent_transfer(const Mat& T, const Mat& beta1, Cpx w2);

// Projection of skeleton-supported data onto an interface basis; rejects
// vectors with support off the skeleton.
Vec project_io(const Mat& S_ij, const Vec& values_on_iface);

struct RomOptions {
  int m = 4;
  double omega_max = 2.0 * 3.14159265358979323846;
  double epsilon_rel = 1e-6;  // Gramian threshold relative to its top eigenvalue
  int max_basis_per_interface = 0;  // 0 = no cap
  double shift = 0.0;               // 0 = default -(omega_max/4)^2
  bool full_collar = false;         // use the whole grid as Gramian surrogate
};

// Shared interface bases for all interfaces of a partition.
BoundaryBasis build_boundary_basis(const SparsePencil& pencil, const Partition& partition,
                                   const RomOptions& opt);

// Off-line per-cell ROM build (basis projection, Krylov, Lanczos, ladders,
// projected I/O).  g/q are global vectors supported on the skeleton.
SubdomainROM build_rom(int cell, const Partition& partition,
                       const std::vector<SubdomainSplit>& splits, const BoundaryBasis& basis,
                       const Vec& g, const Vec& q, const RomOptions& opt);

// Parallel map over cells; bit-identical to the serial build.
std::vector<SubdomainROM> build_all_roms(const Partition& partition,
                                         const std::vector<SubdomainSplit>& splits,
                                         const BoundaryBasis& basis, const Vec& g, const Vec& q,
                                         const RomOptions& opt, int threads = 1);

}  // namespace mswave

#endif  // MSWAVE_ROMGEN_HPP
