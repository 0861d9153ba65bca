#ifndef MSWAVE_FINE_GRID_HPP
#define MSWAVE_FINE_GRID_HPP

#include <array>
#include <vector>

#include "mswave/types.hpp"

namespace mswave {

// Medium description on a uniform Cartesian grid.  dims counts nodes per axis
// including the Dirichlet boundary ring; sigma/rho hold one value per node in
// row-major order (first axis slowest).
struct GridMedium {
  std::vector<int> dims;   // 1-3 axes, node counts
  double h = 1.0;          // grid step, km
  Vec sigma;               // stiffness, km^2/s^2
  Vec rho;                 // density (dimensionless; identity default)

  int ndim() const { return static_cast<int>(dims.size()); }
  long node_count() const;
  long node_id(const std::array<int, 3>& c) const;  // row-major over dims
};

GridMedium make_uniform_medium(std::vector<int> dims, double h, double sigma_value,
                               double rho_value = 1.0);

// Fine-grid pencil: A sparse symmetric nonpositive, B diagonal positive.
// Rows cover interior (non-Dirichlet) nodes only.  coords keeps each row's
// full-grid multi-index; hanging nodes appended later carry their parent's.
struct SparsePencil {
  SpMat A;
  Vec B;
  int ndim = 0;
  std::vector<int> dims;                  // full-grid node counts per axis
  std::vector<std::array<int, 3>> coords; // per row, unused axes = 0

  long n() const { return A.rows(); }
  // Row index of an interior full-grid coordinate, -1 if outside/boundary.
  long node_of(const std::array<int, 3>& c) const;
};

SparsePencil assemble_1d(const GridMedium& medium);
SparsePencil assemble_nd(const GridMedium& medium);

struct SourceReceiver {
  Vec g;
  Vec q;
  std::vector<long> g_support;
  std::vector<long> q_support;
};

enum class SourceKind {
  Point,        // discrete delta: unit column of the identity
  UnitImpulse,  // scaled by 1/B_kk so B^{-1} g is a unit impulse
  Taper,        // Gaussian taper over a grid-aligned face through the node
};

// Builds the source vector; for Taper, axis selects the face normal and the
// weights (summing to 1) vary smoothly over the face around `location`.
SourceReceiver make_source(const SparsePencil& pencil, const std::array<int, 3>& location,
                           SourceKind kind = SourceKind::Point, int taper_axis = 0,
                           double taper_halfwidth = 3.0);

void set_receiver(SourceReceiver& sr, const SparsePencil& pencil,
                  const std::array<int, 3>& location);

}  // namespace mswave

#endif  // MSWAVE_FINE_GRID_HPP
