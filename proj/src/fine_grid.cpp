#include "mswave/fine_grid.hpp"

#include <cmath>

namespace mswave {

long GridMedium::node_count() const {
  long n = 1;
  for (int d : dims) n *= d;
  return n;
}

long GridMedium::node_id(const std::array<int, 3>& c) const {
  long id = 0;
  for (int a = 0; a < ndim(); ++a) id = id * dims[a] + c[a];
  return id;
}

GridMedium make_uniform_medium(std::vector<int> dims, double h, double sigma_value,
                               double rho_value) {
  GridMedium m;
  m.dims = std::move(dims);
  m.h = h;
  m.sigma = Vec::Constant(m.node_count(), sigma_value);
  m.rho = Vec::Constant(m.node_count(), rho_value);
  return m;
}

long SparsePencil::node_of(const std::array<int, 3>& c) const {
  long id = 0;
  for (int a = 0; a < ndim; ++a) {
    if (c[a] < 1 || c[a] > dims[a] - 2) return -1;
    id = id * (dims[a] - 2) + (c[a] - 1);
  }
  return id;
}

namespace {

void validate_medium(const GridMedium& medium) {
  if (medium.ndim() < 1 || medium.ndim() > 3)
    throw ConfigError("medium must have 1-3 axes");
  if (medium.h <= 0.0) throw ConfigError("grid step h must be positive");
  for (int d : medium.dims)
    if (d < 3) throw ConfigError("every axis needs at least 3 nodes (no interior otherwise)");
  if (medium.sigma.size() != medium.node_count() || medium.rho.size() != medium.node_count())
    throw ConfigError("sigma/rho length does not match dims");
  if (medium.sigma.minCoeff() < 0.0) throw ConfigError("sigma must be nonnegative");
  if (medium.rho.minCoeff() <= 0.0) throw ConfigError("rho must be strictly positive");
}

}  // namespace

// Conservative second-order stencil with Dirichlet nodes eliminated.  Edge
// stiffness is the arithmetic mean of the two node sigmas; edges into the
// eliminated boundary still contribute to the diagonal, which keeps A
// strictly nonpositive and diagonally dominant.
SparsePencil assemble_nd(const GridMedium& medium) {
  validate_medium(medium);
  const int nd = medium.ndim();
  const double inv_h2 = 1.0 / (medium.h * medium.h);

  SparsePencil p;
  p.ndim = nd;
  p.dims = medium.dims;

  std::array<int, 3> idims = {1, 1, 1};
  long n = 1;
  for (int a = 0; a < nd; ++a) {
    idims[a] = medium.dims[a] - 2;
    n *= idims[a];
  }

  p.coords.resize(n);
  p.B = Vec::Zero(n);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(n) * (2 * nd + 1));

  std::array<int, 3> c = {0, 0, 0};
  for (long row = 0; row < n; ++row) {
    // decode row -> interior coordinate (row-major)
    long r = row;
    for (int a = nd - 1; a >= 0; --a) {
      c[a] = 1 + static_cast<int>(r % idims[a]);
      r /= idims[a];
    }
    p.coords[row] = c;
    const long gid = medium.node_id(c);
    p.B[row] = medium.rho[gid];

    double diag = 0.0;
    for (int a = 0; a < nd; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        std::array<int, 3> nb = c;
        nb[a] += dir;
        const double edge = 0.5 * (medium.sigma[gid] + medium.sigma[medium.node_id(nb)]);
        diag -= edge * inv_h2;
        if (nb[a] >= 1 && nb[a] <= medium.dims[a] - 2) {
          long col = 0;
          for (int b = 0; b < nd; ++b) col = col * idims[b] + (nb[b] - 1);
          trips.emplace_back(static_cast<int>(row), static_cast<int>(col), edge * inv_h2);
        }
      }
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
  }

  p.A.resize(n, n);
  p.A.setFromTriplets(trips.begin(), trips.end());
  p.A.makeCompressed();
  return p;
}

SparsePencil assemble_1d(const GridMedium& medium) {
  if (medium.ndim() != 1) throw ConfigError("assemble_1d expects one axis");
  return assemble_nd(medium);
}

SourceReceiver make_source(const SparsePencil& pencil, const std::array<int, 3>& location,
                           SourceKind kind, int taper_axis, double taper_halfwidth) {
  SourceReceiver sr;
  sr.g = Vec::Zero(pencil.n());
  sr.q = Vec::Zero(pencil.n());

  const long k = pencil.node_of(location);
  if (k < 0) throw ConfigError("source location outside the interior grid");

  switch (kind) {
    case SourceKind::Point:
      sr.g[k] = 1.0;
      sr.g_support = {k};
      break;
    case SourceKind::UnitImpulse:
      sr.g[k] = 1.0 / pencil.B[k];
      sr.g_support = {k};
      break;
    case SourceKind::Taper: {
      if (taper_axis < 0 || taper_axis >= pencil.ndim)
        throw ConfigError("taper axis out of range");
      const double hw = taper_halfwidth;
      const int reach = static_cast<int>(std::ceil(3.0 * hw));
      double total = 0.0;
      for (long row = 0; row < pencil.n(); ++row) {
        if (pencil.coords[row][taper_axis] != location[taper_axis]) continue;
        double d2 = 0.0;
        bool close = true;
        for (int a = 0; a < pencil.ndim; ++a) {
          if (a == taper_axis) continue;
          const int d = pencil.coords[row][a] - location[a];
          if (std::abs(d) > reach) { close = false; break; }
          d2 += static_cast<double>(d) * d;
        }
        if (!close) continue;
        const double w = std::exp(-0.5 * d2 / (hw * hw));
        sr.g[row] = w;
        sr.g_support.push_back(row);
        total += w;
      }
      if (total <= 0.0) throw ConfigError("taper source has empty support");
      for (long row : sr.g_support) sr.g[row] /= total;
      break;
    }
  }
  return sr;
}

void set_receiver(SourceReceiver& sr, const SparsePencil& pencil,
                  const std::array<int, 3>& location) {
  const long k = pencil.node_of(location);
  if (k < 0) throw ConfigError("receiver location outside the interior grid");
  if (sr.q.size() != pencil.n()) sr.q = Vec::Zero(pencil.n());
  sr.q[k] = 1.0;
  sr.q_support = {k};
}

}  // namespace mswave
