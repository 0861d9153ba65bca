#ifndef MSWAVE_REFERENCE_HPP
#define MSWAVE_REFERENCE_HPP

#include <vector>

#include "mswave/fine_grid.hpp"
#include "mswave/types.hpp"
#include "mswave/wavelet.hpp"

namespace mswave {

struct Trace {
  std::vector<double> times;
  std::vector<double> values;
  double dt = 0.0;
};

// Largest stable step 2/sqrt(lambda_max) of u_tt = B^-1 A u, lambda_max
// estimated by power iteration (Gershgorin fallback), within 1%.
double fine_cfl(const SparsePencil& pencil);

// Full fine-grid leapfrog: u+ = 2u - u- + dt^2 B^-1 (A u + w(t) g).
// The trace is q^T u sampled at every step including t = 0.
Trace fine_leapfrog(const SparsePencil& pencil, const Vec& g, const Vec& q,
                    const Wavelet& wavelet, double t_final, double dt);

// Global skeleton transfer oracle P^T (A + w2 B)^{-1} P (desk scale only).
CMat dense_skeleton_transfer(const SparsePencil& pencil, const std::vector<long>& skeleton,
                             Cpx w2);

}  // namespace mswave

#endif  // MSWAVE_REFERENCE_HPP
