#include "mswave/reference.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace mswave {

namespace {

// Gershgorin bound for lambda_max of B^-1 (-A).
double gershgorin_bound(const SparsePencil& p) {
  double bound = 0.0;
  for (int col = 0; col < p.A.outerSize(); ++col) {
    double row_abs = 0.0;
    for (SpMat::InnerIterator it(p.A, col); it; ++it) row_abs += std::abs(it.value());
    bound = std::max(bound, row_abs / p.B[col]);
  }
  return bound;
}

}  // namespace

double fine_cfl(const SparsePencil& pencil) {
  const long n = pencil.n();
  Vec x = Vec::Zero(n);
  // deterministic pseudo-random start with components in every mode
  for (long i = 0; i < n; ++i) x[i] = std::sin(0.7 * static_cast<double>(i) + 0.3) + 1e-3;
  x.normalize();

  double lambda = 0.0;
  const int max_iter = 5000;
  for (int it = 0; it < max_iter; ++it) {
    Vec y = -(pencil.A * x);
    y.array() /= pencil.B.array();
    const double next = x.dot(y);
    const double delta = std::abs(next - lambda);
    lambda = next;
    const double norm = y.norm();
    if (norm == 0.0) break;
    x = y / norm;
    if (it > 32 && delta <= 1e-7 * std::abs(lambda)) break;
  }
  if (!(lambda > 0.0)) lambda = gershgorin_bound(pencil);
  if (!(lambda > 0.0)) throw NumericalError("fine_cfl: could not bound the spectrum");
  return 2.0 / std::sqrt(lambda);
}

Trace fine_leapfrog(const SparsePencil& pencil, const Vec& g, const Vec& q,
                    const Wavelet& wavelet, double t_final, double dt) {
  if (dt <= 0.0) throw ConfigError("fine_leapfrog: dt must be positive");
  const long n = pencil.n();
  if (g.size() != n || q.size() != n) throw ConfigError("fine_leapfrog: vector size mismatch");

  const long steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
  Trace trace;
  trace.dt = dt;
  trace.times.reserve(steps + 1);
  trace.values.reserve(steps + 1);

  Vec u = Vec::Zero(n), u_prev = Vec::Zero(n), u_next(n);
  const double guard = 1e12;

  trace.times.push_back(0.0);
  trace.values.push_back(0.0);
  for (long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * dt;
    Vec rhs = pencil.A * u + wavelet(t) * g;
    rhs.array() /= pencil.B.array();
    u_next = 2.0 * u - u_prev + dt * dt * rhs;
    u_prev.swap(u);
    u.swap(u_next);
    const double amp = u.cwiseAbs().maxCoeff();
    if (!std::isfinite(amp) || amp > guard)
      throw NumericalError("fine_leapfrog: instability at step " + std::to_string(s + 1));
    trace.times.push_back(static_cast<double>(s + 1) * dt);
    trace.values.push_back(q.dot(u));
  }
  return trace;
}

CMat dense_skeleton_transfer(const SparsePencil& pencil, const std::vector<long>& skeleton,
                             Cpx w2) {
  const long n = pencil.n();
  if (n > 5000) throw ConfigError("dense_skeleton_transfer is an oracle, gated to N <= 5000");

  CSpMat M = pencil.A.cast<Cpx>();
  for (long k = 0; k < n; ++k) M.coeffRef(k, k) += w2 * pencil.B[k];
  M.makeCompressed();
  Eigen::SparseLU<CSpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw NumericalError("dense_skeleton_transfer: singular shift");

  const long K = static_cast<long>(skeleton.size());
  CMat rhs = CMat::Zero(n, K);
  for (long j = 0; j < K; ++j) rhs(skeleton[j], j) = 1.0;
  const CMat sol = lu.solve(rhs);
  CMat F(K, K);
  for (long i = 0; i < K; ++i) F.row(i) = sol.row(skeleton[i]);
  return F;
}

}  // namespace mswave
