#include "mswave/romgen.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

namespace mswave {

namespace {

constexpr long kDenseOracleLimit = 5000;

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Thin QR with the R diagonal forced nonnegative; throws on rank deficiency.
void thin_qr(const Mat& block, Mat& Q, Mat& R, const char* who) {
  Eigen::HouseholderQR<Mat> qr(block);
  const long k = block.cols();
  Q = qr.householderQ() * Mat::Identity(block.rows(), k);
  R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (long i = 0; i < k; ++i) {
    if (R(i, i) < 0.0) {
      Q.col(i) *= -1.0;
      R.row(i) *= -1.0;
    }
  }
  const double scale = R.cwiseAbs().maxCoeff();
  for (long i = 0; i < k; ++i) {
    if (!(R(i, i) > scale * 1e-13))
      throw NumericalError(std::string(who) +
                           ": block rank deficient (deflation needed), pivot " +
                           std::to_string(i));
  }
}

void require_spd(const Mat& m, const char* who, int level) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError(std::string(who) + ": ladder entry " + std::to_string(level) +
                         " is not SPD (min eig " + std::to_string(es.eigenvalues().minCoeff()) +
                         "); upstream Krylov/Lanczos assumptions failed");
}

}  // namespace

std::vector<long> local_indices(const std::vector<long>& nodes, const std::vector<long>& subset) {
  std::vector<long> out;
  out.reserve(subset.size());
  for (long g : subset) {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), g);
    if (it == nodes.end() || *it != g)
      throw ConfigError("subset node " + std::to_string(g) + " not in the cell");
    out.push_back(it - nodes.begin());
  }
  return out;
}

CMat exact_transfer(const SubdomainSplit& split, const std::vector<long>& boundary_local,
                    Cpx w2) {
  const long n = split.A.rows();
  if (n > kDenseOracleLimit)
    throw ConfigError("exact_transfer is an oracle, gated to N <= 5000");

  CSpMat M = split.A.cast<Cpx>();
  for (long k = 0; k < n; ++k) M.coeffRef(k, k) += w2 * split.B[k];
  M.makeCompressed();

  Eigen::SparseLU<CSpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw NumericalError("exact_transfer: A + w2 B is singular at this frequency");

  const long K = static_cast<long>(boundary_local.size());
  CMat rhs = CMat::Zero(n, K);
  for (long j = 0; j < K; ++j) rhs(boundary_local[j], j) = 1.0;
  CMat sol = lu.solve(rhs);
  if (!sol.allFinite())
    throw NumericalError("exact_transfer: solve produced non-finite values");

  CMat F(K, K);
  for (long i = 0; i < K; ++i) F.row(i) = sol.row(boundary_local[i]);
  return F;
}

Mat boundary_gramian(const SpMat& A, const Vec& B, const std::vector<long>& iface_nodes,
                     double omega_max, const std::vector<long>& collar_nodes) {
  const long nc = static_cast<long>(collar_nodes.size());
  if (nc > kDenseOracleLimit)
    throw ConfigError("boundary_gramian surrogate too large for the dense eigensolve");

  std::vector<long> pos = local_indices(collar_nodes, iface_nodes);

  // Dense restriction of (-A, B) to the collar with B-symmetric scaling.
  Mat C = Mat::Zero(nc, nc);
  for (long j = 0; j < nc; ++j) {
    const long gj = collar_nodes[j];
    for (SpMat::InnerIterator it(A, gj); it; ++it) {
      const auto lt = std::lower_bound(collar_nodes.begin(), collar_nodes.end(), it.row());
      if (lt == collar_nodes.end() || *lt != it.row()) continue;
      C(lt - collar_nodes.begin(), j) = -it.value();
    }
  }
  Vec dinv(nc);
  for (long j = 0; j < nc; ++j) dinv[j] = 1.0 / std::sqrt(B[collar_nodes[j]]);
  C = dinv.asDiagonal() * C * dinv.asDiagonal();
  C = symmetrized(C);

  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  if (es.info() != Eigen::Success) throw NumericalError("boundary_gramian: eigensolve failed");

  const long K = static_cast<long>(iface_nodes.size());
  Mat G = Mat::Zero(K, K);
  const double cutoff = omega_max * omega_max;
  for (long l = 0; l < nc; ++l) {
    if (es.eigenvalues()[l] > cutoff) break;  // ascending order
    Vec v(K);
    for (long i = 0; i < K; ++i) v[i] = dinv[pos[i]] * es.eigenvectors()(pos[i], l);
    G += v * v.transpose();
  }
  return G;
}

TruncatedBasis truncate_basis(const Mat& G, double epsilon, int max_cols) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(G));
  if (es.info() != Eigen::Success) throw NumericalError("truncate_basis: eigensolve failed");
  const long K = G.rows();
  const double lam_max = K > 0 ? std::max(0.0, es.eigenvalues().maxCoeff()) : 0.0;
  const double threshold = epsilon * lam_max;

  TruncatedBasis tb;
  tb.tail = 0.0;
  std::vector<long> keep;
  for (long l = K - 1; l >= 0; --l) {  // descending
    const double lam = es.eigenvalues()[l];
    if (lam > threshold && (max_cols == 0 || static_cast<int>(keep.size()) < max_cols))
      keep.push_back(l);
    else
      tb.tail += std::max(0.0, lam);
  }
  tb.S = Mat::Zero(K, keep.size());
  tb.kept = Vec::Zero(keep.size());
  for (size_t j = 0; j < keep.size(); ++j) {
    Vec col = es.eigenvectors().col(keep[j]);
    long imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col[imax] < 0.0) col = -col;
    tb.S.col(j) = col;
    tb.kept[j] = es.eigenvalues()[keep[j]];
  }
  return tb;
}

Mat rational_krylov(const SubdomainSplit& split, const Mat& PS, double s, int m) {
  if (s >= 0.0) throw ConfigError("rational Krylov shift must be negative");
  if (m < 1) throw ConfigError("rational Krylov order must be >= 1");
  const long n = split.A.rows();
  const long kt = PS.cols();
  if (m * kt > n)
    throw NumericalError("rational Krylov space larger than the cell (deflation needed)");

  if ((PS.transpose() * PS - Mat::Identity(kt, kt)).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("boundary input block is not orthonormal");

  // -(A + sB) is SPD for s < 0.
  SpMat M = -split.A;
  for (long k = 0; k < n; ++k) M.coeffRef(k, k) -= s * split.B[k];
  M.makeCompressed();
  Eigen::SimplicialLLT<SpMat> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericalError("rational_krylov: shifted operator not SPD (is A nonpositive?)");

  Mat V(n, static_cast<long>(m) * kt);
  V.leftCols(kt) = PS;  // zero-power block kept verbatim
  for (int k = 1; k < m; ++k) {
    Mat Z = llt.solve(V.middleCols((k - 1) * kt, kt));
    for (int pass = 0; pass < 2; ++pass) {
      const auto Vp = V.leftCols(static_cast<long>(k) * kt);
      Z -= Vp * (Vp.transpose() * Z);
    }
    Mat Q, R;
    thin_qr(Z, Q, R, "rational_krylov");
    V.middleCols(static_cast<long>(k) * kt, kt) = Q;
  }
  return V;
}

ProjectedPencil project_pencil(const SubdomainSplit& split, const Mat& V, const Mat& PS) {
  ProjectedPencil p;
  p.Am = symmetrized(V.transpose() * (split.A * V));
  p.Bm = symmetrized(V.transpose() * (split.B.asDiagonal() * V));
  p.Sm = V.transpose() * PS;
  return p;
}

LanczosForm block_lanczos(const Mat& Am, const Mat& Bm, const Mat& Sm, int m, int ktilde) {
  const long n = Am.rows();
  if (n != static_cast<long>(m) * ktilde)
    throw ConfigError("block_lanczos: projected pencil size does not match m * ktilde");

  Eigen::LLT<Mat> llt(Bm);
  if (llt.info() != Eigen::Success)
    throw NumericalError("block_lanczos: Bm not SPD");
  const auto L = llt.matrixL();

  // Atil = L^-1 Am L^-T in the Euclidean metric equals Lanczos on (Am, Sm)
  // in the Bm inner product.
  Mat half = L.solve(Am);
  Mat half_t = half.transpose();
  Mat Atil = symmetrized(L.solve(half_t));
  Mat Stil = L.solve(Sm);

  Mat Q = Mat::Zero(n, n);
  std::vector<Mat> alphas(m), betas(m);  // betas[k] couples block k-1 -> k
  Mat Q1, beta1;
  thin_qr(Stil, Q1, beta1, "block_lanczos");
  Q.leftCols(ktilde) = Q1;
  betas[0] = beta1;

  for (int k = 0; k < m; ++k) {
    const auto Qk = Q.middleCols(static_cast<long>(k) * ktilde, ktilde);
    Mat Z = Atil * Qk;
    if (k > 0) Z -= Q.middleCols(static_cast<long>(k - 1) * ktilde, ktilde) * betas[k].transpose();
    alphas[k] = symmetrized(Qk.transpose() * Z);
    Z -= Qk * alphas[k];
    for (int pass = 0; pass < 2; ++pass) {
      const auto Vp = Q.leftCols(static_cast<long>(k + 1) * ktilde);
      Z -= Vp * (Vp.transpose() * Z);
    }
    if (k + 1 < m) {
      Mat Qn, R;
      thin_qr(Z, Qn, R, "block_lanczos");
      Q.middleCols(static_cast<long>(k + 1) * ktilde, ktilde) = Qn;
      betas[k + 1] = R;
    }
  }

  LanczosForm out;
  out.T = Mat::Zero(n, n);
  for (int k = 0; k < m; ++k) {
    out.T.block(static_cast<long>(k) * ktilde, static_cast<long>(k) * ktilde, ktilde, ktilde) =
        alphas[k];
    if (k + 1 < m) {
      out.T.block(static_cast<long>(k + 1) * ktilde, static_cast<long>(k) * ktilde, ktilde,
                  ktilde) = betas[k + 1];
      out.T.block(static_cast<long>(k) * ktilde, static_cast<long>(k + 1) * ktilde, ktilde,
                  ktilde) = betas[k + 1].transpose();
    }
  }
  out.beta1 = beta1;
  out.Qb = L.transpose().solve(Q);
  return out;
}

Ladders sfraction_coeffs(const Mat& T, const Mat& beta1, int m, int ktilde) {
  Ladders lad;
  lad.hat.resize(m);
  lad.main.resize(m);

  auto alpha_block = [&](int k) {
    return T.block(static_cast<long>(k) * ktilde, static_cast<long>(k) * ktilde, ktilde, ktilde);
  };
  auto beta_block = [&](int k) {  // couples block k-1 -> k, k >= 1
    return T.block(static_cast<long>(k) * ktilde, static_cast<long>(k - 1) * ktilde, ktilde,
                   ktilde);
  };

  Mat G = beta1.transpose();
  Mat Lprev = Mat::Zero(ktilde, ktilde);
  for (int k = 0; k < m; ++k) {
    if (k > 0) {
      // G_{k+1} = L_k^{-1} G_k^{-T} beta_{k+1}^T, the congruence-preserving
      // continuation of Lhat^k = G_k G_k^T.
      const Mat Ginv = G.partialPivLu().inverse();
      G = Lprev.partialPivLu().solve(Ginv.transpose() * beta_block(k).transpose());
    }
    lad.hat[k] = symmetrized(G * G.transpose());
    require_spd(lad.hat[k], "sfraction_coeffs (hat)", k + 1);

    const Mat Ginv = G.partialPivLu().inverse();
    Mat Lk = -(Ginv.transpose() * alpha_block(k) * Ginv) - Lprev;
    Lk = symmetrized(Lk);
    require_spd(Lk, "sfraction_coeffs", k + 1);
    lad.main[k] = Lk;
    Lprev = Lk;
  }
  return lad;
}

namespace {

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sfraction_solve(
    const std::vector<Mat>& ladder_hat, const std::vector<Mat>& ladder, Scalar w2) {
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int m = static_cast<int>(ladder.size());
  const long kt = ladder[0].rows();
  const long n = static_cast<long>(m) * kt;

  MatS M = MatS::Zero(n, n);
  for (int k = 0; k < m; ++k) {
    const Mat hat_inv = ladder_hat[k].llt().solve(Mat::Identity(kt, kt));
    MatS diag = w2 * hat_inv.cast<Scalar>() - ladder[k].cast<Scalar>();
    if (k > 0) diag -= ladder[k - 1].cast<Scalar>();
    M.block(k * kt, k * kt, kt, kt) = diag;
    if (k + 1 < m) {
      M.block(k * kt, (k + 1) * kt, kt, kt) = ladder[k].cast<Scalar>();
      M.block((k + 1) * kt, k * kt, kt, kt) = ladder[k].cast<Scalar>();
    }
  }
  MatS rhs = MatS::Zero(n, kt);
  rhs.topRows(kt).setIdentity();
  MatS sol = M.partialPivLu().solve(rhs);
  if (!sol.allFinite())
    throw NumericalError("evaluate_sfraction: singular three-term system (resonance?)");
  return sol.topRows(kt);
}

}  // namespace

CMat evaluate_sfraction(const std::vector<Mat>& ladder_hat, const std::vector<Mat>& ladder,
                        Cpx w2) {
  return sfraction_solve<Cpx>(ladder_hat, ladder, w2);
}

Mat evaluate_sfraction_real(const std::vector<Mat>& ladder_hat, const std::vector<Mat>& ladder,
                            double w2) {
  return sfraction_solve<double>(ladder_hat, ladder, w2);
}

CMat partial_fraction_transfer(const Mat& Am, const Mat& Bm, const Mat& Sm, Cpx w2) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(Am, Bm);
  if (ges.info() != Eigen::Success)
    throw NumericalError("partial_fraction_transfer: eigensolve failed");
  const Mat VS = ges.eigenvectors().transpose() * Sm;  // rows: v_l^T
  const long kt = Sm.cols();
  CMat F = CMat::Zero(kt, kt);
  for (long l = 0; l < Am.rows(); ++l) {
    const Vec v = VS.row(l).transpose();
    F += (v * v.transpose()).cast<Cpx>() / (ges.eigenvalues()[l] + w2);
  }
  return F;
}

CMat resolvent_transfer(const Mat& T, const Mat& beta1, Cpx w2) {
  const long n = T.rows();
  const long kt = beta1.rows();
  CMat M = T.cast<Cpx>();
  M.diagonal().array() += w2;
  CMat rhs = CMat::Zero(n, kt);
  rhs.topRows(kt) = beta1.cast<Cpx>();
  CMat sol = M.partialPivLu().solve(rhs);
  if (!sol.allFinite()) throw NumericalError("resolvent_transfer: singular shift");
  return beta1.transpose().cast<Cpx>() * sol.topRows(kt);
}

Vec project_io(const Mat& S_ij, const Vec& values_on_iface) {
  if (S_ij.rows() != values_on_iface.size())
    throw ConfigError("project_io: interface size mismatch");
  return S_ij.transpose() * values_on_iface;
}

BoundaryBasis build_boundary_basis(const SparsePencil& pencil, const Partition& partition,
                                   const RomOptions& opt) {
  if (opt.omega_max <= 0.0) throw ConfigError("omega_max must be positive");
  BoundaryBasis basis;
  basis.omega_max = opt.omega_max;
  basis.epsilon = opt.epsilon_rel;
  basis.S.resize(partition.interfaces.size());
  basis.kept_eigs.resize(partition.interfaces.size());
  basis.tail.resize(partition.interfaces.size());

  for (size_t f = 0; f < partition.interfaces.size(); ++f) {
    const Interface& iface = partition.interfaces[f];
    std::vector<long> collar;
    if (opt.full_collar) {
      collar.resize(pencil.n());
      std::iota(collar.begin(), collar.end(), 0L);
    } else {
      // One coarse cell of context on each side of the interface.
      collar = partition.cells[iface.ci];
      const auto& other = partition.cells[iface.cj];
      collar.insert(collar.end(), other.begin(), other.end());
      std::sort(collar.begin(), collar.end());
      collar.erase(std::unique(collar.begin(), collar.end()), collar.end());
    }
    const Mat G = boundary_gramian(pencil.A, pencil.B, iface.nodes, opt.omega_max, collar);
    TruncatedBasis tb = truncate_basis(G, opt.epsilon_rel, opt.max_basis_per_interface);
    basis.S[f] = std::move(tb.S);
    basis.kept_eigs[f] = std::move(tb.kept);
    basis.tail[f] = tb.tail;
  }
  return basis;
}

SubdomainROM build_rom(int cell, const Partition& partition,
                       const std::vector<SubdomainSplit>& splits, const BoundaryBasis& basis,
                       const Vec& g, const Vec& q, const RomOptions& opt) {
  SubdomainROM rom;
  rom.cell = cell;
  rom.m = opt.m;
  rom.iface_ids = partition.cell_interfaces(cell);
  if (rom.iface_ids.empty())
    throw ConfigError("cell " + std::to_string(cell) + " has no interfaces");

  rom.iface_offsets = {0};
  for (int f : rom.iface_ids)
    rom.iface_offsets.push_back(rom.iface_offsets.back() +
                                static_cast<int>(basis.S[f].cols()));
  rom.ktilde = rom.iface_offsets.back();
  if (rom.ktilde == 0)
    throw ConfigError("cell " + std::to_string(cell) +
                      " has an empty reduced boundary (raise omega_max or epsilon)");

  const auto& nodes = partition.cells[cell];
  const SubdomainSplit& split = splits[cell];

  Mat PS = Mat::Zero(split.A.rows(), rom.ktilde);
  for (size_t li = 0; li < rom.iface_ids.size(); ++li) {
    const int f = rom.iface_ids[li];
    const auto rows = local_indices(nodes, partition.interfaces[f].nodes);
    const Mat& S = basis.S[f];
    for (long r = 0; r < S.rows(); ++r)
      PS.row(rows[r]).segment(rom.iface_offsets[li], S.cols()) = S.row(r);
  }

  rom.shift = opt.shift != 0.0 ? opt.shift : -std::pow(opt.omega_max / 4.0, 2);
  if (rom.shift >= 0.0) throw ConfigError("shift must be negative");

  rom.V = rational_krylov(split, PS, rom.shift, rom.m);
  ProjectedPencil pp = project_pencil(split, rom.V, PS);
  rom.Am = std::move(pp.Am);
  rom.Bm = std::move(pp.Bm);
  rom.Sm = std::move(pp.Sm);

  LanczosForm lf = block_lanczos(rom.Am, rom.Bm, rom.Sm, rom.m, rom.ktilde);
  rom.T = std::move(lf.T);
  rom.beta1 = std::move(lf.beta1);

  Ladders lad = sfraction_coeffs(rom.T, rom.beta1, rom.m, rom.ktilde);
  rom.ladder_hat = std::move(lad.hat);
  rom.ladder = std::move(lad.main);

  for (int f : rom.iface_ids) {
    const auto& in = partition.interfaces[f].nodes;
    Vec gr(in.size()), qr(in.size());
    for (size_t r = 0; r < in.size(); ++r) {
      gr[r] = g[in[r]];
      qr[r] = q[in[r]];
    }
    rom.g_proj.push_back(project_io(basis.S[f], gr));
    rom.q_proj.push_back(project_io(basis.S[f], qr));
  }
  return rom;
}

std::vector<SubdomainROM> build_all_roms(const Partition& partition,
                                         const std::vector<SubdomainSplit>& splits,
                                         const BoundaryBasis& basis, const Vec& g, const Vec& q,
                                         const RomOptions& opt, int threads) {
  for (const Vec* v : {&g, &q}) {
    std::vector<long> bad;
    std::vector<char> on_skeleton(partition.n_nodes, 0);
    for (long k : partition.skeleton) on_skeleton[k] = 1;
    for (long k = 0; k < v->size(); ++k)
      if ((*v)[k] != 0.0 && !on_skeleton[k]) bad.push_back(k);
    if (!bad.empty()) {
      std::string msg = v == &g ? "source" : "receiver";
      msg += " has support off the partition skeleton at nodes:";
      for (long k : bad) msg += " " + std::to_string(k);
      throw ConfigError(msg);
    }
  }

  const int nc = partition.num_cells();
  std::vector<SubdomainROM> roms(nc);
  if (threads <= 1) {
    for (int c = 0; c < nc; ++c) roms[c] = build_rom(c, partition, splits, basis, g, q, opt);
    return roms;
  }

  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nc);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= nc) return;
        try {
          roms[c] = build_rom(c, partition, splits, basis, g, q, opt);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return roms;
}

}  // namespace mswave
