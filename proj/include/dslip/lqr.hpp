#pragma once

// Step-to-step LQR about a periodic gait: finite-difference linearization of
// the side-normalized stride map, discrete algebraic Riccati equation, gain,
// and the midstance control law.

#include <dslip/gait_opt.hpp>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <complex>
#include <vector>

namespace dslip {

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat3 = Eigen::Matrix<double, 3, 3>;
using Mat53 = Eigen::Matrix<double, 5, 3>;
using Mat35 = Eigen::Matrix<double, 3, 5>;

struct StrideLinearization {
  Mat5 Jx = Mat5::Zero();
  Mat53 Ju = Mat53::Zero();
  Vec5 x0 = Vec5::Zero();
  Vec3 u0 = Vec3::Zero();
  Vec5 f0 = Vec5::Zero();  // side-normalized image of (x0, u0)
};

struct LqrSolution {
  Mat5 Q = Mat5::Identity();
  Mat3 R = Mat3::Identity();
  Mat5 P = Mat5::Zero();
  Mat35 K = Mat35::Zero();
  std::vector<std::complex<double>> closed_loop_eigenvalues;
  double spectral_radius = 0.0;
  double dare_residual = 0.0;
};

enum class DifferenceScheme { central, forward };

struct LinearizationOptions {
  double relative_step = 1e-6;  // per variable, times max(|v|, 1)
  DifferenceScheme scheme = DifferenceScheme::central;
  SimOptions sim = tight_sim_options();

  static SimOptions tight_sim_options() {
    SimOptions o;
    o.tolerances.relative = 1e-11;
    o.tolerances.absolute = 1e-11;
    o.tolerances.event_time = 1e-12;
    return o;
  }
};

/// Side-normalized stride map with leg A in support: A * f(x, u).
inline std::optional<Vec5> normalized_stride(const Vec5& x, const Vec3& u,
                                             const TerrainParams& terrain,
                                             const ModelParams& params, const SimOptions& options) {
  StrideResult r = stride_map({x, Leg::A}, ControlInput::from_vector(u), terrain, params, options);
  if (!r.record.completed()) return std::nullopt;
  return normalized(r.next);
}

/// Jx = A df/dx, Ju = A df/du at (x0*, u0*) by finite differences.
inline StrideLinearization numeric_jacobians(const PeriodicGait& gait,
                                             const TerrainParams& terrain,
                                             const ModelParams& params,
                                             const LinearizationOptions& opt = {}) {
  StrideLinearization lin;
  lin.x0 = gait.x0.x;
  lin.u0 = gait.u0.vector();
  Eigen::Matrix<double, 8, 1> z0;
  z0 << lin.x0, lin.u0;

  auto eval = [&](const Eigen::Matrix<double, 8, 1>& z, const std::string& probe) {
    auto f = normalized_stride(z.head<5>(), z.tail<3>(), terrain, params, opt.sim);
    if (!f) throw SynthesisError("stride map failed at linearization probe " + probe);
    return *f;
  };

  lin.f0 = eval(z0, "nominal");
  Eigen::Matrix<double, 5, 8> J;
  for (int j = 0; j < 8; ++j) {
    double h = opt.relative_step * std::max(std::abs(z0[j]), 1.0);
    Eigen::Matrix<double, 8, 1> zp = z0, zm = z0;
    zp[j] += h;
    zm[j] -= h;
    Vec5 fp = eval(zp, fmt::format("+{}", j));
    if (opt.scheme == DifferenceScheme::central) {
      Vec5 fm = eval(zm, fmt::format("-{}", j));
      J.col(j) = (fp - fm) / (2.0 * h);
    } else {
      J.col(j) = (fp - lin.f0) / h;
    }
  }
  lin.Jx = J.leftCols<5>();
  lin.Ju = J.rightCols<3>();
  if (!lin.Jx.allFinite() || !lin.Ju.allFinite())
    throw SynthesisError("linearization produced non-finite entries");
  return lin;
}

/// Rank of [Ju, Jx Ju, ..., Jx^4 Ju].
inline int controllability_rank(const Mat5& Jx, const Mat53& Ju) {
  Eigen::Matrix<double, 5, 15> C;
  Mat53 block = Ju;
  for (int i = 0; i < 5; ++i) {
    C.middleCols<3>(3 * i) = block;
    block = Jx * block;
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 5, 15>> svd(C);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > 1e-12 * s[0]) ++rank;
  return rank;
}

template <int N, int M>
double dare_residual(const Eigen::Matrix<double, N, N>& A, const Eigen::Matrix<double, N, M>& B,
                     const Eigen::Matrix<double, N, N>& Q, const Eigen::Matrix<double, M, M>& R,
                     const Eigen::Matrix<double, N, N>& P) {
  Eigen::Matrix<double, M, M> S = B.transpose() * P * B + R;
  Eigen::Matrix<double, N, N> res =
      P - A.transpose() * P * A +
      A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A) - Q;
  return res.cwiseAbs().maxCoeff();
}

/// Solves P = A'PA - A'PB (B'PB + R)^-1 B'PA + Q by structure-preserving
/// doubling from P0 = Q, polished with plain Riccati sweeps.
template <int N, int M>
Eigen::Matrix<double, N, N> solve_dare(const Eigen::Matrix<double, N, N>& A,
                                       const Eigen::Matrix<double, N, M>& B,
                                       const Eigen::Matrix<double, N, N>& Q,
                                       const Eigen::Matrix<double, M, M>& R,
                                       double tolerance = 1e-12, int max_iterations = 10000) {
  using MatN = Eigen::Matrix<double, N, N>;
  auto spd = [](const auto& X) {
    if (!X.isApprox(X.transpose(), 1e-12)) return false;
    Eigen::SelfAdjointEigenSolver<std::decay_t<decltype(X)>> es(X);
    return es.eigenvalues().minCoeff() > 0.0;
  };
  if (!spd(Q)) throw SynthesisError("solve_dare: Q must be symmetric positive definite");
  if (!spd(R)) throw SynthesisError("solve_dare: R must be symmetric positive definite");

  const MatN I = MatN::Identity();
  MatN Ak = A;
  MatN Gk = B * R.ldlt().solve(B.transpose());
  MatN Hk = Q;
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    MatN W = I + Gk * Hk;
    Eigen::PartialPivLU<MatN> lu(W);
    if (!(std::abs(lu.determinant()) > 0.0)) throw SynthesisError("solve_dare: singular iterate");
    MatN WA = lu.solve(Ak);
    MatN WG = lu.solve(Gk);
    MatN Hn = Hk + Ak.transpose() * Hk * WA;
    Gk = Gk + Ak * WG * Ak.transpose();
    Ak = Ak * WA;
    double change = (Hn - Hk).cwiseAbs().maxCoeff();
    Hk = 0.5 * (Hn + Hn.transpose());
    if (!Hk.allFinite()) throw SynthesisError("solve_dare: iteration diverged");
    if (change < tolerance * std::max(1.0, Hk.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw SynthesisError("solve_dare: no convergence");

  MatN P = Hk;
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix<double, M, M> S = B.transpose() * P * B + R;
    MatN Pn = A.transpose() * P * A -
              A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A) + Q;
    Pn = 0.5 * (Pn + Pn.transpose());
    double change = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (change < tolerance) break;
  }
  return P;
}

/// K = -(B'PB + R)^-1 B'PA.
template <int N, int M>
Eigen::Matrix<double, M, N> lqr_gain(const Eigen::Matrix<double, N, N>& P,
                                     const Eigen::Matrix<double, N, N>& A,
                                     const Eigen::Matrix<double, N, M>& B,
                                     const Eigen::Matrix<double, M, M>& R) {
  Eigen::Matrix<double, M, M> S = B.transpose() * P * B + R;
  Eigen::FullPivLU<Eigen::Matrix<double, M, M>> lu(S);
  if (!lu.isInvertible()) throw SynthesisError("lqr_gain: B'PB + R is singular");
  return -lu.solve(B.transpose() * P * A);
}

inline LqrSolution synthesize_lqr(const StrideLinearization& lin, const Mat5& Q = Mat5::Identity(),
                                  const Mat3& R = Mat3::Identity()) {
  if (controllability_rank(lin.Jx, lin.Ju) < 5)
    throw SynthesisError("stride linearization is not controllable");
  LqrSolution sol;
  sol.Q = Q;
  sol.R = R;
  sol.P = solve_dare<5, 3>(lin.Jx, lin.Ju, Q, R);
  sol.K = lqr_gain<5, 3>(sol.P, lin.Jx, lin.Ju, R);
  sol.dare_residual = dare_residual<5, 3>(lin.Jx, lin.Ju, Q, R, sol.P);
  Mat5 closed = lin.Jx + lin.Ju * sol.K;
  Eigen::EigenSolver<Mat5> es(closed);
  sol.spectral_radius = 0.0;
  for (int i = 0; i < 5; ++i) {
    sol.closed_loop_eigenvalues.push_back(es.eigenvalues()[i]);
    sol.spectral_radius = std::max(sol.spectral_radius, std::abs(es.eigenvalues()[i]));
  }
  return sol;
}

/// A^n and B^n as sign vectors.
inline Vec5 state_signs(int n) {
  Vec5 s = Vec5::Ones();
  if (n % 2 != 0) s[1] = s[4] = -1.0;
  return s;
}
inline Vec3 control_signs(int n) {
  Vec3 s = Vec3::Ones();
  if (n % 2 != 0) s[0] = -1.0;
  return s;
}

/// u_n = u_n* + B^n K A^n (x_n - x_n*), with x_n* = A^n x0*, u_n* = B^n u0*.
/// Physical convention: theta carries the sign of B^n.
inline Vec3 control_law(int n, const Vec5& x_n, const Vec5& x0_star, const Vec3& u0_star,
                        const Mat35& K) {
  Vec5 a = state_signs(n);
  Vec3 b = control_signs(n);
  Vec5 x_star = a.cwiseProduct(x0_star);
  Vec3 u_star = b.cwiseProduct(u0_star);
  return u_star + b.cwiseProduct(K * a.cwiseProduct(x_n - x_star));
}

/// Same law in the side-normalized frame: u~ = u0* + K (x~ - x0*).
inline Vec3 control_law_normalized(const Vec5& x_tilde, const Vec5& x0_star, const Vec3& u0_star,
                                   const Mat35& K) {
  return u0_star + K * (x_tilde - x0_star);
}

}  // namespace dslip
