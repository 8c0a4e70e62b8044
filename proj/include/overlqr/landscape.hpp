#pragma once

// Critical points of two-layer policies: classification, low-rank structure
// of K*, second-order terms and negative-curvature certificates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "overlqr/netpolicy.hpp"

namespace overlqr {

inline constexpr double kRankTol = 1e-8;

enum class CriticalClass { GlobalMinimum, SpuriousCritical, NotCritical };

inline std::string_view to_string(CriticalClass c) {
  switch (c) {
    case CriticalClass::GlobalMinimum: return "global-minimum";
    case CriticalClass::SpuriousCritical: return "spurious-critical";
    case CriticalClass::NotCritical: return "not-critical";
  }
  return "unknown";
}

struct CriticalReport {
  std::vector<double> grad_norms;
  double core_grad_norm = 0.0;
  CriticalClass classification = CriticalClass::NotCritical;
  Eigen::Index rank_p = 0;
  std::pair<double, double> svd_alignment_residuals{0.0, 0.0};
  std::pair<double, double> lowrank_residuals{0.0, 0.0};  // NaN when no Riccati baseline exists
  double tol = 0.0;
  double cost = 0.0;
};

inline void require_two_layers(const LayeredPolicy& policy) {
  if (policy.depth() != 2) {
    raise(ErrorKind::InvalidArgument, "landscape analysis needs N = 2, got N = " + std::to_string(policy.depth()));
  }
}

/// Orthonormal basis (columns) of the span of `M`'s columns.
inline Matrix range_basis(const Matrix& M, double rel_tol = kRankTol) {
  const Svd s = svd_full(M);
  return s.U.leftCols(numerical_rank(s.sigma, rel_tol));
}

/// Orthonormal basis of ker(M).
inline Matrix kernel_basis(const Matrix& M, double rel_tol = kRankTol) {
  const Svd s = svd_full(M);
  const Eigen::Index r = numerical_rank(s.sigma, rel_tol);
  return s.V.rightCols(M.cols() - r);
}

/// (i) each singular value of Kbar above tol is matched (greedily, without
/// reuse) to a singular value of K*; worst mismatch. (ii) the larger of
/// ||Kbar (K* - Kbar)^T|| and ||Kbar^T (K* - Kbar)||. Both vanish iff Kbar is
/// a truncated SVD of K* sharing its singular subspaces.
inline std::pair<double, double> check_lowrank_structure(const Matrix& Kstar, const Matrix& Kbar, double tol) {
  if (Kstar.rows() != Kbar.rows() || Kstar.cols() != Kbar.cols()) {
    raise(ErrorKind::DimensionMismatch, "K* is " + dims(Kstar) + ", Kbar is " + dims(Kbar));
  }
  const Vector s_star = svd_full(Kstar).sigma;
  const Vector s_bar = svd_full(Kbar).sigma;
  std::vector<bool> used(static_cast<std::size_t>(s_star.size()), false);
  double sv_residual = 0.0;
  for (Eigen::Index i = 0; i < s_bar.size(); ++i) {
    if (!(s_bar(i) > tol)) continue;
    double best = s_bar(i);
    std::optional<std::size_t> pick;
    for (std::size_t j = 0; j < used.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(s_bar(i) - s_star(static_cast<Eigen::Index>(j)));
      if (!pick || d < best) {
        best = d;
        pick = j;
      }
    }
    if (pick) used[*pick] = true;
    sv_residual = std::max(sv_residual, best);
  }
  const Matrix D = Kstar - Kbar;
  const double orth = std::max((Kbar * D.transpose()).norm(), (Kbar.transpose() * D).norm());
  return {sv_residual, orth};
}

/// Uses the equilibrium conditions K2^T G = 0 and G K1^T = 0 directly. When
/// Kstar is not supplied it is computed by Kleinman iteration seeded at the
/// current product (state feedback only).
inline CriticalReport classify_critical(const Plant& plant, const LayeredPolicy& policy, double tol = 1e-6,
                                        const std::optional<Matrix>& Kstar = std::nullopt) {
  require_two_layers(policy);
  if (!(tol > 0.0)) raise(ErrorKind::InvalidArgument, "tol must be positive");
  const PolicyEvaluation ev = evaluate(plant, policy);
  const Matrix& G = ev.lqr.grad;
  const Matrix& K1 = policy.layer(0);
  const Matrix& K2 = policy.layer(1);

  CriticalReport rep;
  rep.tol = tol;
  rep.cost = ev.lqr.cost;
  for (const auto& g : ev.layer_grads) rep.grad_norms.push_back(g.norm());
  rep.core_grad_norm = G.norm();
  rep.rank_p = numerical_rank(svd_full(ev.product).sigma, kRankTol);

  const double scale = 1.0 + rep.core_grad_norm;
  const bool critical = (K2.transpose() * G).norm() <= tol * scale && (G * K1.transpose()).norm() <= tol * scale;
  if (!critical) {
    rep.classification = CriticalClass::NotCritical;
  } else {
    rep.classification = rep.core_grad_norm <= tol ? CriticalClass::GlobalMinimum : CriticalClass::SpuriousCritical;
  }

  const Matrix row_space_K1 = range_basis(K1.transpose());
  const Matrix col_space_K2 = range_basis(K2);
  rep.svd_alignment_residuals = {(G * row_space_K1).norm(), (col_space_K2.transpose() * G).norm()};

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (Kstar) {
    rep.lowrank_residuals = check_lowrank_structure(*Kstar, ev.product, tol);
  } else if (plant.state_feedback()) {
    const Matrix Ks = riccati_optimal(plant, ev.product).K;
    rep.lowrank_residuals = check_lowrank_structure(Ks, ev.product, tol);
  } else {
    rep.lowrank_residuals = {nan, nan};
  }
  return rep;
}

/// Second-order terms of t -> J((K2 + t dK2)(K1 + t dK1)) at t = 0:
/// d11, d22 the pure terms, d12 / d21 the cross term derived from either
/// side. The full second derivative is d11 + d22 + d12 + d21.
struct HessianTerms {
  double d11 = 0.0;
  double d22 = 0.0;
  double d12 = 0.0;
  double d21 = 0.0;
  double d11_reduced = 0.0;  // 4 tr(E^T B^T P' L) + 2 tr(E^T R E L) form of d11

  double second_derivative() const { return d11 + d22 + d12 + d21; }
  /// Quadratic part of the Taylor expansion, half the second derivative.
  double taylor_quadratic() const { return 0.5 * second_derivative(); }
};

inline HessianTerms hessian_terms(const Plant& plant, const LayeredPolicy& policy, const Matrix& dK1,
                                  const Matrix& dK2) {
  require_two_layers(policy);
  check_policy_dims(plant, policy);
  const Matrix& K1 = policy.layer(0);
  const Matrix& K2 = policy.layer(1);
  if (dK1.rows() != K1.rows() || dK1.cols() != K1.cols() || dK2.rows() != K2.rows() || dK2.cols() != K2.cols()) {
    raise(ErrorKind::DimensionMismatch, "direction shapes " + dims(dK1) + ", " + dims(dK2) + " vs layers " +
                                            dims(K1) + ", " + dims(K2));
  }
  const Matrix Kbar = K2 * K1;
  const Matrix A_cl = closed_loop(plant, Kbar);
  const double alpha = require_stabilizing(A_cl);
  const LyapunovSolver solver(A_cl, alpha);
  const Matrix& B = plant.B();
  const Matrix& R = plant.R();
  const Matrix& C = plant.C();
  const Matrix KC = Kbar * C;
  const Matrix P = solver.solve(KC.transpose() * R * KC + plant.Q());
  const Matrix L = solver.solve_dual(plant.Sigma0());
  const Matrix S = B.transpose() * P + R * KC;

  // Perturbations of the effective feedback K C.
  const Matrix E1 = K2 * dK1 * C;
  const Matrix E2 = dK2 * K1 * C;
  const Matrix Ebil = dK2 * dK1 * C;

  const auto dP = [&](const Matrix& E) { return solver.solve(E.transpose() * S + S.transpose() * E); };
  const auto dL = [&](const Matrix& E) {
    const Matrix BEL = B * E * L;
    return solver.solve_dual(BEL + BEL.transpose());
  };
  const Matrix P1 = dP(E1), P2 = dP(E2), L1 = dL(E1), L2 = dL(E2);
  const auto D2 = [&](const Matrix& Ea, const Matrix& Eb, const Matrix& Pb, const Matrix& Lb) {
    return 2.0 * (Ea.transpose() * (B.transpose() * Pb + R * Eb) * L).trace() +
           2.0 * (Ea.transpose() * S * Lb).trace();
  };
  const double bilinear = 2.0 * (Ebil.transpose() * S * L).trace();

  HessianTerms h;
  h.d11 = D2(E1, E1, P1, L1);
  h.d22 = D2(E2, E2, P2, L2);
  h.d12 = D2(E2, E1, P1, L1) + bilinear;
  h.d21 = D2(E1, E2, P2, L2) + bilinear;
  h.d11_reduced = 4.0 * (E1.transpose() * B.transpose() * P1 * L).trace() + 2.0 * (E1.transpose() * R * E1 * L).trace();
  return h;
}

/// d^2/dt^2 J((K2 + t dK2)(K1 + t dK1)) at t = 0.
inline double hessian_quadratic_form(const Plant& plant, const LayeredPolicy& policy, const Matrix& dK1,
                                     const Matrix& dK2) {
  return hessian_terms(plant, policy, dK1, dK2).second_derivative();
}

struct CurvatureDirection {
  Matrix dK1;
  Matrix dK2;
  double quadratic_form_value = 0.0;
  double kernel_overlap = 0.0;  // gamma_1^T gamma_2
  double grad_singular_value = 0.0;
};

/// Escape direction at a spurious critical point: dK1 = gamma_2 psi^T,
/// dK2 = phi gamma_1^T with (phi, psi) the top singular pair of G (sign fixed
/// so phi^T G psi < 0), gamma_1 in ker(K1^T), gamma_2 in ker(K2) and
/// gamma_1^T gamma_2 > 0 maximal. Then K2 dK1 = 0 and dK2 K1 = 0, leaving
/// only the bilinear term, which is negative.
inline CurvatureDirection negative_curvature(const Plant& plant, const LayeredPolicy& policy,
                                             double rel_tol = kRankTol) {
  require_two_layers(policy);
  const PolicyEvaluation ev = evaluate(plant, policy);
  const Matrix& G = ev.lqr.grad;
  const Matrix& K1 = policy.layer(0);
  const Matrix& K2 = policy.layer(1);

  const Svd g = svd_full(G);
  if (g.sigma.size() == 0 || !(g.sigma(0) > 0.0)) {
    raise(ErrorKind::NotSaddle, "core gradient vanishes; the point is a global minimum");
  }
  const Vector phi = g.U.col(0);
  Vector psi = g.V.col(0);
  if (phi.dot(G * psi) > 0.0) psi = -psi;

  const Matrix Z1 = kernel_basis(K1.transpose(), rel_tol);
  const Matrix Z2 = kernel_basis(K2, rel_tol);
  if (Z1.cols() == 0 || Z2.cols() == 0) {
    raise(ErrorKind::NoKernelVector, "ker(K1^T) has dimension " + std::to_string(Z1.cols()) + ", ker(K2) has " +
                                         std::to_string(Z2.cols()));
  }
  const Svd overlap = svd_full(Z1.transpose() * Z2);
  if (overlap.sigma.size() == 0 || !(overlap.sigma(0) > rel_tol)) {
    raise(ErrorKind::NoKernelVector, "ker(K1^T) and ker(K2) are numerically orthogonal");
  }
  const Vector gamma1 = Z1 * overlap.U.col(0);
  const Vector gamma2 = Z2 * overlap.V.col(0);

  CurvatureDirection dir;
  dir.dK1 = std::sqrt(0.5) * gamma2 * psi.transpose();
  dir.dK2 = std::sqrt(0.5) * phi * gamma1.transpose();
  dir.kernel_overlap = gamma1.dot(gamma2);
  dir.grad_singular_value = g.sigma(0);
  dir.quadratic_form_value = hessian_quadratic_form(plant, policy, dir.dK1, dir.dK2);
  if (!(dir.quadratic_form_value < 0.0)) {
    raise(ErrorKind::NotSaddle, "constructed direction has curvature " + std::to_string(dir.quadratic_form_value));
  }
  return dir;
}

}  // namespace overlqr
