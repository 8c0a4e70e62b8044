#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "overlqr/lyapunov.hpp"

namespace overlqr {

/// Closed loops whose abscissa reaches this value are rejected as
/// non-stabilizing, so boundary round-off fails loudly.
inline constexpr double kStabilityMargin = -1e-12;

inline double min_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) raise(ErrorKind::EigenFailure, "symmetric eigenvalue iteration failed");
  return es.eigenvalues().minCoeff();
}

/// LTI plant x' = Ax + Bu, y = Cx with quadratic cost weights Q, R and
/// initial-condition second moment Sigma0. Immutable after construction.
class Plant {
 public:
  Plant(Matrix A, Matrix B, Matrix C, Matrix Q, Matrix R, Matrix Sigma0)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), Q_(std::move(Q)), R_(std::move(R)),
        Sigma0_(std::move(Sigma0)) {
    validate();
  }

  /// Full state feedback (C = I) with unit initial second moment.
  Plant(Matrix A, Matrix B, Matrix Q, Matrix R)
      : Plant(A, B, Matrix::Identity(A.rows(), A.rows()), std::move(Q), std::move(R),
              Matrix::Identity(A.rows(), A.rows())) {}

  /// Defaults Q = I, R = I, C = I, Sigma0 = I.
  static Plant with_identity_weights(const Matrix& A, const Matrix& B) {
    return Plant(A, B, Matrix::Identity(A.rows(), A.rows()), Matrix::Identity(B.cols(), B.cols()));
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& Q() const { return Q_; }
  const Matrix& R() const { return R_; }
  const Matrix& Sigma0() const { return Sigma0_; }

  Eigen::Index n() const { return A_.rows(); }
  Eigen::Index m() const { return B_.cols(); }

  bool state_feedback() const { return C_.isIdentity(0.0); }

 private:
  void validate() const {
    const auto n = A_.rows();
    if (n < 1 || A_.cols() != n) raise(ErrorKind::DimensionMismatch, "A must be square, got " + dims(A_));
    if (B_.rows() != n || B_.cols() < 1) raise(ErrorKind::DimensionMismatch, "B must be n x m, got " + dims(B_));
    const auto m = B_.cols();
    if (C_.rows() != n || C_.cols() != n) raise(ErrorKind::DimensionMismatch, "C must be n x n, got " + dims(C_));
    if (Q_.rows() != n || Q_.cols() != n) raise(ErrorKind::DimensionMismatch, "Q must be n x n, got " + dims(Q_));
    if (R_.rows() != m || R_.cols() != m) raise(ErrorKind::DimensionMismatch, "R must be m x m, got " + dims(R_));
    if (Sigma0_.rows() != n || Sigma0_.cols() != n) {
      raise(ErrorKind::DimensionMismatch, "Sigma0 must be n x n, got " + dims(Sigma0_));
    }
    for (const Matrix* M : {&A_, &B_, &C_, &Q_, &R_, &Sigma0_}) {
      if (!all_finite(*M)) raise(ErrorKind::InvalidArgument, "plant matrices must be finite");
    }
    const auto check_pd = [](const Matrix& S, const char* name) {
      if (!is_symmetric(S)) raise(ErrorKind::InvalidArgument, std::string(name) + " must be symmetric");
      if (!(min_eigenvalue(S) > 0.0)) raise(ErrorKind::InvalidArgument, std::string(name) + " must be positive definite");
    };
    check_pd(Q_, "Q");
    check_pd(R_, "R");
    check_pd(Sigma0_, "Sigma0");
    if (Eigen::FullPivLU<Matrix>(C_).rank() < n) raise(ErrorKind::InvalidArgument, "C must be full rank");
  }

  Matrix A_, B_, C_, Q_, R_, Sigma0_;
};

struct LyapunovPair {
  Matrix P;  // value certificate
  Matrix L;  // controllability-Gramian-like certificate
};

inline void check_feedback_dims(const Plant& plant, const Matrix& K) {
  if (K.rows() != plant.m() || K.cols() != plant.n()) {
    raise(ErrorKind::DimensionMismatch, "feedback must be " + std::to_string(plant.m()) + "x" +
                                            std::to_string(plant.n()) + ", got " + dims(K));
  }
}

/// A + B K C.
inline Matrix closed_loop(const Plant& plant, const Matrix& K) {
  check_feedback_dims(plant, K);
  return plant.A() + plant.B() * K * plant.C();
}

/// Throws NotStabilizing unless the closed loop clears kStabilityMargin.
inline double require_stabilizing(const Matrix& A_cl) {
  const double alpha = spectral_abscissa(A_cl);
  if (!(alpha < kStabilityMargin)) {
    raise(ErrorKind::NotStabilizing, "closed-loop spectral abscissa " + std::to_string(alpha));
  }
  return alpha;
}

/// Everything one closed-loop analysis produces; layered gradients, the
/// flow and the landscape code all start from this.
struct LqrEvaluation {
  Matrix closed_loop;
  double abscissa = 0.0;
  LyapunovPair certificates;
  double cost = 0.0;
  Matrix grad;  // 2 (B^T P + R K C) L C^T
};

inline LqrEvaluation evaluate(const Plant& plant, const Matrix& K) {
  LqrEvaluation ev;
  ev.closed_loop = closed_loop(plant, K);
  ev.abscissa = require_stabilizing(ev.closed_loop);
  const LyapunovSolver solver(ev.closed_loop, ev.abscissa);
  const Matrix KC = K * plant.C();
  ev.certificates.P = solver.solve(KC.transpose() * plant.R() * KC + plant.Q());
  ev.certificates.L = solver.solve_dual(plant.Sigma0());
  ev.cost = (ev.certificates.P * plant.Sigma0()).trace();
  ev.grad = 2.0 * (plant.B().transpose() * ev.certificates.P + plant.R() * KC) * ev.certificates.L *
            plant.C().transpose();
  return ev;
}

inline LyapunovPair certificates(const Plant& plant, const Matrix& K) { return evaluate(plant, K).certificates; }

/// J(K) = trace(P_K Sigma0); only the value certificate is solved.
inline double cost(const Plant& plant, const Matrix& K) {
  const Matrix A_cl = closed_loop(plant, K);
  const double alpha = require_stabilizing(A_cl);
  const Matrix KC = K * plant.C();
  const Matrix P = LyapunovSolver(A_cl, alpha).solve(KC.transpose() * plant.R() * KC + plant.Q());
  return (P * plant.Sigma0()).trace();
}

/// Cost that reports instability as nullopt instead of throwing.
inline std::optional<double> try_cost(const Plant& plant, const Matrix& K) {
  try {
    return cost(plant, K);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NotStabilizing || e.kind() == ErrorKind::SingularSolve) return std::nullopt;
    throw;
  }
}

inline Matrix grad(const Plant& plant, const Matrix& K) { return evaluate(plant, K).grad; }

struct RiccatiSolution {
  Matrix K;
  Matrix P;
  int iterations = 0;
  std::vector<double> trace_history;  // trace(P_j) per iterate
};

/// Kleinman-Newton iteration for the state-feedback optimum K* = -R^{-1} B^T P*.
inline RiccatiSolution riccati_optimal(const Plant& plant, const Matrix& K0, int max_iterations = 200) {
  if (!plant.state_feedback()) raise(ErrorKind::InvalidArgument, "the Riccati baseline is defined for C = I");
  check_feedback_dims(plant, K0);
  const Eigen::LLT<Matrix> R_chol(plant.R());
  RiccatiSolution out;
  Matrix K = K0;
  for (int j = 0; j < max_iterations; ++j) {
    const Matrix A_cl = plant.A() + plant.B() * K;
    const double alpha = require_stabilizing(A_cl);
    const Matrix P = LyapunovSolver(A_cl, alpha).solve(K.transpose() * plant.R() * K + plant.Q());
    out.trace_history.push_back(P.trace());
    const Matrix K_next = -R_chol.solve(plant.B().transpose() * P);
    const double step = (K_next - K).norm();
    out.iterations = j + 1;
    out.P = P;
    if (step <= 1e-12 * (1.0 + K.norm())) {
      out.K = K_next;
      out.P = LyapunovSolver(plant.A() + plant.B() * K_next)
                  .solve(K_next.transpose() * plant.R() * K_next + plant.Q());
      return out;
    }
    K = K_next;
  }
  raise(ErrorKind::NoConvergence, "Kleinman iteration did not converge in " + std::to_string(max_iterations) +
                                      " iterations");
}

/// Zero feedback when A is Hurwitz, otherwise the caller must supply a seed.
inline RiccatiSolution riccati_optimal(const Plant& plant) {
  return riccati_optimal(plant, Matrix::Zero(plant.m(), plant.n()));
}

}  // namespace overlqr
