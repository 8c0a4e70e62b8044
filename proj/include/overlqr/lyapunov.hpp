#pragma once

// Dense kernel shared by every module: continuous Lyapunov solves, the
// Hurwitz test, full SVD and Haar-distributed orthogonal sampling. Sizes are
// desk scale (n <= 10), so the Lyapunov solver works on the vectorized
// n^2 x n^2 system directly.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "overlqr/errors.hpp"

namespace overlqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kSingularRcond = 1e-14;

inline std::string dims(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

inline bool all_finite(const Matrix& M) { return M.allFinite(); }

inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

inline bool is_symmetric(const Matrix& M, double tol = kSymmetryTol) {
  return M.rows() == M.cols() && (M - M.transpose()).norm() <= tol * (1.0 + M.norm());
}

struct HurwitzTest {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
};

/// Maximum real part over the eigenvalues of a square matrix.
inline double spectral_abscissa(const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    raise(ErrorKind::DimensionMismatch, "spectral_abscissa expects a non-empty square matrix, got " + dims(A));
  }
  if (!all_finite(A)) raise(ErrorKind::EigenFailure, "non-finite entries");
  if (A.rows() == 1) return A(0, 0);
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) raise(ErrorKind::EigenFailure, "eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff();
}

/// Strict test: the boundary (abscissa == 0) is not Hurwitz.
inline HurwitzTest is_hurwitz(const Matrix& A) {
  const double alpha = spectral_abscissa(A);
  return {alpha < 0.0, alpha};
}

/// Factors the Kronecker form of X -> A^T X + X A once so that both the
/// primal equation A^T X + X A + W = 0 and its dual A X + X A^T + W = 0 can be
/// solved repeatedly for the same closed loop.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const Matrix& A) : n_(A.rows()) {
    if (A.rows() != A.cols() || n_ == 0) {
      raise(ErrorKind::DimensionMismatch, "Lyapunov operator needs a square matrix, got " + dims(A));
    }
    const auto test = is_hurwitz(A);
    if (!test.hurwitz) {
      raise(ErrorKind::NotHurwitz, "spectral abscissa " + std::to_string(test.spectral_abscissa) + " >= 0");
    }
    factor(A, test.spectral_abscissa);
  }

  /// For callers that already computed the spectral abscissa of A.
  LyapunovSolver(const Matrix& A, double known_abscissa) : n_(A.rows()) {
    if (A.rows() != A.cols() || n_ == 0) {
      raise(ErrorKind::DimensionMismatch, "Lyapunov operator needs a square matrix, got " + dims(A));
    }
    if (!(known_abscissa < 0.0)) {
      raise(ErrorKind::NotHurwitz, "spectral abscissa " + std::to_string(known_abscissa) + " >= 0");
    }
    factor(A, known_abscissa);
  }

  Eigen::Index size() const { return n_; }
  double spectral_abscissa() const { return abscissa_; }

  /// Solves A^T X + X A + W = 0.
  Matrix solve(const Matrix& W) const {
    check_rhs(W);
    const Vector x = lu_.solve(-Eigen::Map<const Vector>(W.data(), W.size()));
    return symmetrize(Eigen::Map<const Matrix>(x.data(), n_, n_));
  }

  /// Solves A X + X A^T + W = 0 (the operator of the transposed closed loop).
  Matrix solve_dual(const Matrix& W) const {
    check_rhs(W);
    const Vector x = lu_.transpose().solve(-Eigen::Map<const Vector>(W.data(), W.size()));
    return symmetrize(Eigen::Map<const Matrix>(x.data(), n_, n_));
  }

 private:
  void factor(const Matrix& A, double abscissa) {
    abscissa_ = abscissa;
    const Eigen::Index nn = n_ * n_;
    Matrix M = Matrix::Zero(nn, nn);
    // Column-major vec: vec(A^T X) = (I (x) A^T) vec X, vec(X A) = (A^T (x) I) vec X.
    for (Eigen::Index j = 0; j < n_; ++j) {
      for (Eigen::Index i = 0; i < n_; ++i) {
        const Eigen::Index row = i + n_ * j;
        for (Eigen::Index k = 0; k < n_; ++k) {
          M(row, k + n_ * j) += A(k, i);
          M(row, i + n_ * k) += A(k, j);
        }
      }
    }
    lu_.compute(M);
    if (!(lu_.rcond() >= kSingularRcond)) {
      raise(ErrorKind::SingularSolve, "Kronecker system is numerically singular (rcond " +
                                          std::to_string(lu_.rcond()) + ")");
    }
  }

  void check_rhs(const Matrix& W) const {
    if (W.rows() != n_ || W.cols() != n_) {
      raise(ErrorKind::DimensionMismatch, "right-hand side " + dims(W) + " vs operator " + std::to_string(n_));
    }
    if (!is_symmetric(W)) raise(ErrorKind::InvalidArgument, "Lyapunov right-hand side must be symmetric");
  }

  Eigen::Index n_;
  double abscissa_ = 0.0;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// Solves A_cl^T X + X A_cl + W = 0 for Hurwitz A_cl. Pass the transpose of
/// the closed loop for the controllability form.
inline Matrix solve_lyapunov(const Matrix& A_cl, const Matrix& W) { return LyapunovSolver(A_cl).solve(W); }

struct Svd {
  Matrix U;      // m x m, left singular vectors
  Vector sigma;  // min(m, n), descending
  Matrix V;      // n x n, right singular vectors
};

inline Svd svd_full(const Matrix& M) {
  if (!all_finite(M)) raise(ErrorKind::EigenFailure, "SVD of a matrix with non-finite entries");
  if (M.size() == 0) return {Matrix::Identity(M.rows(), M.rows()), Vector(), Matrix::Identity(M.cols(), M.cols())};
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Embeds singular values (or any diagonal) as the top-left block of a
/// rows x cols rectangular matrix.
inline Matrix rectangular_diagonal(const Vector& diag, Eigen::Index rows, Eigen::Index cols) {
  Matrix D = Matrix::Zero(rows, cols);
  const Eigen::Index r = std::min({rows, cols, diag.size()});
  for (Eigen::Index i = 0; i < r; ++i) D(i, i) = diag(i);
  return D;
}

/// Number of singular values above rel_tol * sigma_max.
inline Eigen::Index numerical_rank(const Vector& sigma, double rel_tol = 1e-8) {
  if (sigma.size() == 0) return 0;
  const double cut = rel_tol * sigma.maxCoeff();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) r += sigma(i) > cut ? 1 : 0;
  return r;
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix G(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = normal(rng);
  return G;
}

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// the signs of diag(R) folded into Q.
inline Matrix random_orthogonal(Eigen::Index k, std::uint64_t seed) {
  if (k < 1) raise(ErrorKind::InvalidArgument, "random_orthogonal needs k >= 1");
  std::mt19937_64 rng(seed);
  const Matrix G = gaussian_matrix(k, k, rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

}  // namespace overlqr
