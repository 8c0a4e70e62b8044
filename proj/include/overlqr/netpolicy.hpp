#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "overlqr/lqr.hpp"

namespace overlqr {

/// Linear feedforward policy u = K_N ... K_1 y. Layer 0 is K_1 (kappa_1 x n),
/// the last layer is K_N (m x kappa_{N-1}).
class LayeredPolicy {
 public:
  explicit LayeredPolicy(std::vector<Matrix> layers) : layers_(std::move(layers)) { validate(); }

  static LayeredPolicy single(Matrix K) { return LayeredPolicy(std::vector<Matrix>{std::move(K)}); }
  static LayeredPolicy two_layer(Matrix K1, Matrix K2) {
    return LayeredPolicy(std::vector<Matrix>{std::move(K1), std::move(K2)});
  }

  std::size_t depth() const { return layers_.size(); }
  Eigen::Index input_dim() const { return layers_.front().cols(); }
  Eigen::Index output_dim() const { return layers_.back().rows(); }
  const Matrix& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<Matrix>& layers() const { return layers_; }

  std::vector<Eigen::Index> widths() const {
    std::vector<Eigen::Index> w;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) w.push_back(layers_[i].rows());
    return w;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index p = 0;
    for (const auto& K : layers_) p += K.size();
    return p;
  }

  /// K_N ... K_1.
  Matrix product() const { return partial_product(0, layers_.size()); }

  /// K_{hi} ... K_{lo+1} in zero-based half-open form [lo, hi); empty
  /// products are the identity of the matching size.
  Matrix partial_product(std::size_t lo, std::size_t hi) const {
    if (lo >= hi) {
      const Eigen::Index k = lo < layers_.size() ? layers_[lo].cols() : layers_.back().rows();
      return Matrix::Identity(k, k);
    }
    Matrix P = layers_[lo];
    for (std::size_t i = lo + 1; i < hi; ++i) P = layers_[i] * P;
    return P;
  }

  Vector flatten() const {
    Vector v(parameter_count());
    Eigen::Index off = 0;
    for (const auto& K : layers_) {
      v.segment(off, K.size()) = Eigen::Map<const Vector>(K.data(), K.size());
      off += K.size();
    }
    return v;
  }

  /// Same shapes, new entries (column-major per layer, K_1 first).
  LayeredPolicy with_parameters(const Vector& v) const {
    if (v.size() != parameter_count()) raise(ErrorKind::DimensionMismatch, "parameter vector length mismatch");
    std::vector<Matrix> out;
    out.reserve(layers_.size());
    Eigen::Index off = 0;
    for (const auto& K : layers_) {
      out.emplace_back(Eigen::Map<const Matrix>(v.data() + off, K.rows(), K.cols()));
      off += K.size();
    }
    return LayeredPolicy(std::move(out));
  }

 private:
  void validate() const {
    if (layers_.empty()) raise(ErrorKind::InvalidArgument, "a policy needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].size() == 0) raise(ErrorKind::DimensionMismatch, "empty layer " + std::to_string(i + 1));
      if (i + 1 < layers_.size() && layers_[i + 1].cols() != layers_[i].rows()) {
        raise(ErrorKind::DimensionMismatch, "layer " + std::to_string(i + 2) + " (" + dims(layers_[i + 1]) +
                                                ") does not compose with layer " + std::to_string(i + 1) + " (" +
                                                dims(layers_[i]) + ")");
      }
    }
    const Eigen::Index floor = std::max(input_dim(), output_dim());
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      if (layers_[i].rows() < floor) {
        raise(ErrorKind::InvalidArgument, "hidden width " + std::to_string(layers_[i].rows()) +
                                              " is below max(m, n) = " + std::to_string(floor));
      }
    }
  }

  std::vector<Matrix> layers_;
};

using LayerGradients = std::vector<Matrix>;

inline void check_policy_dims(const Plant& plant, const LayeredPolicy& policy) {
  if (policy.input_dim() != plant.n() || policy.output_dim() != plant.m()) {
    raise(ErrorKind::DimensionMismatch, "policy maps R^" + std::to_string(policy.input_dim()) + " -> R^" +
                                            std::to_string(policy.output_dim()) + ", plant needs R^" +
                                            std::to_string(plant.n()) + " -> R^" + std::to_string(plant.m()));
  }
}

/// Spreads the end-to-end gradient G (m x n) onto the layers:
/// grad_i = (K_N..K_{i+1})^T G (K_{i-1}..K_1)^T.
inline LayerGradients distribute_gradient(const LayeredPolicy& policy, const Matrix& G) {
  const std::size_t N = policy.depth();
  std::vector<Matrix> right(N);  // K_{i-1}..K_1
  right[0] = Matrix::Identity(policy.input_dim(), policy.input_dim());
  for (std::size_t i = 1; i < N; ++i) right[i] = policy.layer(i - 1) * right[i - 1];
  LayerGradients out(N);
  Matrix left_t_G = G;  // (K_N..K_{i+1})^T G, built from the output side
  for (std::size_t i = N; i-- > 0;) {
    out[i] = left_t_G * right[i].transpose();
    if (i > 0) left_t_G = policy.layer(i).transpose() * left_t_G;
  }
  return out;
}

struct PolicyEvaluation {
  Matrix product;
  LqrEvaluation lqr;
  LayerGradients layer_grads;
};

inline PolicyEvaluation evaluate(const Plant& plant, const LayeredPolicy& policy) {
  check_policy_dims(plant, policy);
  PolicyEvaluation ev;
  ev.product = policy.product();
  ev.lqr = evaluate(plant, ev.product);
  ev.layer_grads = distribute_gradient(policy, ev.lqr.grad);
  return ev;
}

inline Matrix product(const LayeredPolicy& policy) { return policy.product(); }

inline double cost(const Plant& plant, const LayeredPolicy& policy) {
  check_policy_dims(plant, policy);
  return cost(plant, policy.product());
}

/// Per-layer gradients of J(K_N...K_1) from one certificate solve.
inline LayerGradients layer_grads(const Plant& plant, const LayeredPolicy& policy) {
  return evaluate(plant, policy).layer_grads;
}

/// Direct evaluation of 2 [B_i^T P + R_i K_i C_i] L C_i^T with B_i, R_i, C_i
/// built explicitly. Kept as an independent route for tests.
inline LayerGradients layer_grads_explicit(const Plant& plant, const LayeredPolicy& policy) {
  check_policy_dims(plant, policy);
  const std::size_t N = policy.depth();
  const LyapunovPair cert = certificates(plant, policy.product());
  LayerGradients out;
  for (std::size_t i = 0; i < N; ++i) {
    const Matrix left = policy.partial_product(i + 1, N);  // K_N..K_{i+1}
    const Matrix Bi = plant.B() * left;
    const Matrix Ri = left.transpose() * plant.R() * left;
    const Matrix Ci = policy.partial_product(0, i) * plant.C();
    out.push_back(2.0 * (Bi.transpose() * cert.P + Ri * policy.layer(i) * Ci) * cert.L * Ci.transpose());
  }
  return out;
}

inline double total_norm(const LayerGradients& g) {
  double s = 0.0;
  for (const auto& G : g) s += G.squaredNorm();
  return std::sqrt(s);
}

struct InvariantRecord {
  std::vector<Matrix> C;           // K_i K_i^T - K_{i+1}^T K_{i+1}, i = 1..N-1
  std::optional<double> imbalance;  // 2 tr(C^2) - tr(C)^2, two-layer policies only
};

inline double imbalance_level(const Matrix& C) {
  const double t = C.trace();
  return 2.0 * (C * C).trace() - t * t;
}

inline InvariantRecord conservation(const LayeredPolicy& policy) {
  if (policy.depth() < 2) raise(ErrorKind::SingleLayer, "conservation laws need at least two layers");
  InvariantRecord rec;
  for (std::size_t i = 0; i + 1 < policy.depth(); ++i) {
    const Matrix& Ki = policy.layer(i);
    const Matrix& Kn = policy.layer(i + 1);
    rec.C.push_back(symmetrize(Ki * Ki.transpose() - Kn.transpose() * Kn));
  }
  if (policy.depth() == 2) rec.imbalance = imbalance_level(rec.C.front());
  return rec;
}

/// SVD-based two-layer initialization with product eta * K*. mu > 1 shifts
/// weight onto the first layer and makes the invariant non-zero.
struct InitSpec {
  double eta = 1.0;
  double mu = 1.0;
  std::uint64_t seed = 0;
  Eigen::Index width = 10;
  bool require_rank = false;  // reject eta == 0 (product identically zero)
};

namespace detail {

inline void check_init(const Matrix& Kstar, double mu, Eigen::Index width) {
  if (!(mu > 0.0)) raise(ErrorKind::InvalidArgument, "imbalance factor mu must be positive");
  if (width < std::max(Kstar.rows(), Kstar.cols())) {
    raise(ErrorKind::InvalidArgument, "width " + std::to_string(width) + " is below max(m, n)");
  }
}

// K_10 = mu Gamma diag(first) Phi^T, K_20 = (1/mu) Psi diag(second) Gamma^T,
// with the diagonals embedded top-left.
inline LayeredPolicy assemble(const Svd& svd, const Vector& first, const Vector& second, double mu,
                              Eigen::Index width, std::uint64_t seed) {
  const Eigen::Index m = svd.U.rows();
  const Eigen::Index n = svd.V.rows();
  const Matrix Gamma = random_orthogonal(width, seed);
  Matrix K1 = mu * Gamma * rectangular_diagonal(first, width, n) * svd.V.transpose();
  Matrix K2 = (1.0 / mu) * svd.U * rectangular_diagonal(second, m, width) * Gamma.transpose();
  return LayeredPolicy::two_layer(std::move(K1), std::move(K2));
}

}  // namespace detail

inline LayeredPolicy init_eta_mu(const Matrix& Kstar, const InitSpec& spec) {
  detail::check_init(Kstar, spec.mu, spec.width);
  if (spec.eta == 0.0 && spec.require_rank) {
    raise(ErrorKind::DegenerateEta, "eta = 0 gives a zero product");
  }
  const Svd svd = svd_full(Kstar);
  Vector root(svd.sigma.size());
  for (Eigen::Index j = 0; j < root.size(); ++j) root(j) = std::sqrt(std::abs(spec.eta) * svd.sigma(j));
  const Vector signed_root = spec.eta < 0.0 ? Vector(-root) : root;
  return detail::assemble(svd, signed_root, root, spec.mu, spec.width, spec.seed);
}

/// Same construction with one scaling per singular value of K*. Negative
/// scalings put their sign into the matching column of the first factor.
inline LayeredPolicy init_per_sv(const Matrix& Kstar, const std::vector<double>& eta, double mu,
                                 std::uint64_t seed, Eigen::Index width) {
  detail::check_init(Kstar, mu, width);
  const Svd svd = svd_full(Kstar);
  if (static_cast<Eigen::Index>(eta.size()) != svd.sigma.size()) {
    raise(ErrorKind::DimensionMismatch, "need " + std::to_string(svd.sigma.size()) + " scalings, got " +
                                            std::to_string(eta.size()));
  }
  Vector first(svd.sigma.size()), second(svd.sigma.size());
  for (Eigen::Index j = 0; j < svd.sigma.size(); ++j) {
    const double e = eta[static_cast<std::size_t>(j)];
    const double root = std::sqrt(std::abs(e) * svd.sigma(j));
    second(j) = root;
    first(j) = e < 0.0 ? -root : root;
  }
  return detail::assemble(svd, first, second, mu, width, seed);
}

}  // namespace overlqr
