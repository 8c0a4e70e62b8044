#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "overlqr/flow.hpp"
#include "overlqr/landscape.hpp"
#include "overlqr/lqr.hpp"
#include "overlqr/netpolicy.hpp"

namespace overlqr::testing {

inline Matrix random_spd(Eigen::Index n, std::mt19937_64& rng) {
  const Matrix M = gaussian_matrix(n, n, rng);
  return M * M.transpose() / static_cast<double>(n) + 0.5 * Matrix::Identity(n, n);
}

inline Matrix hurwitz_shift(const Matrix& M, double margin = 1.0) {
  return M - (spectral_abscissa(M) + margin) * Matrix::Identity(M.rows(), M.cols());
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Instance {
  Plant plant;
  LayeredPolicy policy;
};

// A random plant and policy with a chosen closed loop: A is shifted so that
// A + B Kbar C has spectral abscissa -margin. General C, Q, R, Sigma0 unless
// state_feedback is set.
inline Instance random_instance(std::mt19937_64& rng, int max_n = 5, int max_m = 3, int max_depth = 3,
                                int max_width = 8, bool state_feedback = false, double margin = 0.5) {
  const int n = uniform_int(rng, 1, max_n);
  const int m = uniform_int(rng, 1, max_m);
  const int depth = uniform_int(rng, 1, max_depth);
  std::vector<Matrix> layers;
  Eigen::Index in = n;
  for (int i = 0; i < depth; ++i) {
    const Eigen::Index out = i + 1 == depth ? m : uniform_int(rng, std::max(n, m), std::max(max_width, std::max(n, m)));
    layers.push_back(gaussian_matrix(out, in, rng, 1.0 / std::sqrt(static_cast<double>(in))));
    in = out;
  }
  LayeredPolicy policy(std::move(layers));
  const Matrix B = gaussian_matrix(n, m, rng);
  Matrix C = Matrix::Identity(n, n);
  if (!state_feedback) C += 0.3 * gaussian_matrix(n, n, rng);
  const Matrix M = gaussian_matrix(n, n, rng);
  const Matrix A = hurwitz_shift(M + B * policy.product() * C, margin) - B * policy.product() * C;
  if (state_feedback) return {Plant(A, B, random_spd(n, rng), random_spd(m, rng)), policy};
  return {Plant(A, B, C, random_spd(n, rng), random_spd(m, rng), random_spd(n, rng)), policy};
}

// Central differences of J over every parameter of the policy.
inline LayerGradients fd_layer_grads(const Plant& plant, const LayeredPolicy& policy, double rel_step = 1e-6) {
  const Vector theta = policy.flatten();
  const double h = rel_step * (1.0 + theta.lpNorm<Eigen::Infinity>());
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    g(i) = (cost(plant, policy.with_parameters(tp)) - cost(plant, policy.with_parameters(tm))) / (2.0 * h);
  }
  return policy.with_parameters(g).layers();
}

inline double relative_error(const Vector& approx, const Vector& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-300);
}

inline double relative_error(const LayerGradients& approx, const LayerGradients& exact) {
  return relative_error(flatten(approx), flatten(exact));
}

// Second central difference of t -> J((K2 + t dK2)(K1 + t dK1)).
inline double fd_second_derivative(const Plant& plant, const LayeredPolicy& policy, const Matrix& dK1,
                                   const Matrix& dK2, double h = 1e-4) {
  const auto at = [&](double t) {
    return cost(plant, Matrix((policy.layer(1) + t * dK2) * (policy.layer(0) + t * dK1)));
  };
  return (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
}

}  // namespace overlqr::testing
