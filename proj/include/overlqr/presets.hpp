#pragma once

#include <string_view>

#include "overlqr/lqr.hpp"

namespace overlqr::presets {

inline constexpr std::string_view kPaper5x5 = "paper5x5";

// Symmetric, diagonally dominant, negated: A is Hurwitz. B selects states 3-5.
inline Plant paper5x5() {
  Matrix A(5, 5);
  A << 5.2373, 0.3452, 0.6653, 0.6715, 0.3288,
       0.3452, 5.4889, 0.8060, 0.3889, 0.5584,
       0.6653, 0.8060, 5.0377, 0.5735, 0.5100,
       0.6715, 0.3889, 0.5735, 5.3354, 0.6667,
       0.3288, 0.5584, 0.5100, 0.6667, 5.4942;
  A = -A;
  Matrix B = Matrix::Zero(5, 3);
  B(2, 0) = 1.0;
  B(3, 1) = 1.0;
  B(4, 2) = 1.0;
  return Plant::with_identity_weights(A, B);
}

inline constexpr Eigen::Index kHiddenWidth = 10;

}  // namespace overlqr::presets
