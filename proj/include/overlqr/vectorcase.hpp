#pragma once

// n = m = 1, N = 2: u = k2 k1 x with k1 a column and k2 a row of width
// kappa. Everything reduces to the scalar gain k = k2 k1.

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "overlqr/netpolicy.hpp"

namespace overlqr {

struct ScalarPlant {
  double a = -1.0;
  double q = 1.0;
  double r = 1.0;

  void validate() const {
    if (!std::isfinite(a)) raise(ErrorKind::InvalidArgument, "a must be finite");
    if (!(q > 0.0) || !(r > 0.0) || !std::isfinite(q) || !std::isfinite(r)) {
      raise(ErrorKind::InvalidArgument, "q and r must be positive");
    }
  }

  /// Same system as a general plant: b = c = 1, unit initial second moment.
  Plant plant() const {
    validate();
    return Plant(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Constant(1, 1, q),
                 Matrix::Constant(1, 1, r), Matrix::Ones(1, 1));
  }
};

/// k1 is kappa x 1, k2 is 1 x kappa; both stored as length-kappa vectors.
struct VectorPolicy {
  Vector k1;
  Vector k2;

  VectorPolicy(Vector k1_, Vector k2_) : k1(std::move(k1_)), k2(std::move(k2_)) {
    if (k1.size() < 1 || k1.size() != k2.size()) {
      raise(ErrorKind::DimensionMismatch, "k1 and k2 need the same positive width");
    }
  }

  static VectorPolicy scalar(double k1, double k2) {
    return VectorPolicy(Vector::Constant(1, k1), Vector::Constant(1, k2));
  }

  static VectorPolicy from_layered(const LayeredPolicy& p) {
    if (p.depth() != 2 || p.input_dim() != 1 || p.output_dim() != 1) {
      raise(ErrorKind::DimensionMismatch, "vector case needs a two-layer 1 -> 1 policy");
    }
    return VectorPolicy(p.layer(0).col(0), p.layer(1).row(0).transpose());
  }

  Eigen::Index width() const { return k1.size(); }
  double gain() const { return k2.dot(k1); }

  LayeredPolicy layered() const {
    return LayeredPolicy::two_layer(Matrix(k1), Matrix(k2.transpose()));
  }
};

inline bool in_stabilizing_set(const ScalarPlant& sp, double k) { return sp.a + k < 0.0; }

inline void require_stable(const ScalarPlant& sp, double k) {
  if (!in_stabilizing_set(sp, k)) {
    raise(ErrorKind::NotStabilizing, "a + k = " + std::to_string(sp.a + k) + " is not negative");
  }
}

inline double cost_cf(const ScalarPlant& sp, double k) {
  sp.validate();
  require_stable(sp, k);
  return -(sp.q + k * k * sp.r) / (2.0 * (sp.a + k));
}

inline double cost_cf(const ScalarPlant& sp, const VectorPolicy& vp) { return cost_cf(sp, vp.gain()); }

/// dJ/dk, defined everywhere except the pole a + k = 0.
inline double f_value(const ScalarPlant& sp, double k) {
  sp.validate();
  const double s = sp.a + k;
  if (s == 0.0 || std::abs(s) <= 1e-15 * (1.0 + std::abs(sp.a))) raise(ErrorKind::Pole, "a + k = 0");
  return -(sp.r * k * k + 2.0 * sp.a * sp.r * k - sp.q) / (2.0 * s * s);
}

inline double f_value(const ScalarPlant& sp, const VectorPolicy& vp) { return f_value(sp, vp.gain()); }

struct CriticalGains {
  double k_plus = 0.0;
  double k_minus = 0.0;  // the optimal gain
};

inline CriticalGains k_star(const ScalarPlant& sp) {
  sp.validate();
  const double root = std::sqrt(sp.a * sp.a + sp.q / sp.r);
  return {-sp.a + root, -sp.a - root};
}

/// ||k1 - k2^T||^2.
inline double balance_gap(const VectorPolicy& vp) { return (vp.k1 - vp.k2).squaredNorm(); }

inline double imbalance_c(const VectorPolicy& vp) {
  const Matrix C = vp.k1 * vp.k1.transpose() - vp.k2 * vp.k2.transpose();
  return imbalance_level(C);
}

/// The flow reaches the optimum from vp iff vp is not balanced.
inline bool converges_to_optimum(const ScalarPlant& sp, const VectorPolicy& vp) {
  require_stable(sp, vp.gain());
  return balance_gap(vp) > 0.0;
}

/// Closed-form layer gradients: grad_k1 = f k2^T, grad_k2 = f k1^T.
inline std::pair<Vector, Vector> layer_grads_cf(const ScalarPlant& sp, const VectorPolicy& vp) {
  require_stable(sp, vp.gain());
  const double f = f_value(sp, vp);
  return {f * vp.k2, f * vp.k1};
}

struct CostRate {
  double jdot_direct = 0.0;
  double jdot_via_c = 0.0;
};

/// dJ/dt along the undisturbed flow, once as -f^2 (||k1||^2 + ||k2||^2) and
/// once through the imbalance, -f^2 sqrt(c + 4 k^2).
inline CostRate imbalance_rate_identity(const ScalarPlant& sp, const VectorPolicy& vp) {
  const auto [g1, g2] = layer_grads_cf(sp, vp);
  const double f = f_value(sp, vp);
  const double k = vp.gain();
  const double c = imbalance_c(vp);
  return {-(g1.squaredNorm() + g2.squaredNorm()), -f * f * std::sqrt(std::max(0.0, c + 4.0 * k * k))};
}

/// Disturbance level that keeps {d >= alpha^2} forward invariant:
/// alpha * f(-alpha^2 / 4).
inline double iss_bound(const ScalarPlant& sp, double alpha) {
  const double upper = 2.0 * std::sqrt(std::abs(k_star(sp).k_minus));
  if (!(alpha > 0.0) || !(alpha < upper)) {
    raise(ErrorKind::OutOfRange, "alpha must lie in (0, " + std::to_string(upper) + ")");
  }
  return alpha * f_value(sp, -alpha * alpha / 4.0);
}

/// Initializations must satisfy ||k1 - k2^T|| > 2 sqrt(max(0, a)).
inline void require_iss_separation(const ScalarPlant& sp, const VectorPolicy& vp) {
  const double need = 2.0 * std::sqrt(std::max(0.0, sp.a));
  if (!(std::sqrt(balance_gap(vp)) > need)) {
    raise(ErrorKind::InvalidArgument, "||k1 - k2^T|| must exceed " + std::to_string(need));
  }
}

// Scalar phase plane (kappa = 1).

enum class Region { I, II, III, IV, Unstable };

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::III: return "III";
    case Region::IV: return "IV";
    case Region::Unstable: return "unstable";
  }
  return "unstable";
}

inline Region region_of(const ScalarPlant& sp, double k) {
  if (!in_stabilizing_set(sp, k)) return k > 0.0 ? Region::IV : Region::Unstable;
  const double km = k_star(sp).k_minus;
  if (k < km) return Region::I;
  if (k < 0.0) return Region::II;
  return Region::III;
}

struct PhaseSample {
  double k1 = 0.0;
  double k2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double f = 0.0;
  Region region = Region::Unstable;
  bool defined = true;  // false at the pole a + k1 k2 = 0
};

struct CurvePoint {
  double k1 = 0.0;
  double k2 = 0.0;
  int branch = 0;
};

struct Curve {
  std::string name;
  std::vector<CurvePoint> points;
};

struct PhasePlane {
  std::vector<PhaseSample> field;  // row-major: k2 outer, k1 inner
  int resolution = 0;
  std::vector<Curve> curves;
};

struct Range {
  double lo = -3.0;
  double hi = 3.0;

  void validate() const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      raise(ErrorKind::InvalidArgument, "range needs finite lo < hi");
    }
  }
  double at(int i, int n) const { return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1); }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Velocity of the scalar flow: (-f k2, -f k1).
inline PhaseSample phase_sample(const ScalarPlant& sp, double k1, double k2) {
  PhaseSample s;
  s.k1 = k1;
  s.k2 = k2;
  s.region = region_of(sp, k1 * k2);
  try {
    s.f = f_value(sp, k1 * k2);
    s.v1 = -s.f * k2;
    s.v2 = -s.f * k1;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Pole) throw;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.f = s.v1 = s.v2 = nan;
    s.defined = false;
  }
  return s;
}

namespace detail {

// Points of k1 k2 = level with both coordinates inside the window; one
// branch per sign of k1. level = 0 degenerates to the two axes.
inline Curve hyperbola(std::string name, double level, const Range& r1, const Range& r2, int n) {
  Curve c{std::move(name), {}};
  if (level == 0.0) {
    for (int i = 0; i < n; ++i) {
      const double x = r1.at(i, n);
      if (r2.contains(0.0)) c.points.push_back({x, 0.0, 0});
    }
    for (int i = 0; i < n; ++i) {
      const double y = r2.at(i, n);
      if (r1.contains(0.0)) c.points.push_back({0.0, y, 1});
    }
    return c;
  }
  for (int i = 0; i < n; ++i) {
    const double x = r1.at(i, n);
    if (x == 0.0) continue;
    const double y = level / x;
    if (r2.contains(y)) c.points.push_back({x, y, x < 0.0 ? 0 : 1});
  }
  return c;
}

inline Curve diagonal(std::string name, double offset, int branch, const Range& r1, const Range& r2, int n,
                      Curve c) {
  if (c.name.empty()) c.name = std::move(name);
  for (int i = 0; i < n; ++i) {
    const double x = r1.at(i, n);
    const double y = x + offset;
    if (r2.contains(y)) c.points.push_back({x, y, branch});
  }
  return c;
}

}  // namespace detail

/// Field over a resolution x resolution grid plus the reference curves:
/// stability border, optimal set, the d = 4|k*_-| margin and the balanced
/// diagonal.
inline PhasePlane phase_grid(const ScalarPlant& sp, const Range& k1_range, const Range& k2_range, int resolution,
                             int curve_points = 801) {
  sp.validate();
  k1_range.validate();
  k2_range.validate();
  if (resolution < 1) raise(ErrorKind::InvalidArgument, "resolution must be >= 1");
  if (curve_points < 2) raise(ErrorKind::InvalidArgument, "curve_points must be >= 2");
  PhasePlane out;
  out.resolution = resolution;
  out.field.reserve(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      out.field.push_back(phase_sample(sp, k1_range.at(i, resolution), k2_range.at(j, resolution)));
    }
  }
  const double km = k_star(sp).k_minus;
  const double margin = 2.0 * std::sqrt(std::abs(km));
  out.curves.push_back(detail::hyperbola("stability", -sp.a, k1_range, k2_range, curve_points));
  out.curves.push_back(detail::hyperbola("optimal", km, k1_range, k2_range, curve_points));
  Curve band = detail::diagonal("balance_margin", margin, 0, k1_range, k2_range, curve_points, Curve{});
  out.curves.push_back(detail::diagonal("balance_margin", -margin, 1, k1_range, k2_range, curve_points, band));
  out.curves.push_back(detail::diagonal("balanced", 0.0, 0, k1_range, k2_range, curve_points, Curve{}));
  return out;
}

}  // namespace overlqr
