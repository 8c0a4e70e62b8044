#pragma once

// Gradient flow K_i' = -grad_{K_i} J over layered policies.
//
// The exact-gradient integrator is an embedded Dormand-Prince 5(4) pair with
// a PI step controller. A proposed step is rejected (and halved) whenever any
// stage leaves the stabilizing set or breaks the configured abscissa margin,
// so every accepted sample is stabilizing. The zeroth-order variant uses
// fixed-step explicit Euler on coordinate finite-difference estimates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "overlqr/netpolicy.hpp"

namespace overlqr {

struct FlowConfig {
  double t_max = 100.0;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double grad_stop = 1e-8;   // on the total Frobenius norm of all layer gradients
  double max_step = 1.0;
  double min_step = 1e-12;
  double initial_step = 1e-3;
  double record_every = 0.0;  // 0 records every accepted step
  double stability_margin = kStabilityMargin;
  std::size_t max_steps = 5'000'000;

  void validate() const {
    if (!(t_max > 0.0)) raise(ErrorKind::InvalidArgument, "t_max must be positive");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) raise(ErrorKind::InvalidArgument, "tolerances must be positive");
    if (!(grad_stop >= 0.0)) raise(ErrorKind::InvalidArgument, "grad_stop must be non-negative");
    if (!(min_step > 0.0) || !(min_step < max_step)) {
      raise(ErrorKind::InvalidArgument, "need 0 < min_step < max_step");
    }
    if (!(record_every >= 0.0)) raise(ErrorKind::InvalidArgument, "record_every must be non-negative");
    if (!(stability_margin <= 0.0)) raise(ErrorKind::InvalidArgument, "stability_margin must be <= 0");
  }
};

enum class FlowStatus { Converged, HorizonExhausted, StepUnderflow, StepBudget };

inline std::string_view to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Converged: return "converged";
    case FlowStatus::HorizonExhausted: return "horizon_exhausted";
    case FlowStatus::StepUnderflow: return "step_underflow";
    case FlowStatus::StepBudget: return "step_budget";
  }
  return "unknown";
}

struct Sample {
  double t = 0.0;
  LayeredPolicy policy;
  double J = 0.0;
  std::vector<double> grad_norms;
  double grad_norm_total = 0.0;
  Matrix product;
  double abscissa = 0.0;
  std::vector<double> drift;  // ||C_i(t) - C_i(0)||_F
  double drift_max = 0.0;
  std::optional<double> imbalance;
};

/// Scalar summary of every accepted step, independent of record thinning.
struct TracePoint {
  double t = 0.0;
  double J = 0.0;
  double grad_norm_total = 0.0;
  double product_norm = 0.0;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected_error = 0;
  std::size_t rejected_stability = 0;
  std::size_t rhs_evaluations = 0;
  double smallest_step = std::numeric_limits<double>::infinity();
  double largest_step = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<TracePoint> trace;
  FlowStatus status = FlowStatus::HorizonExhausted;
  StepStats stats;
  std::vector<Matrix> initial_invariants;

  const Sample& front() const { return samples.front(); }
  const Sample& back() const { return samples.back(); }
  bool converged() const { return status == FlowStatus::Converged; }

  double max_drift() const {
    double d = 0.0;
    for (const auto& s : samples) d = std::max(d, s.drift_max);
    return d;
  }

  /// First time the cost reaches `level`, interpolated linearly between
  /// accepted steps; nullopt if it never does.
  std::optional<double> first_time_cost_below(double level) const {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (trace[i].J <= level) {
        if (i == 0) return trace[0].t;
        const auto& a = trace[i - 1];
        const auto& b = trace[i];
        const double w = (a.J - level) / (a.J - b.J);
        return a.t + w * (b.t - a.t);
      }
    }
    return std::nullopt;
  }

  double min_product_norm() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& p : trace) v = std::min(v, p.product_norm);
    return v;
  }
};

enum class DisturbanceMode { None, Constant, Noise };

/// Additive velocity disturbance. The per-layer Frobenius norm never exceeds
/// bound / N, so the sum over layers of the sup-norms stays within bound.
struct DisturbanceSpec {
  DisturbanceMode mode = DisturbanceMode::None;
  double bound = 0.0;
  std::uint64_t seed = 0;
};

class Disturbance {
 public:
  static constexpr int kComponents = 4;

  Disturbance(const DisturbanceSpec& spec, const LayeredPolicy& shape) : spec_(spec) {
    if (!(spec.bound >= 0.0)) raise(ErrorKind::InvalidArgument, "disturbance bound must be non-negative");
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> freq(0.5, 5.0), phase(0.0, 2.0 * std::numbers::pi), weight(0.2, 1.0);
    layer_scale_ = spec.bound / static_cast<double>(shape.depth());
    for (const auto& K : shape.layers()) {
      Layer layer;
      layer.rows = K.rows();
      layer.cols = K.cols();
      double wsum = 0.0;
      for (int l = 0; l < kComponents; ++l) {
        Matrix D = gaussian_matrix(K.rows(), K.cols(), rng);
        D /= D.norm();
        layer.directions.push_back(std::move(D));
        layer.omega.push_back(freq(rng));
        layer.phase.push_back(phase(rng));
        layer.weight.push_back(weight(rng));
        wsum += layer.weight.back();
      }
      for (auto& w : layer.weight) w /= wsum;
      layers_.push_back(std::move(layer));
    }
  }

  bool active() const { return spec_.mode != DisturbanceMode::None && spec_.bound > 0.0; }

  std::vector<Matrix> at(double t) const {
    std::vector<Matrix> u;
    for (const auto& layer : layers_) {
      Matrix U = Matrix::Zero(layer.rows, layer.cols);
      if (spec_.mode == DisturbanceMode::Constant) {
        U = layer_scale_ * layer.directions.front();
      } else if (spec_.mode == DisturbanceMode::Noise) {
        for (int l = 0; l < kComponents; ++l) {
          U += (layer_scale_ * layer.weight[l] * std::sin(layer.omega[l] * t + layer.phase[l])) * layer.directions[l];
        }
      }
      u.push_back(std::move(U));
    }
    return u;
  }

 private:
  struct Layer {
    Eigen::Index rows = 0, cols = 0;
    std::vector<Matrix> directions;
    std::vector<double> omega, phase, weight;
  };
  DisturbanceSpec spec_;
  double layer_scale_ = 0.0;
  std::vector<Layer> layers_;
};

inline Vector flatten(const std::vector<Matrix>& blocks) {
  Eigen::Index total = 0;
  for (const auto& B : blocks) total += B.size();
  Vector v(total);
  Eigen::Index off = 0;
  for (const auto& B : blocks) {
    v.segment(off, B.size()) = Eigen::Map<const Vector>(B.data(), B.size());
    off += B.size();
  }
  return v;
}

/// Velocity of the undisturbed flow, -grad_{K_i} J for every layer.
inline LayerGradients rhs(const Plant& plant, const LayeredPolicy& policy) {
  LayerGradients v = layer_grads(plant, policy);
  for (auto& G : v) G = -G;
  return v;
}

namespace detail {

inline Sample make_sample(double t, const LayeredPolicy& policy, const PolicyEvaluation& ev,
                          const std::vector<Matrix>& C0) {
  Sample s{t, policy, ev.lqr.cost, {}, 0.0, ev.product, ev.lqr.abscissa, {}, 0.0, std::nullopt};
  for (const auto& G : ev.layer_grads) s.grad_norms.push_back(G.norm());
  s.grad_norm_total = total_norm(ev.layer_grads);
  if (policy.depth() >= 2) {
    const InvariantRecord rec = conservation(policy);
    for (std::size_t i = 0; i < rec.C.size(); ++i) {
      s.drift.push_back((rec.C[i] - C0[i]).norm());
      s.drift_max = std::max(s.drift_max, s.drift.back());
    }
    s.imbalance = rec.imbalance;
  }
  return s;
}

inline TracePoint make_trace(double t, const PolicyEvaluation& ev) {
  return {t, ev.lqr.cost, total_norm(ev.layer_grads), ev.product.norm()};
}

inline std::vector<Matrix> initial_invariants(const LayeredPolicy& policy) {
  return policy.depth() >= 2 ? conservation(policy).C : std::vector<Matrix>{};
}

struct Stage {
  bool ok = false;
  Vector velocity;
  std::optional<PolicyEvaluation> ev;
};

// Evaluates the vector field at parameters y; a non-stabilizing point (or
// one past the margin) comes back with ok == false.
inline Stage evaluate_stage(const Plant& plant, const LayeredPolicy& shape, const Vector& y, double t,
                            double margin, const Disturbance* dist) {
  Stage st;
  try {
    const LayeredPolicy policy = shape.with_parameters(y);
    PolicyEvaluation ev = evaluate(plant, policy);
    if (ev.lqr.abscissa > margin) return st;
    st.velocity = -flatten(ev.layer_grads);
    if (dist != nullptr && dist->active()) st.velocity += flatten(dist->at(t));
    st.ev = std::move(ev);
    st.ok = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotStabilizing && e.kind() != ErrorKind::SingularSolve &&
        e.kind() != ErrorKind::NotHurwitz) {
      throw;
    }
  }
  return st;
}

// Dormand-Prince 5(4) tableau.
inline constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr std::array<std::array<double, 6>, 7> kA{{
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
}};
// 5th-order weights minus embedded 4th-order weights.
inline constexpr std::array<double, 7> kE{71.0 / 57600,      0.0,           -71.0 / 16695, 71.0 / 1920,
                                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

inline Trajectory integrate_rk(const Plant& plant, const LayeredPolicy& policy0, const FlowConfig& config,
                               const Disturbance* dist) {
  config.validate();
  check_policy_dims(plant, policy0);
  Trajectory traj;
  traj.initial_invariants = initial_invariants(policy0);

  Vector y = policy0.flatten();
  double t = 0.0;
  Stage current = evaluate_stage(plant, policy0, y, t, config.stability_margin, dist);
  if (!current.ok) raise(ErrorKind::NotStabilizing, "initial policy is not stabilizing");
  ++traj.stats.rhs_evaluations;
  traj.samples.push_back(make_sample(t, policy0, *current.ev, traj.initial_invariants));
  traj.trace.push_back(make_trace(t, *current.ev));

  const double eps_t = 1e-12 * std::max(1.0, config.t_max);
  double next_record = config.record_every > 0.0 ? config.record_every : 0.0;
  double h = std::clamp(config.initial_step, config.min_step, config.max_step);
  double err_prev = 1e-4;
  bool last_rejected = false;
  std::array<Vector, 7> k;
  bool recorded_last = true;

  while (true) {
    if (current.ev->layer_grads.empty() || total_norm(current.ev->layer_grads) <= config.grad_stop) {
      traj.status = FlowStatus::Converged;
      break;
    }
    if (t >= config.t_max - eps_t) {
      traj.status = FlowStatus::HorizonExhausted;
      break;
    }
    if (traj.stats.accepted >= config.max_steps) {
      traj.status = FlowStatus::StepBudget;
      break;
    }

    double h_use = std::min(h, config.t_max - t);
    bool lands_on_record = false;
    if (config.record_every > 0.0 && next_record - t <= h_use) {
      h_use = next_record - t;
      lands_on_record = true;
    }

    k[0] = current.velocity;
    bool stable = true;
    Stage last;
    for (int s = 1; s < 7 && stable; ++s) {
      Vector ys = y;
      for (int j = 0; j < s; ++j) {
        if (kA[s][j] != 0.0) ys += (h_use * kA[s][j]) * k[j];
      }
      Stage st = evaluate_stage(plant, policy0, ys, t + kC[s] * h_use, config.stability_margin, dist);
      ++traj.stats.rhs_evaluations;
      if (!st.ok) {
        stable = false;
        break;
      }
      k[s] = st.velocity;
      if (s == 6) last = std::move(st);
    }
    if (!stable) {
      ++traj.stats.rejected_stability;
      h = 0.5 * h_use;
      last_rejected = true;
      if (h < config.min_step) {
        traj.status = FlowStatus::StepUnderflow;
        break;
      }
      continue;
    }

    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    Vector y_new = y;
    for (int j = 0; j < 6; ++j) {
      if (kA[6][j] != 0.0) y_new += (h_use * kA[6][j]) * k[j];
    }
    double err_sq = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double e = 0.0;
      for (int j = 0; j < 7; ++j) e += kE[j] * k[j](i);
      e *= h_use;
      const double sc = config.abs_tol + config.rel_tol * std::max(std::abs(y(i)), std::abs(y_new(i)));
      err_sq += (e / sc) * (e / sc);
    }
    const double err = std::sqrt(err_sq / static_cast<double>(std::max<Eigen::Index>(1, y.size())));

    if (!(err <= 1.0)) {
      ++traj.stats.rejected_error;
      const double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h = h_use * std::min(factor, 0.9);
      last_rejected = true;
      if (h < config.min_step) {
        traj.status = FlowStatus::StepUnderflow;
        break;
      }
      continue;
    }

    t = lands_on_record ? next_record : t + h_use;
    y = std::move(y_new);
    current = std::move(last);
    ++traj.stats.accepted;
    traj.stats.smallest_step = std::min(traj.stats.smallest_step, h_use);
    traj.stats.largest_step = std::max(traj.stats.largest_step, h_use);
    traj.trace.push_back(make_trace(t, *current.ev));

    recorded_last = false;
    if (config.record_every == 0.0 || lands_on_record) {
      traj.samples.push_back(make_sample(t, policy0.with_parameters(y), *current.ev, traj.initial_invariants));
      recorded_last = true;
    }
    if (lands_on_record) next_record += config.record_every;

    double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.14) * std::pow(err_prev, 0.08);
    factor = std::clamp(factor, 0.2, 5.0);
    if (last_rejected) factor = std::min(factor, 1.0);
    // A step clipped to hit a record time or the horizon says nothing about
    // the controller's proposal.
    const double base = (lands_on_record || h_use < h) ? std::max(h, h_use) : h_use;
    h = std::min(base * factor, config.max_step);
    err_prev = std::max(err, 1e-4);
    last_rejected = false;
  }

  if (!recorded_last) {
    traj.samples.push_back(make_sample(t, policy0.with_parameters(y), *current.ev, traj.initial_invariants));
  }
  return traj;
}

}  // namespace detail

inline Trajectory integrate(const Plant& plant, const LayeredPolicy& policy0, const FlowConfig& config) {
  return detail::integrate_rk(plant, policy0, config, nullptr);
}

/// Flow with an additive disturbance u(t) on the velocity. Cost monotonicity
/// does not hold here; the stability guard still does.
inline Trajectory integrate_disturbed(const Plant& plant, const LayeredPolicy& policy0, const FlowConfig& config,
                                      const DisturbanceSpec& spec) {
  const Disturbance dist(spec, policy0);
  return detail::integrate_rk(plant, policy0, config, &dist);
}

struct OracleConfig {
  int n_directions = 20;
  double probe_step = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_directions < 1) raise(ErrorKind::InvalidArgument, "n_directions must be >= 1");
    if (!(probe_step > 0.0)) raise(ErrorKind::InvalidArgument, "probe_step must be positive");
  }
};

struct OracleEstimate {
  LayerGradients grads;
  std::vector<Eigen::Index> probed;  // flattened coordinates that produced an estimate
  int discarded = 0;
};

/// Central differences of J along randomly chosen coordinate directions;
/// every other entry of the estimate is zero. `step_index` decorrelates the
/// draws of consecutive oracle calls under one seed.
inline OracleEstimate estimate_layer_grads(const Plant& plant, const LayeredPolicy& policy, const OracleConfig& oc,
                                           std::uint64_t step_index = 0) {
  oc.validate();
  check_policy_dims(plant, policy);
  const Vector theta = policy.flatten();
  const Eigen::Index P = theta.size();
  std::seed_seq seq{static_cast<std::uint32_t>(oc.seed), static_cast<std::uint32_t>(oc.seed >> 32),
                    static_cast<std::uint32_t>(step_index), static_cast<std::uint32_t>(step_index >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(P));
  for (Eigen::Index i = 0; i < P; ++i) idx[static_cast<std::size_t>(i)] = i;
  const auto count = static_cast<std::size_t>(std::min<Eigen::Index>(oc.n_directions, P));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);

  Vector g = Vector::Zero(P);
  OracleEstimate out;
  for (const Eigen::Index c : idx) {
    Vector plus = theta, minus = theta;
    plus(c) += oc.probe_step;
    minus(c) -= oc.probe_step;
    const auto jp = try_cost(plant, policy.with_parameters(plus).product());
    const auto jm = try_cost(plant, policy.with_parameters(minus).product());
    if (!jp || !jm) {
      ++out.discarded;
      continue;
    }
    g(c) = (*jp - *jm) / (2.0 * oc.probe_step);
    out.probed.push_back(c);
  }
  if (out.probed.empty()) raise(ErrorKind::AllProbesUnstable, "every probe left the stabilizing set");
  const LayeredPolicy shaped = policy.with_parameters(g);
  out.grads = shaped.layers();
  return out;
}

/// Explicit Euler with step config.max_step on oracle estimates. Steps whose
/// endpoint is not stabilizing are halved down to config.min_step. Recorded
/// costs and gradient norms are the exact values at the visited points.
inline Trajectory integrate_with_oracle(const Plant& plant, const LayeredPolicy& policy0, const FlowConfig& config,
                                        const OracleConfig& oc) {
  config.validate();
  oc.validate();
  check_policy_dims(plant, policy0);
  Trajectory traj;
  traj.initial_invariants = detail::initial_invariants(policy0);

  LayeredPolicy policy = policy0;
  PolicyEvaluation ev = [&] {
    try {
      return evaluate(plant, policy0);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::NotStabilizing) raise(ErrorKind::NotStabilizing, "initial policy is not stabilizing");
      throw;
    }
  }();
  if (ev.lqr.abscissa > config.stability_margin) {
    raise(ErrorKind::NotStabilizing, "initial policy violates the stability margin");
  }
  double t = 0.0;
  traj.samples.push_back(detail::make_sample(t, policy, ev, traj.initial_invariants));
  traj.trace.push_back(detail::make_trace(t, ev));
  const double eps_t = 1e-12 * std::max(1.0, config.t_max);
  double next_record = config.record_every;
  bool recorded_last = true;
  std::uint64_t step_index = 0;

  while (true) {
    if (total_norm(ev.layer_grads) <= config.grad_stop) {
      traj.status = FlowStatus::Converged;
      break;
    }
    if (t >= config.t_max - eps_t) {
      traj.status = FlowStatus::HorizonExhausted;
      break;
    }
    if (traj.stats.accepted >= config.max_steps) {
      traj.status = FlowStatus::StepBudget;
      break;
    }
    const OracleEstimate est = estimate_layer_grads(plant, policy, oc, step_index++);
    traj.stats.rhs_evaluations += 2 * est.probed.size() + static_cast<std::size_t>(2 * est.discarded);
    const Vector theta = policy.flatten();
    const Vector g = flatten(est.grads);
    double h = std::min(config.max_step, config.t_max - t);
    std::optional<LayeredPolicy> next;
    std::optional<PolicyEvaluation> next_ev;
    while (true) {
      const detail::Stage st = detail::evaluate_stage(plant, policy, theta - h * g, t + h, config.stability_margin,
                                                      nullptr);
      if (st.ok) {
        next = policy.with_parameters(theta - h * g);
        next_ev = *st.ev;
        break;
      }
      ++traj.stats.rejected_stability;
      h *= 0.5;
      if (h < config.min_step) break;
    }
    if (!next) {
      traj.status = FlowStatus::StepUnderflow;
      break;
    }
    t += h;
    policy = std::move(*next);
    ev = std::move(*next_ev);
    ++traj.stats.accepted;
    traj.stats.smallest_step = std::min(traj.stats.smallest_step, h);
    traj.stats.largest_step = std::max(traj.stats.largest_step, h);
    traj.trace.push_back(detail::make_trace(t, ev));
    recorded_last = false;
    if (config.record_every == 0.0 || t >= next_record - eps_t) {
      traj.samples.push_back(detail::make_sample(t, policy, ev, traj.initial_invariants));
      recorded_last = true;
      while (config.record_every > 0.0 && next_record <= t + eps_t) next_record += config.record_every;
    }
  }
  if (!recorded_last) traj.samples.push_back(detail::make_sample(t, policy, ev, traj.initial_invariants));
  return traj;
}

}  // namespace overlqr
