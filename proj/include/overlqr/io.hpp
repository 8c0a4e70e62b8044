#pragma once

// JSON and CSV front matter: matrices are row-major nested arrays, policies
// are arrays of layers ordered K_1 first.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "overlqr/flow.hpp"
#include "overlqr/landscape.hpp"
#include "overlqr/presets.hpp"
#include "overlqr/vectorcase.hpp"

namespace overlqr::io {

using json = nlohmann::json;

/// Shortest round-trip decimal form; "nan" / "inf" / "-inf" otherwise.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) raise(ErrorKind::InvalidArgument, what + ": expected a non-empty array");
  if (j.front().is_number()) {
    Matrix M(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
      if (!j[c].is_number()) raise(ErrorKind::InvalidArgument, what + ": non-numeric entry");
      M(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    }
    return M;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j.front().is_array() || j.front().empty()) raise(ErrorKind::InvalidArgument, what + ": rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      raise(ErrorKind::DimensionMismatch, what + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) raise(ErrorKind::InvalidArgument, what + ": non-numeric entry");
      M(r, c) = v.get<double>();
    }
  }
  return M;
}

inline json matrix_to_json(const Matrix& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

/// Either the preset name or an object with A, B and optional C, Q, R, Sigma0.
inline Plant plant_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == presets::kPaper5x5) return presets::paper5x5();
    raise(ErrorKind::InvalidArgument, "unknown plant preset '" + j.get<std::string>() + "'");
  }
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "plant must be an object or a preset name");
  if (!j.contains("A") || !j.contains("B")) raise(ErrorKind::InvalidArgument, "plant needs A and B");
  const Matrix A = matrix_from_json(j.at("A"), "A");
  const Matrix B = matrix_from_json(j.at("B"), "B");
  const auto opt = [&](const char* key, Eigen::Index k) {
    return j.contains(key) ? matrix_from_json(j.at(key), key) : Matrix(Matrix::Identity(k, k));
  };
  return Plant(A, B, opt("C", A.rows()), opt("Q", A.rows()), opt("R", B.cols()), opt("Sigma0", A.rows()));
}

inline json plant_to_json(const Plant& p) {
  return {{"A", matrix_to_json(p.A())}, {"B", matrix_to_json(p.B())},         {"C", matrix_to_json(p.C())},
          {"Q", matrix_to_json(p.Q())}, {"R", matrix_to_json(p.R())}, {"Sigma0", matrix_to_json(p.Sigma0())}};
}

inline LayeredPolicy policy_from_json(const json& j) {
  const json& layers = j.is_object() && j.contains("layers") ? j.at("layers") : j;
  if (!layers.is_array() || layers.empty()) raise(ErrorKind::InvalidArgument, "policy must be an array of layers");
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < layers.size(); ++i) out.push_back(matrix_from_json(layers[i], "layer " + std::to_string(i + 1)));
  return LayeredPolicy(std::move(out));
}

inline json policy_to_json(const LayeredPolicy& p) {
  json out = json::array();
  for (const auto& K : p.layers()) out.push_back(matrix_to_json(K));
  return out;
}

inline FlowConfig flow_from_json(const json& j, FlowConfig c = {}) {
  if (j.is_null()) return c;
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "flow must be an object");
  c.t_max = j.value("t_max", c.t_max);
  c.rel_tol = j.value("rel_tol", c.rel_tol);
  c.abs_tol = j.value("abs_tol", c.abs_tol);
  c.grad_stop = j.value("grad_stop", c.grad_stop);
  c.max_step = j.value("max_step", c.max_step);
  c.min_step = j.value("min_step", c.min_step);
  c.initial_step = j.value("initial_step", c.initial_step);
  c.record_every = j.value("record_every", c.record_every);
  c.stability_margin = j.value("stability_margin", c.stability_margin);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.validate();
  return c;
}

inline json flow_to_json(const FlowConfig& c) {
  return {{"t_max", c.t_max},         {"rel_tol", c.rel_tol},           {"abs_tol", c.abs_tol},
          {"grad_stop", c.grad_stop}, {"max_step", c.max_step},         {"min_step", c.min_step},
          {"initial_step", c.initial_step}, {"record_every", c.record_every},
          {"stability_margin", c.stability_margin}, {"max_steps", c.max_steps}};
}

inline DisturbanceSpec disturbance_from_json(const json& j, std::uint64_t default_seed) {
  DisturbanceSpec d;
  d.seed = default_seed;
  if (j.is_null()) return d;
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "disturbance must be an object");
  const std::string mode = j.value("mode", std::string("none"));
  if (mode == "none") {
    d.mode = DisturbanceMode::None;
  } else if (mode == "constant") {
    d.mode = DisturbanceMode::Constant;
  } else if (mode == "noise") {
    d.mode = DisturbanceMode::Noise;
  } else {
    raise(ErrorKind::InvalidArgument, "disturbance mode must be none, constant or noise");
  }
  d.bound = j.value("bound", 0.0);
  d.seed = j.value("seed", default_seed);
  if (!(d.bound >= 0.0)) raise(ErrorKind::InvalidArgument, "disturbance bound must be non-negative");
  return d;
}

inline std::optional<OracleConfig> oracle_from_json(const json& j, std::uint64_t default_seed) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "oracle must be an object or null");
  OracleConfig oc;
  oc.n_directions = j.value("n_directions", oc.n_directions);
  oc.probe_step = j.value("probe_step", oc.probe_step);
  oc.seed = j.value("seed", default_seed);
  oc.validate();
  return oc;
}

inline json report_to_json(const CriticalReport& r) {
  const auto pair = [](const std::pair<double, double>& p) {
    json a = json::array();
    for (double v : {p.first, p.second}) a.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    return a;
  };
  return {{"classification", std::string(to_string(r.classification))},
          {"grad_norms", r.grad_norms},
          {"core_grad_norm", r.core_grad_norm},
          {"rank_p", r.rank_p},
          {"svd_alignment_residuals", pair(r.svd_alignment_residuals)},
          {"lowrank_residuals", pair(r.lowrank_residuals)},
          {"tol", r.tol},
          {"cost", r.cost}};
}

inline json curvature_to_json(const CurvatureDirection& d) {
  return {{"dK1", matrix_to_json(d.dK1)},
          {"dK2", matrix_to_json(d.dK2)},
          {"quadratic_form_value", d.quadratic_form_value},
          {"kernel_overlap", d.kernel_overlap},
          {"grad_singular_value", d.grad_singular_value}};
}

// CSV.

inline std::string trajectory_csv(const Trajectory& traj, const std::optional<Matrix>& Kstar) {
  std::ostringstream os;
  const std::size_t N = traj.samples.empty() ? 0 : traj.samples.front().grad_norms.size();
  os << "t,J,grad_norm_total";
  for (std::size_t i = 1; i <= N; ++i) os << ",grad_norm_" << i;
  os << ",abscissa,invariant_drift_max,imbalance_c,prod_err\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : traj.samples) {
    os << num(s.t) << ',' << num(s.J) << ',' << num(s.grad_norm_total);
    for (double g : s.grad_norms) os << ',' << num(g);
    os << ',' << num(s.abscissa) << ',' << num(s.drift_max) << ',' << num(s.imbalance.value_or(nan)) << ','
       << num(Kstar ? (s.product - *Kstar).norm() : nan) << '\n';
  }
  return os.str();
}

inline std::string phase_field_csv(const PhasePlane& pp) {
  std::ostringstream os;
  os << "k1,k2,v1,v2,f,region\n";
  for (const auto& s : pp.field) {
    os << num(s.k1) << ',' << num(s.k2) << ',' << num(s.v1) << ',' << num(s.v2) << ',' << num(s.f) << ','
       << to_string(s.region) << '\n';
  }
  return os.str();
}

inline std::string curve_csv(const Curve& c) {
  std::ostringstream os;
  os << "k1,k2,branch\n";
  for (const auto& p : c.points) os << num(p.k1) << ',' << num(p.k2) << ',' << p.branch << '\n';
  return os.str();
}

// Files.

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::InvalidArgument, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    raise(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

/// Writes to a sibling temporary and renames it into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) raise(ErrorKind::InvalidArgument, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    raise(ErrorKind::InvalidArgument, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

}  // namespace overlqr::io
