#pragma once

// Library side of the overlqr command line: config parsing, run drivers and
// the experiment presets. tools/overlqr.cpp only does argument handling.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "overlqr/io.hpp"

namespace overlqr::cli {

using io::json;
namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitHorizon = 2, kExitUnderflow = 3 };

inline int exit_code(FlowStatus s) {
  switch (s) {
    case FlowStatus::Converged: return kExitOk;
    case FlowStatus::HorizonExhausted:
    case FlowStatus::StepBudget: return kExitHorizon;
    case FlowStatus::StepUnderflow: return kExitUnderflow;
  }
  return kExitError;
}

struct InitSource {
  enum class Kind { EtaMu, PerSv, Policy };
  Kind kind = Kind::EtaMu;
  InitSpec spec;
  std::vector<double> eta_list;
  std::optional<LayeredPolicy> policy;
  std::optional<Matrix> k0;  // Kleinman seed when A is not Hurwitz
};

struct ExperimentConfig {
  Plant plant;
  InitSource init;
  FlowConfig flow;
  DisturbanceSpec disturbance;
  std::optional<OracleConfig> oracle;
  fs::path output;
  std::uint64_t seed = 0;
};

inline InitSource init_from_json(const json& j, std::uint64_t seed) {
  InitSource src;
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "init must be an object");
  const std::string type = j.value("type", std::string("eta_mu"));
  src.spec.seed = j.value("seed", seed);
  src.spec.mu = j.value("mu", 1.0);
  src.spec.width = j.value("width", static_cast<Eigen::Index>(presets::kHiddenWidth));
  if (j.contains("k0")) src.k0 = io::matrix_from_json(j.at("k0"), "k0");
  if (type == "eta_mu") {
    src.kind = InitSource::Kind::EtaMu;
    src.spec.eta = j.value("eta", 1.0);
    src.spec.require_rank = j.value("require_rank", false);
  } else if (type == "per_sv") {
    src.kind = InitSource::Kind::PerSv;
    if (!j.contains("eta") || !j.at("eta").is_array()) raise(ErrorKind::InvalidArgument, "per_sv needs an eta list");
    src.eta_list = j.at("eta").get<std::vector<double>>();
  } else if (type == "policy") {
    src.kind = InitSource::Kind::Policy;
    if (!j.contains("layers")) raise(ErrorKind::InvalidArgument, "policy init needs layers");
    src.policy = io::policy_from_json(j.at("layers"));
  } else {
    raise(ErrorKind::InvalidArgument, "init type must be eta_mu, per_sv or policy");
  }
  return src;
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) raise(ErrorKind::InvalidArgument, "config must be a JSON object");
  if (!j.contains("plant")) raise(ErrorKind::InvalidArgument, "config needs a plant");
  const std::uint64_t seed = j.value("seed", std::uint64_t{0});
  const bool has_init = j.contains("init");
  const bool has_policy = j.contains("policy");
  if (has_init == has_policy) raise(ErrorKind::InvalidArgument, "config needs exactly one of init and policy");
  InitSource init = has_init ? init_from_json(j.at("init"), seed)
                             : init_from_json(json{{"type", "policy"}, {"layers", j.at("policy")}}, seed);
  ExperimentConfig c{io::plant_from_json(j.at("plant")),
                     std::move(init),
                     io::flow_from_json(j.value("flow", json())),
                     io::disturbance_from_json(j.value("disturbance", json()), seed),
                     io::oracle_from_json(j.value("oracle", json()), seed),
                     fs::path(j.value("output", std::string("out"))),
                     seed};
  if (c.oracle && c.disturbance.mode != DisturbanceMode::None && c.disturbance.bound > 0.0) {
    raise(ErrorKind::InvalidArgument, "oracle runs do not take a disturbance");
  }
  return c;
}

/// Kleinman from K0 = 0 when A is Hurwitz, otherwise from `fallback`.
inline std::optional<RiccatiSolution> baseline(const Plant& plant, const std::optional<Matrix>& k0,
                                               const std::optional<Matrix>& fallback) {
  if (!plant.state_feedback()) return std::nullopt;
  if (k0) return riccati_optimal(plant, *k0);
  if (is_hurwitz(plant.A()).spectral_abscissa < kStabilityMargin) return riccati_optimal(plant);
  if (fallback) return riccati_optimal(plant, *fallback);
  raise(ErrorKind::NotStabilizing, "A is not Hurwitz; supply init.k0 to seed the Riccati baseline");
}

struct RunResult {
  Trajectory traj;
  std::optional<Matrix> Kstar;
  std::optional<double> Jstar;
  double wall_seconds = 0.0;
};

inline LayeredPolicy initial_policy(const ExperimentConfig& c, const std::optional<Matrix>& Kstar) {
  switch (c.init.kind) {
    case InitSource::Kind::EtaMu:
      if (!Kstar) raise(ErrorKind::InvalidArgument, "eta_mu init needs a Riccati baseline (C = I)");
      return init_eta_mu(*Kstar, c.init.spec);
    case InitSource::Kind::PerSv:
      if (!Kstar) raise(ErrorKind::InvalidArgument, "per_sv init needs a Riccati baseline (C = I)");
      return init_per_sv(*Kstar, c.init.eta_list, c.init.spec.mu, c.init.spec.seed, c.init.spec.width);
    case InitSource::Kind::Policy: return *c.init.policy;
  }
  raise(ErrorKind::InvalidArgument, "unknown init");
}

inline RunResult run(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Matrix> fallback;
  if (c.init.policy) fallback = c.init.policy->product();
  RunResult out;
  if (const auto rs = baseline(c.plant, c.init.k0, fallback)) {
    out.Kstar = rs->K;
    out.Jstar = cost(c.plant, rs->K);
  }
  const LayeredPolicy policy0 = initial_policy(c, out.Kstar);
  if (c.oracle) {
    out.traj = integrate_with_oracle(c.plant, policy0, c.flow, *c.oracle);
  } else if (c.disturbance.mode != DisturbanceMode::None) {
    out.traj = integrate_disturbed(c.plant, policy0, c.flow, c.disturbance);
  } else {
    out.traj = integrate(c.plant, policy0, c.flow);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

inline json thresholds_json(const Trajectory& traj, const std::optional<double>& Jstar) {
  json t = json::object();
  for (const char* level : {"1e-1", "1e-2", "1e-3"}) {
    t[level] = Jstar ? optional_number(traj.first_time_cost_below(*Jstar + std::stod(level))) : json(nullptr);
  }
  return t;
}

inline json summary_json(const RunResult& r) {
  const Sample& last = r.traj.back();
  const auto& st = r.traj.stats;
  return {{"status", std::string(to_string(r.traj.status))},
          {"converged", r.traj.converged()},
          {"t_final", last.t},
          {"final_J", last.J},
          {"J_star", optional_number(r.Jstar)},
          {"final_prod_err", r.Kstar ? json((last.product - *r.Kstar).norm()) : json(nullptr)},
          {"final_grad_norm", last.grad_norm_total},
          {"max_invariant_drift", r.traj.max_drift()},
          {"min_product_norm", r.traj.min_product_norm()},
          {"time_to_gap", thresholds_json(r.traj, r.Jstar)},
          {"wall_time_s", r.wall_seconds},
          {"steps",
           {{"accepted", st.accepted},
            {"rejected_error", st.rejected_error},
            {"rejected_stability", st.rejected_stability},
            {"rhs_evaluations", st.rhs_evaluations},
            {"smallest_step", std::isfinite(st.smallest_step) ? json(st.smallest_step) : json(nullptr)},
            {"largest_step", st.largest_step}}}};
}

inline int cmd_simulate(const json& config, std::ostream& log) {
  const ExperimentConfig c = config_from_json(config);
  const RunResult r = run(c);
  io::atomic_write(c.output / "trajectory.csv", io::trajectory_csv(r.traj, r.Kstar));
  io::write_json(c.output / "summary.json", summary_json(r));
  log << "status " << to_string(r.traj.status) << ", J = " << io::num(r.traj.back().J);
  if (r.Jstar) log << ", J* = " << io::num(*r.Jstar);
  log << ", output " << c.output.string() << "\n";
  return exit_code(r.traj.status);
}

inline json cmd_baseline(const json& plant_json, const std::optional<json>& k0_json) {
  const Plant plant = io::plant_from_json(plant_json);
  std::optional<Matrix> k0;
  if (k0_json) k0 = io::matrix_from_json(*k0_json, "K0");
  const Matrix seed = k0 ? *k0 : Matrix(Matrix::Zero(plant.m(), plant.n()));
  const RiccatiSolution rs = riccati_optimal(plant, seed);
  return {{"K_star", io::matrix_to_json(rs.K)},
          {"J_star", cost(plant, rs.K)},
          {"grad_norm", grad(plant, rs.K).norm()},
          {"iterations", rs.iterations},
          {"P_star", io::matrix_to_json(rs.P)}};
}

inline Range parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) raise(ErrorKind::InvalidArgument, "range must look like lo:hi");
  Range r;
  try {
    std::size_t used = 0;
    r.lo = std::stod(s.substr(0, colon), &used);
    if (used != colon) raise(ErrorKind::InvalidArgument, "bad range '" + s + "'");
    const std::string hi = s.substr(colon + 1);
    r.hi = std::stod(hi, &used);
    if (used != hi.size()) raise(ErrorKind::InvalidArgument, "bad range '" + s + "'");
  } catch (const std::logic_error&) {
    raise(ErrorKind::InvalidArgument, "bad range '" + s + "'");
  }
  r.validate();
  return r;
}

inline PhasePlane cmd_phase_plane(const ScalarPlant& sp, const Range& range, int resolution, const fs::path& out) {
  const PhasePlane pp = phase_grid(sp, range, range, resolution);
  io::atomic_write(out / "field.csv", io::phase_field_csv(pp));
  for (const auto& c : pp.curves) io::atomic_write(out / ("curve_" + c.name + ".csv"), io::curve_csv(c));
  return pp;
}

/// Config: {"plant": ..., "tol": 1e-6}. Appends a curvature certificate at
/// spurious critical points.
inline json cmd_landscape(const json& config, const json& policy_json) {
  if (!config.is_object() || !config.contains("plant")) raise(ErrorKind::InvalidArgument, "config needs a plant");
  const Plant plant = io::plant_from_json(config.at("plant"));
  const double tol = config.value("tol", 1e-6);
  const LayeredPolicy policy = io::policy_from_json(policy_json);
  const CriticalReport rep = classify_critical(plant, policy, tol);
  json out = io::report_to_json(rep);
  if (rep.classification == CriticalClass::SpuriousCritical) {
    out["negative_curvature"] = io::curvature_to_json(negative_curvature(plant, policy));
  }
  return out;
}

// Experiment presets.

inline const std::vector<double>& mu_sweep() {
  static const std::vector<double> v{1.0, 3.16, 10.0, 31.6, 100.0};
  return v;
}

struct Preset {
  std::string name;
  enum class Kind { EtaMu, PerSv, Oracle } kind = Kind::EtaMu;
  double eta = 1.0;
  std::vector<double> eta_list;
  double t_max = 200.0;
};

inline const std::map<std::string, Preset>& preset_table() {
  using K = Preset::Kind;
  static const std::map<std::string, Preset> table{
      {"fig6a", {"fig6a", K::EtaMu, 5.0, {}, 200.0}},
      {"fig6b", {"fig6b", K::EtaMu, 20.0, {}, 200.0}},
      {"fig7a", {"fig7a", K::EtaMu, 0.9, {}, 200.0}},
      {"fig7b", {"fig7b", K::EtaMu, 0.1, {}, 200.0}},
      {"fig8a", {"fig8a", K::EtaMu, -0.1, {}, 200.0}},
      {"fig8b", {"fig8b", K::EtaMu, -20.0, {}, 200.0}},
      {"fig10", {"fig10", K::PerSv, 1.0, {20.0, 0.1, -20.0}, 200.0}},
      {"fig12", {"fig12", K::Oracle, 1.0, {}, 15.0}},
  };
  return table;
}

inline const Preset& find_preset(const std::string& name) {
  const auto& t = preset_table();
  const auto it = t.find(name);
  if (it == t.end()) {
    std::string known;
    for (const auto& [k, v] : t) known += (known.empty() ? "" : ", ") + k;
    raise(ErrorKind::InvalidArgument, "unknown preset '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

inline FlowConfig preset_flow(const Preset& p) {
  FlowConfig fc;
  fc.t_max = p.t_max;
  return fc;
}

// Euler step and probes for the oracle comparison.
inline FlowConfig preset_oracle_flow(const Preset& p) {
  FlowConfig fc = preset_flow(p);
  fc.max_step = 1e-3;
  fc.min_step = 1e-9;
  fc.record_every = 0.01;
  return fc;
}

inline constexpr double kOracleInitScale = 0.5;

/// Random stabilizing 3x5 target drawn at entry scale 0.5; its balanced
/// factorization is the common start of the oracle comparison.
inline Matrix oracle_target(const Plant& plant, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Matrix M = gaussian_matrix(plant.m(), plant.n(), rng, kOracleInitScale);
    if (spectral_abscissa(closed_loop(plant, M)) < -1e-3) return M;
  }
  raise(ErrorKind::NotStabilizing, "no stabilizing random target found");
}

struct RunSpec {
  std::string label;
  std::string file;
  double mu = 1.0;
  std::size_t depth = 2;
  bool oracle = false;
  LayeredPolicy policy0;
  FlowConfig flow;
};

struct ExperimentRun {
  RunSpec spec;
  Trajectory traj;
};

struct ExperimentResult {
  Preset preset;
  std::uint64_t seed = 0;
  Matrix Kstar;
  double Jstar = 0.0;
  std::vector<ExperimentRun> runs;

  const ExperimentRun& find(const std::string& label) const {
    for (const auto& r : runs)
      if (r.spec.label == label) return r;
    raise(ErrorKind::InvalidArgument, "no run labelled " + label);
  }
};

inline std::string mu_label(double mu) { return "mu_" + io::num(mu); }

inline std::vector<RunSpec> preset_runs(const Preset& p, std::uint64_t seed, const Plant& plant, const Matrix& Kstar) {
  std::vector<RunSpec> runs;
  const Eigen::Index width = presets::kHiddenWidth;
  if (p.kind == Preset::Kind::Oracle) {
    const Matrix target = oracle_target(plant, seed);
    InitSpec bal{1.0, 1.0, seed, width, false};
    InitSpec imb{1.0, 10.0, seed, width, false};
    runs.push_back({"exact_balanced", "exact_balanced.csv", 1.0, 2, false, init_eta_mu(target, bal), preset_flow(p)});
    runs.push_back({"oracle_balanced", "oracle_balanced.csv", 1.0, 2, true, init_eta_mu(target, bal),
                    preset_oracle_flow(p)});
    runs.push_back({"oracle_mu10", "oracle_mu10.csv", 10.0, 2, true, init_eta_mu(target, imb), preset_oracle_flow(p)});
    return runs;
  }
  Matrix product0;
  for (double mu : mu_sweep()) {
    LayeredPolicy pol = p.kind == Preset::Kind::PerSv ? init_per_sv(Kstar, p.eta_list, mu, seed, width)
                                                      : init_eta_mu(Kstar, InitSpec{p.eta, mu, seed, width, false});
    product0 = pol.product();
    runs.push_back({mu_label(mu), mu_label(mu) + ".csv", mu, 2, false, std::move(pol), preset_flow(p)});
  }
  const Matrix ref0 = p.kind == Preset::Kind::PerSv ? product0 : Matrix(p.eta * Kstar);
  runs.push_back({"reference_N1", "reference_N1.csv", std::numeric_limits<double>::quiet_NaN(), 1, false,
                  LayeredPolicy::single(ref0), preset_flow(p)});
  return runs;
}

/// Concurrency cap from OVERLQR_THREADS, else the hardware count.
inline unsigned thread_cap() {
  if (const char* env = std::getenv("OVERLQR_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::logic_error&) {
    }
    raise(ErrorKind::InvalidArgument, "OVERLQR_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline ExperimentResult run_experiment(const std::string& name, std::uint64_t seed, unsigned threads = 1) {
  const Preset& p = find_preset(name);
  const Plant plant = presets::paper5x5();
  ExperimentResult res{p, seed, riccati_optimal(plant).K, 0.0, {}};
  res.Jstar = cost(plant, res.Kstar);
  std::vector<RunSpec> specs = preset_runs(p, seed, plant, res.Kstar);
  std::vector<std::optional<Trajectory>> out(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        const RunSpec& s = specs[i];
        out[i] = s.oracle ? integrate_with_oracle(plant, s.policy0, s.flow, OracleConfig{20, 1e-6, seed})
                          : integrate(plant, s.policy0, s.flow);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t i = 0; i < specs.size(); ++i) res.runs.push_back({std::move(specs[i]), std::move(*out[i])});
  return res;
}

inline json manifest_json(const ExperimentResult& res) {
  json runs = json::array();
  for (const auto& r : res.runs) {
    const double mu = r.spec.mu;
    runs.push_back({{"label", r.spec.label},
                    {"file", r.spec.file},
                    {"mu", std::isfinite(mu) ? json(mu) : json(nullptr)},
                    {"eta", res.preset.kind == Preset::Kind::EtaMu ? json(res.preset.eta) : json(nullptr)},
                    {"seed", res.seed},
                    {"depth", r.spec.depth},
                    {"oracle", r.spec.oracle},
                    {"status", std::string(to_string(r.traj.status))},
                    {"final_gap", r.traj.back().J - res.Jstar},
                    {"min_product_norm", r.traj.min_product_norm()},
                    {"time_to_gap", thresholds_json(r.traj, res.Jstar)},
                    {"flow", io::flow_to_json(r.spec.flow)}});
  }
  json m = {{"preset", res.preset.name},
            {"seed", res.seed},
            {"plant", std::string(presets::kPaper5x5)},
            {"width", presets::kHiddenWidth},
            {"J_star", res.Jstar},
            {"K_star_norm", res.Kstar.norm()},
            {"runs", runs}};
  if (res.preset.kind == Preset::Kind::EtaMu) m["eta"] = res.preset.eta;
  if (res.preset.kind == Preset::Kind::PerSv) m["eta_list"] = res.preset.eta_list;
  if (res.preset.kind == Preset::Kind::Oracle) {
    m["oracle"] = {{"n_directions", 20}, {"probe_step", 1e-6}, {"init_scale", kOracleInitScale}};
  }
  return m;
}

inline void write_experiment(const ExperimentResult& res, const fs::path& out) {
  for (const auto& r : res.runs) {
    io::atomic_write(out / r.spec.file, io::trajectory_csv(r.traj, res.Kstar));
  }
  io::write_json(out / "manifest.json", manifest_json(res));
}

inline int cmd_experiment(const std::string& name, std::uint64_t seed, const fs::path& out, std::ostream& log) {
  const ExperimentResult res = run_experiment(name, seed, thread_cap());
  write_experiment(res, out);
  for (const auto& r : res.runs) {
    const auto t = r.traj.first_time_cost_below(res.Jstar + 1e-3);
    log << r.spec.label << ": " << to_string(r.traj.status) << ", J - J* = " << io::num(r.traj.back().J - res.Jstar)
        << ", t(gap <= 1e-3) = " << (t ? io::num(*t) : std::string("never")) << "\n";
  }
  return kExitOk;
}

}  // namespace overlqr::cli
