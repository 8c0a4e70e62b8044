#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "overlqr/commands.hpp"

namespace {

using overlqr::cli::json;
namespace io = overlqr::io;
namespace cli = overlqr::cli;

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const overlqr::Error& e) {
    std::cerr << "overlqr: " << e.what() << "\n";
  } catch (const json::exception& e) {
    std::cerr << "overlqr: malformed JSON: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "overlqr: " << e.what() << "\n";
  }
  return cli::kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient flow for overparameterized LQR policies"};
  app.require_subcommand(1);

  std::string config_path, plant_path, k0_path, policy_path, range = "-3:3", out_dir, preset;
  double a = -1.0, q = 1.0, r = 1.0;
  int res = 61;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "integrate one configured run");
  simulate->add_option("--config", config_path, "run config (JSON)")->required();

  auto* baseline = app.add_subcommand("baseline", "Riccati-optimal feedback by Kleinman iteration");
  baseline->add_option("--plant", plant_path, "plant JSON")->required();
  baseline->add_option("--k0", k0_path, "stabilizing seed feedback (JSON matrix)");

  auto* phase = app.add_subcommand("phase-plane", "scalar phase plane CSVs");
  phase->add_option("--a", a, "state coefficient");
  phase->add_option("--q", q, "state weight");
  phase->add_option("--r", r, "input weight");
  phase->add_option("--range", range, "lo:hi for both axes");
  phase->add_option("--res", res, "grid points per axis");
  phase->add_option("--out", out_dir, "output directory")->required();

  auto* landscape = app.add_subcommand("landscape", "classify a two-layer policy");
  landscape->add_option("--config", config_path, "config with plant and tol (JSON)")->required();
  landscape->add_option("--policy", policy_path, "policy JSON")->required();

  auto* experiment = app.add_subcommand("experiment", "run a figure preset");
  experiment->add_option("--preset", preset, "fig6a fig6b fig7a fig7b fig8a fig8b fig10 fig12")->required();
  experiment->add_option("--seed", seed, "seed");
  experiment->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitError;
  }

  if (*simulate) {
    return guarded([&] { return cli::cmd_simulate(io::read_json(config_path), std::cerr); });
  }
  if (*baseline) {
    return guarded([&] {
      std::optional<json> k0;
      if (!k0_path.empty()) k0 = io::read_json(k0_path);
      std::cout << cli::cmd_baseline(io::read_json(plant_path), k0).dump(2) << "\n";
      return cli::kExitOk;
    });
  }
  if (*phase) {
    return guarded([&] {
      const auto pp = cli::cmd_phase_plane(overlqr::ScalarPlant{a, q, r}, cli::parse_range(range), res, out_dir);
      std::cerr << "wrote " << pp.field.size() << " field samples and " << pp.curves.size() << " curves to "
                << out_dir << "\n";
      return cli::kExitOk;
    });
  }
  if (*landscape) {
    return guarded([&] {
      const json config = io::read_json(config_path);
      const json report = cli::cmd_landscape(config, io::read_json(policy_path));
      if (config.contains("output")) io::write_json(std::string(config.at("output")), report);
      std::cout << report.dump(2) << "\n";
      return cli::kExitOk;
    });
  }
  if (*experiment) {
    return guarded([&] { return cli::cmd_experiment(preset, seed, out_dir, std::cerr); });
  }
  return cli::kExitError;
}
