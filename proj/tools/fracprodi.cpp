#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracprodi/app.hpp"

int main(int argc, char** argv) {
  using namespace fracprodi;
  CLI::App app{"Fractional Ambrosetti-Prodi numerical lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> paths;
  std::optional<double> dt;
  std::optional<double> tmax;
  std::vector<double> probes;

  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed (overrides mc.seed)");
    sub->add_option("--out", out, "output directory (overrides output)");
    if (name == "mc") {
      sub->add_option("--paths", paths, "number of paths (overrides mc.paths)")->check(CLI::PositiveNumber);
      sub->add_option("--dt", dt, "time step (overrides mc.dt)")->check(CLI::PositiveNumber);
      sub->add_option("--tmax", tmax, "horizon (overrides mc.tmax)")->check(CLI::PositiveNumber);
      sub->add_option("--probe", probes, "1D start point; repeat for several (overrides mc.probes)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  Config config;
  try {
    config = parse_config(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  if (seed) config.mc.seed = *seed;
  if (out) config.output = *out;
  if (paths) config.mc.paths = *paths;
  if (dt) config.mc.dt = *dt;
  if (tmax) config.mc.tmax = *tmax;
  if (!probes.empty()) {
    config.mc.probes.clear();
    for (double x : probes) config.mc.probes.push_back({x, 0.0});
  }
  return run_command(sub, config, std::cout, std::cerr);
}
