// darksteady <experiment> --config <file> --out <dir> [--seed N] [--integrator rk4|propagator]
//
// Exit codes: 0 ok, 1 usage, 2 config error, 3 numerical error,
// 4 non-unique steady state where one is required.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "darksteady/experiments.hpp"

int main(int argc, char** argv) {
  using namespace darksteady;

  CLI::App app{"Driven-dissipative dark-state simulator"};
  app.set_version_flag("--version", DARKSTEADY_VERSION);

  std::string experiment;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> integrator;
  bool dump = false;

  app.add_option("experiment", experiment,
                 "fig2 | fig2-inset | fig3 | t2-inset | two-nuclei | steady | evolve | sweep")
      ->required();
  app.add_option("--config,-c", config_path, "key = value config file");
  app.add_option("--out,-o", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "seed for quasi-static noise sampling");
  app.add_option("--integrator", integrator, "rk4 | propagator")
      ->check(CLI::IsMember({"rk4", "propagator"}));
  app.add_flag("--print-config", dump, "print the resolved config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  ExperimentConfig cfg;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = parse_config(text, parse_experiment(experiment));
    cfg.output = out_dir;
    if (seed) cfg.seed = *seed;
    if (integrator) cfg.integrator = *integrator == "rk4" ? Integrator::Rk4 : Integrator::Propagator;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (dump) {
    std::cout << to_config_text(cfg);
    return kExitOk;
  }
  const int code = run_experiment(cfg, std::cerr);
  if (code == kExitOk) std::cerr << "wrote " << cfg.output << "/{data.csv,summary.txt,plot.gp}\n";
  return code;
}
