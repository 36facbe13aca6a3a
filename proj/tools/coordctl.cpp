#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coordsim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coordctl - strong-coordination coding experiments over noisy channels"};
  app.footer("modes: validate, bounds, region, exact, montecarlo\n"
             "exit codes: 0 ok, 2 config error, 3 resource cap, 4 comparison failure");

  std::string mode;
  std::string config_path;
  std::string out_dir;
  int seeds = -1;
  std::int64_t base_seed = -1;

  app.add_option("mode", mode, "run mode")->required();
  app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seeds", seeds, "binning seed count (overrides the config)");
  app.add_option("--base-seed", base_seed, "first binning seed (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  try {
    coordsim::ExperimentConfig cfg = coordsim::load_config(config_path);
    cfg.mode = coordsim::parse_mode(mode);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seeds > 0) cfg.seeds.count = seeds;
    if (base_seed >= 0) cfg.seeds.base = static_cast<std::uint64_t>(base_seed);
    return coordsim::run_experiment(cfg, std::cout);
  } catch (const coordsim::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
