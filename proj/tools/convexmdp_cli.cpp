#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "convexmdp/runner.hpp"

namespace cli = convexmdp::cli;

int main(int argc, char** argv) {
  CLI::App app{"Bounds for convex Markov decision processes by modified value iteration"};
  app.require_subcommand(1);

  std::string solve_config, out_dir;
  auto* solve = app.add_subcommand("solve", "Run the lower and/or upper scheme and write tables");
  solve->add_option("--config", solve_config, "JSON config file")->required();
  solve->add_option("--out", out_dir, "Output directory (overrides the config)");

  std::string verify_config;
  auto* verify = app.add_subcommand("verify", "Run the oracle checks");
  verify->add_option("--config", verify_config, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (*solve) {
      const auto cfg = cli::load_config(solve_config);
      return cli::run_solve(cfg, out_dir.empty() ? cfg.output : out_dir, std::cout);
    }
    const auto cfg = cli::load_config(verify_config);
    return cli::run_verify(cfg, std::cout);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
