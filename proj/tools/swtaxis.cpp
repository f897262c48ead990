#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "swtaxis/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace swtaxis;
  CLI::App app{"Homogenized predator-prey taxis under short-wave signals"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  int threads = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  const char* names[] = {"cell", "drift", "tensor", "stability", "neutral", "simulate", "validate"};
  const char* help[] = {"solve one cell problem: phi*, phi_i, residuals",
                        "drift against the slow gradient or the signal speed",
                        "transport tensor, closed form and numeric",
                        "single-point stability record",
                        "neutral curves on the critical slice and signal scenarios",
                        "slow or full trajectory",
                        "twin-simulation convergence study"};
  for (int i = 0; i < 7; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "seed recorded with the run");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::exit_config;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  set_thread_count(threads);
  cli::RunConfig cfg;
  try {
    cfg = cli::load_config(config_path);
    cli::apply_env_overrides(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_config;
  }
  if (seed_given) cfg.seed = seed;
  try {
    return cli::run_command(command, cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_failure;
  }
}
