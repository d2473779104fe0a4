#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ptx/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transported principal causal effect estimation"};
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Estimate effects from a CSV dataset");
  std::string data_path;
  ptx::AnalysisConfig config;
  std::string trim_arg, feature_mode = "identity";
  analyze->add_option("--data", data_path, "CSV file with header r,a,c,y,x1,...,xp")
      ->required();
  analyze->add_option("--estimator", config.estimator, "plugin|ipw|om|eif|all")
      ->check(CLI::IsMember({"plugin", "ipw", "om", "eif", "all"}))
      ->capture_default_str();
  analyze->add_option("--folds", config.folds, "Cross-fitting folds for the EIF estimator")
      ->capture_default_str();
  analyze->add_flag("--one-sided", config.one_sided,
                    "One-sided noncompliance: p0 is forced to 0");
  analyze->add_option("--trim", trim_arg,
                      "Drop units with participation probability outside LO,HI");
  analyze->add_option("--bootstrap", config.bootstrap,
                      "Bootstrap resamples for plugin/ipw/om standard errors");
  analyze->add_option("--feature-mode", feature_mode, "correct|misspecified|identity")
      ->check(CLI::IsMember({"correct", "misspecified", "identity"}))
      ->capture_default_str();
  analyze->add_option("--seed", config.seed, "RNG seed")->envname("PTX_SEED");
  analyze->add_option("--clip-delta", config.clip_delta,
                      "Probability clipping bound")
      ->capture_default_str();
  analyze->add_option("--threads", config.threads, "Bootstrap worker threads (0 = all)")
      ->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a simulation grid");
  std::string grid_path, out_path;
  unsigned sim_threads = 0;
  simulate->add_option("--config", grid_path, "Grid config JSON")->required();
  simulate->add_option("--out", out_path, "Output CSV path")->required();
  simulate->add_option("--threads", sim_threads, "Worker threads (0 = all)")
      ->capture_default_str();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Verify identification identities exactly");
  std::size_t worlds = 20;
  std::uint64_t oracle_seed = 0;
  double tol = 1e-10;
  bool oracle_one_sided = false;
  oracle->add_option("--worlds", worlds, "Number of random worlds")->capture_default_str();
  oracle->add_option("--seed", oracle_seed, "RNG seed")->envname("PTX_SEED");
  oracle->add_option("--tol", tol, "Gap tolerance")->capture_default_str();
  oracle->add_flag("--one-sided", oracle_one_sided, "Generate one-sided worlds");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) {
    if (!trim_arg.empty()) {
      auto comma = trim_arg.find(',');
      try {
        if (comma == std::string::npos) throw std::invalid_argument("missing comma");
        config.trim = {std::stod(trim_arg.substr(0, comma)),
                       std::stod(trim_arg.substr(comma + 1))};
      } catch (const std::exception&) {
        std::cerr << "analyze: --trim expects LO,HI (e.g. 0.10,0.90)\n";
        return 2;
      }
    }
    config.feature_mode = ptx::feature_mode_from_string(feature_mode);
    return ptx::run_analyze(data_path, config, std::cout, std::cerr);
  }
  if (simulate->parsed())
    return ptx::run_simulate(grid_path, out_path, sim_threads, std::cout, std::cerr);
  return ptx::run_oracle(worlds, oracle_seed, tol, oracle_one_sided, std::cout,
                         std::cerr);
}
