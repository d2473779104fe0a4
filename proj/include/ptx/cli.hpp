#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>

#include "ptx/glm.hpp"

namespace ptx {

inline constexpr const char* kVersion = "0.1.0";

struct AnalysisConfig {
  std::string estimator = "all";  // plugin | ipw | om | eif | all
  std::uint32_t folds = 10;
  bool one_sided = false;
  std::optional<std::pair<double, double>> trim;
  std::optional<std::size_t> bootstrap;
  FeatureMode feature_mode = FeatureMode::Identity;
  std::uint64_t seed = 0;
  double clip_delta = 0.005;
  unsigned threads = 1;
};

// Loads the CSV at data_path, optionally trims on fitted participation
// probabilities, runs the selected estimators, and writes a JSON report to
// `out`. Returns 0 on success, 2 on schema/validation errors, 3 on
// estimation errors; messages go to `err`.
int run_analyze(const std::string& data_path, const AnalysisConfig& config,
                std::ostream& out, std::ostream& err);

// Runs the simulation grid described by the JSON file at config_path,
// writes the long-format CSV to out_path, and prints a per-scenario summary
// table to `out`. Returns 0 (per-scenario failures are recorded in-table) or
// 2 on config errors.
int run_simulate(const std::string& config_path, const std::string& out_path,
                 unsigned threads, std::ostream& out, std::ostream& err);

// Generates seeded random worlds and reports the worst identification and
// EIF gaps across them. Returns 0 iff every gap is at most tol, else 1.
int run_oracle(std::size_t worlds, std::uint64_t seed, double tol, bool one_sided,
               std::ostream& out, std::ostream& err);

}  // namespace ptx
