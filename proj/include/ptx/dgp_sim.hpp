#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptx/data_model.hpp"
#include "ptx/nuisance.hpp"

namespace ptx {

// Trial-to-total sample size ratio.
enum class Ratio { R1_21, R1_3, R1_2 };

double ratio_value(Ratio r);
Ratio ratio_from_string(const std::string& s);
std::string to_string(Ratio r);

// Which nuisance models get the Correct feature map; the rest are fit on
// the Misspecified one.
enum class Misspec { AllCorrect, NoneCorrect, OmPsCorrect, TpOmPpCorrect, TpPsPpCorrect };

Misspec misspec_from_string(const std::string& s);
std::string to_string(Misspec m);
NuisanceSpecs specs_for(Misspec m);

struct SimScenario {
  Ratio ratio = Ratio::R1_2;
  std::size_t trial_size = 2000;
  Misspec misspec = Misspec::AllCorrect;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::uint32_t k_folds = 10;

  std::size_t target_size() const;
  std::size_t n_total() const { return trial_size + target_size(); }
};

struct SimResult {
  double true_tau = 0.0;
  double bias_eif = 0.0, bias_ipw = 0.0, bias_om = 0.0;
  double rmse_eif = 0.0, rmse_ipw = 0.0, rmse_om = 0.0;
  double coverage_eif = 0.0;
  std::size_t reps_completed = 0;
  std::size_t reps_failed = 0;
  std::string first_error;
};

// Root of mean_i expit(b + lp_i) = target_prop, found by bisection on
// [-20, 20]; the mean is increasing in b so the root is unique. Throws
// BracketError when the target is unattainable inside the bracket.
double solve_balancing_intercept(std::span<const double> linear_predictors,
                                 double target_prop);

// One replication of the simulation design: X1..X4 ~ U(-2,2), X5 ~
// Bernoulli(0.55); trial membership, assignment, receipt, and outcome all
// follow the generating models, with the membership intercept re-solved on
// the realized covariate draws. Deterministic in (scenario, rep_index).
ValidatedDataset simulate_dataset(const SimScenario& scenario, std::size_t rep_index);

// Monte Carlo value of the generating estimand over fresh covariate draws
// (the membership intercept is solved on those same draws). null_effect is
// a test hook that zeroes the treatment effect.
double true_tau(const SimScenario& scenario, std::size_t mc_draws, std::uint64_t seed,
                bool null_effect = false);

struct ScenarioOptions {
  std::size_t truth_draws = 4000000;
  unsigned threads = 1;  // 0 = all hardware threads
  double clip_delta = 0.005;
};

// Runs scenario.reps replications: full-sample nuisance fits feed the IPW
// and OM estimators, K-fold cross-fitting feeds the EIF estimator, and the
// EIF confidence interval is scored against the Monte Carlo truth. Failed
// replications are excluded; more than 1% failures raises ScenarioError.
SimResult run_scenario(const SimScenario& scenario, const ScenarioOptions& options = {});

struct GridRow {
  SimScenario scenario;
  std::string estimator;  // "eif", "ipw", "om"; empty on scenario failure
  double bias = 0.0, rmse = 0.0;
  std::optional<double> coverage;
  std::size_t reps = 0;
  double true_tau = 0.0;  // not part of the CSV table
  std::string error;
};

// Runs every scenario (replications execute in parallel across the whole
// grid) and emits three estimator rows per scenario, or one error row.
std::vector<GridRow> run_grid(const std::vector<SimScenario>& scenarios,
                              const ScenarioOptions& options = {});

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out);

struct GridConfig {
  std::vector<SimScenario> scenarios;
  std::size_t truth_draws = 4000000;
};

// JSON grid document: {"seed": S, "truth_draws": N, "scenarios": [{"ratio":
// "1/2", "trial_size": 2000, "misspec": "all", "reps": 500, "folds": 10,
// "seed": optional}]}. Scenario seeds default to a value derived from the
// master seed and the scenario index.
GridConfig parse_grid_config(const std::string& json_text);

}  // namespace ptx
