#include "ptx/dgp_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ptx/errors.hpp"
#include "ptx/estimators.hpp"
#include "ptx/parallel.hpp"
#include "ptx/rng.hpp"

namespace ptx {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Stream labels for seed derivation.
constexpr std::uint64_t kStreamCovariates = 1;
constexpr std::uint64_t kStreamMembership = 2;
constexpr std::uint64_t kStreamTreatment = 3;
constexpr std::uint64_t kStreamCompliance = 4;
constexpr std::uint64_t kStreamOutcome = 5;
constexpr std::uint64_t kStreamFolds = 6;
constexpr std::uint64_t kStreamTruth = 7;

struct Covariates {
  std::vector<double> x;    // n x 5 row-major
  std::vector<double> lp3;  // C~1 + C~2 + C~3 (membership predictor)
  std::vector<double> s4;   // C~1 + ... + C~4
};

double tilde(double v) { return (v * v - 1.0) / kSqrt2; }

Covariates draw_covariates(std::size_t n, Rng& rng) {
  Covariates cov;
  cov.x.resize(n * 5);
  cov.lp3.resize(n);
  cov.s4.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* xi = cov.x.data() + i * 5;
    for (int j = 0; j < 4; ++j) xi[j] = rng.uniform(-2.0, 2.0);
    xi[4] = rng.bernoulli(0.55) ? 1.0 : 0.0;
    const double t1 = tilde(xi[0]), t2 = tilde(xi[1]), t3 = tilde(xi[2]), t4 = tilde(xi[3]);
    cov.lp3[i] = t1 + t2 + t3;
    cov.s4[i] = cov.lp3[i] + t4;
  }
  return cov;
}

double gen_pi(double s4) { return expit(0.4 * s4); }
double gen_p1() { return expit(0.8); }
double gen_p0(double s4) { return expit(0.4 * s4); }
double gen_mu(int a, int c, double s4, double x5) {
  return (1.0 + a + c) / 4.0 * (s4 + x5);
}

struct RepOutcome {
  double eif = 0.0, ipw = 0.0, om = 0.0;
  bool covered = false;
};

RepOutcome run_replication(const SimScenario& scenario, std::size_t rep, double truth,
                           double clip_delta) {
  ValidatedDataset data = simulate_dataset(scenario, rep);
  NuisanceSpecs specs = specs_for(scenario.misspec);

  RepOutcome out;
  NuisanceValues full = fit_nuisances(data, specs, std::nullopt, false, clip_delta);
  out.ipw = estimate_ipw(data, full, /*hajek=*/true).tau_hat;
  out.om = estimate_om(data, full).tau_hat;

  FoldAssignment folds =
      make_folds(data, scenario.k_folds,
                 derive_seed(scenario.seed, {kStreamFolds, rep}));
  NuisanceValues crossfit = fit_nuisances(data, specs, folds, false, clip_delta);
  Estimate eif = estimate_eif(data, crossfit);
  out.eif = eif.tau_hat;
  out.covered = *eif.ci_low <= truth && truth <= *eif.ci_high;
  return out;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

}  // namespace

double ratio_value(Ratio r) {
  switch (r) {
    case Ratio::R1_21: return 1.0 / 21.0;
    case Ratio::R1_3: return 1.0 / 3.0;
    default: return 0.5;
  }
}

Ratio ratio_from_string(const std::string& s) {
  if (s == "1/21") return Ratio::R1_21;
  if (s == "1/3") return Ratio::R1_3;
  if (s == "1/2") return Ratio::R1_2;
  throw Error("unknown ratio: " + s + " (expected 1/21, 1/3, or 1/2)");
}

std::string to_string(Ratio r) {
  switch (r) {
    case Ratio::R1_21: return "1/21";
    case Ratio::R1_3: return "1/3";
    default: return "1/2";
  }
}

Misspec misspec_from_string(const std::string& s) {
  if (s == "all") return Misspec::AllCorrect;
  if (s == "none") return Misspec::NoneCorrect;
  if (s == "om_ps") return Misspec::OmPsCorrect;
  if (s == "tp_om_pp") return Misspec::TpOmPpCorrect;
  if (s == "tp_ps_pp") return Misspec::TpPsPpCorrect;
  throw Error("unknown misspecification setting: " + s);
}

std::string to_string(Misspec m) {
  switch (m) {
    case Misspec::AllCorrect: return "all";
    case Misspec::NoneCorrect: return "none";
    case Misspec::OmPsCorrect: return "om_ps";
    case Misspec::TpOmPpCorrect: return "tp_om_pp";
    default: return "tp_ps_pp";
  }
}

NuisanceSpecs specs_for(Misspec m) {
  auto pick = [](bool correct) {
    return correct ? FeatureMode::Correct : FeatureMode::Misspecified;
  };
  NuisanceSpecs s;
  switch (m) {
    case Misspec::AllCorrect:
      s = {pick(true), pick(true), pick(true), pick(true)};
      break;
    case Misspec::NoneCorrect:
      s = {pick(false), pick(false), pick(false), pick(false)};
      break;
    case Misspec::OmPsCorrect:
      s = {pick(false), pick(false), pick(true), pick(true)};
      break;
    case Misspec::TpOmPpCorrect:
      s = {pick(true), pick(true), pick(false), pick(true)};
      break;
    case Misspec::TpPsPpCorrect:
      s = {pick(true), pick(true), pick(true), pick(false)};
      break;
  }
  return s;
}

std::size_t SimScenario::target_size() const {
  const double r = ratio_value(ratio);
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(trial_size) * (1.0 - r) / r));
}

double solve_balancing_intercept(std::span<const double> linear_predictors,
                                 double target_prop) {
  if (!(target_prop > 0.0 && target_prop < 1.0))
    throw BracketError("target proportion must lie in (0, 1)");
  const double inv_n = 1.0 / static_cast<double>(linear_predictors.size());
  auto mean_at = [&](double b) {
    double s = 0.0;
    for (double lp : linear_predictors) s += expit(b + lp);
    return s * inv_n;
  };
  double lo = -20.0, hi = 20.0;
  double flo = mean_at(lo), fhi = mean_at(hi);
  if (flo > target_prop || fhi < target_prop)
    throw BracketError("balancing intercept: target proportion unattainable in [-20, 20]");
  double mid = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    double f = mean_at(mid);
    if (std::abs(f - target_prop) <= 1e-10) return mid;
    if (f < target_prop)
      lo = mid;
    else
      hi = mid;
  }
  return mid;
}

ValidatedDataset simulate_dataset(const SimScenario& scenario, std::size_t rep_index) {
  const std::size_t n = scenario.n_total();
  Rng cov_rng(scenario.seed, {kStreamCovariates, rep_index});
  Covariates cov = draw_covariates(n, cov_rng);

  const double target_prop =
      static_cast<double>(scenario.trial_size) / static_cast<double>(n);
  const double beta0 = solve_balancing_intercept(cov.lp3, target_prop);

  Rng member_rng(scenario.seed, {kStreamMembership, rep_index});
  Rng treat_rng(scenario.seed, {kStreamTreatment, rep_index});
  Rng comply_rng(scenario.seed, {kStreamCompliance, rep_index});
  Rng outcome_rng(scenario.seed, {kStreamOutcome, rep_index});

  std::vector<std::uint8_t> r(n), a(n, 0), c(n, 0);
  std::vector<double> y(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = member_rng.bernoulli(expit(beta0 + cov.lp3[i])) ? 1 : 0;
    if (!r[i]) continue;
    a[i] = treat_rng.bernoulli(gen_pi(cov.s4[i])) ? 1 : 0;
    const double pa = a[i] ? gen_p1() : gen_p0(cov.s4[i]);
    c[i] = comply_rng.bernoulli(pa) ? 1 : 0;
    y[i] = gen_mu(a[i], c[i], cov.s4[i], cov.x[i * 5 + 4]) + outcome_rng.normal();
  }
  return ValidatedDataset::from_columns(std::move(r), std::move(a), std::move(c),
                                        std::move(y), std::move(cov.x), 5);
}

double true_tau(const SimScenario& scenario, std::size_t mc_draws, std::uint64_t seed,
                bool null_effect) {
  // Two passes over one regenerated stream keep memory at a single array.
  std::vector<double> lp3(mc_draws);
  {
    Rng rng(seed, {kStreamTruth, 1});
    for (std::size_t i = 0; i < mc_draws; ++i) {
      const double t1 = tilde(rng.uniform(-2.0, 2.0));
      const double t2 = tilde(rng.uniform(-2.0, 2.0));
      const double t3 = tilde(rng.uniform(-2.0, 2.0));
      rng.uniform(-2.0, 2.0);  // X4, redrawn in pass two
      rng.uniform01();         // X5
      lp3[i] = t1 + t2 + t3;
    }
  }
  const double target_prop = static_cast<double>(scenario.trial_size) /
                             static_cast<double>(scenario.n_total());
  const double beta0 = solve_balancing_intercept(lp3, target_prop);
  lp3.clear();
  lp3.shrink_to_fit();

  Rng rng(seed, {kStreamTruth, 1});
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < mc_draws; ++i) {
    const double t1 = tilde(rng.uniform(-2.0, 2.0));
    const double t2 = tilde(rng.uniform(-2.0, 2.0));
    const double t3 = tilde(rng.uniform(-2.0, 2.0));
    const double t4 = tilde(rng.uniform(-2.0, 2.0));
    const double x5 = rng.uniform01() < 0.55 ? 1.0 : 0.0;
    const double s4 = t1 + t2 + t3 + t4;
    const double w = (gen_p1() - gen_p0(s4)) * (1.0 - expit(beta0 + t1 + t2 + t3));
    const double effect =
        null_effect ? 0.0 : gen_mu(1, 1, s4, x5) - gen_mu(0, 0, s4, x5);
    num += w * effect;
    den += w;
  }
  return num / den;
}

SimResult run_scenario(const SimScenario& scenario, const ScenarioOptions& options) {
  std::vector<GridRow> rows = run_grid({scenario}, options);
  if (!rows.empty() && !rows.front().error.empty())
    throw ScenarioError(rows.front().error);
  SimResult res;
  for (const GridRow& row : rows) {
    res.reps_completed = row.reps;
    res.true_tau = row.true_tau;
    if (row.estimator == "eif") {
      res.bias_eif = row.bias;
      res.rmse_eif = row.rmse;
      res.coverage_eif = *row.coverage;
    } else if (row.estimator == "ipw") {
      res.bias_ipw = row.bias;
      res.rmse_ipw = row.rmse;
    } else if (row.estimator == "om") {
      res.bias_om = row.bias;
      res.rmse_om = row.rmse;
    }
  }
  res.reps_failed = scenario.reps - res.reps_completed;
  return res;
}

std::vector<GridRow> run_grid(const std::vector<SimScenario>& scenarios,
                              const ScenarioOptions& options) {
  if (scenarios.empty()) throw Error("run_grid: empty scenario list");

  // Ground truth per scenario, then one flat task list over (scenario, rep).
  std::vector<double> truths(scenarios.size());
  std::vector<std::string> truth_errors(scenarios.size());
  parallel_for(scenarios.size(), options.threads, [&](std::size_t s) {
    try {
      truths[s] = true_tau(scenarios[s], options.truth_draws,
                           derive_seed(scenarios[s].seed, {kStreamTruth}));
    } catch (const Error& e) {
      truth_errors[s] = e.what();
    }
  });

  struct Task {
    std::size_t scenario, rep;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<std::optional<RepOutcome>>> outcomes(scenarios.size());
  std::vector<std::vector<std::string>> rep_errors(scenarios.size());
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    outcomes[s].resize(scenarios[s].reps);
    rep_errors[s].resize(scenarios[s].reps);
    if (!truth_errors[s].empty()) continue;
    for (std::size_t rep = 0; rep < scenarios[s].reps; ++rep) tasks.push_back({s, rep});
  }

  parallel_for(tasks.size(), options.threads, [&](std::size_t t) {
    const Task& task = tasks[t];
    try {
      outcomes[task.scenario][task.rep] = run_replication(
          scenarios[task.scenario], task.rep, truths[task.scenario], options.clip_delta);
    } catch (const Error& e) {
      rep_errors[task.scenario][task.rep] = e.what();
    }
  });

  std::vector<GridRow> rows;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const SimScenario& scenario = scenarios[s];
    GridRow base;
    base.scenario = scenario;
    base.true_tau = truths[s];

    if (!truth_errors[s].empty()) {
      base.error = truth_errors[s];
      rows.push_back(base);
      continue;
    }

    double sum_e = 0, sum_i = 0, sum_o = 0, ss_e = 0, ss_i = 0, ss_o = 0;
    std::size_t completed = 0, covered = 0;
    std::string first_error;
    for (std::size_t rep = 0; rep < scenario.reps; ++rep) {
      const auto& out = outcomes[s][rep];
      if (!out) {
        if (first_error.empty()) first_error = rep_errors[s][rep];
        continue;
      }
      ++completed;
      const double de = out->eif - truths[s], di = out->ipw - truths[s],
                   dom = out->om - truths[s];
      sum_e += de;
      ss_e += de * de;
      sum_i += di;
      ss_i += di * di;
      sum_o += dom;
      ss_o += dom * dom;
      covered += out->covered ? 1 : 0;
    }
    const std::size_t failed = scenario.reps - completed;
    if (failed * 100 > scenario.reps || completed == 0) {
      base.error = "too many failed replications (" + std::to_string(failed) + " of " +
                   std::to_string(scenario.reps) + "): " + first_error;
      rows.push_back(base);
      continue;
    }
    const double m = static_cast<double>(completed);
    auto push = [&](const char* name, double bias, double rmse,
                    std::optional<double> coverage) {
      GridRow row = base;
      row.estimator = name;
      row.bias = bias;
      row.rmse = rmse;
      row.coverage = coverage;
      row.reps = completed;
      rows.push_back(std::move(row));
    };
    push("eif", sum_e / m, std::sqrt(ss_e / m),
         static_cast<double>(covered) / m);
    push("ipw", sum_i / m, std::sqrt(ss_i / m), std::nullopt);
    push("om", sum_o / m, std::sqrt(ss_o / m), std::nullopt);
  }
  return rows;
}

void write_grid_csv(const std::vector<GridRow>& rows, std::ostream& out) {
  out << "ratio,trial_size,misspec,estimator,bias,rmse,coverage,reps,error\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const GridRow& row : rows) {
    out << to_string(row.scenario.ratio) << ',' << row.scenario.trial_size << ','
        << to_string(row.scenario.misspec) << ',' << row.estimator << ',';
    if (!row.estimator.empty()) {
      out << fmt(row.bias) << ',' << fmt(row.rmse) << ',';
      if (row.coverage) out << fmt(*row.coverage);
      out << ',' << row.reps << ',';
    } else {
      out << ",,,,";
    }
    out << csv_quote(row.error) << "\n";
  }
}

GridConfig parse_grid_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("grid config is not valid JSON: ") + e.what());
  }
  GridConfig config;
  const std::uint64_t master_seed = j.value("seed", std::uint64_t{0});
  config.truth_draws = j.value("truth_draws", std::size_t{4000000});
  if (!j.contains("scenarios") || !j["scenarios"].is_array() || j["scenarios"].empty())
    throw Error("grid config must contain a non-empty 'scenarios' array");
  std::size_t index = 0;
  for (const auto& sj : j["scenarios"]) {
    SimScenario s;
    s.ratio = ratio_from_string(sj.at("ratio").get<std::string>());
    s.trial_size = sj.at("trial_size").get<std::size_t>();
    s.misspec = misspec_from_string(sj.at("misspec").get<std::string>());
    s.reps = sj.at("reps").get<std::size_t>();
    s.k_folds = sj.value("folds", std::uint32_t{10});
    s.seed = sj.contains("seed") ? sj["seed"].get<std::uint64_t>()
                                 : derive_seed(master_seed, {0x5CE9u, index});
    if (s.reps == 0) throw Error("scenario reps must be positive");
    config.scenarios.push_back(s);
    ++index;
  }
  return config;
}

}  // namespace ptx
