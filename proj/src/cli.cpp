#include "ptx/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptx/data_model.hpp"
#include "ptx/dgp_sim.hpp"
#include "ptx/discrete_oracle.hpp"
#include "ptx/errors.hpp"
#include "ptx/estimators.hpp"
#include "ptx/rng.hpp"

namespace ptx {

namespace {

bool is_validation_error(const Error& e) {
  return dynamic_cast<const SchemaError*>(&e) != nullptr ||
         dynamic_cast<const ConsistencyError*>(&e) != nullptr ||
         dynamic_cast<const EmptyPopulationError*>(&e) != nullptr;
}

nlohmann::json estimate_to_json(const Estimate& e) {
  nlohmann::json j;
  j["method"] = to_string(e.method);
  j["tau_hat"] = e.tau_hat;
  j["se"] = e.se ? nlohmann::json(*e.se) : nlohmann::json(nullptr);
  j["ci_low"] = e.ci_low ? nlohmann::json(*e.ci_low) : nlohmann::json(nullptr);
  j["ci_high"] = e.ci_high ? nlohmann::json(*e.ci_high) : nlohmann::json(nullptr);
  return j;
}

std::vector<Method> selected_methods(const std::string& name) {
  if (name == "all") return {Method::PlugIn, Method::IPW, Method::OM, Method::EIF};
  return {method_from_string(name)};
}

}  // namespace

int run_analyze(const std::string& data_path, const AnalysisConfig& config,
                std::ostream& out, std::ostream& err) {
  try {
    if (config.trim && !(config.trim->first < config.trim->second)) {
      err << "analyze: trim bounds must satisfy low < high\n";
      return 2;
    }
    const std::vector<Method> methods = selected_methods(config.estimator);

    ValidatedDataset data = load_dataset_file(data_path);
    NuisanceSpecs specs = NuisanceSpecs::all(config.feature_mode);

    std::size_t n_trimmed = 0;
    if (config.trim) {
      NuisanceValues rho_fit =
          fit_nuisances(data, specs, std::nullopt, config.one_sided, config.clip_delta);
      TrimResult trimmed =
          trim_by_participation(data, rho_fit, config.trim->first, config.trim->second);
      data = std::move(trimmed.dataset);
      n_trimmed = trimmed.n_trimmed;
    }

    // Full-sample fits serve plugin/IPW/OM; the EIF estimator is cross-fit.
    std::optional<NuisanceValues> full;
    for (Method m : methods) {
      if (m != Method::EIF && !full)
        full = fit_nuisances(data, specs, std::nullopt, config.one_sided,
                             config.clip_delta);
    }

    nlohmann::json estimates = nlohmann::json::array();
    for (Method m : methods) {
      Estimate e;
      if (m == Method::EIF) {
        FoldAssignment folds =
            make_folds(data, config.folds, derive_seed(config.seed, {0xF01Du}));
        NuisanceValues crossfit =
            fit_nuisances(data, specs, folds, config.one_sided, config.clip_delta);
        e = estimate_eif(data, crossfit);
        e.one_sided = config.one_sided;
      } else {
        switch (m) {
          case Method::PlugIn: e = estimate_plugin(data, *full); break;
          case Method::IPW: e = estimate_ipw(data, *full, true); break;
          default: e = estimate_om(data, *full); break;
        }
        if (config.bootstrap) {
          EstimatorSpec spec;
          spec.method = m;
          spec.one_sided = config.one_sided;
          spec.specs = specs;
          spec.folds = config.folds;
          spec.clip_delta = config.clip_delta;
          BootstrapResult bs = bootstrap_se(data, spec, *config.bootstrap, config.seed,
                                            config.threads);
          e.se = bs.se;
          e.ci_low = bs.ci_low;
          e.ci_high = bs.ci_high;
        }
      }
      e.n_trimmed = n_trimmed;
      estimates.push_back(estimate_to_json(e));
    }

    nlohmann::json report;
    report["estimates"] = std::move(estimates);
    report["n_trial"] = data.n_trial();
    report["n_target"] = data.n_target();
    report["n_trimmed"] = n_trimmed;
    if (config.one_sided) report["note"] = "one-sided mode: p0 forced to 0";
    report["config"] = {
        {"estimator", config.estimator},
        {"folds", config.folds},
        {"one_sided", config.one_sided},
        {"trim", config.trim ? nlohmann::json{config.trim->first, config.trim->second}
                             : nlohmann::json(nullptr)},
        {"bootstrap",
         config.bootstrap ? nlohmann::json(*config.bootstrap) : nlohmann::json(nullptr)},
        {"feature_mode", to_string(config.feature_mode)},
        {"seed", config.seed},
        {"clip_delta", config.clip_delta}};
    report["version"] = kVersion;
    out << report.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    err << "analyze: " << e.what() << "\n";
    return is_validation_error(e) ? 2 : 3;
  }
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 unsigned threads, std::ostream& out, std::ostream& err) {
  GridConfig config;
  try {
    std::ifstream f(config_path);
    if (!f) throw Error("cannot open config file: " + config_path);
    std::stringstream buffer;
    buffer << f.rdbuf();
    config = parse_grid_config(buffer.str());
  } catch (const Error& e) {
    err << "simulate: " << e.what() << "\n";
    return 2;
  }

  ScenarioOptions options;
  options.truth_draws = config.truth_draws;
  options.threads = threads;
  std::vector<GridRow> rows = run_grid(config.scenarios, options);

  std::ofstream csv(out_path, std::ios::binary);
  if (!csv) {
    err << "simulate: cannot write output file: " << out_path << "\n";
    return 2;
  }
  write_grid_csv(rows, csv);
  csv.close();

  // Summary: one line per scenario, estimator columns as in the result
  // tables.
  char buf[256];
  out << "ratio  trial   misspec   | bias eif/ipw/om        | rmse eif/ipw/om        | cover\n";
  for (std::size_t i = 0; i < rows.size();) {
    const GridRow& r = rows[i];
    if (r.estimator.empty()) {
      std::snprintf(buf, sizeof(buf), "%-6s %-7zu %-9s | error: %s\n",
                    to_string(r.scenario.ratio).c_str(), r.scenario.trial_size,
                    to_string(r.scenario.misspec).c_str(), r.error.c_str());
      out << buf;
      ++i;
      continue;
    }
    const GridRow& eif = rows[i];
    const GridRow& ipw = rows[i + 1];
    const GridRow& om = rows[i + 2];
    std::snprintf(buf, sizeof(buf),
                  "%-6s %-7zu %-9s | %7.3f %7.3f %7.3f | %7.3f %7.3f %7.3f | %5.3f\n",
                  to_string(r.scenario.ratio).c_str(), r.scenario.trial_size,
                  to_string(r.scenario.misspec).c_str(), eif.bias, ipw.bias, om.bias,
                  eif.rmse, ipw.rmse, om.rmse, eif.coverage.value_or(0.0));
    out << buf;
    i += 3;
  }
  return 0;
}

int run_oracle(std::size_t worlds, std::uint64_t seed, double tol, bool one_sided,
               std::ostream& out, std::ostream& err) {
  if (worlds == 0) {
    err << "oracle: need at least one world\n";
    return 2;
  }
  double worst_plugin = 0.0, worst_ipw = 0.0, worst_om = 0.0;
  EifCheckReport worst;
  for (std::size_t w = 0; w < worlds; ++w) {
    const std::size_t num_x = 1 + w % 8;
    DiscreteWorld world = random_world(num_x, derive_seed(seed, {0x0A11u, w}), one_sided);
    const double truth = enumerate_true_tau(world);
    worst_plugin = std::max(
        worst_plugin, std::abs(enumerate_identified(world, IdentFormula::PlugIn) - truth));
    worst_ipw = std::max(
        worst_ipw, std::abs(enumerate_identified(world, IdentFormula::IPW) - truth));
    worst_om = std::max(
        worst_om, std::abs(enumerate_identified(world, IdentFormula::OM) - truth));
    EifCheckReport gaps = enumerate_eif_checks(world);
    worst.mean_phi_gap = std::max(worst.mean_phi_gap, gaps.mean_phi_gap);
    worst.centering_gap_phi1 = std::max(worst.centering_gap_phi1, gaps.centering_gap_phi1);
    worst.centering_gap_phi0 = std::max(worst.centering_gap_phi0, gaps.centering_gap_phi0);
    worst.centering_gap_lambda =
        std::max(worst.centering_gap_lambda, gaps.centering_gap_lambda);
    worst.est_eqn_gap = std::max(worst.est_eqn_gap, gaps.est_eqn_gap);
  }

  char buf[128];
  auto line = [&](const char* name, double gap) {
    std::snprintf(buf, sizeof(buf), "%-28s %.3e\n", name, gap);
    out << buf;
  };
  out << "worlds: " << worlds << "  seed: " << seed << "  tol: " << tol
      << (one_sided ? "  (one-sided)\n" : "\n");
  line("worst |plugin - truth|", worst_plugin);
  line("worst |ipw - truth|", worst_ipw);
  line("worst |om - truth|", worst_om);
  line("worst |E[centered eif]|", worst.mean_phi_gap);
  line("worst phi1 centering gap", worst.centering_gap_phi1);
  line("worst phi0 centering gap", worst.centering_gap_phi0);
  line("worst lambda centering gap", worst.centering_gap_lambda);
  line("worst estimating-eq gap", worst.est_eqn_gap);

  const double overall = std::max({worst_plugin, worst_ipw, worst_om, worst.max_gap()});
  if (overall <= tol) {
    out << "PASS\n";
    return 0;
  }
  out << "FAIL: worst gap " << overall << " exceeds tol " << tol << "\n";
  (void)err;
  return 1;
}

}  // namespace ptx
