#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptx/data_model.hpp"
#include "ptx/nuisance.hpp"

namespace ptx {

enum class Method { PlugIn, IPW, OM, EIF };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

// 97.5% standard normal quantile, for 95% confidence intervals.
inline constexpr double kZ975 = 1.959964;

struct Estimate {
  double tau_hat = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low, ci_high;
  Method method = Method::PlugIn;
  std::size_t n_trial = 0, n_target = 0, n_trimmed = 0;
  bool one_sided = false;
};

// Per-unit uncentered influence-function components: phi1 and phi0 estimate
// the numerator pieces E[e10(X){1-rho(X)}mu_aa(X)], lambda the denominator
// E[e10(X){1-rho(X)}].
struct EifTerms {
  std::vector<double> phi1, phi0, lambda;
  std::size_t n() const { return lambda.size(); }
};

// tau = P_n[(p1-p0)(1-rho)(mu11-mu00)] / P_n[(p1-p0)(1-rho)] over all units.
Estimate estimate_plugin(const ValidatedDataset& dataset, const NuisanceValues& nuisances);

// Weighted-outcome contrast. With hajek=true (default) each arm's weighted
// mean is normalized by that arm's weight sum; otherwise both arms divide by
// the estimated complier-in-target mass P_n[(p1-p0)(1-rho)].
Estimate estimate_ipw(const ValidatedDataset& dataset, const NuisanceValues& nuisances,
                      bool hajek = true);

// tau = P_n[(p1-p0)(1-R)(mu11-mu00)] / P_n[(p1-p0)(1-R)]; target units only.
Estimate estimate_om(const ValidatedDataset& dataset, const NuisanceValues& nuisances);

// Evaluates the per-unit uncentered influence components. Throws
// NonFiniteTerm when an output is not finite (a clipping/config bug).
EifTerms compute_eif_terms(const ValidatedDataset& dataset, const NuisanceValues& nuisances);

// tau = mean(phi1-phi0)/mean(lambda), with the influence-function standard
// error se = sqrt(P_n[phi_hat^2]/n) where phi_hat is the estimated centered
// EIF, and the 95% CI tau +- 1.959964*se.
Estimate estimate_eif(const ValidatedDataset& dataset, const EifTerms& terms);
Estimate estimate_eif(const ValidatedDataset& dataset, const NuisanceValues& nuisances);

struct TrimResult {
  ValidatedDataset dataset;
  NuisanceValues nuisances;
  std::size_t n_trimmed = 0;
};

// Drops units whose participation probability falls outside [low, high].
TrimResult trim_by_participation(const ValidatedDataset& dataset,
                                 const NuisanceValues& nuisances, double low,
                                 double high);

// Everything needed to recompute an estimate from raw data, as the
// bootstrap must do inside each resample.
struct EstimatorSpec {
  Method method = Method::PlugIn;
  bool hajek = true;
  bool one_sided = false;
  NuisanceSpecs specs;
  std::uint32_t folds = 10;  // cross-fitting folds, EIF only
  double clip_delta = 0.005;
};

Estimate run_estimator(const ValidatedDataset& dataset, const EstimatorSpec& spec,
                       std::uint64_t fold_seed = 0);

struct BootstrapResult {
  double se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  std::size_t n_failed = 0;
  std::vector<double> estimates;  // in resample order, failures skipped
};

// Stratified nonparametric bootstrap: trial and target rows are resampled
// separately with replacement, preserving n_trial and n_target; nuisances
// are refit inside every resample. A failed resample is redrawn once and
// then counted; more than 10% failures raises BootstrapError.
BootstrapResult bootstrap_se(const ValidatedDataset& dataset, const EstimatorSpec& spec,
                             std::size_t B, std::uint64_t seed, unsigned threads = 1);

}  // namespace ptx
