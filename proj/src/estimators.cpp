#include "ptx/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "ptx/errors.hpp"
#include "ptx/parallel.hpp"
#include "ptx/rng.hpp"

namespace ptx {

namespace {

constexpr double kDenomFloor = 1e-12;

void check_aligned(const ValidatedDataset& dataset, const NuisanceValues& nuisances) {
  if (nuisances.n() != dataset.n())
    throw DimensionError("nuisance values do not cover the dataset");
}

Estimate base_estimate(const ValidatedDataset& dataset, Method method, bool one_sided) {
  Estimate e;
  e.method = method;
  e.n_trial = dataset.n_trial();
  e.n_target = dataset.n_target();
  e.one_sided = one_sided;
  return e;
}

// Type-7 (linear interpolation) sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t m = sorted.size();
  double h = q * static_cast<double>(m - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= m) return sorted[m - 1];
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

Method method_from_string(const std::string& s) {
  if (s == "plugin") return Method::PlugIn;
  if (s == "ipw") return Method::IPW;
  if (s == "om") return Method::OM;
  if (s == "eif") return Method::EIF;
  throw Error("unknown estimator: " + s);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::PlugIn: return "plugin";
    case Method::IPW: return "ipw";
    case Method::OM: return "om";
    default: return "eif";
  }
}

Estimate estimate_plugin(const ValidatedDataset& dataset, const NuisanceValues& nuisances) {
  check_aligned(dataset, nuisances);
  const std::size_t n = dataset.n();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = (nuisances.p1[i] - nuisances.p0[i]) * (1.0 - nuisances.rho[i]);
    num += w * (nuisances.mu11[i] - nuisances.mu00[i]);
    den += w;
  }
  num /= static_cast<double>(n);
  den /= static_cast<double>(n);
  if (std::abs(den) < kDenomFloor)
    throw DegenerateDenominator("plug-in: complier-in-target mass is zero");
  Estimate e = base_estimate(dataset, Method::PlugIn, nuisances.one_sided);
  e.tau_hat = num / den;
  return e;
}

Estimate estimate_ipw(const ValidatedDataset& dataset, const NuisanceValues& nuisances,
                      bool hajek) {
  check_aligned(dataset, nuisances);
  const std::size_t n = dataset.n();
  double sum_w1 = 0.0, sum_w1y = 0.0, sum_w0 = 0.0, sum_w0y = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p1 = nuisances.p1[i], p0 = nuisances.p0[i];
    const double rho = nuisances.rho[i], pi = nuisances.pi[i];
    const double e10 = p1 - p0;
    den += e10 * (1.0 - rho);
    if (!dataset.r(i)) continue;
    const double transport = (1.0 - rho) / rho;
    if (dataset.a(i) == 1 && dataset.c(i) == 1) {
      double w = (e10 / p1) / pi * transport;
      sum_w1 += w;
      sum_w1y += w * dataset.y(i);
    } else if (dataset.a(i) == 0 && dataset.c(i) == 0) {
      double w = (e10 / (1.0 - p0)) / (1.0 - pi) * transport;
      sum_w0 += w;
      sum_w0y += w * dataset.y(i);
    }
  }
  Estimate e = base_estimate(dataset, Method::IPW, nuisances.one_sided);
  if (hajek) {
    if (std::abs(sum_w1) < kDenomFloor || std::abs(sum_w0) < kDenomFloor)
      throw DegenerateDenominator("ipw: an arm's weight sum is zero");
    e.tau_hat = sum_w1y / sum_w1 - sum_w0y / sum_w0;
  } else {
    den /= static_cast<double>(n);
    if (std::abs(den) < kDenomFloor)
      throw DegenerateDenominator("ipw: complier-in-target mass is zero");
    e.tau_hat = (sum_w1y - sum_w0y) / static_cast<double>(n) / den;
  }
  return e;
}

Estimate estimate_om(const ValidatedDataset& dataset, const NuisanceValues& nuisances) {
  check_aligned(dataset, nuisances);
  const std::size_t n = dataset.n();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dataset.r(i)) continue;
    double w = nuisances.p1[i] - nuisances.p0[i];
    num += w * (nuisances.mu11[i] - nuisances.mu00[i]);
    den += w;
  }
  num /= static_cast<double>(n);
  den /= static_cast<double>(n);
  if (std::abs(den) < kDenomFloor)
    throw DegenerateDenominator("om: complier mass among target units is zero");
  Estimate e = base_estimate(dataset, Method::OM, nuisances.one_sided);
  e.tau_hat = num / den;
  return e;
}

EifTerms compute_eif_terms(const ValidatedDataset& dataset, const NuisanceValues& nuisances) {
  check_aligned(dataset, nuisances);
  const std::size_t n = dataset.n();
  EifTerms terms;
  terms.phi1.resize(n);
  terms.phi0.resize(n);
  terms.lambda.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double pi = nuisances.pi[i], rho = nuisances.rho[i];
    const double p1 = nuisances.p1[i], p0 = nuisances.p0[i];
    const double mu11 = nuisances.mu11[i], mu00 = nuisances.mu00[i];
    const double e10 = p1 - p0;
    const double omr = 1.0 - rho;

    // psi_f for f of (Y, C) at (A=a, R=1): the trial-residual term vanishes
    // off the (A=a, R=1) cell, leaving the conditional-mean plug-in.
    double psi_yc_11 = mu11 * p1;
    double psi_c_11 = p1;
    double psi_c_01 = p0;
    double psi_1mc_11 = 1.0 - p1;
    double psi_1mc_01 = 1.0 - p0;
    double psi_y1mc_01 = mu00 * (1.0 - p0);
    if (dataset.r(i)) {
      const double y = dataset.y(i);
      const double c = dataset.c(i);
      if (dataset.a(i) == 1) {
        const double inv = 1.0 / (pi * rho);
        psi_yc_11 += (y * c - mu11 * p1) * inv;
        psi_c_11 += (c - p1) * inv;
        psi_1mc_11 += ((1.0 - c) - (1.0 - p1)) * inv;
      } else {
        const double inv = 1.0 / ((1.0 - pi) * rho);
        psi_c_01 += (c - p0) * inv;
        psi_1mc_01 += ((1.0 - c) - (1.0 - p0)) * inv;
        psi_y1mc_01 += (y * (1.0 - c) - mu00 * (1.0 - p0)) * inv;
      }
    }
    const double psi_1mr = (dataset.r(i) ? 0.0 : 1.0) - omr;

    terms.phi1[i] = e10 / p1 * omr * psi_yc_11 -
                    mu11 * omr * (psi_c_01 - (p0 / p1) * psi_c_11) +
                    e10 * psi_1mr * mu11;
    terms.phi0[i] = e10 / (1.0 - p0) * omr * psi_y1mc_01 -
                    mu00 * omr * (psi_1mc_11 - psi_1mc_01 * (1.0 - p1) / (1.0 - p0)) +
                    e10 * psi_1mr * mu00;
    terms.lambda[i] = (psi_c_11 - psi_c_01) * omr + e10 * psi_1mr;

    if (!std::isfinite(terms.phi1[i]) || !std::isfinite(terms.phi0[i]) ||
        !std::isfinite(terms.lambda[i]))
      throw NonFiniteTerm("eif term not finite at row " + std::to_string(i + 1));
  }
  return terms;
}

Estimate estimate_eif(const ValidatedDataset& dataset, const EifTerms& terms) {
  const std::size_t n = dataset.n();
  if (terms.n() != n) throw DimensionError("eif terms do not cover the dataset");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += terms.phi1[i] - terms.phi0[i];
    den += terms.lambda[i];
  }
  num /= static_cast<double>(n);
  den /= static_cast<double>(n);
  if (std::abs(den) < kDenomFloor)
    throw DegenerateDenominator("eif: mean lambda is zero");
  const double tau = num / den;

  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double centered = (terms.phi1[i] - terms.phi0[i] - tau * terms.lambda[i]) / den;
    v += centered * centered;
  }
  v /= static_cast<double>(n);

  Estimate e;
  e.method = Method::EIF;
  e.n_trial = dataset.n_trial();
  e.n_target = dataset.n_target();
  e.tau_hat = tau;
  e.se = std::sqrt(v / static_cast<double>(n));
  e.ci_low = tau - kZ975 * *e.se;
  e.ci_high = tau + kZ975 * *e.se;
  return e;
}

Estimate estimate_eif(const ValidatedDataset& dataset, const NuisanceValues& nuisances) {
  Estimate e = estimate_eif(dataset, compute_eif_terms(dataset, nuisances));
  e.one_sided = nuisances.one_sided;
  return e;
}

TrimResult trim_by_participation(const ValidatedDataset& dataset,
                                 const NuisanceValues& nuisances, double low,
                                 double high) {
  check_aligned(dataset, nuisances);
  if (!(low < high)) throw Error("trim bounds must satisfy low < high");
  std::vector<std::size_t> keep;
  keep.reserve(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i)
    if (nuisances.rho[i] >= low && nuisances.rho[i] <= high) keep.push_back(i);
  if (keep.empty()) throw EmptyPopulationError("trimming removed every unit");
  TrimResult result{dataset.select(keep), nuisances.select(keep),
                    dataset.n() - keep.size()};
  return result;
}

Estimate run_estimator(const ValidatedDataset& dataset, const EstimatorSpec& spec,
                       std::uint64_t fold_seed) {
  if (spec.method == Method::EIF) {
    FoldAssignment folds = make_folds(dataset, spec.folds, fold_seed);
    NuisanceValues nuis =
        fit_nuisances(dataset, spec.specs, folds, spec.one_sided, spec.clip_delta);
    return estimate_eif(dataset, nuis);
  }
  NuisanceValues nuis =
      fit_nuisances(dataset, spec.specs, std::nullopt, spec.one_sided, spec.clip_delta);
  switch (spec.method) {
    case Method::PlugIn: return estimate_plugin(dataset, nuis);
    case Method::IPW: return estimate_ipw(dataset, nuis, spec.hajek);
    default: return estimate_om(dataset, nuis);
  }
}

BootstrapResult bootstrap_se(const ValidatedDataset& dataset, const EstimatorSpec& spec,
                             std::size_t B, std::uint64_t seed, unsigned threads) {
  if (B < 2) throw BootstrapError("bootstrap requires B >= 2");

  std::vector<std::size_t> trial_rows, target_rows;
  for (std::size_t i = 0; i < dataset.n(); ++i)
    (dataset.r(i) ? trial_rows : target_rows).push_back(i);

  std::vector<std::optional<double>> slots(B);
  parallel_for(B, threads, [&](std::size_t b) {
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      Rng rng(seed, {0xB007u, b, attempt});
      std::vector<std::size_t> rows;
      rows.reserve(dataset.n());
      for (std::size_t k = 0; k < trial_rows.size(); ++k)
        rows.push_back(trial_rows[rng.below(trial_rows.size())]);
      for (std::size_t k = 0; k < target_rows.size(); ++k)
        rows.push_back(target_rows[rng.below(target_rows.size())]);
      try {
        ValidatedDataset resample = dataset.select(rows);
        Estimate est = run_estimator(resample, spec, derive_seed(seed, {0xF01Du, b, attempt}));
        slots[b] = est.tau_hat;
        return;
      } catch (const Error&) {
        // redraw once, then leave the slot empty
      }
    }
  });

  BootstrapResult result;
  for (const auto& s : slots) {
    if (s)
      result.estimates.push_back(*s);
    else
      ++result.n_failed;
  }
  if (result.n_failed * 10 > B)
    throw BootstrapError("more than 10% of bootstrap resamples failed (" +
                         std::to_string(result.n_failed) + " of " + std::to_string(B) + ")");
  if (result.estimates.size() < 2)
    throw BootstrapError("too few successful bootstrap resamples");

  double mean = 0.0;
  for (double v : result.estimates) mean += v;
  mean /= static_cast<double>(result.estimates.size());
  double ss = 0.0;
  for (double v : result.estimates) ss += (v - mean) * (v - mean);
  result.se = std::sqrt(ss / static_cast<double>(result.estimates.size() - 1));

  std::vector<double> sorted = result.estimates;
  std::sort(sorted.begin(), sorted.end());
  result.ci_low = quantile_sorted(sorted, 0.025);
  result.ci_high = quantile_sorted(sorted, 0.975);
  return result;
}

}  // namespace ptx
