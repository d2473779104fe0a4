#pragma once

#include <cmath>
#include <vector>

#include "ptx/data_model.hpp"
#include "ptx/estimators.hpp"

namespace ptx_test {

// Delta-method Monte Carlo standard errors for the ratio-of-means
// estimators evaluated at fixed (true) nuisance values. Used to scale the
// sampling-bridge comparisons against the enumerated truth.
inline double se_ratio_of_means(const std::vector<double>& num,
                                const std::vector<double>& den, double tau) {
  const std::size_t n = num.size();
  double dbar = 0.0;
  for (double d : den) dbar += d;
  dbar /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inf = (num[i] - tau * den[i]) / dbar;
    ss += inf * inf;
  }
  return std::sqrt(ss / static_cast<double>(n) / static_cast<double>(n));
}

inline double se_plugin(const ptx::ValidatedDataset& d, const ptx::NuisanceValues& nu,
                        double tau) {
  std::vector<double> num(d.n()), den(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    den[i] = (nu.p1[i] - nu.p0[i]) * (1.0 - nu.rho[i]);
    num[i] = den[i] * (nu.mu11[i] - nu.mu00[i]);
  }
  return se_ratio_of_means(num, den, tau);
}

inline double se_om(const ptx::ValidatedDataset& d, const ptx::NuisanceValues& nu,
                    double tau) {
  std::vector<double> num(d.n()), den(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    den[i] = d.r(i) ? 0.0 : nu.p1[i] - nu.p0[i];
    num[i] = den[i] * (nu.mu11[i] - nu.mu00[i]);
  }
  return se_ratio_of_means(num, den, tau);
}

inline double se_ipw_hajek(const ptx::ValidatedDataset& d, const ptx::NuisanceValues& nu) {
  const std::size_t n = d.n();
  std::vector<double> w1(n, 0.0), w0(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!d.r(i)) continue;
    const double e10 = nu.p1[i] - nu.p0[i];
    const double transport = (1.0 - nu.rho[i]) / nu.rho[i];
    if (d.a(i) == 1 && d.c(i) == 1) w1[i] = e10 / nu.p1[i] / nu.pi[i] * transport;
    if (d.a(i) == 0 && d.c(i) == 0)
      w0[i] = e10 / (1.0 - nu.p0[i]) / (1.0 - nu.pi[i]) * transport;
  }
  double s1 = 0.0, s1y = 0.0, s0 = 0.0, s0y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s1 += w1[i];
    s0 += w0[i];
    if (d.r(i)) {
      s1y += w1[i] * d.y(i);
      s0y += w0[i] * d.y(i);
    }
  }
  const double m1 = s1y / s1, m0 = s0y / s0;
  const double w1bar = s1 / static_cast<double>(n), w0bar = s0 / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inf = 0.0;
    if (d.r(i)) inf = w1[i] * (d.y(i) - m1) / w1bar - w0[i] * (d.y(i) - m0) / w0bar;
    ss += inf * inf;
  }
  return std::sqrt(ss / static_cast<double>(n) / static_cast<double>(n));
}

}  // namespace ptx_test
