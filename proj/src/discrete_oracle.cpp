#include "ptx/discrete_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ptx/errors.hpp"
#include "ptx/rng.hpp"

namespace ptx {

namespace {

// Neumaier compensated accumulator; the enumeration identities are checked
// at 1e-12, below the drift of naive summation over many cells.
class KahanSum {
public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0, comp_ = 0.0;
};

// P(Y=1 | A=a, C=c, R=1, cell): mixtures over the strata consistent with
// the observed (a, c) cell.
double outcome_prob(const WorldCell& w, int a, int c) {
  if (a == 1 && c == 1) return (w.q11 * w.m1_u11 + w.q10 * w.m1_u10) / (w.q11 + w.q10);
  if (a == 1 && c == 0) return w.m1_u00;
  if (a == 0 && c == 1) return w.m0_u11;
  return (w.q10 * w.m0_u10 + w.q00 * w.m0_u00) / (w.q10 + w.q00);
}

double receipt_prob(const WorldCell& w, int a) {
  return a == 1 ? w.q11 + w.q10 : w.q11;
}

// Enumerates the full observed-data support: the target point (r=0) and the
// eight trial points (a, c, y). visit(point_prob, nu, r, a, c, y).
template <typename Visitor>
void for_each_observed_point(const DiscreteWorld& world, Visitor&& visit) {
  for (const WorldCell& w : world.cells) {
    const ImpliedNuisances nu = implied_nuisances(w);
    visit(w.prob * (1.0 - w.rho), nu, 0, 0, 0, 0.0);
    for (int a = 0; a <= 1; ++a) {
      const double pa = w.prob * w.rho * (a ? w.pi : 1.0 - w.pi);
      for (int c = 0; c <= 1; ++c) {
        const double pc = c ? receipt_prob(w, a) : 1.0 - receipt_prob(w, a);
        if (pc == 0.0) continue;
        const double py1 = outcome_prob(w, a, c);
        visit(pa * pc * py1, nu, 1, a, c, 1.0);
        visit(pa * pc * (1.0 - py1), nu, 1, a, c, 0.0);
      }
    }
  }
}

}  // namespace

double EifCheckReport::max_gap() const {
  return std::max({mean_phi_gap, centering_gap_phi1, centering_gap_phi0,
                   centering_gap_lambda, est_eqn_gap});
}

ImpliedNuisances implied_nuisances(const WorldCell& cell) {
  ImpliedNuisances nu;
  nu.pi = cell.pi;
  nu.rho = cell.rho;
  nu.p1 = cell.q11 + cell.q10;
  nu.p0 = cell.q11;
  nu.mu11 = outcome_prob(cell, 1, 1);
  nu.mu00 = outcome_prob(cell, 0, 0);
  return nu;
}

DiscreteWorld random_world(std::size_t num_x, std::uint64_t seed, bool one_sided) {
  Rng rng(seed, {0x0513D0u});
  DiscreteWorld world;
  world.one_sided = one_sided;
  world.cells.resize(num_x);

  double total = 0.0;
  for (WorldCell& w : world.cells) {
    w.prob = rng.uniform(0.05, 0.95);
    total += w.prob;
  }
  for (WorldCell& w : world.cells) w.prob /= total;

  for (WorldCell& w : world.cells) {
    w.rho = rng.uniform(0.05, 0.95);
    w.pi = rng.uniform(0.05, 0.95);
    if (one_sided) {
      double a = rng.uniform(0.05, 0.95), b = rng.uniform(0.05, 0.95);
      w.q11 = 0.0;
      w.q10 = a / (a + b);
      w.q00 = b / (a + b);
    } else {
      double a = rng.uniform(0.05, 0.95), b = rng.uniform(0.05, 0.95),
             c = rng.uniform(0.05, 0.95);
      double s = a + b + c;
      w.q11 = a / s;
      w.q10 = b / s;
      w.q00 = c / s;
    }
    double m1_taker = rng.uniform(0.05, 0.95);   // shared by U=11 and U=10
    double m0_refuser = rng.uniform(0.05, 0.95); // shared by U=10 and U=00
    w.m1_u11 = m1_taker;
    w.m1_u10 = m1_taker;
    w.m1_u00 = rng.uniform(0.05, 0.95);
    w.m0_u11 = rng.uniform(0.05, 0.95);
    w.m0_u10 = m0_refuser;
    w.m0_u00 = m0_refuser;
  }
  return world;
}

double enumerate_true_tau(const DiscreteWorld& world) {
  KahanSum num, den;
  for (const WorldCell& w : world.cells) {
    const double mass = w.prob * (1.0 - w.rho) * w.q10;
    num.add(mass * (w.m1_u10 - w.m0_u10));
    den.add(mass);
  }
  if (den.value() <= 0.0)
    throw DegenerateStratum("no complier mass in the target population");
  return num.value() / den.value();
}

double enumerate_identified(const DiscreteWorld& world, IdentFormula formula) {
  if (formula == IdentFormula::PlugIn) {
    KahanSum num, den;
    for (const WorldCell& w : world.cells) {
      const ImpliedNuisances nu = implied_nuisances(w);
      const double mass = w.prob * (nu.p1 - nu.p0) * (1.0 - nu.rho);
      num.add(mass * (nu.mu11 - nu.mu00));
      den.add(mass);
    }
    return num.value() / den.value();
  }

  if (formula == IdentFormula::OM) {
    KahanSum num, den;
    for_each_observed_point(world, [&](double p, const ImpliedNuisances& nu, int r, int,
                                       int, double) {
      const double w = (nu.p1 - nu.p0) * (r == 0 ? 1.0 : 0.0);
      num.add(p * w * (nu.mu11 - nu.mu00));
      den.add(p * w);
    });
    return num.value() / den.value();
  }

  KahanSum term1, term0, den;
  for_each_observed_point(world, [&](double p, const ImpliedNuisances& nu, int r, int a,
                                     int c, double y) {
    den.add(p * (nu.p1 - nu.p0) * (1.0 - nu.rho));
    if (r != 1) return;
    const double transport = (1.0 - nu.rho) / nu.rho;
    if (a == 1 && c == 1)
      term1.add(p * (nu.p1 - nu.p0) / nu.p1 / nu.pi * transport * y);
    if (a == 0 && c == 0)
      term0.add(p * (nu.p1 - nu.p0) / (1.0 - nu.p0) / (1.0 - nu.pi) * transport * y);
  });
  return (term1.value() - term0.value()) / den.value();
}

EifPointValues oracle_eif_point(const ImpliedNuisances& nu, int r, int a, int c, double y) {
  // psi for f(Y, C) evaluated at (A=sel, R=1) with conditional mean fmean.
  auto psi = [&](int sel, double fval, double fmean) {
    const double p_sel = sel == 1 ? nu.pi : 1.0 - nu.pi;
    double out = fmean;
    if (r == 1 && a == sel) out += (fval - fmean) / (p_sel * nu.rho);
    return out;
  };
  const double e10 = nu.p1 - nu.p0;
  const double omr = 1.0 - nu.rho;
  const double psi_1mr = (r == 0 ? 1.0 : 0.0) - omr;

  const double psi_yc = psi(1, y * c, nu.mu11 * nu.p1);
  const double psi_c1 = psi(1, c, nu.p1);
  const double psi_c0 = psi(0, c, nu.p0);
  const double psi_nc1 = psi(1, 1.0 - c, 1.0 - nu.p1);
  const double psi_nc0 = psi(0, 1.0 - c, 1.0 - nu.p0);
  const double psi_ync = psi(0, y * (1.0 - c), nu.mu00 * (1.0 - nu.p0));

  EifPointValues v;
  v.phi1 = e10 / nu.p1 * omr * psi_yc -
           nu.mu11 * omr * (psi_c0 - nu.p0 / nu.p1 * psi_c1) + e10 * psi_1mr * nu.mu11;
  v.phi0 = e10 / (1.0 - nu.p0) * omr * psi_ync -
           nu.mu00 * omr * (psi_nc1 - psi_nc0 * (1.0 - nu.p1) / (1.0 - nu.p0)) +
           e10 * psi_1mr * nu.mu00;
  v.lambda = (psi_c1 - psi_c0) * omr + e10 * psi_1mr;
  return v;
}

EifCheckReport enumerate_eif_checks(const DiscreteWorld& world) {
  // X-expectations the components should center at.
  KahanSum n1, n0, d;
  for (const WorldCell& w : world.cells) {
    const ImpliedNuisances nu = implied_nuisances(w);
    const double mass = w.prob * (nu.p1 - nu.p0) * (1.0 - nu.rho);
    n1.add(mass * nu.mu11);
    n0.add(mass * nu.mu00);
    d.add(mass);
  }
  const double psi_tau = (n1.value() - n0.value()) / d.value();

  KahanSum e_phi1, e_phi0, e_lambda, e_centered;
  for_each_observed_point(world, [&](double p, const ImpliedNuisances& nu, int r, int a,
                                     int c, double y) {
    const EifPointValues v = oracle_eif_point(nu, r, a, c, y);
    e_phi1.add(p * v.phi1);
    e_phi0.add(p * v.phi0);
    e_lambda.add(p * v.lambda);
    e_centered.add(p * (v.phi1 - v.phi0 - psi_tau * v.lambda));
  });

  EifCheckReport report;
  report.mean_phi_gap = std::abs(e_centered.value() / d.value());
  report.centering_gap_phi1 = std::abs(e_phi1.value() - n1.value());
  report.centering_gap_phi0 = std::abs(e_phi0.value() - n0.value());
  report.centering_gap_lambda = std::abs(e_lambda.value() - d.value());
  report.est_eqn_gap =
      std::abs((e_phi1.value() - e_phi0.value()) / e_lambda.value() -
               enumerate_true_tau(world));
  return report;
}

ValidatedDataset sample_from_world(const DiscreteWorld& world, std::size_t n,
                                   std::uint64_t seed,
                                   std::vector<std::size_t>* cell_of_unit) {
  Rng rng(seed, {0x5A3D1Eu});
  std::vector<double> cum;
  cum.reserve(world.cells.size());
  double acc = 0.0;
  for (const WorldCell& w : world.cells) {
    acc += w.prob;
    cum.push_back(acc);
  }

  std::vector<std::uint8_t> r(n), a(n, 0), c(n, 0);
  std::vector<double> y(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> x(n);
  if (cell_of_unit) cell_of_unit->resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform01() * acc;
    std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (k >= world.cells.size()) k = world.cells.size() - 1;
    const WorldCell& w = world.cells[k];
    if (cell_of_unit) (*cell_of_unit)[i] = k;
    x[i] = static_cast<double>(k);
    r[i] = rng.bernoulli(w.rho) ? 1 : 0;
    if (!r[i]) continue;
    a[i] = rng.bernoulli(w.pi) ? 1 : 0;
    // draw the latent stratum, then read off observed receipt
    const double us = rng.uniform01();
    int u_stratum = us < w.q11 ? 11 : (us < w.q11 + w.q10 ? 10 : 0);
    if (a[i] == 1)
      c[i] = (u_stratum == 11 || u_stratum == 10) ? 1 : 0;
    else
      c[i] = u_stratum == 11 ? 1 : 0;
    double m;
    if (a[i] == 1)
      m = u_stratum == 11 ? w.m1_u11 : (u_stratum == 10 ? w.m1_u10 : w.m1_u00);
    else
      m = u_stratum == 11 ? w.m0_u11 : (u_stratum == 10 ? w.m0_u10 : w.m0_u00);
    y[i] = rng.bernoulli(m) ? 1.0 : 0.0;
  }
  return ValidatedDataset::from_columns(std::move(r), std::move(a), std::move(c),
                                        std::move(y), std::move(x), 1);
}

NuisanceValues true_nuisance_values(const DiscreteWorld& world,
                                    const std::vector<std::size_t>& cell_of_unit) {
  NuisanceValues v;
  v.one_sided = world.one_sided;
  v.clip_delta = 0.0;
  const std::size_t n = cell_of_unit.size();
  v.pi.resize(n);
  v.rho.resize(n);
  v.p1.resize(n);
  v.p0.resize(n);
  v.mu11.resize(n);
  v.mu00.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ImpliedNuisances nu = implied_nuisances(world.cells.at(cell_of_unit[i]));
    v.pi[i] = nu.pi;
    v.rho[i] = nu.rho;
    v.p1[i] = nu.p1;
    v.p0[i] = nu.p0;
    v.mu11[i] = nu.mu11;
    v.mu00[i] = nu.mu00;
  }
  return v;
}

std::string world_to_json_string(const DiscreteWorld& world) {
  nlohmann::json cells = nlohmann::json::array();
  for (const WorldCell& w : world.cells) {
    cells.push_back({{"prob", w.prob},
                     {"rho", w.rho},
                     {"pi", w.pi},
                     {"q11", w.q11},
                     {"q10", w.q10},
                     {"q00", w.q00},
                     {"m1_u11", w.m1_u11},
                     {"m1_u10", w.m1_u10},
                     {"m1_u00", w.m1_u00},
                     {"m0_u11", w.m0_u11},
                     {"m0_u10", w.m0_u10},
                     {"m0_u00", w.m0_u00}});
  }
  nlohmann::json j{{"one_sided", world.one_sided}, {"cells", std::move(cells)}};
  return j.dump(2);
}

DiscreteWorld world_from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  DiscreteWorld world;
  world.one_sided = j.value("one_sided", false);
  for (const auto& cj : j.at("cells")) {
    WorldCell w;
    w.prob = cj.at("prob").get<double>();
    w.rho = cj.at("rho").get<double>();
    w.pi = cj.at("pi").get<double>();
    w.q11 = cj.at("q11").get<double>();
    w.q10 = cj.at("q10").get<double>();
    w.q00 = cj.at("q00").get<double>();
    w.m1_u11 = cj.at("m1_u11").get<double>();
    w.m1_u10 = cj.at("m1_u10").get<double>();
    w.m1_u00 = cj.at("m1_u00").get<double>();
    w.m0_u11 = cj.at("m0_u11").get<double>();
    w.m0_u10 = cj.at("m0_u10").get<double>();
    w.m0_u00 = cj.at("m0_u00").get<double>();
    world.cells.push_back(w);
  }
  return world;
}

}  // namespace ptx
