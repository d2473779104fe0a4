#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptx/data_model.hpp"
#include "ptx/nuisance.hpp"

namespace ptx {

// One covariate cell of a finite-support structural world. Strata follow
// U = (C(1), C(0)) with the defier stratum U=01 absent; m{a}_u{u} is
// P(Y=1 | A=a, U=u, X=cell), shared between trial and target.
struct WorldCell {
  double prob = 0.0;  // P(X = cell)
  double rho = 0.5;   // P(R=1 | cell)
  double pi = 0.5;    // P(A=1 | R=1, cell)
  double q11 = 0.0, q10 = 0.0, q00 = 0.0;  // P(U=u | cell)
  double m1_u11 = 0.0, m1_u10 = 0.0, m1_u00 = 0.0;
  double m0_u11 = 0.0, m0_u10 = 0.0, m0_u00 = 0.0;
};

struct DiscreteWorld {
  std::vector<WorldCell> cells;
  bool one_sided = false;
};

// The observed-data nuisance functions a cell implies: mu11 and mu00 are
// mixtures over the strata that populate the (1,1) and (0,0) cells, and
// collapse to the stratum means when the ignorability equalities hold.
struct ImpliedNuisances {
  double pi = 0.0, rho = 0.0, p1 = 0.0, p0 = 0.0, mu11 = 0.0, mu00 = 0.0;
};

ImpliedNuisances implied_nuisances(const WorldCell& cell);

// Random world satisfying the identification assumptions by construction:
// no defiers, exact ignorability equalities, strata and outcome laws shared
// across populations, probabilities drawn inside [0.05, 0.95]. one_sided
// forces q11 = 0 (and hence p0 = 0) in every cell.
DiscreteWorld random_world(std::size_t num_x, std::uint64_t seed, bool one_sided = false);

// tau = sum_x P(x)(1-rho)q10 [m1(x,10) - m0(x,10)] / sum_x P(x)(1-rho)q10.
// Throws DegenerateStratum when the target complier mass is zero.
double enumerate_true_tau(const DiscreteWorld& world);

enum class IdentFormula { PlugIn, IPW, OM };

// Evaluates the identification functional over the exact observed-data law
// implied by the world (finite sums over (x, r, a, c, y)).
double enumerate_identified(const DiscreteWorld& world, IdentFormula formula);

struct EifCheckReport {
  double mean_phi_gap = 0.0;        // |E[centered EIF]|
  double centering_gap_phi1 = 0.0;  // |E[phi1] - E[e10(1-rho)mu11]|
  double centering_gap_phi0 = 0.0;
  double centering_gap_lambda = 0.0;
  double est_eqn_gap = 0.0;  // |E[phi1-phi0]/E[lambda] - true tau|

  double max_gap() const;
};

EifCheckReport enumerate_eif_checks(const DiscreteWorld& world);

// Influence components at a single observed-data point; an independent
// transcription used by the enumeration (and to cross-check the estimator
// module's per-unit evaluation).
struct EifPointValues {
  double phi1 = 0.0, phi0 = 0.0, lambda = 0.0;
};

EifPointValues oracle_eif_point(const ImpliedNuisances& nu, int r, int a, int c, double y);

// I.i.d. observed data drawn from the world; the single covariate is the
// cell index. cell_of_unit (optional) receives each unit's cell.
ValidatedDataset sample_from_world(const DiscreteWorld& world, std::size_t n,
                                   std::uint64_t seed,
                                   std::vector<std::size_t>* cell_of_unit = nullptr);

// Exact nuisance values for sampled units, bypassing any fitting.
NuisanceValues true_nuisance_values(const DiscreteWorld& world,
                                    const std::vector<std::size_t>& cell_of_unit);

std::string world_to_json_string(const DiscreteWorld& world);
DiscreteWorld world_from_json_string(const std::string& text);

}  // namespace ptx
