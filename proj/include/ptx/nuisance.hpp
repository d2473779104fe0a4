#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ptx/data_model.hpp"
#include "ptx/glm.hpp"

namespace ptx {

// Feature map used for each of the four nuisance models. The simulation's
// misspecification scheme toggles these independently.
struct NuisanceSpecs {
  FeatureMode treatment = FeatureMode::Identity;      // pi(X)
  FeatureMode participation = FeatureMode::Identity;  // rho(X)
  FeatureMode principal_score = FeatureMode::Identity;  // p_a(X)
  FeatureMode outcome = FeatureMode::Identity;          // mu_ac(X)

  static NuisanceSpecs all(FeatureMode mode) {
    return {mode, mode, mode, mode};
  }
};

struct FoldAssignment {
  std::vector<std::uint32_t> fold_of_unit;
  std::uint32_t K = 0;
};

// Stratified K-fold assignment: the strata (r=0), (r=1,a=1), (r=1,a=0) are
// shuffled independently and dealt round-robin, so fold sizes within each
// stratum differ by at most one. Deterministic given (dataset order, K, seed).
// Throws FoldError when K exceeds the size of any stratum.
FoldAssignment make_folds(const ValidatedDataset& dataset, std::uint32_t K,
                          std::uint64_t seed);

// Per-unit evaluated nuisance functions, aligned with dataset row order.
struct NuisanceValues {
  std::vector<double> pi, rho, p1, p0, mu11, mu00;
  bool one_sided = false;
  double clip_delta = 0.0;

  std::size_t n() const { return pi.size(); }
  NuisanceValues select(const std::vector<std::size_t>& rows) const;
};

// Fits the four nuisance models and evaluates them for every unit.
//
// Eligible subsamples: rho on all units (label r); pi on trial units (label
// a); p_a on trial units with A=a (label c), separately for a in {0,1};
// mu11/mu00 on trial units in the (1,1)/(0,0) cells (response y). With a
// fold assignment, unit i's predictions come from models fit outside i's
// fold; otherwise each model is fit once on its full eligible subsample.
// Probability outputs are clipped to [clip_delta, 1-clip_delta]. In
// one-sided mode p0 is identically 0 and its model is skipped.
//
// Degenerate single-class label sets (e.g. perfect compliance) reduce to a
// constant prediction at the clipping bound rather than a fit error; other
// fit errors propagate annotated with the nuisance name and fold index.
NuisanceValues fit_nuisances(const ValidatedDataset& dataset, const NuisanceSpecs& specs,
                             const std::optional<FoldAssignment>& folds,
                             bool one_sided = false, double clip_delta = 0.005);

}  // namespace ptx
