#include "ptx/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ptx/errors.hpp"
#include "ptx/rng.hpp"

namespace ptx {

namespace {

std::vector<std::size_t> stratum_indices(const ValidatedDataset& d, int which) {
  // which: 0 -> target, 1 -> trial a=1, 2 -> trial a=0
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (which == 0 && d.r(i) == 0) idx.push_back(i);
    if (which == 1 && d.r(i) == 1 && d.a(i) == 1) idx.push_back(i);
    if (which == 2 && d.r(i) == 1 && d.a(i) == 0) idx.push_back(i);
  }
  return idx;
}

// Transformed feature matrix for all units under one mode.
Eigen::MatrixXd transformed_matrix(const ValidatedDataset& d, FeatureMode mode) {
  const std::size_t n = d.n(), p = d.p();
  FeatureSpec spec{mode, p};
  Eigen::MatrixXd F(n, p);
  std::vector<double> buf(p);
  for (std::size_t i = 0; i < n; ++i) {
    transform_features_into(d.x(i), spec, buf.data());
    for (std::size_t j = 0; j < p; ++j) F(i, j) = buf[j];
  }
  return F;
}

struct ModelPlan {
  const char* name;
  FeatureMode mode;
  GlmFamily family;
  std::vector<std::size_t> eligible;
  std::vector<double> labels;  // aligned with eligible
  std::vector<double>* out;
};

[[noreturn]] void rethrow_annotated(const Error& e, const std::string& where) {
  const std::string msg = where + ": " + e.what();
  if (dynamic_cast<const SeparationError*>(&e)) throw SeparationError(msg);
  if (dynamic_cast<const SingularError*>(&e)) throw SingularError(msg);
  if (dynamic_cast<const DimensionError*>(&e)) throw DimensionError(msg);
  throw Error(msg);
}

// Fits one plan on `train` (indices into plan.eligible) and writes
// predictions for the units listed in `predict_rows`.
void fit_and_predict(const ModelPlan& plan, const Eigen::MatrixXd& F,
                     const std::vector<std::size_t>& train,
                     const std::vector<std::size_t>& predict_rows,
                     const std::string& where) {
  const Eigen::Index p = F.cols();

  if (plan.family == GlmFamily::Logistic) {
    double mean = 0.0;
    for (std::size_t t : train) mean += plan.labels[t];
    mean /= static_cast<double>(train.size());
    if (mean == 0.0 || mean == 1.0) {
      // Degenerate labels: the MLE runs to the boundary. Predict the
      // constant class probability and let clipping pull it inside (0,1).
      for (std::size_t i : predict_rows) (*plan.out)[i] = mean;
      return;
    }
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), p);
  for (std::size_t k = 0; k < train.size(); ++k)
    X.row(static_cast<Eigen::Index>(k)) = F.row(static_cast<Eigen::Index>(plan.eligible[train[k]]));

  GlmModel model;
  try {
    if (plan.family == GlmFamily::Logistic) {
      std::vector<std::uint8_t> y(train.size());
      for (std::size_t k = 0; k < train.size(); ++k)
        y[k] = plan.labels[train[k]] != 0.0;
      model = fit_logistic(X, y);
    } else {
      Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
      for (std::size_t k = 0; k < train.size(); ++k)
        y[static_cast<Eigen::Index>(k)] = plan.labels[train[k]];
      model = fit_ols(X, y);
    }
  } catch (const Error& e) {
    rethrow_annotated(e, where);
  }

  const Eigen::VectorXd slopes = model.coefficients.tail(p);
  const double intercept = model.coefficients[0];
  for (std::size_t i : predict_rows) {
    double lp = intercept + F.row(static_cast<Eigen::Index>(i)).dot(slopes);
    (*plan.out)[i] = plan.family == GlmFamily::Logistic ? expit(lp) : lp;
  }
}

}  // namespace

FoldAssignment make_folds(const ValidatedDataset& dataset, std::uint32_t K,
                          std::uint64_t seed) {
  if (K < 2) throw FoldError("make_folds: K must be at least 2");
  FoldAssignment fa;
  fa.K = K;
  fa.fold_of_unit.assign(dataset.n(), 0);
  for (int s = 0; s < 3; ++s) {
    std::vector<std::size_t> idx = stratum_indices(dataset, s);
    if (idx.size() < K)
      throw FoldError("make_folds: stratum " + std::to_string(s) + " has " +
                      std::to_string(idx.size()) + " units, fewer than K=" +
                      std::to_string(K));
    Rng rng(seed, {0xF01Du, static_cast<std::uint64_t>(s)});
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k)
      fa.fold_of_unit[idx[k]] = static_cast<std::uint32_t>(k % K);
  }
  return fa;
}

NuisanceValues NuisanceValues::select(const std::vector<std::size_t>& rows) const {
  NuisanceValues v;
  v.one_sided = one_sided;
  v.clip_delta = clip_delta;
  auto pick = [&](const std::vector<double>& src, std::vector<double>& dst) {
    dst.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) dst[k] = src[rows[k]];
  };
  pick(pi, v.pi);
  pick(rho, v.rho);
  pick(p1, v.p1);
  pick(p0, v.p0);
  pick(mu11, v.mu11);
  pick(mu00, v.mu00);
  return v;
}

NuisanceValues fit_nuisances(const ValidatedDataset& dataset, const NuisanceSpecs& specs,
                             const std::optional<FoldAssignment>& folds,
                             bool one_sided, double clip_delta) {
  const std::size_t n = dataset.n();
  if (folds && folds->fold_of_unit.size() != n)
    throw DimensionError("fit_nuisances: fold assignment does not cover the dataset");

  NuisanceValues values;
  values.one_sided = one_sided;
  values.clip_delta = clip_delta;
  values.pi.assign(n, 0.0);
  values.rho.assign(n, 0.0);
  values.p1.assign(n, 0.0);
  values.p0.assign(n, 0.0);
  values.mu11.assign(n, 0.0);
  values.mu00.assign(n, 0.0);

  std::vector<ModelPlan> plans;
  auto add_plan = [&](const char* name, FeatureMode mode, GlmFamily family,
                      auto eligible_pred, auto label_fn, std::vector<double>* out) {
    ModelPlan plan{name, mode, family, {}, {}, out};
    for (std::size_t i = 0; i < n; ++i) {
      if (eligible_pred(i)) {
        plan.eligible.push_back(i);
        plan.labels.push_back(label_fn(i));
      }
    }
    plans.push_back(std::move(plan));
  };

  add_plan("rho", specs.participation, GlmFamily::Logistic,
           [](std::size_t) { return true; },
           [&](std::size_t i) { return static_cast<double>(dataset.r(i)); },
           &values.rho);
  add_plan("pi", specs.treatment, GlmFamily::Logistic,
           [&](std::size_t i) { return dataset.r(i) == 1; },
           [&](std::size_t i) { return static_cast<double>(dataset.a(i)); },
           &values.pi);
  add_plan("p1", specs.principal_score, GlmFamily::Logistic,
           [&](std::size_t i) { return dataset.r(i) == 1 && dataset.a(i) == 1; },
           [&](std::size_t i) { return static_cast<double>(dataset.c(i)); },
           &values.p1);
  if (!one_sided) {
    add_plan("p0", specs.principal_score, GlmFamily::Logistic,
             [&](std::size_t i) { return dataset.r(i) == 1 && dataset.a(i) == 0; },
             [&](std::size_t i) { return static_cast<double>(dataset.c(i)); },
             &values.p0);
  }
  add_plan("mu11", specs.outcome, GlmFamily::Linear,
           [&](std::size_t i) {
             return dataset.r(i) == 1 && dataset.a(i) == 1 && dataset.c(i) == 1;
           },
           [&](std::size_t i) { return dataset.y(i); }, &values.mu11);
  add_plan("mu00", specs.outcome, GlmFamily::Linear,
           [&](std::size_t i) {
             return dataset.r(i) == 1 && dataset.a(i) == 0 && dataset.c(i) == 0;
           },
           [&](std::size_t i) { return dataset.y(i); }, &values.mu00);

  // Feature matrices are shared between plans with the same mode.
  Eigen::MatrixXd cache[3];
  bool cached[3] = {false, false, false};
  auto features_for = [&](FeatureMode mode) -> const Eigen::MatrixXd& {
    int k = static_cast<int>(mode);
    if (!cached[k]) {
      cache[k] = transformed_matrix(dataset, mode);
      cached[k] = true;
    }
    return cache[k];
  };

  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

  for (const ModelPlan& plan : plans) {
    const Eigen::MatrixXd& F = features_for(plan.mode);
    std::vector<std::size_t> train(plan.eligible.size());
    std::iota(train.begin(), train.end(), std::size_t{0});
    if (!folds) {
      fit_and_predict(plan, F, train, all_rows, std::string(plan.name));
    } else {
      for (std::uint32_t k = 0; k < folds->K; ++k) {
        std::vector<std::size_t> train_k;
        train_k.reserve(plan.eligible.size());
        for (std::size_t t = 0; t < plan.eligible.size(); ++t)
          if (folds->fold_of_unit[plan.eligible[t]] != k) train_k.push_back(t);
        std::vector<std::size_t> predict_k;
        for (std::size_t i = 0; i < n; ++i)
          if (folds->fold_of_unit[i] == k) predict_k.push_back(i);
        fit_and_predict(plan, F, train_k, predict_k,
                        std::string(plan.name) + " (fold " + std::to_string(k) + ")");
      }
    }
  }

  auto clip = [&](std::vector<double>& v) {
    for (double& t : v) t = std::clamp(t, clip_delta, 1.0 - clip_delta);
  };
  clip(values.pi);
  clip(values.rho);
  clip(values.p1);
  if (one_sided)
    std::fill(values.p0.begin(), values.p0.end(), 0.0);
  else
    clip(values.p0);
  return values;
}

}  // namespace ptx
