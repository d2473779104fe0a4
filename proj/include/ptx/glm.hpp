#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ptx {

enum class FeatureMode { Correct, Misspecified, Identity };

FeatureMode feature_mode_from_string(const std::string& s);
std::string to_string(FeatureMode mode);

// Feature maps from the simulation design. Correct squares-and-centers the
// first four coordinates, Misspecified merely shifts them, Identity passes
// everything through. Coordinates beyond the fourth are untouched.
struct FeatureSpec {
  FeatureMode mode = FeatureMode::Identity;
  std::size_t p = 0;
};

// Throws DimensionError when x.size() != spec.p.
std::vector<double> transform_features(std::span<const double> x, const FeatureSpec& spec);
void transform_features_into(std::span<const double> x, const FeatureSpec& spec,
                             double* out);

enum class GlmFamily { Logistic, Linear };

// Fitted generalized linear model; coefficients[0] is the intercept, the
// remaining entries align with the transformed feature coordinates.
struct GlmModel {
  GlmFamily family = GlmFamily::Linear;
  Eigen::VectorXd coefficients;
  FeatureSpec feature_spec;

  // Prediction from an already-transformed feature vector.
  double predict_features(std::span<const double> f) const;
  // Transforms raw covariates with feature_spec, then predicts.
  double predict(std::span<const double> x) const;
};

inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Maximum-likelihood logistic fit by Newton/IRLS. `features` excludes the
// intercept column, which is always included. Throws SeparationError when
// labels are single-class or the iteration diverges, SingularError when the
// Hessian stays unusable after ridge jitter.
GlmModel fit_logistic(const Eigen::MatrixXd& features,
                      const std::vector<std::uint8_t>& labels, int max_iter = 100,
                      double tol = 1e-10);

// Least-squares fit via the normal equations (intercept always included).
GlmModel fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& response);

}  // namespace ptx
