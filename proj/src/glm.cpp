#include "ptx/glm.hpp"

#include <cmath>
#include <limits>

#include "ptx/errors.hpp"

namespace ptx {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kRidgeJitter = 1e-8;
constexpr double kProbLimit = 1e-10;

// Solves G v = b, adding ridge jitter when the factorization looks
// rank-deficient. Returns false when no usable solution exists.
bool solve_spd(Eigen::MatrixXd G, const Eigen::VectorXd& b, Eigen::VectorXd& v) {
  auto ldlt = G.ldlt();
  bool bad = ldlt.info() != Eigen::Success;
  if (!bad) {
    const auto& d = ldlt.vectorD();
    double dmax = d.cwiseAbs().maxCoeff();
    double dmin = d.minCoeff();
    bad = !(dmax > 0.0) || dmin <= dmax * 1e-12;
  }
  if (bad) {
    G.diagonal().array() += kRidgeJitter;
    ldlt = G.ldlt();
    if (ldlt.info() != Eigen::Success) return false;
  }
  v = ldlt.solve(b);
  return v.allFinite();
}

}  // namespace

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "correct") return FeatureMode::Correct;
  if (s == "misspecified") return FeatureMode::Misspecified;
  if (s == "identity") return FeatureMode::Identity;
  throw Error("unknown feature mode: " + s);
}

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Correct: return "correct";
    case FeatureMode::Misspecified: return "misspecified";
    default: return "identity";
  }
}

void transform_features_into(std::span<const double> x, const FeatureSpec& spec,
                             double* out) {
  if (x.size() != spec.p)
    throw DimensionError("transform_features: expected " + std::to_string(spec.p) +
                         " coordinates, got " + std::to_string(x.size()));
  const std::size_t k = std::min<std::size_t>(4, x.size());
  switch (spec.mode) {
    case FeatureMode::Correct:
      for (std::size_t j = 0; j < k; ++j) out[j] = (x[j] * x[j] - 1.0) / kSqrt2;
      break;
    case FeatureMode::Misspecified:
      for (std::size_t j = 0; j < k; ++j) out[j] = x[j] - 0.25;
      break;
    case FeatureMode::Identity:
      for (std::size_t j = 0; j < k; ++j) out[j] = x[j];
      break;
  }
  for (std::size_t j = k; j < x.size(); ++j) out[j] = x[j];
}

std::vector<double> transform_features(std::span<const double> x, const FeatureSpec& spec) {
  std::vector<double> out(x.size());
  transform_features_into(x, spec, out.data());
  return out;
}

double GlmModel::predict_features(std::span<const double> f) const {
  if (f.size() + 1 != static_cast<std::size_t>(coefficients.size()))
    throw DimensionError("predict: feature length mismatch");
  double lp = coefficients[0];
  for (std::size_t j = 0; j < f.size(); ++j) lp += coefficients[j + 1] * f[j];
  return family == GlmFamily::Logistic ? expit(lp) : lp;
}

double GlmModel::predict(std::span<const double> x) const {
  std::vector<double> f = transform_features(x, feature_spec);
  return predict_features(f);
}

GlmModel fit_logistic(const Eigen::MatrixXd& features,
                      const std::vector<std::uint8_t>& labels, int max_iter,
                      double tol) {
  const Eigen::Index n = features.rows();
  const Eigen::Index q = features.cols() + 1;
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DimensionError("fit_logistic: label count does not match rows");
  if (n < q + 1) throw DimensionError("fit_logistic: fewer rows than coefficients");

  std::size_t ones = 0;
  for (auto l : labels) ones += l;
  if (ones == 0 || ones == labels.size())
    throw SeparationError("fit_logistic: labels are single-class");

  Eigen::MatrixXd X(n, q);
  X.col(0).setOnes();
  X.rightCols(q - 1) = features;
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = labels[i];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd prob(n), resid(n);

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd lp = X * beta;
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = expit(lp[i]);
    resid = yv - prob;

    // Score with compensated accumulation: the convergence tolerance sits
    // near the noise floor of a naive sum for large n.
    Eigen::VectorXd score(q), noise(q);
    for (Eigen::Index j = 0; j < q; ++j) {
      double s = 0.0, comp = 0.0, mag = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double term = X(i, j) * resid[i];
        mag += std::abs(term);
        double t = s + term;
        if (std::abs(s) >= std::abs(term))
          comp += (s - t) + term;
        else
          comp += (term - t) + s;
        s = t;
      }
      score[j] = s + comp;
      noise[j] = 4.0 * std::numeric_limits<double>::epsilon() * mag;
    }
    bool converged = true;
    for (Eigen::Index j = 0; j < q; ++j)
      converged = converged && std::abs(score[j]) <= std::max(tol, noise[j]);
    if (converged) {
      GlmModel m;
      m.family = GlmFamily::Logistic;
      m.coefficients = beta;
      return m;
    }

    double pmin = prob.minCoeff(), pmax = prob.maxCoeff();
    if (pmin < kProbLimit || pmax > 1.0 - kProbLimit)
      throw SeparationError("fit_logistic: fitted probabilities reached the boundary "
                            "before the score converged");

    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd step;
    if (!solve_spd(std::move(H), score, step))
      throw SingularError("fit_logistic: Hessian is rank-deficient after jitter");
    beta += step;
  }
  throw SeparationError("fit_logistic: IRLS did not converge within max_iter");
}

GlmModel fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& response) {
  const Eigen::Index n = features.rows();
  const Eigen::Index q = features.cols() + 1;
  if (response.size() != n)
    throw DimensionError("fit_ols: response length does not match rows");
  if (n < q + 1) throw DimensionError("fit_ols: fewer rows than coefficients");

  Eigen::MatrixXd X(n, q);
  X.col(0).setOnes();
  X.rightCols(q - 1) = features;

  Eigen::MatrixXd G = X.transpose() * X;
  Eigen::VectorXd b = X.transpose() * response;
  Eigen::VectorXd beta;
  if (!solve_spd(G, b, beta))
    throw SingularError("fit_ols: normal equations unusable after jitter");

  double resid = (G * beta - b).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff()))
    throw SingularError("fit_ols: normal-equation residual too large");

  GlmModel m;
  m.family = GlmFamily::Linear;
  m.coefficients = std::move(beta);
  return m;
}

}  // namespace ptx
