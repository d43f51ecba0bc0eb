#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace tatdv {

// Confirmatory factor model: every indicator loads on exactly one latent,
// latent variances fixed to 1, all loadings and latent covariances free.
struct SemSpec {
  std::vector<std::string> latent_names;
  std::vector<std::string> indicator_names;
  std::vector<int> loading_of;  // indicator index -> latent index

  std::size_t n_indicators() const { return indicator_names.size(); }
  std::size_t n_latents() const { return latent_names.size(); }
  std::size_t n_free() const {
    return 2 * n_indicators() + n_latents() * (n_latents() - 1) / 2;
  }

  // The 11-indicator, 3-factor measurement model used by the pipeline.
  static SemSpec default_spec();
};

// Natural-space free parameters: loadings, residual variances, then the
// latent covariance upper triangle (row-major: (0,1), (0,2), (1,2), ...).
struct SemParams {
  Eigen::VectorXd lambda;
  Eigen::VectorXd eps;
  Eigen::MatrixXd psi;

  Eigen::VectorXd pack(const SemSpec& spec) const;
  static SemParams unpack(const SemSpec& spec, const Eigen::VectorXd& theta);
};

Eigen::MatrixXd implied_sigma(const SemSpec& spec, const SemParams& p);

// F_ML(theta) = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p and its analytic
// gradient in natural parameter space. Returns +inf (gradient untouched)
// when Sigma is not positive definite.
double fml_value(const SemSpec& spec, const SemParams& p, const Eigen::MatrixXd& S);
double fml_value_gradient(const SemSpec& spec, const SemParams& p, const Eigen::MatrixXd& S,
                          Eigen::VectorXd& grad);

struct SemEstimate {
  SemSpec spec;
  std::size_t n = 0;        // complete rows used
  std::size_t dropped = 0;  // listwise-deleted rows

  Eigen::VectorXd lambda, eps;
  Eigen::MatrixXd psi;
  Eigen::VectorXd std_loadings;  // lambda / sqrt(fitted variance)

  Eigen::VectorXd se_lambda, se_eps, se_psi;        // robust (sandwich)
  Eigen::VectorXd se_lambda_naive, se_eps_naive, se_psi_naive;

  Eigen::MatrixXd S, sigma;
  Eigen::VectorXd xbar;

  double f_min = 0.0;
  std::size_t iterations = 0;
  double grad_inf = 0.0;
  std::vector<bool> heywood;  // residual variance at its lower bound
};

// Quasi-Newton minimization of F_ML; residual variances kept positive by
// a softplus transform, latent covariances in (-1,1) by tanh. Throws
// NonPositiveDefiniteS / NoConvergence / TooFewRows. Robust and naive
// standard errors are filled in by fit_ml via robust_se.
SemEstimate fit_ml(const SemSpec& spec, const Eigen::MatrixXd& data);

// Sandwich covariance A^-1 B A^-1 where A is the expected information of
// the normal log-likelihood and B the outer product of per-observation
// scores; fills the se_* fields. Throws SingularInformation.
void robust_se(SemEstimate& est, const Eigen::MatrixXd& data);

struct FitRow {
  std::string indicator;
  double fitted = 0, predicted = 0, residual = 0, r2 = 0, mc = 0, mc2 = 0;
};

struct FitStats {
  std::vector<FitRow> rows;
  double cd = 0.0;    // 1 - det(residual diag)/det(S)
  double srmr = 0.0;  // diagonal included
};

FitStats fit_statistics(const SemEstimate& est);

struct FactorScores {
  // Aligned with input rows; incomplete rows are NaN. Columns are
  // regression-method scores re-standardized to mean 0, variance 1.
  Eigen::MatrixXd scores;
  std::size_t skipped = 0;
};

FactorScores factor_scores(const SemEstimate& est, const Eigen::MatrixXd& data);

}  // namespace tatdv
