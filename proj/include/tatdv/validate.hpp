#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace tatdv {

enum class SeKind { classical, robust, cluster };

const char* to_string(SeKind k);

struct OlsResult {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  SeKind se_kind = SeKind::classical;
  std::size_t n = 0;
  std::size_t n_clusters = 0;
  double r2 = 0.0;
};

// X must already contain the intercept column. robust = HC0 sandwich;
// cluster = within-cluster score sums with the G/(G-1)*(n-1)/(n-k)
// correction. Throws RankDeficient / TooFewClusters.
OlsResult ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  std::vector<std::string> names, SeKind se_kind,
                  const std::vector<int>* clusters = nullptr);

struct SubgroupResult {
  std::string split;  // variable the split comes from
  std::string group;  // "above" / "at_or_below" (or "true"/"false")
  std::size_t n = 0;
  bool ok = false;
  std::string failure;  // "EstimationFailed: ..." when !ok
  OlsResult fit;        // valid when ok
};

// One clustered regression per side of each split; estimation failures
// are reported per group, never thrown.
std::vector<SubgroupResult> subgroup_regressions(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names,
    const std::vector<int>& clusters,
    const std::vector<std::pair<std::string, std::vector<bool>>>& splits);

struct ProbitFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;          // from observed information
  Eigen::MatrixXd vcov;
  double loglik = 0.0;
  std::size_t n = 0;
  std::size_t iterations = 0;
};

// Newton with step halving on the probit log-likelihood. Throws
// Separation (|beta| diverging past 1e3) / NoConvergence / any-class-empty.
ProbitFit probit_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     std::vector<std::string> names);

struct AmeResult {
  std::string focal;
  double estimate = 0.0;
  double se = 0.0;  // delta method
  double ci_low = 0.0, ci_high = 0.0;
  std::size_t n = 0;
};

// Continuous focal: mean phi(x'b) * b_f. Binary focal: mean of
// Phi(x'b | f=1) - Phi(x'b | f=0).
AmeResult probit_ame(const ProbitFit& fit, const Eigen::MatrixXd& X, int focal,
                     bool binary_focal);

double two_sided_p(double z);
// "***" p<0.01, "**" p<0.05, "*" p<0.1, "" otherwise.
std::string significance_stars(double p);

}  // namespace tatdv
