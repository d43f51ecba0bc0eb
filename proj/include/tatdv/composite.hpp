#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

namespace tatdv {

struct CompositeModel {
  Eigen::VectorXd means, sds;      // standardizers per input column
  std::vector<bool> reverse;       // negate the standardized column
  Eigen::VectorXd phi;             // unit-norm leading eigenvector, phi[0] > 0
  Eigen::VectorXd eigenvalues;     // descending
  double explained = 0.0;          // leading eigenvalue / p
  bool low_explained_warning = false;  // explained < 0.4
};

struct CompositeResult {
  CompositeModel model;
  // Aligned with input rows, NaN where any input is NaN; mean 0 over the
  // complete rows, variance = leading eigenvalue.
  Eigen::VectorXd index;
  std::size_t skipped = 0;
};

// PCA on the correlation matrix of the standardized (and possibly
// reversed) inputs; index_i = phi . z_i.
CompositeResult build_composite(const Eigen::MatrixXd& scores, const std::vector<bool>& reverse);

struct ReliabilityReport {
  std::size_t k = 0;
  double cbar = 0.0;   // average interitem covariance
  double vbar = 0.0;   // average item variance
  double alpha = 0.0;  // k*cbar / (vbar + (k-1)*cbar)
};

ReliabilityReport cronbach_alpha(const Eigen::MatrixXd& items);
ReliabilityReport cronbach_alpha_from_cov(const Eigen::MatrixXd& cov);

struct DistributionSummary {
  double mean = 0.0, sd = 0.0, skewness = 0.0;
  double bandwidth = 0.0;  // Silverman's rule
  std::array<std::vector<double>, 2> grid;  // grid[0]=x (512 pts), grid[1]=density
};

DistributionSummary index_distribution(const std::vector<double>& values);

}  // namespace tatdv
