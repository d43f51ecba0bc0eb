#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace tatdv {

struct CovMatrix {
  std::vector<std::string> names;
  std::size_t n = 0;            // complete observations used
  std::size_t dropped = 0;      // rows removed listwise for missing values
  Eigen::MatrixXd m;
};

// Rows with any NaN are dropped listwise (count reported in `dropped`).
CovMatrix correlation_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names);
CovMatrix covariance_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names);

// Descending eigenvalues; they sum to p for a correlation matrix.
std::vector<double> pca_eigenvalues(const CovMatrix& corr);

struct ParallelAnalysisResult {
  std::vector<double> observed;    // descending
  std::vector<double> thresholds;  // chosen percentile of random-data eigenvalues
  std::size_t n_retained = 0;      // contiguous leading prefix with observed > threshold
  std::size_t replications = 0;
  double percentile = 95.0;
  uint64_t seed = 0;
  std::size_t n = 0, p = 0;
  std::size_t dropped = 0;
};

// Horn's procedure with standard-normal reference data of the same shape
// as the (listwise-complete) input. Per-replication seeds derive from
// (seed, replication index), so the result is independent of any
// execution order.
ParallelAnalysisResult parallel_analysis(const Eigen::MatrixXd& data, std::size_t replications,
                                         double percentile, uint64_t seed);

}  // namespace tatdv
