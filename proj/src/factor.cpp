#include "tatdv/factor.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "tatdv/error.hpp"
#include "tatdv/stats.hpp"

namespace tatdv {

namespace {

Eigen::MatrixXd drop_incomplete(const Eigen::MatrixXd& data, std::size_t* dropped) {
  std::vector<Eigen::Index> keep;
  keep.reserve(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    if (!data.row(i).hasNaN()) keep.push_back(i);
  *dropped = static_cast<std::size_t>(data.rows()) - keep.size();
  if (*dropped == 0) return data;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), data.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(keep[i]);
  return out;
}

Eigen::MatrixXd centered_complete(const Eigen::MatrixXd& data, std::size_t* dropped,
                                  std::size_t min_rows) {
  Eigen::MatrixXd x = drop_incomplete(data, dropped);
  if (static_cast<std::size_t>(x.rows()) < min_rows)
    fail(errc::stage, "TooFewRows: " + std::to_string(x.rows()) + " complete rows, need " +
                          std::to_string(min_rows));
  x.rowwise() -= x.colwise().mean();
  return x;
}

}  // namespace

CovMatrix covariance_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names) {
  CovMatrix cm;
  cm.names = std::move(names);
  Eigen::MatrixXd x = centered_complete(data, &cm.dropped, static_cast<std::size_t>(data.cols()) + 1);
  cm.n = static_cast<std::size_t>(x.rows());
  cm.m = (x.transpose() * x) / static_cast<double>(cm.n - 1);
  cm.m = cm.m.selfadjointView<Eigen::Upper>();
  return cm;
}

CovMatrix correlation_matrix(const Eigen::MatrixXd& data, std::vector<std::string> names) {
  CovMatrix cm = covariance_matrix(data, std::move(names));
  Eigen::VectorXd sd = cm.m.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 0.0))
      fail(errc::stage, "ConstantColumn: " +
                            (static_cast<std::size_t>(j) < cm.names.size()
                                 ? cm.names[static_cast<std::size_t>(j)]
                                 : std::to_string(j)));
  cm.m = sd.cwiseInverse().asDiagonal() * cm.m * sd.cwiseInverse().asDiagonal();
  cm.m = cm.m.selfadjointView<Eigen::Upper>();
  cm.m.diagonal().setOnes();
  return cm;
}

std::vector<double> pca_eigenvalues(const CovMatrix& corr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr.m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(errc::internal, "eigen decomposition failed");
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::reverse(ev.begin(), ev.end());
  return ev;
}

namespace {

// Correlation eigenvalues of a centered data matrix, descending.
void corr_eigs(Eigen::MatrixXd& x, std::vector<double>& out) {
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd c = x.transpose() * x;
  Eigen::VectorXd inv_sd = c.diagonal().cwiseSqrt().cwiseInverse();
  c = inv_sd.asDiagonal() * c * inv_sd.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  out.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::reverse(out.begin(), out.end());
}

}  // namespace

ParallelAnalysisResult parallel_analysis(const Eigen::MatrixXd& data, std::size_t replications,
                                         double percentile, uint64_t seed) {
  if (replications < 100) fail(errc::invalid_argument, "parallel_analysis: replications < 100");
  if (!(percentile > 50.0 && percentile < 100.0))
    fail(errc::invalid_argument, "parallel_analysis: percentile outside (50,100)");

  ParallelAnalysisResult res;
  res.replications = replications;
  res.percentile = percentile;
  res.seed = seed;

  CovMatrix corr = correlation_matrix(data, {});
  res.dropped = corr.dropped;
  res.n = corr.n;
  res.p = static_cast<std::size_t>(corr.m.rows());
  res.observed = pca_eigenvalues(corr);

  const Eigen::Index n = static_cast<Eigen::Index>(res.n);
  const Eigen::Index p = static_cast<Eigen::Index>(res.p);
  // ref_eigs[k] collects the k-th eigenvalue across replications.
  std::vector<std::vector<double>> ref_eigs(res.p, std::vector<double>(replications));
  Eigen::MatrixXd x(n, p);
  std::vector<double> eigs;
  for (std::size_t r = 0; r < replications; ++r) {
    Rng rng(derive_seed(seed, r));
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.normal();
    corr_eigs(x, eigs);
    for (std::size_t k = 0; k < res.p; ++k) ref_eigs[k][r] = eigs[k];
  }
  res.thresholds.resize(res.p);
  for (std::size_t k = 0; k < res.p; ++k) {
    std::sort(ref_eigs[k].begin(), ref_eigs[k].end());
    res.thresholds[k] = percentile_sorted(ref_eigs[k], percentile);
  }
  res.n_retained = 0;
  while (res.n_retained < res.p && res.observed[res.n_retained] > res.thresholds[res.n_retained])
    ++res.n_retained;
  return res;
}

}  // namespace tatdv
