#include "tatdv/composite.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tatdv/error.hpp"
#include "tatdv/stats.hpp"

namespace tatdv {

CompositeResult build_composite(const Eigen::MatrixXd& scores, const std::vector<bool>& reverse) {
  const Eigen::Index p = scores.cols();
  if (reverse.size() != static_cast<std::size_t>(p))
    fail(errc::invalid_argument, "build_composite: reverse flag per input required");

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    if (!scores.row(i).hasNaN()) keep.push_back(i);
  if (keep.size() < 4) fail(errc::stage, "TooFewRows: composite needs >= 4 complete rows");

  CompositeResult res;
  res.skipped = static_cast<std::size_t>(scores.rows()) - keep.size();
  CompositeModel& m = res.model;
  m.reverse = reverse;
  m.means.resize(p);
  m.sds.resize(p);

  Eigen::MatrixXd z(static_cast<Eigen::Index>(keep.size()), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double mu = 0.0;
    for (auto i : keep) mu += scores(i, j);
    mu /= static_cast<double>(keep.size());
    double var = 0.0;
    for (auto i : keep) var += (scores(i, j) - mu) * (scores(i, j) - mu);
    var /= static_cast<double>(keep.size() - 1);
    if (!(var > 0.0)) fail(errc::stage, "DegenerateCorrelation: constant input column");
    m.means[j] = mu;
    m.sds[j] = std::sqrt(var);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      double v = (scores(keep[r], j) - mu) / m.sds[j];
      z(static_cast<Eigen::Index>(r), j) = reverse[j] ? -v : v;
    }
  }

  Eigen::MatrixXd corr = (z.transpose() * z) / static_cast<double>(keep.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  if (es.info() != Eigen::Success) fail(errc::internal, "eigen decomposition failed");
  Eigen::VectorXd ev = es.eigenvalues().reverse();
  if (!(ev[0] > 1e-12)) fail(errc::stage, "DegenerateCorrelation: rank < 1");
  m.eigenvalues = ev;
  m.explained = ev[0] / static_cast<double>(p);
  m.low_explained_warning = m.explained < 0.4;
  m.phi = es.eigenvectors().col(p - 1);
  if (m.phi[0] < 0.0) m.phi = -m.phi;

  res.index.setConstant(scores.rows(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < keep.size(); ++r)
    res.index[keep[r]] = z.row(static_cast<Eigen::Index>(r)).dot(m.phi);
  return res;
}

ReliabilityReport cronbach_alpha_from_cov(const Eigen::MatrixXd& cov) {
  const Eigen::Index k = cov.rows();
  if (k < 2) fail(errc::invalid_argument, "TooFewItems: alpha needs k >= 2");
  ReliabilityReport r;
  r.k = static_cast<std::size_t>(k);
  r.vbar = cov.diagonal().mean();
  r.cbar = (cov.sum() - cov.trace()) / static_cast<double>(k * (k - 1));
  r.alpha = static_cast<double>(k) * r.cbar / (r.vbar + static_cast<double>(k - 1) * r.cbar);
  return r;
}

ReliabilityReport cronbach_alpha(const Eigen::MatrixXd& items) {
  if (items.rows() < 2) fail(errc::invalid_argument, "TooFewItems: alpha needs n >= 2");
  Eigen::MatrixXd centered = items.rowwise() - items.colwise().mean();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(items.rows() - 1);
  return cronbach_alpha_from_cov(cov);
}

DistributionSummary index_distribution(const std::vector<double>& values) {
  if (values.size() < 30) fail(errc::invalid_argument, "index_distribution: n < 30");
  DistributionSummary s;
  s.mean = mean(values);
  s.sd = std::sqrt(variance(values));
  s.skewness = tatdv::skewness(values);

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double iqr = percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0);
  double spread = std::min(s.sd, iqr / 1.34);
  if (spread <= 0.0) spread = s.sd > 0.0 ? s.sd : 1.0;
  double n = static_cast<double>(values.size());
  s.bandwidth = 0.9 * spread * std::pow(n, -0.2);

  const int kGrid = 512;
  double lo = sorted.front() - 3.0 * s.bandwidth;
  double hi = sorted.back() + 3.0 * s.bandwidth;
  s.grid[0].resize(kGrid);
  s.grid[1].assign(kGrid, 0.0);
  double step = (hi - lo) / static_cast<double>(kGrid - 1);
  for (int g = 0; g < kGrid; ++g) s.grid[0][g] = lo + step * g;
  double inv_h = 1.0 / s.bandwidth;
  for (int g = 0; g < kGrid; ++g) {
    double acc = 0.0;
    for (double v : values) acc += norm_pdf((s.grid[0][g] - v) * inv_h);
    s.grid[1][g] = acc * inv_h / n;
  }
  return s;
}

}  // namespace tatdv
