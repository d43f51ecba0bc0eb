#include "tatdv/validate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <map>

#include "tatdv/error.hpp"
#include "tatdv/stats.hpp"

namespace tatdv {

const char* to_string(SeKind k) {
  switch (k) {
    case SeKind::classical: return "classical";
    case SeKind::robust: return "robust";
    case SeKind::cluster: return "cluster";
  }
  return "classical";
}

OlsResult ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  std::vector<std::string> names, SeKind se_kind,
                  const std::vector<int>* clusters) {
  const Eigen::Index n = X.rows(), k = X.cols();
  if (y.size() != n) fail(errc::invalid_argument, "ols_fit: y/X row mismatch");
  if (n <= k) fail(errc::stage, "RankDeficient: n <= k");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k) fail(errc::stage, "RankDeficient: X has rank " + std::to_string(qr.rank()) +
                                           " < " + std::to_string(k));
  OlsResult r;
  r.names = std::move(names);
  r.se_kind = se_kind;
  r.n = static_cast<std::size_t>(n);
  r.beta = qr.solve(y);

  Eigen::VectorXd e = y - X * r.beta;
  double ybar = y.mean();
  double tss = (y.array() - ybar).square().sum();
  double rss = e.squaredNorm();
  r.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;

  Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).llt().solve(Eigen::MatrixXd::Identity(k, k));

  if (se_kind == SeKind::classical) {
    double s2 = rss / static_cast<double>(n - k);
    r.se = (s2 * xtx_inv.diagonal()).cwiseSqrt();
    return r;
  }
  if (se_kind == SeKind::robust) {
    // HC0: meat = sum_i x_i x_i' e_i^2, no finite-sample correction.
    Eigen::MatrixXd meat = X.transpose() * e.array().square().matrix().asDiagonal() * X;
    r.se = (xtx_inv * meat * xtx_inv).diagonal().cwiseSqrt();
    return r;
  }

  if (!clusters || static_cast<Eigen::Index>(clusters->size()) != n)
    fail(errc::invalid_argument, "ols_fit: cluster ids required for clustered errors");
  std::map<int, Eigen::VectorXd> sums;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = sums.try_emplace((*clusters)[i], Eigen::VectorXd::Zero(k));
    it->second += X.row(i).transpose() * e[i];
  }
  const double G = static_cast<double>(sums.size());
  if (sums.size() < 2) fail(errc::stage, "TooFewClusters: " + std::to_string(sums.size()));
  r.n_clusters = sums.size();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, g] : sums) meat += g * g.transpose();
  double corr = G / (G - 1.0) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  r.se = (corr * (xtx_inv * meat * xtx_inv).diagonal()).cwiseSqrt();
  return r;
}

std::vector<SubgroupResult> subgroup_regressions(
    const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names,
    const std::vector<int>& clusters,
    const std::vector<std::pair<std::string, std::vector<bool>>>& splits) {
  std::vector<SubgroupResult> out;
  for (const auto& [split_name, above] : splits) {
    if (above.size() != static_cast<std::size_t>(X.rows()))
      fail(errc::invalid_argument, "subgroup_regressions: split length mismatch");
    for (bool side : {true, false}) {
      SubgroupResult sg;
      sg.split = split_name;
      sg.group = side ? "above" : "at_or_below";
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        if (above[static_cast<std::size_t>(i)] == side) rows.push_back(i);
      sg.n = rows.size();
      if (rows.size() <= static_cast<std::size_t>(X.cols())) {
        sg.failure = "EstimationFailed: group too small (n=" + std::to_string(rows.size()) + ")";
        out.push_back(std::move(sg));
        continue;
      }
      Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
      Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows.size()), X.cols());
      std::vector<int> cs(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        ys[static_cast<Eigen::Index>(i)] = y[rows[i]];
        Xs.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
        cs[i] = clusters[static_cast<std::size_t>(rows[i])];
      }
      try {
        sg.fit = ols_fit(ys, Xs, names, SeKind::cluster, &cs);
        sg.ok = true;
      } catch (const Error& e) {
        sg.failure = std::string("EstimationFailed: ") + e.what();
      }
      out.push_back(std::move(sg));
    }
  }
  return out;
}

namespace {

double probit_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& xb) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += y[i] > 0.5 ? norm_lcdf(xb[i]) : norm_lcdf(-xb[i]);
  return ll;
}

}  // namespace

ProbitFit probit_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     std::vector<std::string> names) {
  const Eigen::Index n = X.rows(), k = X.cols();
  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 0.0)
      any0 = true;
    else if (y[i] == 1.0)
      any1 = true;
    else
      fail(errc::invalid_argument, "probit_fit: y must be 0/1");
  }
  if (!any0 || !any1) fail(errc::stage, "Separation: only one outcome class present");

  ProbitFit fit;
  fit.names = std::move(names);
  fit.n = static_cast<std::size_t>(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = probit_loglik(y, X * beta);

  for (std::size_t iter = 0; iter < 200; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd xb = X * beta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      double phi = norm_pdf(xb[i]);
      // Inverse Mills ratios via the stable log-CDF.
      double m1 = phi * std::exp(-norm_lcdf(xb[i]));    // phi/Phi
      double m0 = phi * std::exp(-norm_lcdf(-xb[i]));   // phi/(1-Phi)
      double score = y[i] > 0.5 ? m1 : -m0;
      double w = y[i] > 0.5 ? m1 * (m1 + xb[i]) : m0 * (m0 - xb[i]);
      grad += X.row(i).transpose() * score;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), w);
    }
    hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();

    if (grad.lpNorm<Eigen::Infinity>() < 1e-8) {
      // A gradient this small with the likelihood at certainty means the
      // optimum ran off to infinity and the tail flattened out, not that
      // an interior maximum was found.
      if (ll > -1e-6) fail(errc::stage, "Separation: fitted probabilities reached certainty");
      Eigen::LLT<Eigen::MatrixXd> llt(hess);
      if (llt.info() != Eigen::Success)
        fail(errc::stage, "SingularInformation: probit Hessian not PD");
      fit.vcov = llt.solve(Eigen::MatrixXd::Identity(k, k));
      fit.se = fit.vcov.diagonal().cwiseSqrt();
      fit.beta = beta;
      fit.loglik = ll;
      return fit;
    }

    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    Eigen::VectorXd step = llt.info() == Eigen::Success ? llt.solve(grad).eval() : grad;
    double t = 1.0;
    bool improved = false;
    // Non-decrease up to the rounding noise of ll itself; near the
    // optimum the true gain of a full Newton step sits below that
    // noise, and rejecting such steps stalls the gradient above its
    // convergence threshold.
    const double noise = 1e-12 * (1.0 + std::abs(ll));
    for (int h = 0; h < 50; ++h) {
      Eigen::VectorXd cand = beta + t * step;
      double ll_new = probit_loglik(y, X * cand);
      if (ll_new >= ll - noise) {
        beta = cand;
        ll = ll_new;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
    if (beta.norm() > 1e3) fail(errc::stage, "Separation: coefficient norm diverged");
  }
  fail(errc::stage, "NoConvergence: probit Newton iterations exhausted");
}

AmeResult probit_ame(const ProbitFit& fit, const Eigen::MatrixXd& X, int focal,
                     bool binary_focal) {
  const Eigen::Index n = X.rows(), k = X.cols();
  AmeResult r;
  r.focal = fit.names[static_cast<std::size_t>(focal)];
  r.n = static_cast<std::size_t>(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
  double acc = 0.0;
  if (binary_focal) {
    Eigen::VectorXd row1, row0;
    for (Eigen::Index i = 0; i < n; ++i) {
      row1 = X.row(i).transpose();
      row0 = row1;
      row1[focal] = 1.0;
      row0[focal] = 0.0;
      double xb1 = row1.dot(fit.beta), xb0 = row0.dot(fit.beta);
      acc += norm_cdf(xb1) - norm_cdf(xb0);
      grad += norm_pdf(xb1) * row1 - norm_pdf(xb0) * row0;
    }
  } else {
    double bf = fit.beta[focal];
    for (Eigen::Index i = 0; i < n; ++i) {
      double xb = X.row(i).dot(fit.beta);
      double phi = norm_pdf(xb);
      acc += phi * bf;
      // d/db_j mean(phi(xb) b_f) = mean(-xb phi x_j b_f) + phi 1{j=f}
      grad += -xb * phi * bf * X.row(i).transpose();
      grad[focal] += phi;
    }
  }
  double dn = static_cast<double>(n);
  r.estimate = acc / dn;
  grad /= dn;
  r.se = std::sqrt(grad.dot(fit.vcov * grad));
  r.ci_low = r.estimate - 1.96 * r.se;
  r.ci_high = r.estimate + 1.96 * r.se;
  return r;
}

double two_sided_p(double z) { return 2.0 * norm_cdf(-std::fabs(z)); }

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

}  // namespace tatdv
