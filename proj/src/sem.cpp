#include "tatdv/sem.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "tatdv/derive.hpp"
#include "tatdv/error.hpp"

namespace tatdv {

namespace {

constexpr double kEpsMin = 1e-8;
constexpr double kPsiMax = 1.0 - 1e-8;
constexpr std::size_t kMaxIter = 10000;

double softplus(double u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }
double softplus_inv(double e) {
  return e > 30.0 ? e : std::log(std::expm1(std::max(e, 1e-12)));
}
double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

Eigen::MatrixXd loading_matrix(const SemSpec& spec, const Eigen::VectorXd& lambda) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(spec.n_indicators(), spec.n_latents());
  for (std::size_t k = 0; k < spec.n_indicators(); ++k) L(k, spec.loading_of[k]) = lambda[k];
  return L;
}

bool logdet_and_inverse(const Eigen::MatrixXd& m, double& logdet, Eigen::MatrixXd& inv) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return true;
}

Eigen::MatrixXd complete_rows(const Eigen::MatrixXd& data, std::size_t* dropped) {
  std::vector<Eigen::Index> keep;
  keep.reserve(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    if (!data.row(i).hasNaN()) keep.push_back(i);
  *dropped = static_cast<std::size_t>(data.rows()) - keep.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), data.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(keep[i]);
  return out;
}

}  // namespace

SemSpec SemSpec::default_spec() {
  SemSpec s;
  s.latent_names = {"justification_of_violence", "masculinity_norms", "gender_gap_unpaid_work"};
  s.indicator_names = tatdv::indicator_names();
  s.loading_of = {0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2};
  return s;
}

Eigen::VectorXd SemParams::pack(const SemSpec& spec) const {
  Eigen::VectorXd theta(spec.n_free());
  Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  theta.head(nI) = lambda;
  theta.segment(nI, nI) = eps;
  Eigen::Index j = 2 * nI;
  for (std::size_t a = 0; a < spec.n_latents(); ++a)
    for (std::size_t b = a + 1; b < spec.n_latents(); ++b) theta[j++] = psi(a, b);
  return theta;
}

SemParams SemParams::unpack(const SemSpec& spec, const Eigen::VectorXd& theta) {
  SemParams p;
  Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  p.lambda = theta.head(nI);
  p.eps = theta.segment(nI, nI);
  p.psi = Eigen::MatrixXd::Identity(spec.n_latents(), spec.n_latents());
  Eigen::Index j = 2 * nI;
  for (std::size_t a = 0; a < spec.n_latents(); ++a)
    for (std::size_t b = a + 1; b < spec.n_latents(); ++b) {
      p.psi(a, b) = p.psi(b, a) = theta[j++];
    }
  return p;
}

Eigen::MatrixXd implied_sigma(const SemSpec& spec, const SemParams& p) {
  Eigen::MatrixXd L = loading_matrix(spec, p.lambda);
  Eigen::MatrixXd sigma = L * p.psi * L.transpose();
  sigma.diagonal() += p.eps;
  return sigma;
}

double fml_value(const SemSpec& spec, const SemParams& p, const Eigen::MatrixXd& S) {
  Eigen::MatrixXd sigma = implied_sigma(spec, p);
  double logdet_sigma;
  Eigen::MatrixXd inv;
  if (!logdet_and_inverse(sigma, logdet_sigma, inv))
    return std::numeric_limits<double>::infinity();
  double logdet_s;
  Eigen::MatrixXd s_inv;
  if (!logdet_and_inverse(S, logdet_s, s_inv))
    fail(errc::stage, "NonPositiveDefiniteS: sample covariance is not PD");
  return logdet_sigma + (S.array() * inv.array()).sum() - logdet_s -
         static_cast<double>(spec.n_indicators());
}

double fml_value_gradient(const SemSpec& spec, const SemParams& p, const Eigen::MatrixXd& S,
                          Eigen::VectorXd& grad) {
  Eigen::MatrixXd sigma = implied_sigma(spec, p);
  double logdet_sigma;
  Eigen::MatrixXd W;
  if (!logdet_and_inverse(sigma, logdet_sigma, W))
    return std::numeric_limits<double>::infinity();
  double logdet_s;
  Eigen::MatrixXd s_inv;
  if (!logdet_and_inverse(S, logdet_s, s_inv))
    fail(errc::stage, "NonPositiveDefiniteS: sample covariance is not PD");

  double f = logdet_sigma + (S.array() * W.array()).sum() - logdet_s -
             static_cast<double>(spec.n_indicators());

  // dF/dtheta_j = tr(G dSigma/dtheta_j), G = Sigma^-1
  // (Sigma - S) Sigma^-1.
  Eigen::MatrixXd G = W * (sigma - S) * W;
  Eigen::MatrixXd L = loading_matrix(spec, p.lambda);
  Eigen::MatrixXd GLP = G * L * p.psi;
  Eigen::MatrixXd LtGL = L.transpose() * G * L;

  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  grad.resize(spec.n_free());
  for (Eigen::Index k = 0; k < nI; ++k) grad[k] = 2.0 * GLP(k, spec.loading_of[k]);
  for (Eigen::Index k = 0; k < nI; ++k) grad[nI + k] = G(k, k);
  Eigen::Index j = 2 * nI;
  for (std::size_t a = 0; a < spec.n_latents(); ++a)
    for (std::size_t b = a + 1; b < spec.n_latents(); ++b) grad[j++] = 2.0 * LtGL(a, b);
  return f;
}

namespace {

// Optimizer coordinates: lambda identical, eps through softplus,
// psi off-diagonals through tanh.
Eigen::VectorXd to_unconstrained(const SemSpec& spec, const Eigen::VectorXd& theta) {
  Eigen::VectorXd u = theta;
  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  for (Eigen::Index k = 0; k < nI; ++k) u[nI + k] = softplus_inv(theta[nI + k] - kEpsMin);
  for (Eigen::Index j = 2 * nI; j < u.size(); ++j) u[j] = std::atanh(theta[j] / kPsiMax);
  return u;
}

Eigen::VectorXd to_natural(const SemSpec& spec, const Eigen::VectorXd& u) {
  Eigen::VectorXd theta = u;
  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  for (Eigen::Index k = 0; k < nI; ++k) theta[nI + k] = kEpsMin + softplus(u[nI + k]);
  for (Eigen::Index j = 2 * nI; j < u.size(); ++j) theta[j] = kPsiMax * std::tanh(u[j]);
  return theta;
}

Eigen::VectorXd chain_gradient(const SemSpec& spec, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& grad_nat) {
  Eigen::VectorXd g = grad_nat;
  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  for (Eigen::Index k = 0; k < nI; ++k) g[nI + k] *= sigmoid(u[nI + k]);
  for (Eigen::Index j = 2 * nI; j < u.size(); ++j) {
    double t = std::tanh(u[j]);
    g[j] *= kPsiMax * (1.0 - t * t);
  }
  return g;
}

struct OptResult {
  Eigen::VectorXd theta;
  double f = 0.0;
  std::size_t iterations = 0;
  double grad_inf = 0.0;
};

OptResult minimize_fml(const SemSpec& spec, const Eigen::MatrixXd& S,
                       const Eigen::VectorXd& theta0) {
  const Eigen::Index dim = theta0.size();
  Eigen::VectorXd u = to_unconstrained(spec, theta0);
  Eigen::VectorXd grad_nat(dim);

  auto eval = [&](const Eigen::VectorXd& uu, Eigen::VectorXd& g_u) {
    SemParams p = SemParams::unpack(spec, to_natural(spec, uu));
    double f = fml_value_gradient(spec, p, S, grad_nat);
    if (std::isfinite(f)) g_u = chain_gradient(spec, uu, grad_nat);
    return f;
  };

  Eigen::VectorXd g(dim);
  double f = eval(u, g);
  if (!std::isfinite(f)) fail(errc::stage, "NoConvergence: infeasible starting point");

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(dim, dim);
  std::size_t iter = 0;
  bool reset_used = false;
  for (; iter < kMaxIter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-6) break;
    Eigen::VectorXd d = -(H * g);
    if (d.dot(g) >= 0.0) {
      H.setIdentity();
      d = -g;
    }
    double t = 1.0, f_new = 0.0;
    Eigen::VectorXd u_new, g_new(dim);
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      u_new = u + t * d;
      f_new = eval(u_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * g.dot(d)) {
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) {
      if (reset_used) break;
      H.setIdentity();
      reset_used = true;
      continue;
    }
    reset_used = false;
    Eigen::VectorXd s = u_new - u, y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      Eigen::VectorXd Hy = H * y;
      double yHy = y.dot(Hy);
      // BFGS inverse update
      H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
           (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    double rel = std::fabs(f - f_new) / std::max(1.0, std::fabs(f_new));
    u = u_new;
    f = f_new;
    g = g_new;
    if (g.lpNorm<Eigen::Infinity>() < 1e-6 && rel < 1e-9) break;
  }
  if (iter >= kMaxIter)
    fail(errc::stage, "NoConvergence: iteration cap reached (gradient inf-norm " +
                          std::to_string(g.lpNorm<Eigen::Infinity>()) + ")");

  OptResult res;
  res.theta = to_natural(spec, u);
  res.f = f;
  res.iterations = iter;
  res.grad_inf = g.lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace

SemEstimate fit_ml(const SemSpec& spec, const Eigen::MatrixXd& data) {
  if (static_cast<std::size_t>(data.cols()) != spec.n_indicators())
    fail(errc::invalid_argument, "fit_ml: column count does not match the model");

  SemEstimate est;
  est.spec = spec;
  Eigen::MatrixXd x = complete_rows(data, &est.dropped);
  est.n = static_cast<std::size_t>(x.rows());
  if (est.n <= spec.n_free())
    fail(errc::stage, "TooFewRows: " + std::to_string(est.n) + " complete rows for " +
                          std::to_string(spec.n_free()) + " free parameters");

  est.xbar = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - est.xbar.transpose();
  est.S = (centered.transpose() * centered) / static_cast<double>(est.n - 1);
  {
    Eigen::LLT<Eigen::MatrixXd> llt(est.S);
    if (llt.info() != Eigen::Success)
      fail(errc::stage, "NonPositiveDefiniteS: sample covariance is not PD");
  }

  // Optimize on the correlation scale: F_ML is invariant under
  // per-indicator rescaling, and the standardized problem keeps every
  // parameter O(1) no matter how heterogeneous the raw units are.
  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  Eigen::VectorXd sd = est.S.diagonal().cwiseSqrt();
  Eigen::MatrixXd S_std =
      sd.cwiseInverse().asDiagonal() * est.S * sd.cwiseInverse().asDiagonal();
  S_std = S_std.selfadjointView<Eigen::Upper>();

  SemParams p0;
  p0.lambda = Eigen::VectorXd::Constant(nI, 0.5);
  p0.eps = Eigen::VectorXd::Constant(nI, 0.5);
  p0.psi = Eigen::MatrixXd::Identity(spec.n_latents(), spec.n_latents());

  OptResult opt = minimize_fml(spec, S_std, p0.pack(spec));
  SemParams p = SemParams::unpack(spec, opt.theta);

  // The residual floor lives on the standardized scale, so the boundary
  // test has to run before units are restored.
  est.heywood.resize(spec.n_indicators());
  for (std::size_t k = 0; k < spec.n_indicators(); ++k)
    est.heywood[k] = p.eps[static_cast<Eigen::Index>(k)] < 10.0 * kEpsMin;

  p.lambda.array() *= sd.array();
  p.eps.array() *= sd.array().square();

  // Canonical orientation: a factor whose loadings sum negative is flipped
  // (its loadings and covariances negate; the fit is invariant).
  for (std::size_t f = 0; f < spec.n_latents(); ++f) {
    double sum = 0.0;
    for (std::size_t k = 0; k < spec.n_indicators(); ++k)
      if (spec.loading_of[k] == static_cast<int>(f)) sum += p.lambda[k];
    if (sum < 0.0) {
      for (std::size_t k = 0; k < spec.n_indicators(); ++k)
        if (spec.loading_of[k] == static_cast<int>(f)) p.lambda[k] = -p.lambda[k];
      for (std::size_t o = 0; o < spec.n_latents(); ++o)
        if (o != f) {
          p.psi(f, o) = -p.psi(f, o);
          p.psi(o, f) = p.psi(f, o);
        }
    }
  }

  est.lambda = p.lambda;
  est.eps = p.eps;
  est.psi = p.psi;
  est.sigma = implied_sigma(spec, p);
  est.f_min = opt.f;
  est.iterations = opt.iterations;
  est.grad_inf = opt.grad_inf;
  est.std_loadings = est.lambda.array() / est.sigma.diagonal().array().sqrt();

  robust_se(est, x);
  return est;
}

void robust_se(SemEstimate& est, const Eigen::MatrixXd& data) {
  const SemSpec& spec = est.spec;
  std::size_t dropped = 0;
  Eigen::MatrixXd x = complete_rows(data, &dropped);
  const Eigen::Index n = x.rows();
  const Eigen::Index nI = static_cast<Eigen::Index>(spec.n_indicators());
  const Eigen::Index dim = static_cast<Eigen::Index>(spec.n_free());

  double logdet;
  Eigen::MatrixXd W;
  if (!logdet_and_inverse(est.sigma, logdet, W))
    fail(errc::stage, "SingularInformation: implied covariance not PD");

  Eigen::MatrixXd L = loading_matrix(spec, est.lambda);
  // Explicit dSigma/dtheta_j; the model is small enough that clarity wins.
  std::vector<Eigen::MatrixXd> dS(dim, Eigen::MatrixXd::Zero(nI, nI));
  Eigen::MatrixXd LP = L * est.psi;
  for (Eigen::Index k = 0; k < nI; ++k) {
    int f = spec.loading_of[k];
    for (Eigen::Index i = 0; i < nI; ++i) {
      dS[k](k, i) += LP(i, f);
      dS[k](i, k) += LP(i, f);
    }
  }
  for (Eigen::Index k = 0; k < nI; ++k) dS[nI + k](k, k) = 1.0;
  Eigen::Index j = 2 * nI;
  for (std::size_t a = 0; a < spec.n_latents(); ++a)
    for (std::size_t b = a + 1; b < spec.n_latents(); ++b) {
      Eigen::MatrixXd E = Eigen::MatrixXd::Zero(spec.n_latents(), spec.n_latents());
      E(a, b) = E(b, a) = 1.0;
      dS[j++] = L * E * L.transpose();
    }

  // Expected information A_jk = (n/2) tr(W dS_j W dS_k).
  std::vector<Eigen::MatrixXd> WdS(dim);
  for (Eigen::Index q = 0; q < dim; ++q) WdS[q] = W * dS[q];
  Eigen::MatrixXd A(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = a; b < dim; ++b) {
      double tr = (WdS[a].array() * WdS[b].transpose().array()).sum();
      A(a, b) = A(b, a) = 0.5 * static_cast<double>(n) * tr;
    }

  // Per-observation scores s_ij = -1/2 (tr(W dS_j) - u' dS_j u), u = W d_i.
  Eigen::VectorXd c(dim);
  for (Eigen::Index q = 0; q < dim; ++q) c[q] = WdS[q].trace();

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd s(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd d = x.row(i).transpose() - est.xbar;
    Eigen::VectorXd u = W * d;
    Eigen::VectorXd t = L.transpose() * u;       // n_latents
    Eigen::VectorXd pt = est.psi * t;            // (Psi L' u)
    for (Eigen::Index k = 0; k < nI; ++k)
      s[k] = -0.5 * (c[k] - 2.0 * u[k] * pt[spec.loading_of[k]]);
    for (Eigen::Index k = 0; k < nI; ++k) s[nI + k] = -0.5 * (c[nI + k] - u[k] * u[k]);
    Eigen::Index q = 2 * nI;
    for (std::size_t a = 0; a < spec.n_latents(); ++a)
      for (std::size_t b = a + 1; b < spec.n_latents(); ++b) {
        s[q] = -0.5 * (c[q] - 2.0 * t[a] * t[b]);
        ++q;
      }
    B.selfadjointView<Eigen::Lower>().rankUpdate(s);
  }
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();

  Eigen::LLT<Eigen::MatrixXd> allt(A);
  if (allt.info() != Eigen::Success)
    fail(errc::stage, "SingularInformation: expected information not PD");
  Eigen::MatrixXd Ainv = allt.solve(Eigen::MatrixXd::Identity(dim, dim));
  Eigen::MatrixXd V = Ainv * B * Ainv;

  auto unpack_se = [&](const Eigen::VectorXd& diag, Eigen::VectorXd& lam, Eigen::VectorXd& ep,
                       Eigen::VectorXd& ps) {
    lam = diag.head(nI).cwiseSqrt();
    ep = diag.segment(nI, nI).cwiseSqrt();
    ps = diag.tail(dim - 2 * nI).cwiseSqrt();
  };
  unpack_se(V.diagonal(), est.se_lambda, est.se_eps, est.se_psi);
  unpack_se(Ainv.diagonal(), est.se_lambda_naive, est.se_eps_naive, est.se_psi_naive);
}

FitStats fit_statistics(const SemEstimate& est) {
  FitStats fs;
  const std::size_t nI = est.spec.n_indicators();
  for (std::size_t k = 0; k < nI; ++k) {
    FitRow r;
    r.indicator = est.spec.indicator_names[k];
    r.predicted = est.lambda[k] * est.lambda[k];
    r.residual = est.eps[k];
    r.fitted = r.predicted + r.residual;
    r.r2 = r.predicted / r.fitted;
    r.mc = std::sqrt(r.r2);
    r.mc2 = r.r2;
    fs.rows.push_back(r);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(est.S);
  double logdet_s = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double logdet_theta = est.eps.array().log().sum();
  fs.cd = 1.0 - std::exp(logdet_theta - logdet_s);

  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < nI; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double denom = std::sqrt(est.S(i, i) * est.S(j, j));
      double resid = (est.S(i, j) - est.sigma(i, j)) / denom;
      acc += resid * resid;
      ++cnt;
    }
  fs.srmr = std::sqrt(acc / static_cast<double>(cnt));
  return fs;
}

FactorScores factor_scores(const SemEstimate& est, const Eigen::MatrixXd& data) {
  const SemSpec& spec = est.spec;
  const Eigen::Index nL = static_cast<Eigen::Index>(spec.n_latents());
  FactorScores out;
  out.scores.setConstant(data.rows(), nL, std::numeric_limits<double>::quiet_NaN());

  double logdet;
  Eigen::MatrixXd W;
  if (!logdet_and_inverse(est.sigma, logdet, W))
    fail(errc::stage, "SingularInformation: implied covariance not PD");
  Eigen::MatrixXd L = loading_matrix(spec, est.lambda);
  // score = Psi L' Sigma^-1 (x - xbar)
  Eigen::MatrixXd coef = est.psi * L.transpose() * W;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (data.row(i).hasNaN()) {
      ++out.skipped;
      continue;
    }
    keep.push_back(i);
    out.scores.row(i) = (coef * (data.row(i).transpose() - est.xbar)).transpose();
  }
  if (keep.size() < 2) fail(errc::stage, "TooFewRows: factor scores need >= 2 complete rows");

  for (Eigen::Index f = 0; f < nL; ++f) {
    double m = 0.0;
    for (auto i : keep) m += out.scores(i, f);
    m /= static_cast<double>(keep.size());
    double v = 0.0;
    for (auto i : keep) v += (out.scores(i, f) - m) * (out.scores(i, f) - m);
    v /= static_cast<double>(keep.size() - 1);
    double sd = std::sqrt(v);
    if (!(sd > 0.0)) fail(errc::stage, "ConstantColumn: factor score " + spec.latent_names[f]);
    for (auto i : keep) out.scores(i, f) = (out.scores(i, f) - m) / sd;
  }
  return out;
}

}  // namespace tatdv
