#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "tatdv/derive.hpp"
#include "tatdv/error.hpp"
#include "tatdv/sem.hpp"
#include "tatdv/stats.hpp"
#include "tatdv/synth.hpp"

using namespace tatdv;

namespace {

// Algebra fixtures; a single-indicator latent is fine for closed forms
// but is not an estimable model.
SemSpec tiny_spec() {
  SemSpec s;
  s.latent_names = {"A", "B"};
  s.indicator_names = {"x0", "x1", "x2"};
  s.loading_of = {0, 0, 1};
  return s;
}

SemParams tiny_params() {
  SemParams p;
  p.lambda = Eigen::Vector3d(1.2, 0.7, 0.9);
  p.eps = Eigen::Vector3d(0.5, 0.8, 0.4);
  p.psi = Eigen::Matrix2d::Identity();
  p.psi(0, 1) = p.psi(1, 0) = 0.3;
  return p;
}

// Smallest identified two-factor model used by the fit tests.
SemSpec small_spec() {
  SemSpec s;
  s.latent_names = {"A", "B"};
  s.indicator_names = {"x0", "x1", "x2", "x3", "x4"};
  s.loading_of = {0, 0, 0, 1, 1};
  return s;
}

SemParams small_params() {
  SemParams p;
  p.lambda.resize(5);
  p.lambda << 1.2, 0.7, 0.9, 1.1, 0.8;
  p.eps.resize(5);
  p.eps << 0.5, 0.8, 0.4, 0.6, 0.9;
  p.psi = Eigen::Matrix2d::Identity();
  p.psi(0, 1) = p.psi(1, 0) = 0.3;
  return p;
}

// Rows drawn straight from the factor model.
Eigen::MatrixXd sim_model(const SemSpec& spec, const SemParams& p, int n, uint64_t seed,
                          Eigen::MatrixXd* latents_out = nullptr) {
  const int nI = static_cast<int>(spec.n_indicators());
  const int nL = static_cast<int>(spec.n_latents());
  Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(p.psi).matrixL();
  Eigen::MatrixXd x(n, nI);
  if (latents_out) latents_out->resize(n, nL);
  Rng rng(seed);
  Eigen::VectorXd z(nL);
  for (int i = 0; i < n; ++i) {
    for (int f = 0; f < nL; ++f) z[f] = rng.normal();
    Eigen::VectorXd F = chol * z;
    if (latents_out) latents_out->row(i) = F.transpose();
    for (int k = 0; k < nI; ++k)
      x(i, k) = p.lambda[k] * F[spec.loading_of[k]] + std::sqrt(p.eps[k]) * rng.normal();
  }
  return x;
}

SemParams default_truth() {
  GeneratorSpec g;
  SemParams p;
  p.lambda = Eigen::Map<const Eigen::VectorXd>(g.lambda.data(), 11);
  p.eps = Eigen::Map<const Eigen::VectorXd>(g.eps.data(), 11);
  p.psi = g.psi();
  return p;
}

double colcorr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd ac = a.array() - a.mean();
  Eigen::VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

}  // namespace

TEST_CASE("default measurement model wires eleven indicators to three latents") {
  SemSpec s = SemSpec::default_spec();
  CHECK(s.n_latents() == 3);
  CHECK(s.n_indicators() == 11);
  CHECK(s.n_free() == 25);
  CHECK(s.latent_names[0] == "justification_of_violence");
  CHECK(s.latent_names[1] == "masculinity_norms");
  CHECK(s.latent_names[2] == "gender_gap_unpaid_work");
  CHECK(s.indicator_names == indicator_names());
  CHECK(s.loading_of == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2});
}

TEST_CASE("parameter packing round-trips") {
  SemSpec s = tiny_spec();
  SemParams p = tiny_params();
  Eigen::VectorXd theta = p.pack(s);
  REQUIRE(theta.size() == static_cast<Eigen::Index>(s.n_free()));
  SemParams q = SemParams::unpack(s, theta);
  CHECK((q.lambda - p.lambda).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((q.eps - p.eps).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((q.psi - p.psi).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("implied covariance matches the closed form") {
  SemSpec s = tiny_spec();
  SemParams p = tiny_params();
  Eigen::MatrixXd sig = implied_sigma(s, p);
  CHECK(sig(0, 0) == doctest::Approx(1.2 * 1.2 + 0.5));
  CHECK(sig(1, 1) == doctest::Approx(0.7 * 0.7 + 0.8));
  CHECK(sig(2, 2) == doctest::Approx(0.9 * 0.9 + 0.4));
  CHECK(sig(0, 1) == doctest::Approx(1.2 * 0.7));        // same latent
  CHECK(sig(0, 2) == doctest::Approx(1.2 * 0.9 * 0.3));  // across latents
  CHECK(sig(1, 2) == doctest::Approx(0.7 * 0.9 * 0.3));
  CHECK((sig - sig.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("discrepancy vanishes exactly at the generating parameters") {
  SemSpec s = tiny_spec();
  SemParams p = tiny_params();
  Eigen::MatrixXd S = implied_sigma(s, p);
  CHECK(std::abs(fml_value(s, p, S)) < 1e-12);

  SemParams off = p;
  off.lambda[0] = 1.5;
  CHECK(fml_value(s, off, S) > 0.0);
}

TEST_CASE("analytic gradient agrees with central differences") {
  Rng rng(424242);
  for (const SemSpec& s : {tiny_spec(), SemSpec::default_spec()}) {
    Eigen::MatrixXd data = sim_model(
        s, [&] {
          SemParams t;
          int nI = static_cast<int>(s.n_indicators());
          t.lambda = Eigen::VectorXd::Constant(nI, 0.8);
          t.eps = Eigen::VectorXd::Constant(nI, 0.6);
          t.psi = Eigen::MatrixXd::Identity(s.n_latents(), s.n_latents());
          for (int a = 0; a < static_cast<int>(s.n_latents()); ++a)
            for (int b = a + 1; b < static_cast<int>(s.n_latents()); ++b)
              t.psi(a, b) = t.psi(b, a) = 0.25;
          return t;
        }(),
        600, 99 + s.n_indicators());
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    Eigen::MatrixXd S = centered.transpose() * centered / (data.rows() - 1.0);

    for (int trial = 0; trial < 10; ++trial) {
      SemParams p;
      int nI = static_cast<int>(s.n_indicators());
      int nL = static_cast<int>(s.n_latents());
      p.lambda.resize(nI);
      p.eps.resize(nI);
      for (int k = 0; k < nI; ++k) {
        p.lambda[k] = rng.uniform_in(0.3, 1.5);
        p.eps[k] = rng.uniform_in(0.2, 2.0);
      }
      p.psi = Eigen::MatrixXd::Identity(nL, nL);
      for (int a = 0; a < nL; ++a)
        for (int b = a + 1; b < nL; ++b) p.psi(a, b) = p.psi(b, a) = rng.uniform_in(-0.3, 0.3);

      Eigen::VectorXd grad;
      double f0 = fml_value_gradient(s, p, S, grad);
      REQUIRE(std::isfinite(f0));
      Eigen::VectorXd theta = p.pack(s);
      const double h = 1e-6;
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        double fp = fml_value(s, SemParams::unpack(s, tp), S);
        double fm = fml_value(s, SemParams::unpack(s, tm), S);
        double fd = (fp - fm) / (2 * h);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("estimation recovers the generating model and its factor scores") {
  SemSpec s = SemSpec::default_spec();
  SemParams truth = default_truth();
  Eigen::MatrixXd latents;
  Eigen::MatrixXd data = sim_model(s, truth, 20000, 8675309, &latents);
  SemEstimate est = fit_ml(s, data);

  CHECK(est.n == 20000);
  CHECK(est.dropped == 0);
  CHECK(est.grad_inf < 1e-6);
  for (int k = 0; k < 11; ++k) {
    // the gap factor is identified only through its -0.17 covariance with
    // the masculinity factor, so its two loadings carry an order of
    // magnitude more sampling error than the survey loadings
    double tol = k < 9 ? 0.05 : 0.30;
    CHECK(est.lambda[k] == doctest::Approx(truth.lambda[k]).epsilon(tol));
    CHECK(est.eps[k] == doctest::Approx(truth.eps[k]).epsilon(0.10));
    CHECK(!est.heywood[k]);
    // standardized loadings are the model-implied correlations with the latent
    double fitted = est.sigma(k, k);
    CHECK(est.std_loadings[k] == doctest::Approx(est.lambda[k] / std::sqrt(fitted)));
  }
  CHECK(est.psi(0, 1) == doctest::Approx(truth.psi(0, 1)).epsilon(0.05));
  CHECK(est.psi(0, 2) == doctest::Approx(truth.psi(0, 2)).scale(1.0).epsilon(0.12));
  CHECK(est.psi(1, 2) == doctest::Approx(truth.psi(1, 2)).scale(1.0).epsilon(0.12));
  for (int f = 0; f < 3; ++f) CHECK(est.psi(f, f) == 1.0);

  // robust and naive standard errors agree under a correctly specified
  // normal model
  for (int k = 0; k < 11; ++k) {
    CHECK(est.se_lambda[k] == doctest::Approx(est.se_lambda_naive[k]).epsilon(0.10));
    CHECK(est.se_lambda[k] > 0.0);
    CHECK(est.se_eps[k] > 0.0);
  }

  FactorScores fs = factor_scores(est, data);
  CHECK(fs.skipped == 0);
  REQUIRE(fs.scores.rows() == 20000);
  for (int f = 0; f < 3; ++f) {
    double m = fs.scores.col(f).mean();
    CHECK(std::abs(m) < 1e-10);
    double var = (fs.scores.col(f).array() - m).square().sum() / (fs.scores.rows() - 1.0);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
  // score determinacy: correlation with the true latent draws
  CHECK(colcorr(fs.scores.col(0), latents.col(0)) > 0.84);
  CHECK(colcorr(fs.scores.col(1), latents.col(1)) > 0.85);
  double det_gap = colcorr(fs.scores.col(2), latents.col(2));
  CHECK(det_gap > 0.30);
  CHECK(det_gap < 0.38);
}

TEST_CASE("factor scores keep NaN rows aligned") {
  SemSpec s = small_spec();
  SemParams truth = small_params();
  Eigen::MatrixXd data = sim_model(s, truth, 800, 31337);
  SemEstimate est = fit_ml(s, data);

  Eigen::MatrixXd gapped = data;
  gapped(5, 1) = std::numeric_limits<double>::quiet_NaN();
  gapped(700, 2) = std::numeric_limits<double>::quiet_NaN();
  FactorScores fs = factor_scores(est, gapped);
  CHECK(fs.skipped == 2);
  CHECK(fs.scores.rows() == 800);
  CHECK(std::isnan(fs.scores(5, 0)));
  CHECK(std::isnan(fs.scores(5, 1)));
  CHECK(std::isnan(fs.scores(700, 0)));
  CHECK(!std::isnan(fs.scores(6, 0)));

  FactorScores full = factor_scores(est, data);
  // complete rows re-standardize over the retained set only, so the two
  // calls differ slightly; both must be standardized
  CHECK(std::abs(full.scores.col(0).mean()) < 1e-10);
}

TEST_CASE("flipped indicator columns flip the covariances, not the loadings") {
  SemSpec s = SemSpec::default_spec();
  SemParams truth = default_truth();
  Eigen::MatrixXd data = sim_model(s, truth, 4000, 5150);
  SemEstimate base = fit_ml(s, data);

  Eigen::MatrixXd flipped = data;
  for (int k = 4; k <= 8; ++k) flipped.col(k) = -data.col(k).array() + 100.0;
  SemEstimate est = fit_ml(s, flipped);
  for (int k = 4; k <= 8; ++k) {
    CHECK(est.lambda[k] > 0.0);
    CHECK(est.lambda[k] == doctest::Approx(base.lambda[k]).epsilon(1e-6));
  }
  CHECK(est.psi(0, 1) == doctest::Approx(-base.psi(0, 1)).epsilon(1e-5));
  CHECK(est.psi(1, 2) == doctest::Approx(-base.psi(1, 2)).scale(0.1).epsilon(1e-4));
  CHECK(est.psi(0, 2) == doctest::Approx(base.psi(0, 2)).scale(0.1).epsilon(1e-4));
  CHECK(est.f_min == doctest::Approx(base.f_min).epsilon(1e-8));
}

TEST_CASE("rescaling an indicator rescales only its own parameters") {
  SemSpec s = small_spec();
  SemParams truth = small_params();
  Eigen::MatrixXd data = sim_model(s, truth, 3000, 2718);
  SemEstimate base = fit_ml(s, data);

  const double c = 7.0;
  Eigen::MatrixXd scaled = data;
  scaled.col(0) *= c;
  SemEstimate est = fit_ml(s, scaled);
  CHECK(est.lambda[0] == doctest::Approx(c * base.lambda[0]).epsilon(1e-5));
  CHECK(est.eps[0] == doctest::Approx(c * c * base.eps[0]).epsilon(1e-5));
  CHECK(est.lambda[1] == doctest::Approx(base.lambda[1]).epsilon(1e-5));
  CHECK(est.psi(0, 1) == doctest::Approx(base.psi(0, 1)).epsilon(1e-5));
  CHECK(est.std_loadings[0] == doctest::Approx(base.std_loadings[0]).epsilon(1e-6));
  CHECK(est.f_min == doctest::Approx(base.f_min).epsilon(1e-7));
}

TEST_CASE("standard errors shrink like the square root of the sample") {
  SemSpec s = small_spec();
  SemParams truth = small_params();
  SemEstimate small = fit_ml(s, sim_model(s, truth, 2000, 11));
  SemEstimate large = fit_ml(s, sim_model(s, truth, 32000, 12));
  for (int k = 0; k < 3; ++k) {
    double ratio = small.se_lambda[k] / large.se_lambda[k];
    CHECK(ratio > 3.0);  // exact factor would be 4
    CHECK(ratio < 5.3);
  }
}

TEST_CASE("a residual variance pinned at its floor raises the heywood flag") {
  SemSpec s;
  s.latent_names = {"G"};
  s.indicator_names = {"a", "b", "c"};
  s.loading_of = {0, 0, 0};
  // population correlations (.85,.55,.30) imply lambda_a^2 = 1.558 > 1
  Eigen::Matrix3d R;
  R << 1, .85, .55, .85, 1, .30, .55, .30, 1;
  Eigen::Matrix3d L = Eigen::LLT<Eigen::Matrix3d>(R).matrixL();
  Rng rng(808);
  Eigen::MatrixXd data(4000, 3);
  Eigen::Vector3d z;
  for (int i = 0; i < 4000; ++i) {
    for (int j = 0; j < 3; ++j) z[j] = rng.normal();
    data.row(i) = (L * z).transpose();
  }
  SemEstimate est = fit_ml(s, data);
  CHECK(est.heywood[0]);
  CHECK(!est.heywood[1]);
  CHECK(!est.heywood[2]);
  CHECK(est.eps[0] < 1e-6);
  CHECK(est.lambda[0] > 1.0);
}

TEST_CASE("too few complete rows is an error") {
  SemSpec s = small_spec();
  Eigen::MatrixXd data = sim_model(s, small_params(), 6, 1);  // n_free = 6
  CHECK_THROWS_WITH_AS(fit_ml(s, data), doctest::Contains("TooFewRows"), Error);
  Eigen::MatrixXd wrong(50, 2);
  wrong.setZero();
  CHECK_THROWS_WITH_AS(fit_ml(s, wrong), doctest::Contains("column count"), Error);
}

TEST_CASE("fit statistics satisfy their defining identities") {
  SemSpec s = SemSpec::default_spec();
  Eigen::MatrixXd data = sim_model(s, default_truth(), 5000, 404);
  SemEstimate est = fit_ml(s, data);
  FitStats fit = fit_statistics(est);
  REQUIRE(fit.rows.size() == 11);

  double sum_ln_eps = 0.0;
  for (std::size_t k = 0; k < 11; ++k) {
    const FitRow& r = fit.rows[k];
    CHECK(r.indicator == indicator_names()[k]);
    CHECK(r.predicted == doctest::Approx(est.lambda[k] * est.lambda[k]));
    CHECK(r.fitted == doctest::Approx(r.predicted + est.eps[k]));
    CHECK(r.residual == doctest::Approx(est.eps[k]));
    CHECK(r.r2 == doctest::Approx(r.predicted / r.fitted));
    CHECK(r.mc == doctest::Approx(std::sqrt(r.r2)));
    CHECK(r.mc2 == doctest::Approx(r.r2));
    CHECK(r.r2 > 0.0);
    CHECK(r.r2 < 1.0);
    sum_ln_eps += std::log(est.eps[k]);
  }

  // brute-force CD and SRMR from the stored S and Sigma
  Eigen::LLT<Eigen::MatrixXd> llt(est.S);
  double lndetS = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  CHECK(fit.cd == doctest::Approx(1.0 - std::exp(sum_ln_eps - lndetS)).epsilon(1e-10));
  CHECK(fit.cd > 0.0);
  CHECK(fit.cd < 1.0);

  double acc = 0.0;
  int terms = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j <= i; ++j) {
      double si = std::sqrt(est.S(i, i)), sj = std::sqrt(est.S(j, j));
      double resid = (est.S(i, j) - est.sigma(i, j)) / (si * sj);
      acc += resid * resid;
      ++terms;
    }
  CHECK(terms == 66);
  CHECK(fit.srmr == doctest::Approx(std::sqrt(acc / terms)).epsilon(1e-12));
  CHECK(fit.srmr < 0.05);  // correctly specified model, large n
}
