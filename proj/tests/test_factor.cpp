#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "tatdv/error.hpp"
#include "tatdv/factor.hpp"
#include "tatdv/stats.hpp"

using namespace tatdv;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd noise(int n, int p, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("correlation matrix matches a hand calculation") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 2, 4, 3, 5, 4, 9;
  CovMatrix c = correlation_matrix(x, {"a", "b"});
  CHECK(c.n == 4);
  CHECK(c.dropped == 0);
  CHECK(c.m(0, 0) == doctest::Approx(1.0));
  CHECK(c.m(1, 1) == doctest::Approx(1.0));
  // r = (11/3) / sqrt(5/3 * 26/3) = 11/sqrt(130)
  CHECK(c.m(0, 1) == doctest::Approx(0.964763821237886));
  CHECK(c.m(1, 0) == c.m(0, 1));

  CovMatrix v = covariance_matrix(x, {"a", "b"});
  CHECK(v.m(0, 0) == doctest::Approx(5.0 / 3.0));
  CHECK(v.m(0, 1) == doctest::Approx(11.0 / 3.0));
  CHECK(v.m(1, 1) == doctest::Approx(26.0 / 3.0));
}

TEST_CASE("rows with any missing value are dropped listwise") {
  Eigen::MatrixXd x(6, 2);
  x << 1, 2, 2, 4, kNaN, 5, 3, kNaN, 3, 5, 4, 9;
  CovMatrix c = correlation_matrix(x, {"a", "b"});
  CHECK(c.n == 4);
  CHECK(c.dropped == 2);
  Eigen::MatrixXd full(4, 2);
  full << 1, 2, 2, 4, 3, 5, 4, 9;
  CovMatrix ref = correlation_matrix(full, {"a", "b"});
  CHECK(c.m(0, 1) == doctest::Approx(ref.m(0, 1)));

  Eigen::MatrixXd tiny(4, 2);
  tiny << 1, 2, kNaN, 4, kNaN, 5, 4, 9;
  CHECK_THROWS_WITH_AS(correlation_matrix(tiny, {"a", "b"}), doctest::Contains("TooFewRows"),
                       Error);

  Eigen::MatrixXd flat(5, 2);
  flat << 1, 7, 2, 7, 3, 7, 4, 7, 5, 7;
  CHECK_THROWS_WITH_AS(correlation_matrix(flat, {"a", "b"}),
                       doctest::Contains("ConstantColumn: b"), Error);
}

TEST_CASE("pca eigenvalues of a correlation matrix sum to p") {
  Eigen::MatrixXd x = noise(500, 6, 77);
  x.col(3) = 0.8 * x.col(0) + 0.6 * x.col(3);
  CovMatrix c = correlation_matrix(x, {"a", "b", "c", "d", "e", "f"});
  std::vector<double> ev = pca_eigenvalues(c);
  REQUIRE(ev.size() == 6);
  double sum = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    sum += ev[i];
    if (i) CHECK(ev[i] <= ev[i - 1]);
    CHECK(ev[i] > 0.0);
  }
  CHECK(sum == doctest::Approx(6.0));

  // 2x2 closed form: 1 +- r
  Eigen::MatrixXd y(200, 2);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    double a = rng.normal(), b = 0.6 * a + 0.8 * rng.normal();
    y.row(i) << a, b;
  }
  CovMatrix c2 = correlation_matrix(y, {"a", "b"});
  std::vector<double> ev2 = pca_eigenvalues(c2);
  CHECK(ev2[0] == doctest::Approx(1.0 + c2.m(0, 1)));
  CHECK(ev2[1] == doctest::Approx(1.0 - c2.m(0, 1)));
}

TEST_CASE("parallel analysis validates its arguments") {
  Eigen::MatrixXd x = noise(50, 3, 1);
  CHECK_THROWS_WITH_AS(parallel_analysis(x, 99, 95.0, 1), doctest::Contains("replications"),
                       Error);
  CHECK_THROWS_WITH_AS(parallel_analysis(x, 100, 50.0, 1), doctest::Contains("percentile"),
                       Error);
  CHECK_THROWS_WITH_AS(parallel_analysis(x, 100, 100.0, 1), doctest::Contains("percentile"),
                       Error);
  CHECK_NOTHROW(parallel_analysis(x, 100, 95.0, 1));
}

TEST_CASE("parallel analysis is deterministic in the seed") {
  Eigen::MatrixXd x = noise(120, 5, 42);
  ParallelAnalysisResult a = parallel_analysis(x, 150, 95.0, 9001);
  ParallelAnalysisResult b = parallel_analysis(x, 150, 95.0, 9001);
  CHECK(a.thresholds == b.thresholds);
  CHECK(a.observed == b.observed);
  CHECK(a.n_retained == b.n_retained);
  ParallelAnalysisResult c = parallel_analysis(x, 150, 95.0, 9002);
  CHECK(a.thresholds != c.thresholds);
  CHECK(a.n == 120);
  CHECK(a.p == 5);
  CHECK(a.replications == 150);
  CHECK(a.percentile == 95.0);
  CHECK(a.seed == 9001);
}

TEST_CASE("pure noise retains nothing, a strong factor survives") {
  // with pure noise observed and reference eigenvalues share a
  // distribution, so the 95th percentile threshold beats the observed
  // top eigenvalue at this pinned seed
  Eigen::MatrixXd x = noise(400, 6, 314159);
  ParallelAnalysisResult r = parallel_analysis(x, 200, 95.0, 7);
  CHECK(r.n_retained == 0);

  // one dominant factor across all six columns
  Rng rng(271828);
  Eigen::MatrixXd y(400, 6);
  for (int i = 0; i < 400; ++i) {
    double f = rng.normal();
    for (int j = 0; j < 6; ++j) y(i, j) = 0.8 * f + 0.6 * rng.normal();
  }
  ParallelAnalysisResult s = parallel_analysis(y, 200, 95.0, 7);
  CHECK(s.n_retained >= 1);
  CHECK(s.observed[0] > s.thresholds[0]);
  // retention stops at the first failure even if a later eigenvalue pokes above
  for (std::size_t i = 0; i < s.n_retained; ++i) CHECK(s.observed[i] > s.thresholds[i]);
  if (s.n_retained < s.observed.size())
    CHECK(s.observed[s.n_retained] <= s.thresholds[s.n_retained]);
}

TEST_CASE("parallel analysis drops incomplete rows before anything else") {
  Eigen::MatrixXd x = noise(150, 4, 99);
  Eigen::MatrixXd with_gaps = x;
  with_gaps(3, 2) = kNaN;
  with_gaps(77, 0) = kNaN;
  ParallelAnalysisResult r = parallel_analysis(with_gaps, 120, 95.0, 55);
  CHECK(r.dropped == 2);
  CHECK(r.n == 148);

  Eigen::MatrixXd complete(148, 4);
  int k = 0;
  for (int i = 0; i < 150; ++i) {
    if (i == 3 || i == 77) continue;
    complete.row(k++) = x.row(i);
  }
  ParallelAnalysisResult ref = parallel_analysis(complete, 120, 95.0, 55);
  CHECK(r.observed == ref.observed);
  CHECK(r.thresholds == ref.thresholds);
}
