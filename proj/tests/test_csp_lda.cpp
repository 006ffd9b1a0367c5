#include "brakesense/csp_lda.hpp"
#include "brakesense/error.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace brakesense;
using testing::random_spd;

TEST_SUITE("csp_lda") {

TEST_CASE("analytic 2x2 CSP") {
  const std::vector<SpdMatrix> a{SpdMatrix(Eigen::Vector2d(4, 1).asDiagonal().toDenseMatrix())};
  const std::vector<SpdMatrix> b{SpdMatrix(Eigen::Vector2d(1, 4).asDiagonal().toDenseMatrix())};
  const auto csp = csp_fit(a, b, 1);
  REQUIRE(csp.eigenvalues.size() == 2);
  std::vector<double> ev{csp.eigenvalues(0), csp.eigenvalues(1)};
  std::sort(ev.begin(), ev.end());
  CHECK(std::abs(ev[0] - 0.2) < 1e-10);
  CHECK(std::abs(ev[1] - 0.8) < 1e-10);
  CHECK_FALSE(csp.ridge_applied);
}

TEST_CASE("identical classes give eigenvalues of one half") {
  std::mt19937_64 rng(41);
  const std::vector<SpdMatrix> a{SpdMatrix(random_spd(rng, 6))};
  const auto csp = csp_fit(a, a, 3);
  for (Eigen::Index i = 0; i < csp.eigenvalues.size(); ++i) CHECK(std::abs(csp.eigenvalues(i) - 0.5) < 1e-10);
}

TEST_CASE("CSP simultaneously diagonalizes both class covariances") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index c = 2 * (1 + trial % 14);
    const Eigen::MatrixXd sa = random_spd(rng, c), sb = random_spd(rng, c);
    const std::vector<SpdMatrix> a{SpdMatrix(sa)}, b{SpdMatrix(sb)};
    const auto csp = csp_fit(a, b, static_cast<int>(c / 2));
    const Eigen::MatrixXd& w = csp.filters;
    const Eigen::MatrixXd da = w * sa * w.transpose();
    const Eigen::MatrixXd dc = w * (sa + sb) * w.transpose();
    Eigen::MatrixXd off_a = da, off_c = dc - Eigen::MatrixXd::Identity(c, c);
    off_a.diagonal().setZero();
    CHECK(off_a.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(off_c.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((da.diagonal() - csp.eigenvalues).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index i = 1; i < c; ++i)
      CHECK(std::abs(csp.eigenvalues(i - 1) - 0.5) >= std::abs(csp.eigenvalues(i) - 0.5) - 1e-12);
  }
}

TEST_CASE("CSP keeps k filters from each end") {
  std::mt19937_64 rng(43);
  const Eigen::MatrixXd sa = random_spd(rng, 10), sb = random_spd(rng, 10);
  const std::vector<SpdMatrix> a{SpdMatrix(sa)}, b{SpdMatrix(sb)};
  const auto all = csp_fit(a, b, 5);
  const auto three = csp_fit(a, b, 3);
  CHECK(three.filters.rows() == 6);
  std::vector<double> sorted(all.eigenvalues.data(), all.eigenvalues.data() + 10);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> expected{sorted[0], sorted[1], sorted[2], sorted[7], sorted[8], sorted[9]};
  std::vector<double> got(three.eigenvalues.data(), three.eigenvalues.data() + 6);
  std::sort(got.begin(), got.end());
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-10);
  CHECK_THROWS_AS(csp_fit(a, b, 6), UsageError);
  CHECK_THROWS_AS(csp_fit(a, std::span<const SpdMatrix>{}, 1), DataError);
}

TEST_CASE("CSP ridge on a singular composite") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 4);
  s.topLeftCorner(2, 2) = Eigen::Matrix2d{{2, 0.5}, {0.5, 1}};
  const auto sing = SpdMatrix::trusted(s);
  const std::vector<SpdMatrix> a{sing}, b{sing};
  const auto csp = csp_fit(a, b, 1);
  CHECK(csp.ridge_applied);
  CHECK(csp.filters.allFinite());
}

TEST_CASE("CSP features") {
  std::mt19937_64 rng(44);
  const SampleMatrix x = testing::random_matrix(rng, 4, 20000);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  const auto f = csp_features(x, id);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(std::abs(f(i) - std::log(0.25)) < 0.05);
  CHECK((csp_features(SampleMatrix(5.0 * x), id) - f).cwiseAbs().maxCoeff() < 1e-12);

  // One dominant filter output.
  SampleMatrix y = x;
  y.row(0) *= 10.0;
  CHECK(std::exp(csp_features(y, id)(0)) > 0.95);
  CHECK_THROWS_AS(csp_features(SampleMatrix::Zero(4, 10), id), NumericalError);
  CHECK_THROWS_AS(csp_features(x, Eigen::MatrixXd::Identity(3, 3)), DataError);
}

TEST_CASE("LDA separates Gaussian blobs") {
  std::mt19937_64 rng(45);
  std::normal_distribution<double> n(0, 1);
  const int per = 200;
  Eigen::MatrixXd x(2 * per, 3);
  std::vector<int> y(2 * per);
  for (int i = 0; i < 2 * per; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    for (int d = 0; d < 3; ++d) x(i, d) = n(rng) + (i % 2 ? 3.0 : 0.0) * (d == 0);
  }
  const auto m = lda_fit(x, y);
  int correct = 0;
  for (int i = 0; i < 2 * per; ++i) correct += lda_predict(m, x.row(i).transpose()).label == y[static_cast<std::size_t>(i)];
  CHECK(correct >= static_cast<int>(0.9 * 2 * per));
  CHECK(std::abs(m.w(0)) > 5 * std::abs(m.w(1)));

  // Rescaling the features leaves predictions unchanged.
  const Eigen::MatrixXd xs = 100.0 * x;
  const auto ms = lda_fit(xs, y);
  for (int i = 0; i < 2 * per; ++i)
    CHECK(lda_predict(ms, xs.row(i).transpose()).label == lda_predict(m, x.row(i).transpose()).label);

  // The midpoint between class means lies on the boundary.
  Eigen::VectorXd mid = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 2 * per; ++i) mid += x.row(i).transpose() / (2.0 * per);
  CHECK(std::abs(lda_predict(m, mid).score) < 1e-9);
}

TEST_CASE("LDA with identical class means ties") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 1, 2, 3, 4;
  const std::vector<int> y{0, 0, 1, 1};
  const auto m = lda_fit(x, y);
  const auto p = lda_predict(m, Eigen::Vector2d(2, 3));
  CHECK(p.tie);
  CHECK(p.label == 0);
  const std::vector<int> one_class{0, 0, 0, 0};
  CHECK_THROWS_AS(lda_fit(x, one_class), DataError);
}

}  // TEST_SUITE
