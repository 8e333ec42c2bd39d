#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "rtp/error.hpp"
#include "rtp/velocity_chain.hpp"

using namespace rtp;

TEST_CASE("instantaneous chain rates") {
  const auto ch = instantaneousChain(1.0);
  REQUIRE(ch.size() == 3);
  CHECK(ch.mode(1).label() == "0");
  CHECK(ch.Q()(1, 0) == 1.0);
  CHECK(ch.Q()(1, 1) == -2.0);
  CHECK(ch.Q()(1, 2) == 1.0);
  CHECK_THROWS_AS(instantaneousChain(0.0), Error);
}

TEST_CASE("finite chain rates") {
  const auto ch = finiteChain(1.0, 2.0);
  REQUIRE(ch.size() == 6);
  const int i = ch.indexOf("00");
  REQUIRE(i == 3);
  const double row[] = {0, 2, 0, -4, 2, 0};
  for (int j = 0; j < 6; ++j) CHECK(ch.Q()(i, j) == row[j]);
  CHECK(ch.mode(ch.indexOf("0pm")).value == 0);
  CHECK(ch.mode(ch.indexOf("00")).value == 0);
  CHECK_THROWS_AS(finiteChain(1.0, -1.0), Error);
  for (int r = 0; r < 6; ++r) CHECK(std::abs(ch.Q().row(r).sum()) < 1e-14);
}

TEST_CASE("stationary laws and gaps") {
  const auto s = chainSpectrum(instantaneousChain(1.0));
  CHECK(s.stationaryLaw(0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s.stationaryLaw(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s.spectralGap == 2.0);

  const auto f = chainSpectrum(finiteChain(1.0, 1.0));
  const double pi[] = {1.0 / 16, 0.25, 0.125, 0.25, 0.25, 1.0 / 16};
  for (int i = 0; i < 6; ++i) CHECK(std::abs(f.stationaryLaw(i) - pi[i]) < 1e-12);
  CHECK(chainSpectrum(finiteChain(2.0, 5.0)).spectralGap == 2.0);
}

TEST_CASE("closed-form finite eigenvalues match a numerical solve") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> U(0.1, 10.0);
  for (int k = 0; k < 100; ++k) {
    const auto ch = finiteChain(U(gen), U(gen));
    Eigen::EigenSolver<Eigen::MatrixXd> es(ch.Q());
    std::vector<double> num;
    for (int i = 0; i < 6; ++i) num.push_back(es.eigenvalues()(i).real());
    auto closed = chainSpectrum(ch).eigenvalues;
    std::sort(num.begin(), num.end());
    std::sort(closed.begin(), closed.end());
    for (int i = 0; i < 6; ++i) CHECK(std::abs(num[i] - closed[i]) < 1e-10);
  }
}

TEST_CASE("linear-solve law matches closed form; exp(tQ) preserves probability") {
  for (auto ch : {instantaneousChain(0.7), finiteChain(0.3, 4.0), finiteChain(3.0, 0.2)}) {
    const auto a = stationaryLawSolve(ch), b = stationaryLawClosedForm(ch);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs((a.transpose() * ch.Q()).cwiseAbs().maxCoeff()) < 1e-12);
    Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(ch.size());
    p(0) = 1.0;
    for (double t : {0.1, 1.0, 10.0}) {
      Eigen::MatrixXd P = (t * ch.Q()).exp();
      Eigen::RowVectorXd q = p * P;
      CHECK(q.minCoeff() >= -1e-12);
      CHECK(std::abs(q.sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("successor sampling respects rates") {
  const auto ch = finiteChain(1.0, 2.0);
  const int i = ch.indexOf("+1");
  // Row (b/2, -a-b, b/2, a, 0, 0) / (a+b): +2 w.p. 1/3, 0pm 1/3, 00 1/3.
  CHECK(ch.successor(i, 0.0) == ch.indexOf("+2"));
  CHECK(ch.successor(i, 0.5) == ch.indexOf("0pm"));
  CHECK(ch.successor(i, 0.99) == ch.indexOf("00"));
}
