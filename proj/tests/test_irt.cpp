// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dkps/irt.hpp"
#include "dkps/rng.hpp"
#include "test_support.hpp"

using namespace dkps;

namespace {

// Rasch data generator: theta ~ N(0,1), x ~ Bernoulli(sigmoid(theta - b)).
Eigen::MatrixXi simulate(const Eigen::VectorXd& thetas, const Eigen::VectorXd& difficulties,
                         Rng& rng) {
  Eigen::MatrixXi X(thetas.size(), difficulties.size());
  for (Eigen::Index i = 0; i < thetas.size(); ++i)
    for (Eigen::Index j = 0; j < difficulties.size(); ++j)
      X(i, j) = rng.uniform01() < rasch_probability(thetas(i), difficulties(j)) ? 1 : 0;
  return X;
}

std::vector<QueryId> item_names(int M) {
  std::vector<QueryId> out;
  for (int j = 0; j < M; ++j) out.push_back("item_" + std::to_string(j));
  return out;
}

}  // namespace

TEST_CASE("difficulty recovery on simulated data") {
  const int n = 500, M = 200;
  Rng rng(2024);
  Eigen::VectorXd thetas(n);
  for (int i = 0; i < n; ++i) thetas(i) = rng.normal();
  Eigen::VectorXd truth(M);
  for (int j = 0; j < M; ++j) truth(j) = -2.0 + 4.0 * j / (M - 1);
  const Eigen::MatrixXi X = simulate(thetas, truth, rng);

  const RaschItemBank bank = fit_difficulties(X, item_names(M));
  std::vector<double> fitted(M), expected(M);
  for (int j = 0; j < M; ++j) {
    fitted[static_cast<std::size_t>(j)] = bank.difficulties(j);
    expected[static_cast<std::size_t>(j)] = truth(j);
  }
  CHECK(dkps::test::spearman(fitted, expected) > 0.95);

  SUBCASE("log-likelihood trace is nondecreasing") {
    REQUIRE(!bank.ll_trace.empty());
    for (std::size_t i = 0; i + 1 < bank.ll_trace.size(); ++i)
      CHECK(bank.ll_trace[i + 1] >= bank.ll_trace[i] - 1e-8 * (1.0 + std::abs(bank.ll_trace[i])));
  }
  SUBCASE("fitted difficulties have mean zero") {
    CHECK(std::abs(bank.difficulties.mean()) <= 1e-6);
  }
}

TEST_CASE("three-item difficulty ordering is recovered from 500 models") {
  const int n = 500;
  Rng rng(88);
  Eigen::VectorXd thetas(n);
  for (int i = 0; i < n; ++i) thetas(i) = rng.normal();
  Eigen::VectorXd truth(3);
  truth << -1.0, 0.0, 1.0;
  const Eigen::MatrixXi X = simulate(thetas, truth, rng);
  const RaschItemBank bank = fit_difficulties(X, item_names(3));
  std::vector<double> fitted = {bank.difficulties(0), bank.difficulties(1),
                                bank.difficulties(2)};
  std::vector<double> expected = {-1.0, 0.0, 1.0};
  CHECK(dkps::test::spearman(fitted, expected) > 0.95);
}

TEST_CASE("identical response columns give identical difficulties") {
  Rng rng(5);
  const int n = 60;
  Eigen::MatrixXi X(n, 4);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform01() < 0.6 ? 1 : 0;
    X(i, 1) = X(i, 0);  // exact copy
    X(i, 2) = rng.uniform01() < 0.3 ? 1 : 0;
    X(i, 3) = rng.uniform01() < 0.8 ? 1 : 0;
  }
  // Keep all columns non-degenerate.
  X(0, 0) = X(0, 1) = 0;
  X(1, 0) = X(1, 1) = 1;
  X(0, 2) = 1;
  X(0, 3) = 0;
  const RaschItemBank bank = fit_difficulties(X, item_names(4));
  CHECK(std::abs(bank.difficulties(0) - bank.difficulties(1)) <= 1e-6);
}

TEST_CASE("degenerate items are clamped with a warning") {
  Eigen::MatrixXi X(3, 3);
  X << 1, 1, 0,
       1, 0, 0,
       1, 1, 1;
  const RaschItemBank bank = fit_difficulties(X, item_names(3));
  CHECK(bank.difficulties(0) == -30.0);  // answered correctly by everyone
  REQUIRE(!bank.warnings.empty());
  CHECK(bank.warnings[0].find("item_0") != std::string::npos);
}

TEST_CASE("fit_difficulties validates input") {
  Eigen::MatrixXi bad(1, 1);
  bad << 2;
  CHECK_THROWS_AS(fit_difficulties(bad, item_names(1)), InvalidArgument);
  CHECK_THROWS_AS(fit_difficulties(Eigen::MatrixXi(), item_names(0)), InvalidArgument);
  Eigen::MatrixXi ok(1, 2);
  ok << 0, 1;
  CHECK_THROWS_AS(fit_difficulties(ok, item_names(3)), InvalidArgument);
}

TEST_CASE("fit_ability") {
  SUBCASE("all-correct pattern clamps to +30") {
    std::vector<int> correct = {1};
    std::vector<double> b = {0.0};
    const AbilityEstimate est = fit_ability(correct, b);
    CHECK(est.theta == 30.0);
    CHECK(est.clamped);
    CHECK(!est.warning.empty());
  }
  SUBCASE("symmetric answers give theta = 0") {
    std::vector<int> correct = {1, 0};
    std::vector<double> b = {-1.3, 1.3};
    const AbilityEstimate est = fit_ability(correct, b);
    CHECK(std::abs(est.theta) <= 1e-8);
    CHECK(est.standard_error > 0.0);
  }
  SUBCASE("Monte-Carlo accuracy at m = 64") {
    const double theta_true = 0.7;
    const int m = 64, trials = 200;
    Eigen::VectorXd b(m);
    for (int j = 0; j < m; ++j) b(j) = -2.0 + 4.0 * j / (m - 1);
    Rng rng(31337);
    double total_abs_err = 0.0;
    int used = 0;
    for (int t = 0; t < trials; ++t) {
      std::vector<int> correct(m);
      for (int j = 0; j < m; ++j)
        correct[static_cast<std::size_t>(j)] =
            rng.uniform01() < rasch_probability(theta_true, b(j)) ? 1 : 0;
      std::vector<double> bj(b.data(), b.data() + m);
      const AbilityEstimate est = fit_ability(correct, bj);
      total_abs_err += std::abs(est.theta - theta_true);
      ++used;
    }
    CHECK(total_abs_err / used <= 0.3);
  }
  SUBCASE("validation") {
    std::vector<int> empty;
    std::vector<double> b;
    CHECK_THROWS_AS(fit_ability(empty, b), InvalidArgument);
    std::vector<int> one = {1};
    std::vector<double> two = {0.0, 1.0};
    CHECK_THROWS_AS(fit_ability(one, two), InvalidArgument);
  }
}

TEST_CASE("irt_predict_score") {
  RaschItemBank bank;
  bank.queries = item_names(4);
  bank.difficulties = Eigen::VectorXd::Constant(4, 0.7);

  SUBCASE("theta at the common difficulty gives 0.5") {
    CHECK(irt_predict_score(0.7, bank) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("theta - b = ln 3 gives 0.75") {
    CHECK(irt_predict_score(0.7 + std::log(3.0), bank) ==
          doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("strictly increasing in theta") {
    double prev = -1.0;
    for (double theta = -4.0; theta <= 4.0; theta += 0.5) {
      const double v = irt_predict_score(theta, bank);
      CHECK(v > prev);
      prev = v;
    }
  }
  SUBCASE("translation invariance") {
    RaschItemBank shifted = bank;
    const double c = 2.341;
    shifted.difficulties.array() += c;
    for (double theta : {-1.0, 0.0, 0.7, 2.5})
      CHECK(std::abs(irt_predict_score(theta, bank) - irt_predict_score(theta + c, shifted)) <=
            1e-10);
  }
}

TEST_CASE("predicted score matches the generator expectation at M = 500") {
  const int n = 400, M = 500;
  Rng rng(77);
  Eigen::VectorXd thetas(n);
  for (int i = 0; i < n; ++i) thetas(i) = rng.normal();
  Eigen::VectorXd truth(M);
  for (int j = 0; j < M; ++j) truth(j) = -2.0 + 4.0 * j / (M - 1);
  const Eigen::MatrixXi X = simulate(thetas, truth, rng);
  const RaschItemBank bank = fit_difficulties(X, item_names(M));

  const double theta_probe = 0.7;
  double expected = 0.0;
  for (int j = 0; j < M; ++j) expected += rasch_probability(theta_probe, truth(j));
  expected /= M;
  CHECK(std::abs(irt_predict_score(theta_probe, bank) - expected) <= 0.02);
}

TEST_CASE("item bank save/load round trip") {
  RaschItemBank bank;
  bank.queries = item_names(3);
  bank.difficulties.resize(3);
  bank.difficulties << -1.25, 0.0, 2.5;
  dkps::test::TempDir tmp;
  save_item_bank(tmp.path() / "bank.csv", bank);
  const RaschItemBank loaded = load_item_bank(tmp.path() / "bank.csv");
  REQUIRE(loaded.queries == bank.queries);
  for (int j = 0; j < 3; ++j) CHECK(loaded.difficulties(j) == bank.difficulties(j));
}
