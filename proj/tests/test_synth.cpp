// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dkps/geometry.hpp"
#include "dkps/numeric.hpp"
#include "dkps/predictors.hpp"
#include "dkps/synth.hpp"
#include "test_support.hpp"

using namespace dkps;

namespace {

std::vector<MeanEmbeddingMatrix> noiseless_mean_matrices(const SyntheticPopulation& pop, int M,
                                                         int p) {
  std::vector<MeanEmbeddingMatrix> means;
  for (int i = 0; i < pop.dataset.model_count(); ++i) {
    MeanEmbeddingMatrix mem;
    mem.model = pop.dataset.models()[static_cast<std::size_t>(i)].id;
    mem.rows.resize(M, p);
    for (int j = 0; j < M; ++j)
      mem.rows.row(j) = pop.noiseless_means.row(i).segment(static_cast<Eigen::Index>(j) * p, p);
    means.push_back(std::move(mem));
  }
  return means;
}

}  // namespace

TEST_CASE("noise-free generation reproduces the latent affine structure exactly") {
  SyntheticPopulationSpec spec = dkps::test::small_spec(10, 8);
  spec.noise_scale = 0.0;
  const SyntheticPopulation pop = generate_population(spec);
  for (int i = 0; i < spec.n_models; ++i)
    for (int j = 0; j < spec.num_queries; ++j) {
      const auto vec = pop.dataset.embedding(i, j, 0);
      for (int c = 0; c < spec.embedding_dim; ++c)
        CHECK(vec[static_cast<std::size_t>(c)] ==
              pop.noiseless_means(i, static_cast<Eigen::Index>(j) * spec.embedding_dim + c));
    }
}

TEST_CASE("response scores average exactly to the benchmark score") {
  const SyntheticPopulation pop = generate_population(dkps::test::small_spec(25, 37));
  const SubsetView full(pop.dataset);
  for (const ModelInfo& m : pop.dataset.models()) {
    CHECK(sample_score(full, m.id) == m.benchmark_score);  // bitwise
    CHECK(m.benchmark_score >= 0.0);
    CHECK(m.benchmark_score <= 1.0);
  }
}

TEST_CASE("default population satisfies the cache invariants") {
  SyntheticPopulationSpec spec;  // defaults: n=300, latent 2, M=200, p=16, sigma=0.05
  spec.seed = 1;
  const SyntheticPopulation pop = generate_population(spec);
  const auto report = validate_common_query_set(pop.dataset);
  CHECK(report.pass);
  CHECK(pop.dataset.model_count() == 300);
  CHECK(pop.dataset.query_count() == 200);
  CHECK(pop.dataset.has_response_scores());
  CHECK(pop.dataset.has_correctness());
  CHECK(pop.dataset.families().size() >= 2);
  CHECK(std::isfinite(pop.gamma_eff));
}

TEST_CASE("scores are Lipschitz in the noiseless perspective space") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(60, 40, 17);
  const SyntheticPopulation pop = generate_population(spec);
  const auto means = noiseless_mean_matrices(pop, spec.num_queries, spec.embedding_dim);
  const MdsResult psi = classical_mds(distance_matrix(means), spec.latent_dim);
  for (int i = 0; i < spec.n_models; ++i) {
    const double yi = pop.dataset.models()[static_cast<std::size_t>(i)].benchmark_score;
    for (int j = i + 1; j < spec.n_models; ++j) {
      const double yj = pop.dataset.models()[static_cast<std::size_t>(j)].benchmark_score;
      const double dist = (psi.coordinates.row(i) - psi.coordinates.row(j)).norm();
      CHECK(std::abs(yi - yj) <= pop.gamma_eff * dist + 1e-9);
    }
  }
}

TEST_CASE("same seed gives identical datasets, different seeds differ") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(8, 6, 42);
  const SyntheticPopulation a = generate_population(spec);
  const SyntheticPopulation b = generate_population(spec);
  dkps::test::TempDir tmp;
  save_dataset(a.dataset, tmp.path() / "a");
  save_dataset(b.dataset, tmp.path() / "b");
  for (const char* name : {"models.csv", "queries.csv", "embeddings.jsonl",
                           "response_scores.csv", "correctness.csv", "metadata.json"})
    CHECK(dkps::test::slurp(tmp.path() / "a" / name) ==
          dkps::test::slurp(tmp.path() / "b" / name));

  SyntheticPopulationSpec other = spec;
  other.seed = 43;
  const SyntheticPopulation c = generate_population(other);
  save_dataset(c.dataset, tmp.path() / "c");
  CHECK(dkps::test::slurp(tmp.path() / "a" / "embeddings.jsonl") !=
        dkps::test::slurp(tmp.path() / "c" / "embeddings.jsonl"));
}

TEST_CASE("spec validation") {
  SyntheticPopulationSpec spec = dkps::test::small_spec();
  spec.n_models = 0;
  CHECK_THROWS_AS(generate_population(spec), InvalidArgument);
  spec = dkps::test::small_spec();
  spec.noise_scale = -1.0;
  CHECK_THROWS_AS(generate_population(spec), InvalidArgument);
  spec = dkps::test::small_spec();
  spec.families = 100;  // more than n_models
  CHECK_THROWS_AS(generate_population(spec), InvalidArgument);
}

TEST_CASE("concentration experiment") {
  SUBCASE("noise-free cells recover the perspectives exactly") {
    SyntheticPopulationSpec spec = dkps::test::small_spec(15, 10);
    spec.noise_scale = 0.0;
    const std::vector<int> n_grid = {15};
    const std::vector<int> r_grid = {1, 2};
    const auto cells = concentration_experiment(spec, n_grid, r_grid, 2);
    REQUIRE(cells.size() == 4);
    for (const auto& cell : cells) CHECK(cell.max_error <= 1e-9);
  }
  SUBCASE("grid must have at least two points") {
    const std::vector<int> one = {10};
    CHECK_THROWS_AS(
        concentration_experiment(dkps::test::small_spec(), one, one, 2),
        InvalidArgument);
  }
  SUBCASE("more replicates concentrate the perspectives") {
    SyntheticPopulationSpec spec = dkps::test::small_spec(20, 12);
    spec.noise_scale = 0.3;
    const std::vector<int> n_grid = {20};
    const std::vector<int> r_grid = {1, 16};
    const auto cells = concentration_experiment(spec, n_grid, r_grid, 5);
    std::vector<double> err_r1, err_r16;
    for (const auto& cell : cells)
      (cell.replicates == 1 ? err_r1 : err_r16).push_back(cell.max_error);
    std::sort(err_r1.begin(), err_r1.end());
    std::sort(err_r16.begin(), err_r16.end());
    CHECK(median_sorted(err_r16) <= median_sorted(err_r1));
  }
}

TEST_CASE("efficiency experiment") {
  SUBCASE("m = M makes sample_score exact while dkps stays nonnegative") {
    const SyntheticPopulationSpec spec = dkps::test::small_spec(20, 10, 3);
    const std::vector<int> m_grid = {10};
    const std::vector<int> n_grid = {10};
    const EfficiencyResult result = efficiency_experiment(spec, m_grid, n_grid, 5);
    for (const EfficiencyCell& cell : result.cells) {
      if (cell.method == "sample_score") CHECK(cell.mae == 0.0);
      CHECK(cell.mae >= 0.0);
    }
  }
  SUBCASE("zero Lipschitz scale makes every method exact") {
    SyntheticPopulationSpec spec = dkps::test::small_spec(24, 8, 5);
    spec.lipschitz_scale = 0.0;
    const std::vector<int> m_grid = {1, 2};
    // Keep the OLS design overdetermined (n > d + 1), otherwise the
    // minimum-norm fit of constant targets is not constant off the
    // training span.
    const std::vector<int> n_grid = {12};
    const EfficiencyResult result = efficiency_experiment(spec, m_grid, n_grid, 4);
    for (const EfficiencyCell& cell : result.cells) CHECK(cell.mae <= 1e-12);
  }
  SUBCASE("crossover does not come earlier with more references") {
    SyntheticPopulationSpec spec = dkps::test::small_spec(160, 64, 9);
    spec.families = 8;
    const std::vector<int> m_grid = {1, 2, 4, 8, 16, 32, 64};
    const std::vector<int> n_grid = {10, 120};
    const EfficiencyResult result = efficiency_experiment(spec, m_grid, n_grid, 24);
    auto crossover_of = [&](int n, const std::string& method) {
      for (const auto& c : result.crossovers)
        if (c.n_references == n && c.method == method)
          return c.crossover_m < 0 ? 1 << 20 : c.crossover_m;
      FAIL("missing crossover row");
      return 0;
    };
    CHECK(crossover_of(120, "dkps_ols") >= crossover_of(10, "dkps_ols"));
    CHECK(crossover_of(120, "dkps_knn") >= crossover_of(10, "dkps_knn"));
  }
  SUBCASE("grid validation") {
    const std::vector<int> empty;
    const std::vector<int> one = {1};
    CHECK_THROWS_AS(efficiency_experiment(dkps::test::small_spec(), empty, one, 2),
                    InvalidArgument);
  }
}
