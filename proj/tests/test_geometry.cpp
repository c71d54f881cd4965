// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dkps/geometry.hpp"
#include "dkps/rng.hpp"
#include "dkps/synth.hpp"
#include "test_support.hpp"

using namespace dkps;

namespace {

// Oracle: pairwise Euclidean distances of coordinate rows.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = (points.row(i) - points.row(j)).norm();
  return D;
}

BenchmarkDataset replicate_dataset() {
  DatasetBuilder builder;
  builder.add_model("m1", "f1", 0.5);
  builder.add_query("q1").add_query("q2");
  builder.add_embedding("m1", "q1", 0, {0.0, 0.0});
  builder.add_embedding("m1", "q1", 1, {2.0, 4.0});
  builder.add_embedding("m1", "q2", 0, {1.0, 1.0});
  builder.add_embedding("m1", "q2", 1, {3.0, 3.0});
  return builder.build();
}

}  // namespace

TEST_CASE("mean_embeddings averages replicates") {
  const BenchmarkDataset ds = replicate_dataset();
  const SubsetView view(ds);
  const MeanEmbeddingMatrix mem = mean_embeddings(view, "m1");
  CHECK(mem.rows(0, 0) == 1.0);
  CHECK(mem.rows(0, 1) == 2.0);
  CHECK(mem.rows(1, 0) == 2.0);
  CHECK(mem.rows(1, 1) == 2.0);
}

TEST_CASE("mean_embeddings with r = 1 returns the raw embeddings") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(5, 4);
  const SyntheticPopulation pop = generate_population(spec);
  const SubsetView view(pop.dataset);
  const MeanEmbeddingMatrix mem = mean_embeddings(view, pop.dataset.models()[2].id);
  for (int j = 0; j < pop.dataset.query_count(); ++j) {
    const auto raw = pop.dataset.embedding(2, j, 0);
    for (int c = 0; c < pop.dataset.embedding_dim(); ++c) CHECK(mem.rows(j, c) == raw[c]);
  }
}

TEST_CASE("mean_embeddings rejects an empty query subset") {
  const BenchmarkDataset ds = replicate_dataset();
  const SubsetView view(ds, {0}, {});
  CHECK_THROWS_WITH_AS(mean_embeddings(view, "m1"), doctest::Contains("empty query subset"),
                       InvalidArgument);
}

TEST_CASE("distance_matrix basics") {
  MeanEmbeddingMatrix a{"a", Eigen::MatrixXd::Zero(2, 2)};
  MeanEmbeddingMatrix b{"b", Eigen::MatrixXd::Ones(2, 2)};

  SUBCASE("identical matrices give zero distances") {
    const Eigen::MatrixXd D = distance_matrix({a, a});
    CHECK(D(0, 1) == 0.0);
    CHECK(D(1, 0) == 0.0);
  }
  SUBCASE("zeros vs ones") {
    const Eigen::MatrixXd D = distance_matrix({a, b});
    CHECK(D(0, 1) == doctest::Approx(2.0).epsilon(1e-12));  // sqrt(4 * 1)
    CHECK(D(0, 1) == D(1, 0));
    CHECK(D(0, 0) == 0.0);
  }
  SUBCASE("shape mismatch") {
    MeanEmbeddingMatrix c{"c", Eigen::MatrixXd::Zero(3, 2)};
    CHECK_THROWS_WITH_AS(distance_matrix({a, c}), doctest::Contains("shape mismatch"),
                         InvalidArgument);
  }
  SUBCASE("symmetry and agreement with the direct Frobenius norm") {
    Rng rng(17);
    std::vector<MeanEmbeddingMatrix> means;
    for (int i = 0; i < 6; ++i) {
      MeanEmbeddingMatrix m{"m" + std::to_string(i), Eigen::MatrixXd(3, 4)};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) m.rows(r, c) = rng.normal();
      means.push_back(std::move(m));
    }
    const Eigen::MatrixXd D = distance_matrix(means);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        CHECK(D(i, j) == D(j, i));
        const double direct = (means[i].rows - means[j].rows).norm();
        CHECK(D(i, j) == doctest::Approx(direct).epsilon(1e-9));
      }
  }
}

TEST_CASE("classical_mds on degenerate and tiny inputs") {
  SUBCASE("all-zero distances give all-zero coordinates") {
    const MdsResult res = classical_mds(Eigen::MatrixXd::Zero(4, 4), 2);
    CHECK(res.coordinates.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two points at distance delta land at +-delta/2") {
    Eigen::MatrixXd D(2, 2);
    D << 0, 3, 3, 0;
    const MdsResult res = classical_mds(D, 1);
    CHECK(res.coordinates(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(res.coordinates(1, 0) == doctest::Approx(-1.5).epsilon(1e-12));
  }
  SUBCASE("dimension larger than point count is rejected") {
    CHECK_THROWS_WITH_AS(classical_mds(Eigen::MatrixXd::Zero(2, 2), 3),
                         doctest::Contains("exceeds point count"), InvalidArgument);
  }
  SUBCASE("non-finite entries are rejected") {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
    D(0, 1) = D(1, 0) = std::nan("");
    CHECK_THROWS_AS(classical_mds(D, 1), InvalidArgument);
  }
}

TEST_CASE("classical_mds reproduces the unit square") {
  Eigen::MatrixXd points(4, 2);
  points << 0, 0, 1, 0, 1, 1, 0, 1;
  const Eigen::MatrixXd D = pairwise_distances(points);
  const MdsResult res = classical_mds(D, 2);
  const Eigen::MatrixXd out = pairwise_distances(res.coordinates);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(std::abs(out(i, j) - D(i, j)) <= 1e-9);
}

TEST_CASE("mds round trip on random Euclidean configurations") {
  Rng rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 3 + rng.below_int(38);
    const int k = 1 + rng.below_int(6);
    Eigen::MatrixXd points(n, k);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) points(i, c) = 3.0 * rng.normal();
    const Eigen::MatrixXd D = pairwise_distances(points);
    const MdsResult res = classical_mds(D, k);
    const Eigen::MatrixXd out = pairwise_distances(res.coordinates);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        CHECK(std::abs(out(i, j) - D(i, j)) <= 1e-9 * std::max(1.0, D(i, j)));
  }
}

TEST_CASE("negative eigenvalues are clamped and counted") {
  // Star metric K_{1,3}: three leaves pairwise 2, each at 1 from the hub.
  // Not embeddable in Euclidean space, so the spectrum has negative mass.
  Eigen::MatrixXd D(4, 4);
  D << 0, 1, 1, 1,
       1, 0, 2, 2,
       1, 2, 0, 2,
       1, 2, 2, 0;
  const MdsResult res = classical_mds(D, 4);
  CHECK(res.clamped_negative >= 1);
  CHECK(res.coordinates.allFinite());
  // Trailing column scaled by a clamped eigenvalue must be zero.
  CHECK(res.coordinates.col(3).cwiseAbs().maxCoeff() == 0.0);
  // Eigenvalues reported descending.
  for (int i = 0; i + 1 < 4; ++i) CHECK(res.eigenvalues(i) >= res.eigenvalues(i + 1));
}

TEST_CASE("padding with zeros beyond the positive spectrum") {
  Eigen::MatrixXd points(3, 1);
  points << 0, 1, 2;  // collinear
  const Eigen::MatrixXd D = pairwise_distances(points);
  const MdsResult res = classical_mds(D, 3);
  CHECK(res.coordinates.col(1).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(res.coordinates.col(2).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("mds output is deterministic and centered") {
  Rng rng(5);
  Eigen::MatrixXd points(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int c = 0; c < 3; ++c) points(i, c) = rng.normal();
  const Eigen::MatrixXd D = pairwise_distances(points);
  const MdsResult a = classical_mds(D, 3);
  const MdsResult b = classical_mds(D, 3);
  CHECK(a.coordinates == b.coordinates);  // bit-identical
  for (int c = 0; c < 3; ++c)
    CHECK(std::abs(a.coordinates.col(c).mean()) <= 1e-9);
  // Sign convention: largest-magnitude entry of each used column nonnegative.
  for (int c = 0; c < 3; ++c) {
    Eigen::Index best = 0;
    a.coordinates.col(c).cwiseAbs().maxCoeff(&best);
    CHECK(a.coordinates(best, c) >= 0.0);
  }
}

TEST_CASE("build_dkps tags references and targets") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(8, 6);
  const SyntheticPopulation pop = generate_population(spec);
  const SubsetView view(pop.dataset);
  std::vector<ModelId> ids;
  for (const auto& m : pop.dataset.models()) ids.push_back(m.id);
  const std::vector<ModelId> refs(ids.begin(), ids.begin() + 6);
  const std::vector<ModelId> targets(ids.begin() + 6, ids.end());

  const PerspectiveSpace space = build_dkps(view, refs, targets, 3);
  CHECK(space.dimension == 3);
  REQUIRE(space.model_ids.size() == 8);
  for (int i = 0; i < 6; ++i) CHECK_FALSE(space.is_target[static_cast<std::size_t>(i)]);
  for (int i = 6; i < 8; ++i) CHECK(space.is_target[static_cast<std::size_t>(i)]);
  CHECK(space.reference_coordinates().rows() == 6);
  CHECK(space.eigenvalues.size() == 8);

  SUBCASE("empty target list gives references only") {
    const PerspectiveSpace ref_only = build_dkps(view, refs, {}, 3);
    CHECK(ref_only.model_ids.size() == 6);
  }
  SUBCASE("duplicate model is rejected") {
    CHECK_THROWS_AS(build_dkps(view, refs, refs, 2), InvalidArgument);
  }
  SUBCASE("dimension larger than the union is rejected") {
    CHECK_THROWS_AS(build_dkps(view, refs, targets, 9), InvalidArgument);
  }
}

TEST_CASE("build_dkps of one reference and one target at distance D") {
  DatasetBuilder builder;
  builder.add_model("r", "fa", 0.4).add_model("t", "fb", 0.6);
  builder.add_query("q1");
  builder.add_embedding("r", "q1", 0, {0.0, 0.0});
  builder.add_embedding("t", "q1", 0, {3.0, 4.0});  // distance 5
  const BenchmarkDataset ds = builder.build();
  const SubsetView view(ds);
  std::vector<ModelId> refs = {"r"}, targets = {"t"};
  const PerspectiveSpace space = build_dkps(view, refs, targets, 1);
  CHECK(std::abs(space.coords("r")(0)) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(std::abs(space.coords("t")(0)) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(space.coords("r")(0) == doctest::Approx(-space.coords("t")(0)).epsilon(1e-12));
}

TEST_CASE("dkps eigenvalues are nonincreasing on generated populations") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(20, 16);
  const SyntheticPopulation pop = generate_population(spec);
  const SubsetView view(pop.dataset);
  std::vector<ModelId> refs;
  for (const auto& m : pop.dataset.models()) refs.push_back(m.id);
  const PerspectiveSpace space = build_dkps(view, refs, {}, 8);
  for (Eigen::Index i = 0; i + 1 < space.eigenvalues.size(); ++i)
    CHECK(space.eigenvalues(i) >= space.eigenvalues(i + 1));
}

TEST_CASE("procrustes_align undoes a rigid motion") {
  Rng rng(31);
  Eigen::MatrixXd points(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int c = 0; c < 3; ++c) points(i, c) = rng.normal();

  // Random rotation (QR of a Gaussian matrix) plus reflection and shift.
  Eigen::MatrixXd G(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) G(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ();
  Q.col(0) *= -1.0;  // include a reflection
  const Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(3, 2.5);
  const Eigen::MatrixXd moved = ((points * Q).rowwise() + shift).eval();

  const Eigen::MatrixXd aligned = procrustes_align(moved, points);
  CHECK((aligned - points).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("perspective csv export") {
  const SyntheticPopulationSpec spec = dkps::test::small_spec(6, 4);
  const SyntheticPopulation pop = generate_population(spec);
  const SubsetView view(pop.dataset);
  std::vector<ModelId> refs;
  for (const auto& m : pop.dataset.models()) refs.push_back(m.id);
  const PerspectiveSpace space = build_dkps(view, refs, {}, 2);
  std::ostringstream out;
  write_perspectives_csv(out, space, pop.dataset);
  const std::string text = out.str();
  CHECK(text.find("model_id,family_id,psi_1,psi_2,is_target") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 6);  // schema + header + rows
}
