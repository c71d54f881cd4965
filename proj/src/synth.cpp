// SPDX-License-Identifier: Apache-2.0

#include "dkps/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dkps/geometry.hpp"
#include "dkps/harness.hpp"
#include "dkps/numeric.hpp"
#include "dkps/parallel.hpp"
#include "dkps/rng.hpp"

namespace dkps {

namespace {

constexpr std::uint64_t kStructureTag = 0x57A7C7B1E5D1A2F3ULL;
constexpr std::uint64_t kScoreTag = 0x5C03E9B4D7718A41ULL;
constexpr std::uint64_t kNoiseTag = 0x9015EAB2C44D96E7ULL;
constexpr std::uint64_t kConcentrationTag = 0xC09CE27A4B3F8D11ULL;
constexpr std::uint64_t kEfficiencyTag = 0xEFF1C1E9C7055E3DULL;

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

// Lloyd's algorithm with k-means++ seeding; ties go to the lowest cluster
// index so the assignment is deterministic.
std::vector<int> kmeans_assign(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  std::vector<Eigen::RowVectorXd> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(points.row(rng.below_int(n)));
  std::vector<double> dist_sq(static_cast<std::size_t>(n));
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (points.row(i) - c).squaredNorm());
      dist_sq[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist_sq[static_cast<std::size_t>(i)];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below_int(n);
    }
    centers.push_back(points.row(pick));
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[static_cast<std::size_t>(i)] != best) {
        assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(points.cols());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (assignment[static_cast<std::size_t>(i)] == c) {
          sum += points.row(i);
          ++count;
        }
      if (count > 0) centers[static_cast<std::size_t>(c)] = sum / count;
    }
  }
  return assignment;
}

}  // namespace

void SyntheticPopulationSpec::validate() const {
  if (n_models < 1) throw InvalidArgument("synthetic spec: n_models must be >= 1");
  if (latent_dim < 1) throw InvalidArgument("synthetic spec: latent_dim must be >= 1");
  if (num_queries < 1) throw InvalidArgument("synthetic spec: num_queries must be >= 1");
  if (embedding_dim < 1) throw InvalidArgument("synthetic spec: embedding_dim must be >= 1");
  if (replicates < 1) throw InvalidArgument("synthetic spec: replicates must be >= 1");
  if (lipschitz_scale < 0.0) throw InvalidArgument("synthetic spec: lipschitz_scale must be >= 0");
  if (noise_scale < 0.0) throw InvalidArgument("synthetic spec: noise_scale must be >= 0");
  if (families < 1 || families > n_models)
    throw InvalidArgument("synthetic spec: families outside [1, n_models]");
}

SyntheticPopulation generate_population(const SyntheticPopulationSpec& spec) {
  spec.validate();
  const int n = spec.n_models;
  const int L = spec.latent_dim;
  const int M = spec.num_queries;
  const int p = spec.embedding_dim;
  const int r = spec.replicates;

  Rng structure(derive_seed(spec.seed, kStructureTag, 0));
  Rng score_rng(derive_seed(spec.seed, kScoreTag, 0));
  Rng noise(derive_seed(spec.seed, kNoiseTag, 0));

  // Latent positions uniform on [-1, 1]^L (compact support).
  Eigen::MatrixXd latent(n, L);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < L; ++c) latent(i, c) = 2.0 * structure.uniform01() - 1.0;

  // Per-query affine embedding maps x -> A_j x + c_j.
  std::vector<Eigen::MatrixXd> maps(static_cast<std::size_t>(M));
  std::vector<Eigen::VectorXd> offsets(static_cast<std::size_t>(M));
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(L));
  for (int j = 0; j < M; ++j) {
    Eigen::MatrixXd A(p, L);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < L; ++b) A(a, b) = structure.normal() * map_scale;
    Eigen::VectorXd c(p);
    for (int a = 0; a < p; ++a) c(a) = structure.normal();
    maps[static_cast<std::size_t>(j)] = std::move(A);
    offsets[static_cast<std::size_t>(j)] = std::move(c);
  }

  // Score direction: unit vector in latent space.
  Eigen::VectorXd w(L);
  for (int c = 0; c < L; ++c) w(c) = structure.normal();
  if (w.norm() == 0.0) w(0) = 1.0;
  w /= w.norm();

  const std::vector<int> family_of = kmeans_assign(latent, spec.families, structure);

  // Benchmark scores linear in the latent position, kept inside [0, 1];
  // response-level scores are k ones plus one fractional entry so their
  // mean over the full query set reproduces the benchmark score. A zero
  // Lipschitz scale degenerates to constant scores (response scores equal
  // the benchmark score on every query).
  std::vector<std::vector<double>> response_scores(static_cast<std::size_t>(n));
  std::vector<double> benchmark(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double target = clip01(0.5 + spec.lipschitz_scale * w.dot(latent.row(i)));
    std::vector<double>& scores = response_scores[static_cast<std::size_t>(i)];
    if (spec.lipschitz_scale == 0.0) {
      scores.assign(static_cast<std::size_t>(M), target);
      benchmark[static_cast<std::size_t>(i)] = stable_mean(scores);
      continue;
    }
    scores.assign(static_cast<std::size_t>(M), 0.0);
    double ym = target * static_cast<double>(M);
    int ones = static_cast<int>(std::floor(ym));
    double frac = ym - static_cast<double>(ones);
    if (ones >= M) {
      ones = M;
      frac = 0.0;
    }
    const int needed = ones + (frac > 0.0 ? 1 : 0);
    const std::vector<int> positions = score_rng.sample_indices(M, needed);
    for (int s = 0; s < ones; ++s) scores[static_cast<std::size_t>(positions[s])] = 1.0;
    if (frac > 0.0) scores[static_cast<std::size_t>(positions[needed - 1])] = frac;
    benchmark[static_cast<std::size_t>(i)] = stable_mean(scores);
  }

  const int model_width = std::max(3, static_cast<int>(std::to_string(n - 1).size()));
  const int query_width = std::max(3, static_cast<int>(std::to_string(M - 1).size()));

  DatasetBuilder builder;
  DatasetMetadata metadata;
  metadata.benchmark = "synthetic";
  metadata.embedding = "synthetic-affine";

  std::vector<ModelId> model_ids(static_cast<std::size_t>(n));
  std::vector<QueryId> query_ids(static_cast<std::size_t>(M));
  for (int i = 0; i < n; ++i) {
    model_ids[static_cast<std::size_t>(i)] = "model_" + zero_pad(i, model_width);
    builder.add_model(model_ids[static_cast<std::size_t>(i)],
                      "fam_" + zero_pad(family_of[static_cast<std::size_t>(i)], 2),
                      benchmark[static_cast<std::size_t>(i)]);
  }
  for (int j = 0; j < M; ++j) {
    query_ids[static_cast<std::size_t>(j)] = "q_" + zero_pad(j, query_width);
    builder.add_query(query_ids[static_cast<std::size_t>(j)]);
  }

  SyntheticPopulation pop;
  pop.latent = latent;
  pop.noiseless_means.resize(n, static_cast<Eigen::Index>(M) * p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < M; ++j) {
      const Eigen::VectorXd mean = maps[static_cast<std::size_t>(j)] * latent.row(i).transpose() +
                                   offsets[static_cast<std::size_t>(j)];
      pop.noiseless_means.row(i).segment(static_cast<Eigen::Index>(j) * p, p) = mean.transpose();
      for (int k = 0; k < r; ++k) {
        std::vector<double> vec(static_cast<std::size_t>(p));
        for (int c = 0; c < p; ++c) {
          double v = mean(c);
          if (spec.noise_scale > 0.0) v += spec.noise_scale * noise.normal();
          vec[static_cast<std::size_t>(c)] = v;
        }
        builder.add_embedding(model_ids[static_cast<std::size_t>(i)],
                              query_ids[static_cast<std::size_t>(j)], k, std::move(vec));
      }
      builder.add_response_score(model_ids[static_cast<std::size_t>(i)],
                                 query_ids[static_cast<std::size_t>(j)],
                                 response_scores[static_cast<std::size_t>(i)]
                                                [static_cast<std::size_t>(j)]);
      builder.add_correctness(model_ids[static_cast<std::size_t>(i)],
                              query_ids[static_cast<std::size_t>(j)],
                              response_scores[static_cast<std::size_t>(i)]
                                             [static_cast<std::size_t>(j)] >= 0.5
                                  ? 1
                                  : 0);
    }
  }

  // Lipschitz constant of scores w.r.t. noiseless perspective distances:
  // flattened mean embeddings are T z + const with T the stacked per-query
  // maps, so |y_i - y_j| <= gamma' |w.(z_i - z_j)| <= (gamma'/sigma_min(T))
  // * ||T(z_i - z_j)||.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(L, L);
  for (int j = 0; j < M; ++j)
    gram += maps[static_cast<std::size_t>(j)].transpose() * maps[static_cast<std::size_t>(j)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double min_sv = std::sqrt(std::max(0.0, eig.eigenvalues().minCoeff()));
  pop.gamma_eff = min_sv > 0.0 ? spec.lipschitz_scale / min_sv
                               : std::numeric_limits<double>::infinity();

  metadata.extra["gamma_eff"] = format_double(pop.gamma_eff);
  metadata.extra["lipschitz_scale"] = format_double(spec.lipschitz_scale);
  metadata.extra["noise_scale"] = format_double(spec.noise_scale);
  metadata.extra["latent_dim"] = std::to_string(L);
  metadata.extra["seed"] = std::to_string(spec.seed);
  builder.metadata(std::move(metadata));

  pop.dataset = builder.build(Completeness::Require);
  return pop;
}

namespace {

// Rebuilds MeanEmbeddingMatrix values from flattened rows.
std::vector<MeanEmbeddingMatrix> unflatten_means(const Eigen::MatrixXd& flat,
                                                 const std::vector<ModelId>& ids, int M, int p) {
  std::vector<MeanEmbeddingMatrix> means;
  means.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    MeanEmbeddingMatrix mem;
    mem.model = ids[i];
    mem.rows.resize(M, p);
    for (int j = 0; j < M; ++j)
      mem.rows.row(j) = flat.row(static_cast<Eigen::Index>(i))
                            .segment(static_cast<Eigen::Index>(j) * p, p);
    means.push_back(std::move(mem));
  }
  return means;
}

}  // namespace

std::vector<ConcentrationCell> concentration_experiment(const SyntheticPopulationSpec& base,
                                                        std::span<const int> n_grid,
                                                        std::span<const int> r_grid, int seeds,
                                                        int workers) {
  if (n_grid.empty() || r_grid.empty())
    throw InvalidArgument("concentration_experiment: empty grid");
  if (n_grid.size() * r_grid.size() < 2)
    throw InvalidArgument("concentration_experiment: need at least 2 grid points");
  if (seeds < 1) throw InvalidArgument("concentration_experiment: seeds must be >= 1");

  struct CellSpec {
    int n, r;
    std::uint64_t seed;
  };
  std::vector<CellSpec> cell_specs;
  for (int n : n_grid)
    for (int r : r_grid)
      for (int s = 0; s < seeds; ++s)
        cell_specs.push_back({n, r, derive_seed(base.seed, kConcentrationTag,
                                                static_cast<std::uint64_t>(s))});

  std::vector<ConcentrationCell> cells(cell_specs.size());
  parallel_for(static_cast<int>(cell_specs.size()), workers, [&](int idx) {
    const CellSpec& cs = cell_specs[static_cast<std::size_t>(idx)];
    SyntheticPopulationSpec spec = base;
    spec.n_models = cs.n;
    spec.replicates = cs.r;
    spec.seed = cs.seed;
    const SyntheticPopulation pop = generate_population(spec);
    const BenchmarkDataset& ds = pop.dataset;

    std::vector<ModelId> ids;
    for (const ModelInfo& m : ds.models()) ids.push_back(m.id);

    const SubsetView full(ds);
    std::vector<MeanEmbeddingMatrix> noisy;
    noisy.reserve(ids.size());
    for (const ModelId& id : ids) noisy.push_back(mean_embeddings(full, id));
    const MdsResult psi_hat = classical_mds(distance_matrix(noisy), spec.latent_dim);

    const auto noiseless =
        unflatten_means(pop.noiseless_means, ids, spec.num_queries, spec.embedding_dim);
    const MdsResult psi_inf = classical_mds(distance_matrix(noiseless), spec.latent_dim);

    const Eigen::MatrixXd aligned = procrustes_align(psi_hat.coordinates, psi_inf.coordinates);
    double max_error = 0.0;
    for (Eigen::Index i = 0; i < aligned.rows(); ++i)
      max_error = std::max(max_error, (aligned.row(i) - psi_inf.coordinates.row(i)).norm());

    cells[static_cast<std::size_t>(idx)] = {cs.n, cs.r, cs.seed, max_error};
  });
  return cells;
}

EfficiencyResult efficiency_experiment(const SyntheticPopulationSpec& spec,
                                       std::span<const int> m_grid, std::span<const int> n_grid,
                                       int trials, int workers) {
  if (m_grid.empty() || n_grid.empty()) throw InvalidArgument("efficiency_experiment: empty grid");
  if (trials < 1) throw InvalidArgument("efficiency_experiment: trials must be >= 1");

  const SyntheticPopulation pop = generate_population(spec);

  std::vector<int> ms(m_grid.begin(), m_grid.end());
  std::sort(ms.begin(), ms.end());

  EfficiencyResult result;
  for (int n : n_grid) {
    std::map<std::string, std::vector<double>> mae_by_method;  // per m, in ms order
    for (int m : ms) {
      ExperimentConfig cfg;
      cfg.methods = {MethodKind::SampleScore, MethodKind::DkpsOls, MethodKind::DkpsKnn};
      cfg.k = {false, 1};
      cfg.n = n;
      cfg.m = m;
      cfg.d = std::min(8, n);
      cfg.trials = trials;
      cfg.base_seed = derive_seed(spec.seed, kEfficiencyTag, 0);
      cfg.workers = workers;
      const EvaluationReport report = lofo_evaluate(pop.dataset, cfg);
      for (MethodKind kind : cfg.methods) {
        const double mae = report_mae(report, kind);
        result.cells.push_back({n, m, method_name(kind), mae});
        mae_by_method[method_name(kind)].push_back(mae);
      }
    }
    for (const std::string method : {"dkps_ols", "dkps_knn"}) {
      EfficiencyCrossover cross;
      cross.n_references = n;
      cross.method = method;
      const auto& sample = mae_by_method.at("sample_score");
      const auto& dkps = mae_by_method.at(method);
      for (std::size_t i = 0; i < ms.size(); ++i) {
        if (sample[i] < dkps[i]) {
          cross.crossover_m = ms[i];
          break;
        }
      }
      result.crossovers.push_back(std::move(cross));
    }
  }
  return result;
}

}  // namespace dkps
