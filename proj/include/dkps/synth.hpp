// SPDX-License-Identifier: Apache-2.0
//
// Synthetic model populations with known geometry: latent positions on a
// compact box, per-query affine embedding maps, benchmark scores linear in
// the latent position, and response-level scores that average exactly to
// the benchmark score. Serves as the ground-truth oracle for the
// evaluation harness and for desk-scale checks of perspective concentration
// and query-efficiency trends.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dkps/dataset.hpp"

namespace dkps {

struct SyntheticPopulationSpec {
  int n_models = 300;
  int latent_dim = 2;
  int num_queries = 200;  // M
  int embedding_dim = 16;   // p
  int replicates = 1;       // r
  double lipschitz_scale = 0.25;  // score units per latent unit
  double noise_scale = 0.05;      // per-component replicate noise sigma
  int families = 10;              // latent-space clusters used as family labels
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticPopulation {
  BenchmarkDataset dataset;
  Eigen::MatrixXd latent;           // n x latent_dim
  Eigen::MatrixXd noiseless_means;  // n x (M*p); row i = flattened noise-free mean embeddings
  double gamma_eff = 0.0;           // Lipschitz bound of scores in the noiseless perspective space
};

SyntheticPopulation generate_population(const SyntheticPopulationSpec& spec);

struct ConcentrationCell {
  int n_models = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
  double max_error = 0.0;  // max_i || aligned noisy perspective_i - noiseless perspective_i ||
};

// For each (n, r) grid cell and each of `seeds` seeded populations, compare
// finite-replicate perspectives against the noise-free construction after
// orthogonal Procrustes alignment.
std::vector<ConcentrationCell> concentration_experiment(const SyntheticPopulationSpec& base,
                                                        std::span<const int> n_grid,
                                                        std::span<const int> r_grid, int seeds,
                                                        int workers = 1);

struct EfficiencyCell {
  int n_references = 0;
  int m = 0;
  std::string method;
  double mae = 0.0;
};

struct EfficiencyCrossover {
  int n_references = 0;
  std::string method;
  int crossover_m = -1;  // smallest m where sample_score beats the method; -1 = none in grid
};

struct EfficiencyResult {
  std::vector<EfficiencyCell> cells;
  std::vector<EfficiencyCrossover> crossovers;
};

// LOFO MAE of sample_score vs dkps_ols and dkps_knn(k=1) over an (m, n)
// grid on one synthetic population; reports where subset scoring overtakes
// each perspective-based method.
EfficiencyResult efficiency_experiment(const SyntheticPopulationSpec& spec,
                                       std::span<const int> m_grid, std::span<const int> n_grid,
                                       int trials, int workers = 1);

}  // namespace dkps
