// SPDX-License-Identifier: Apache-2.0
//
// Perspective-space geometry: replicate-averaged embedding matrices, the
// pairwise Frobenius distance matrix, and classical (Torgerson) MDS
// coordinates. All functions are pure; repeated calls on identical input
// are bit-identical.

#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dkps/dataset.hpp"

namespace dkps {

struct MeanEmbeddingMatrix {
  ModelId model;
  Eigen::MatrixXd rows;  // |Q| x p, row j = replicate-averaged embedding for query j
};

// Replicate-averaged embeddings for one model over the view's query subset.
MeanEmbeddingMatrix mean_embeddings(const SubsetView& view, const ModelId& model);

// Symmetric matrix of Frobenius distances between mean-embedding matrices,
// zero diagonal. All inputs must share the same shape.
Eigen::MatrixXd distance_matrix(const std::vector<MeanEmbeddingMatrix>& means);

struct MdsResult {
  Eigen::MatrixXd coordinates;  // n x dim
  Eigen::VectorXd eigenvalues;  // full spectrum, descending
  int clamped_negative = 0;     // negative eigenvalues among the selected dim
};

// Classical MDS: eigendecomposition of -1/2 J (D∘D) J. Coordinates are
// eigenvectors scaled by sqrt(max(lambda, 0)); eigenvalues within 1e-10
// (relative) of zero are treated as zero. Sign convention: each column's
// largest-magnitude entry is nonnegative (first such entry on ties).
MdsResult classical_mds(const Eigen::MatrixXd& distances, int dim);

struct PerspectiveSpace {
  int dimension = 0;
  std::vector<ModelId> model_ids;  // row order of `coordinates`
  std::vector<bool> is_target;
  Eigen::MatrixXd coordinates;  // n x dimension
  Eigen::VectorXd eigenvalues;  // descending
  int clamped_negative = 0;

  int index_of(const ModelId& id) const;
  Eigen::RowVectorXd coords(const ModelId& id) const;
  // Rows for the reference (non-target) models, in model_ids order.
  Eigen::MatrixXd reference_coordinates() const;
};

// Mean embeddings -> distance matrix -> classical MDS over references and
// targets jointly. Targets take part in the embedding but are tagged so
// downstream decision-function training can exclude them.
PerspectiveSpace build_dkps(const SubsetView& view, std::span<const ModelId> references,
                            std::span<const ModelId> targets, int dim);

// Best orthogonal alignment (rotation/reflection + translation) of `source`
// rows onto `target` rows; returns the aligned copy of `source`.
Eigen::MatrixXd procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);

// Coordinates CSV (model_id, family_id, psi_1..psi_d, is_target) for
// external plotting.
void write_perspectives_csv(std::ostream& out, const PerspectiveSpace& space,
                            const BenchmarkDataset& dataset);

}  // namespace dkps
