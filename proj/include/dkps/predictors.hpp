// SPDX-License-Identifier: Apache-2.0
//
// Benchmark-score estimators over reference perspectives and scores. All
// predictions land in [0, 1].

#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dkps/dataset.hpp"

namespace dkps {

// Mean benchmark score of the reference models, clipped.
double population_mean(std::span<const double> reference_scores);

// Mean response-level score over the sampled query subset.
double sample_score(std::span<const double> response_scores);

// Gathers the model's response scores over the view's queries; errors if a
// score is missing for any query in the view.
double sample_score(const SubsetView& view, const ModelId& model);

struct LinearModel {
  double intercept = 0.0;
  Eigen::VectorXd weights;
};

// Ordinary least squares with intercept. Rank-deficient designs resolve to
// the minimum-norm solution (singular values below 1e-10 of the largest are
// treated as zero).
LinearModel fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);

double predict_affine(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& features);

// Affine evaluation clipped to [0, 1].
double predict_linear(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& features);

// k-nearest-neighbor regression in perspective space. For k = 1 the result
// averages scores over ALL references tied at the minimum distance; for
// k > 1 ties at the k-th distance break by ascending model id.
double knn_predict(const Eigen::MatrixXd& reference_perspectives,
                   std::span<const double> reference_scores,
                   std::span<const ModelId> reference_ids,
                   const Eigen::Ref<const Eigen::RowVectorXd>& target_perspective, int k);

// round(sqrt(n)), at least 1.
int sqrt_n_neighbors(int n);

// Convex combination alpha * sample + (1 - alpha) * dkps, clipped. Inputs
// must already be in [0, 1].
double ensemble(double sample_value, double dkps_value, double alpha);

// Whether ensemble components are clipped before combining (default) or the
// raw affine DKPS value is combined and only the result clipped.
enum class ClipPolicy { ComponentsThenEnsemble, EnsembleThenClip };

// Perspective vector with the estimated ability appended last.
Eigen::VectorXd dkps_irt_features(const Eigen::Ref<const Eigen::VectorXd>& perspective,
                                  double ability);

}  // namespace dkps
