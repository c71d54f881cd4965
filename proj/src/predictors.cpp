// SPDX-License-Identifier: Apache-2.0

#include "dkps/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dkps/numeric.hpp"

namespace dkps {

double population_mean(std::span<const double> reference_scores) {
  if (reference_scores.empty()) throw InvalidArgument("population_mean: no reference scores");
  return clip01(stable_mean(reference_scores));
}

double sample_score(std::span<const double> response_scores) {
  if (response_scores.empty()) throw InvalidArgument("sample_score: empty query subset");
  return stable_mean(response_scores);
}

double sample_score(const SubsetView& view, const ModelId& model) {
  const BenchmarkDataset& ds = view.base();
  const int mi = ds.model_index(model);
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(view.query_count()));
  for (int qi : view.query_indices()) {
    const auto s = ds.response_score(mi, qi);
    if (!s)
      throw InvalidArgument("missing response score for (model=" + model + ", query=" +
                            ds.queries()[static_cast<std::size_t>(qi)] + ")");
    scores.push_back(*s);
  }
  return sample_score(scores);
}

LinearModel fit_ols(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  const Eigen::Index n = features.rows();
  if (n < 1) throw InvalidArgument("fit_ols: need at least one observation");
  if (targets.size() != n) throw InvalidArgument("fit_ols: feature/target row mismatch");
  if (!features.allFinite() || !targets.allFinite())
    throw InvalidArgument("fit_ols: non-finite inputs");

  Eigen::MatrixXd design(n, features.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(features.cols()) = features;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::VectorXd beta = svd.solve(targets);

  LinearModel model;
  model.intercept = beta(0);
  model.weights = beta.tail(features.cols());
  return model;
}

double predict_affine(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& features) {
  if (features.size() != model.weights.size())
    throw InvalidArgument("predict: feature length " + std::to_string(features.size()) +
                          " does not match model weight length " +
                          std::to_string(model.weights.size()));
  return model.intercept + model.weights.dot(features);
}

double predict_linear(const LinearModel& model, const Eigen::Ref<const Eigen::VectorXd>& features) {
  return clip01(predict_affine(model, features));
}

namespace {

// Scalar-loop Euclidean distance; fixed evaluation order keeps tie sets
// reproducible.
double row_distance(const Eigen::MatrixXd& points, Eigen::Index row,
                    const Eigen::Ref<const Eigen::RowVectorXd>& target) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double diff = points(row, c) - target(c);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

double knn_predict(const Eigen::MatrixXd& reference_perspectives,
                   std::span<const double> reference_scores,
                   std::span<const ModelId> reference_ids,
                   const Eigen::Ref<const Eigen::RowVectorXd>& target_perspective, int k) {
  const Eigen::Index n = reference_perspectives.rows();
  if (n == 0) throw InvalidArgument("knn_predict: no references");
  if (reference_scores.size() != static_cast<std::size_t>(n) ||
      reference_ids.size() != static_cast<std::size_t>(n))
    throw InvalidArgument("knn_predict: scores/ids must match reference rows");
  if (k < 1 || k > n) throw InvalidArgument("knn_predict: k outside [1, n]");
  if (reference_perspectives.cols() != target_perspective.size())
    throw InvalidArgument("knn_predict: perspective dimension mismatch");

  std::vector<double> dist(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    dist[static_cast<std::size_t>(i)] = row_distance(reference_perspectives, i, target_perspective);

  if (k == 1) {
    // Indicator-sum average over every reference exactly at the minimum
    // distance, accumulated in index order.
    const double min_dist = *std::min_element(dist.begin(), dist.end());
    double numerator = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] == min_dist) {
        numerator += reference_scores[i];
        ++count;
      }
    }
    return clip01(numerator / count);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = dist[static_cast<std::size_t>(a)];
    const double db = dist[static_cast<std::size_t>(b)];
    if (da != db) return da < db;
    return reference_ids[static_cast<std::size_t>(a)] < reference_ids[static_cast<std::size_t>(b)];
  });
  std::vector<double> nearest;
  nearest.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    nearest.push_back(reference_scores[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return clip01(stable_mean(nearest));
}

int sqrt_n_neighbors(int n) {
  if (n < 1) throw InvalidArgument("sqrt_n_neighbors: n must be >= 1");
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return std::max(1, std::min(k, n));
}

double ensemble(double sample_value, double dkps_value, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidArgument("ensemble: alpha outside [0,1]");
  if (!(sample_value >= 0.0 && sample_value <= 1.0))
    throw InvalidArgument("ensemble: sample value outside [0,1]");
  if (!(dkps_value >= 0.0 && dkps_value <= 1.0))
    throw InvalidArgument("ensemble: dkps value outside [0,1]");
  return clip01(alpha * sample_value + (1.0 - alpha) * dkps_value);
}

Eigen::VectorXd dkps_irt_features(const Eigen::Ref<const Eigen::VectorXd>& perspective,
                                  double ability) {
  if (!perspective.allFinite() || !std::isfinite(ability))
    throw InvalidArgument("dkps_irt_features: non-finite inputs");
  Eigen::VectorXd out(perspective.size() + 1);
  out.head(perspective.size()) = perspective;
  out(perspective.size()) = ability;
  return out;
}

}  // namespace dkps
