// SPDX-License-Identifier: Apache-2.0

#include "dkps/selection.hpp"

#include <cmath>
#include <limits>

#include "dkps/geometry.hpp"
#include "dkps/numeric.hpp"
#include "dkps/parallel.hpp"
#include "dkps/predictors.hpp"
#include "dkps/rng.hpp"

namespace dkps {

double r_squared(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.empty())
    throw InvalidArgument("r_squared: inputs must be equal-length and nonempty");
  const double mean = stable_mean(actual);
  std::vector<double> res_sq(actual.size()), tot_sq(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double res = actual[i] - predicted[i];
    const double tot = actual[i] - mean;
    res_sq[i] = res * res;
    tot_sq[i] = tot * tot;
  }
  const double ss_tot = pairwise_sum(tot_sq);
  // Zero variance up to rounding of the mean.
  double scale = 0.0;
  for (double a : actual) scale = std::max(scale, std::abs(a));
  const double tol = 1e-12 * std::max(1.0, scale);
  if (ss_tot <= tol * tol * static_cast<double>(actual.size()))
    throw InvalidArgument("r_squared: actual values have zero variance");
  return 1.0 - pairwise_sum(res_sq) / ss_tot;
}

SelectionResult select_query_set(const BenchmarkDataset& dataset,
                                 std::span<const ModelId> reference_models, int m,
                                 int num_candidates, int dim, std::uint64_t seed,
                                 const SelectionOptions& options) {
  const int M = dataset.query_count();
  if (m < 1 || m > M) throw InvalidArgument("select_query_set: m outside [1, M]");
  if (num_candidates < 1) throw InvalidArgument("select_query_set: need at least one candidate");
  if (reference_models.empty()) throw InvalidArgument("select_query_set: no reference models");

  std::vector<double> scores;
  scores.reserve(reference_models.size());
  for (const ModelId& id : reference_models)
    scores.push_back(dataset.models()[static_cast<std::size_t>(dataset.model_index(id))]
                         .benchmark_score);

  const std::vector<ModelId> refs(reference_models.begin(), reference_models.end());
  SelectionResult result;
  result.candidates.resize(static_cast<std::size_t>(num_candidates));
  std::vector<std::string> failures(static_cast<std::size_t>(num_candidates));

  parallel_for(num_candidates, options.workers, [&](int c) {
    QuerySetCandidate& cand = result.candidates[static_cast<std::size_t>(c)];
    cand.index = c;
    cand.seed = seed + static_cast<std::uint64_t>(c);
    Rng rng(cand.seed);
    const std::vector<int> query_idx = rng.sample_indices(M, m);
    for (int qi : query_idx)
      cand.queries.push_back(dataset.queries()[static_cast<std::size_t>(qi)]);
    try {
      const SubsetView view = subset_view(dataset, refs, cand.queries);
      const PerspectiveSpace space = build_dkps(view, refs, {}, dim);
      const Eigen::MatrixXd& features = space.coordinates;
      const Eigen::Map<const Eigen::VectorXd> y(scores.data(),
                                                static_cast<Eigen::Index>(scores.size()));
      std::vector<double> predicted(scores.size());
      if (options.leave_one_out) {
        const Eigen::Index n = features.rows();
        for (Eigen::Index held = 0; held < n; ++held) {
          Eigen::MatrixXd train_f(n - 1, features.cols());
          Eigen::VectorXd train_y(n - 1);
          Eigen::Index row = 0;
          for (Eigen::Index i = 0; i < n; ++i) {
            if (i == held) continue;
            train_f.row(row) = features.row(i);
            train_y(row) = y(i);
            ++row;
          }
          const LinearModel fit = fit_ols(train_f, train_y);
          predicted[static_cast<std::size_t>(held)] =
              predict_linear(fit, features.row(held).transpose());
        }
      } else {
        const LinearModel fit = fit_ols(features, y);
        for (Eigen::Index i = 0; i < features.rows(); ++i)
          predicted[static_cast<std::size_t>(i)] =
              predict_linear(fit, features.row(i).transpose());
      }
      cand.r2 = r_squared(predicted, scores);
    } catch (const Error& e) {
      cand.r2 = std::numeric_limits<double>::quiet_NaN();
      failures[static_cast<std::size_t>(c)] = e.what();
    }
  });

  int best = -1;
  for (int c = 0; c < num_candidates; ++c) {
    const double r2 = result.candidates[static_cast<std::size_t>(c)].r2;
    if (std::isnan(r2)) continue;
    if (best < 0 || r2 > result.candidates[static_cast<std::size_t>(best)].r2) best = c;
  }
  if (best < 0)
    throw Error("select_query_set: every candidate failed (first failure: " +
                failures.front() + ")");
  result.best = result.candidates[static_cast<std::size_t>(best)];
  return result;
}

}  // namespace dkps
