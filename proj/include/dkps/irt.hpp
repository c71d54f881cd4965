// SPDX-License-Identifier: Apache-2.0
//
// Rasch (1-parameter logistic) item-response baseline: offline difficulty
// estimation from a binary correctness matrix, per-target ability MLE, and
// score prediction as mean predicted correctness over all items.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dkps/dataset.hpp"

namespace dkps {

struct RaschFitOptions {
  double tolerance = 1e-8;    // max parameter change for convergence
  int max_iterations = 500;
  double clamp = 30.0;        // degenerate-pattern parameter clamp
};

struct RaschItemBank {
  std::vector<QueryId> queries;
  Eigen::VectorXd difficulties;
  int iterations = 0;
  double log_likelihood = 0.0;        // final joint log-likelihood
  std::vector<double> ll_trace;       // per-sweep trace (nondecreasing)
  std::vector<std::string> warnings;  // degenerate-pattern clamps
};

struct AbilityEstimate {
  double theta = 0.0;
  double standard_error = 0.0;  // from observed information at theta
  bool clamped = false;
  std::string warning;
};

inline double rasch_probability(double theta, double difficulty) {
  const double eta = theta - difficulty;
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Joint maximum likelihood over abilities and difficulties by alternating
// damped Newton sweeps; identifiability fixed by zero mean difficulty.
// Items answered all-correct (all-incorrect) by every model get difficulty
// -clamp (+clamp) with a warning.
RaschItemBank fit_difficulties(const Eigen::MatrixXi& correctness,
                               const std::vector<QueryId>& query_ids,
                               const RaschFitOptions& options = {});

// 1-D Newton MLE for the ability with difficulties fixed. All-correct or
// all-incorrect response vectors clamp to +/-clamp with a warning.
AbilityEstimate fit_ability(std::span<const int> correctness,
                            std::span<const double> difficulties,
                            const RaschFitOptions& options = {});

// Mean predicted correctness over the bank's items, clipped to [0, 1].
double irt_predict_score(double theta, const RaschItemBank& bank);

void save_item_bank(const std::filesystem::path& path, const RaschItemBank& bank);
RaschItemBank load_item_bank(const std::filesystem::path& path);

}  // namespace dkps
