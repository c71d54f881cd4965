// SPDX-License-Identifier: Apache-2.0
//
// Offline active query-set selection: sample candidate subsets, score each
// by the goodness-of-fit of perspective-space regression on the reference
// models, and keep the argmax. Runs entirely on cached data.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dkps/dataset.hpp"

namespace dkps {

// 1 - SS_res / SS_tot with SS_tot about the mean of `actual`.
double r_squared(std::span<const double> predicted, std::span<const double> actual);

struct QuerySetCandidate {
  std::vector<QueryId> queries;  // canonical order, size m
  double r2 = 0.0;
  std::uint64_t seed = 0;  // per-candidate sampling seed
  int index = -1;
};

struct SelectionOptions {
  bool leave_one_out = false;  // score candidates by leave-one-out R^2
  int workers = 1;
};

struct SelectionResult {
  QuerySetCandidate best;
  std::vector<QuerySetCandidate> candidates;  // full table, index order
};

// Candidate i is sampled with seed `seed + i`. Ties on R^2 break toward the
// lowest candidate index. Candidates whose evaluation fails (e.g. constant
// reference scores) are skipped; if every candidate fails, throws.
SelectionResult select_query_set(const BenchmarkDataset& dataset,
                                 std::span<const ModelId> reference_models, int m,
                                 int num_candidates, int dim, std::uint64_t seed,
                                 const SelectionOptions& options = {});

}  // namespace dkps
