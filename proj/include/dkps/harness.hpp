// SPDX-License-Identifier: Apache-2.0
//
// Leave-one-family-out evaluation engine. Each trial holds out one family,
// samples references and a query subset from the trial seed (base + trial
// index), embeds references together with the held-out models, trains the
// decision functions on references only, and predicts every held-out model.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dkps/dataset.hpp"
#include "dkps/predictors.hpp"

namespace dkps {

enum class MethodKind {
  PopulationMean,
  SampleScore,
  DkpsOls,
  DkpsKnn,
  Ensemble,
  Irt,
  DkpsIrt,
  EnsDkpsIrt,
};

std::string method_name(MethodKind kind);
MethodKind method_from_name(const std::string& name);

bool method_uses_dkps(MethodKind kind);
bool method_uses_irt(MethodKind kind);
bool method_uses_sample_score(MethodKind kind);

// Binary outcome for (model, query): the correctness layer when present,
// otherwise the response-level score thresholded.
int binary_outcome(const BenchmarkDataset& dataset, int model_idx, int query_idx,
                   double threshold);

inline constexpr int kAllReferences = -1;

struct AlphaPolicy {
  bool m_over_M = true;  // alpha = m / M
  double value = 0.0;    // used when m_over_M is false
};

struct KPolicy {
  bool sqrt_n = false;  // k = round(sqrt(n))
  int k = 1;
};

struct ExperimentConfig {
  std::vector<MethodKind> methods;
  int n = kAllReferences;  // references per trial; kAllReferences = all available
  int m = 4;               // query-subset size
  int d = 8;               // perspective dimension
  AlphaPolicy alpha;
  KPolicy k;
  int trials = 1024;
  std::uint64_t base_seed = 0;
  ClipPolicy clip_policy = ClipPolicy::ComponentsThenEnsemble;
  double irt_binarize_threshold = 0.5;  // used only when correctness is absent
  int workers = 1;
  // Invoked from worker threads as (finished_trial_index, total_trials);
  // purely informational, must not affect results.
  std::function<void(int, int)> progress;
};

// One-off prediction for an explicit target/reference/query-set choice (the
// CLI `predict` path). The target takes part in the perspective embedding
// but never in decision-function training.
struct PredictRequest {
  ModelId target;
  std::vector<ModelId> references;
  std::vector<QueryId> queries;
  MethodKind method = MethodKind::SampleScore;
  int d = 8;
  AlphaPolicy alpha;
  KPolicy k;
  ClipPolicy clip_policy = ClipPolicy::ComponentsThenEnsemble;
  double irt_binarize_threshold = 0.5;
};

double predict_score(const BenchmarkDataset& dataset, const PredictRequest& request);

struct TrialRecord {
  int trial = 0;
  MethodKind method = MethodKind::PopulationMean;
  int k = 0;            // neighbors; 0 when not applicable
  double alpha = -1.0;  // ensemble weight; negative when not applicable
  FamilyId family;
  ModelId model;
  int n = 0;  // references actually used
  int m = 0;
  int d = 0;
  double prediction = 0.0;
  double abs_error = 0.0;
};

struct EvaluationReport {
  ExperimentConfig config;
  std::vector<TrialRecord> records;  // trial-major, deterministic order
};

EvaluationReport lofo_evaluate(const BenchmarkDataset& dataset, const ExperimentConfig& config);

// Restricts the reference universe to the given model indices (targets are
// still the full held-out family).
EvaluationReport lofo_evaluate(const BenchmarkDataset& dataset, const ExperimentConfig& config,
                               std::span<const int> reference_pool);

// Aggregates; all means use pairwise summation over record order.
double report_mae(const EvaluationReport& report, MethodKind method);
std::map<ModelId, double> mae_by_model(const EvaluationReport& report, MethodKind method);
std::map<int, double> mae_by_trial(const EvaluationReport& report, MethodKind method);

struct SweepGrid {
  std::vector<int> m_values;
  std::vector<int> n_values;
  std::vector<int> d_values;
  std::vector<AlphaPolicy> alpha_values;
};

struct SweepCell {
  int m = 0;
  int n = kAllReferences;
  int d = 0;
  AlphaPolicy alpha;
  EvaluationReport report;
};

// Cartesian product over the grid axes (an empty axis keeps the base config
// value). Cells share the base seed, so they are paired trial-by-trial.
std::vector<SweepCell> sweep(const BenchmarkDataset& dataset, const ExperimentConfig& base,
                             const SweepGrid& grid);

struct CollectionStats {
  MethodKind method = MethodKind::PopulationMean;
  std::vector<double> collection_mae;  // one per collection
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

// MAE distribution over random size-n reference pools; one CollectionStats
// per configured method. Trials are paired across collections.
std::vector<CollectionStats> reference_collection_stats(const BenchmarkDataset& dataset, int n,
                                                        int collections,
                                                        const ExperimentConfig& config);

struct DeltaReport {
  // SampleScore MAE minus Ensemble MAE; positive = ensemble better.
  std::vector<std::pair<ModelId, double>> per_model;
  std::vector<std::pair<int, double>> per_query_set;  // keyed by trial
};

DeltaReport delta_report(const EvaluationReport& report);

}  // namespace dkps
