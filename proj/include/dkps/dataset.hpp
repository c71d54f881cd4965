// SPDX-License-Identifier: Apache-2.0
//
// Persistent data model for cached evaluations: per-model benchmark scores,
// family labels, embedded responses on a common query grid, and optional
// response-level scores / correctness. Embeddings are ingestion inputs and
// are never computed here.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dkps/errors.hpp"

namespace dkps {

using ModelId = std::string;
using QueryId = std::string;
using FamilyId = std::string;

struct ModelInfo {
  ModelId id;
  FamilyId family;
  double benchmark_score = 0.0;  // y in [0, 1], mean response-level score over the full query set
};

struct DatasetMetadata {
  std::string benchmark;
  std::string embedding;
  std::map<std::string, std::string> extra;
};

// Immutable after construction; safe for concurrent reads.
class BenchmarkDataset {
 public:
  const std::vector<ModelInfo>& models() const { return models_; }
  const std::vector<QueryId>& queries() const { return queries_; }
  const DatasetMetadata& metadata() const { return metadata_; }

  int model_count() const { return static_cast<int>(models_.size()); }
  int query_count() const { return static_cast<int>(queries_.size()); }
  int replicate_count() const { return replicates_; }
  int embedding_dim() const { return dim_; }

  bool has_model(const ModelId& id) const { return model_index_.count(id) != 0; }
  bool has_query(const QueryId& id) const { return query_index_.count(id) != 0; }
  int model_index(const ModelId& id) const;
  int query_index(const QueryId& id) const;

  // Number of replicates stored for (model, query); equals replicate_count()
  // on a complete dataset, possibly 0 on a leniently built one.
  int pair_replicates(int model_idx, int query_idx) const;

  std::span<const double> embedding(int model_idx, int query_idx, int replicate) const;

  bool has_response_scores() const { return has_response_scores_; }
  std::optional<double> response_score(int model_idx, int query_idx) const;

  bool has_correctness() const { return has_correctness_; }
  std::optional<int> correctness(int model_idx, int query_idx) const;

  // Family ids in first-appearance order with member model indices.
  const std::vector<FamilyId>& families() const { return families_; }
  const std::vector<std::vector<int>>& family_members() const { return family_members_; }

 private:
  friend class DatasetBuilder;

  std::vector<ModelInfo> models_;
  std::vector<QueryId> queries_;
  DatasetMetadata metadata_;
  std::map<ModelId, int> model_index_;
  std::map<QueryId, int> query_index_;
  std::vector<FamilyId> families_;
  std::vector<std::vector<int>> family_members_;

  int replicates_ = 0;
  int dim_ = 0;
  std::vector<double> embeddings_;       // [model][query][replicate][dim]
  std::vector<int> pair_replicates_;     // [model][query]
  bool has_response_scores_ = false;
  std::vector<double> response_scores_;  // NaN = absent
  bool has_correctness_ = false;
  std::vector<int8_t> correctness_;      // -1 = absent
};

enum class Completeness { Require, Allow };

// Accepts records in any order; validation happens in build().
class DatasetBuilder {
 public:
  DatasetBuilder& metadata(DatasetMetadata md);
  DatasetBuilder& add_model(ModelId id, FamilyId family, double benchmark_score);
  DatasetBuilder& add_query(QueryId id);
  DatasetBuilder& add_embedding(ModelId model, QueryId query, int replicate,
                                std::vector<double> vector);
  DatasetBuilder& add_response_score(ModelId model, QueryId query, double score);
  DatasetBuilder& add_correctness(ModelId model, QueryId query, int correct);

  // Validates invariants and assembles the dataset. With
  // Completeness::Require every (model, query) pair must carry the same
  // replicate count; with Allow pairs may be missing (for diagnostics).
  BenchmarkDataset build(Completeness completeness = Completeness::Require);

 private:
  struct EmbeddingRecord {
    ModelId model;
    QueryId query;
    int replicate;
    std::vector<double> vector;
  };
  DatasetMetadata metadata_;
  std::vector<ModelInfo> models_;
  std::vector<QueryId> queries_;
  std::vector<EmbeddingRecord> embeddings_;
  std::vector<std::tuple<ModelId, QueryId, double>> response_scores_;
  std::vector<std::tuple<ModelId, QueryId, int>> correctness_;
};

struct ValidationReport {
  bool pass = false;
  std::string message;
  std::vector<std::pair<ModelId, QueryId>> missing;  // pairs with replicate count != r
};

// Pass iff every model covers every query with the same replicate count.
ValidationReport validate_common_query_set(const BenchmarkDataset& dataset);

// One-hot vector in R^num_choices.
std::vector<double> one_hot_embedding(int choice_index, int num_choices);

// Non-owning view over a model/query product subset. Query (and model)
// order follows the canonical dataset order regardless of request order.
class SubsetView {
 public:
  explicit SubsetView(const BenchmarkDataset& dataset);
  SubsetView(const BenchmarkDataset& dataset, std::vector<int> model_indices,
             std::vector<int> query_indices);

  const BenchmarkDataset& base() const { return *dataset_; }
  const std::vector<int>& model_indices() const { return model_indices_; }
  const std::vector<int>& query_indices() const { return query_indices_; }
  int model_count() const { return static_cast<int>(model_indices_.size()); }
  int query_count() const { return static_cast<int>(query_indices_.size()); }
  bool contains_model(const ModelId& id) const;

  std::vector<ModelId> model_ids() const;
  std::vector<QueryId> query_ids() const;

 private:
  const BenchmarkDataset* dataset_;
  std::vector<int> model_indices_;
  std::vector<int> query_indices_;
};

SubsetView subset_view(const BenchmarkDataset& dataset, std::span<const ModelId> models,
                       std::span<const QueryId> queries);
SubsetView subset_view(const SubsetView& view, std::span<const ModelId> models,
                       std::span<const QueryId> queries);

// Dataset directory formats. RecordLines stores embeddings as
// embeddings.jsonl (one JSON object per record); Columnar stores them as
// embeddings.bin (packed little-endian float32 with a fixed header).
enum class EmbeddingFormat { Auto, RecordLines, Columnar };

BenchmarkDataset load_dataset(const std::filesystem::path& dir,
                              EmbeddingFormat format = EmbeddingFormat::Auto);
void save_dataset(const BenchmarkDataset& dataset, const std::filesystem::path& dir,
                  EmbeddingFormat format = EmbeddingFormat::RecordLines);

}  // namespace dkps
