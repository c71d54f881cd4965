// SPDX-License-Identifier: Apache-2.0

#include "dkps/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "dkps/csv.hpp"
#include "dkps/numeric.hpp"

namespace dkps {

namespace {

constexpr char kBinaryMagic[8] = {'D', 'K', 'P', 'S', 'E', 'M', 'B', '1'};
constexpr std::uint32_t kBinaryVersion = 1;

std::string pair_name(const ModelId& m, const QueryId& q) {
  return "(model=" + m + ", query=" + q + ")";
}

}  // namespace

int BenchmarkDataset::model_index(const ModelId& id) const {
  auto it = model_index_.find(id);
  if (it == model_index_.end()) throw InvalidArgument("unknown model id '" + id + "'");
  return it->second;
}

int BenchmarkDataset::query_index(const QueryId& id) const {
  auto it = query_index_.find(id);
  if (it == query_index_.end()) throw InvalidArgument("unknown query id '" + id + "'");
  return it->second;
}

int BenchmarkDataset::pair_replicates(int model_idx, int query_idx) const {
  return pair_replicates_[static_cast<std::size_t>(model_idx) * queries_.size() +
                          static_cast<std::size_t>(query_idx)];
}

std::span<const double> BenchmarkDataset::embedding(int model_idx, int query_idx,
                                                    int replicate) const {
  if (replicate < 0 || replicate >= pair_replicates(model_idx, query_idx))
    throw InvalidArgument("missing replicate data for " +
                          pair_name(models_[static_cast<std::size_t>(model_idx)].id,
                                    queries_[static_cast<std::size_t>(query_idx)]) +
                          " replicate " + std::to_string(replicate));
  const std::size_t stride = static_cast<std::size_t>(dim_);
  const std::size_t offset =
      ((static_cast<std::size_t>(model_idx) * queries_.size() +
        static_cast<std::size_t>(query_idx)) *
           static_cast<std::size_t>(replicates_) +
       static_cast<std::size_t>(replicate)) *
      stride;
  return {embeddings_.data() + offset, stride};
}

std::optional<double> BenchmarkDataset::response_score(int model_idx, int query_idx) const {
  if (!has_response_scores_) return std::nullopt;
  const double v = response_scores_[static_cast<std::size_t>(model_idx) * queries_.size() +
                                    static_cast<std::size_t>(query_idx)];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

std::optional<int> BenchmarkDataset::correctness(int model_idx, int query_idx) const {
  if (!has_correctness_) return std::nullopt;
  const int8_t v = correctness_[static_cast<std::size_t>(model_idx) * queries_.size() +
                                static_cast<std::size_t>(query_idx)];
  if (v < 0) return std::nullopt;
  return static_cast<int>(v);
}

DatasetBuilder& DatasetBuilder::metadata(DatasetMetadata md) {
  metadata_ = std::move(md);
  return *this;
}

DatasetBuilder& DatasetBuilder::add_model(ModelId id, FamilyId family, double score) {
  models_.push_back({std::move(id), std::move(family), score});
  return *this;
}

DatasetBuilder& DatasetBuilder::add_query(QueryId id) {
  queries_.push_back(std::move(id));
  return *this;
}

DatasetBuilder& DatasetBuilder::add_embedding(ModelId model, QueryId query, int replicate,
                                              std::vector<double> vector) {
  embeddings_.push_back({std::move(model), std::move(query), replicate, std::move(vector)});
  return *this;
}

DatasetBuilder& DatasetBuilder::add_response_score(ModelId model, QueryId query, double score) {
  response_scores_.emplace_back(std::move(model), std::move(query), score);
  return *this;
}

DatasetBuilder& DatasetBuilder::add_correctness(ModelId model, QueryId query, int correct) {
  correctness_.emplace_back(std::move(model), std::move(query), correct);
  return *this;
}

BenchmarkDataset DatasetBuilder::build(Completeness completeness) {
  BenchmarkDataset ds;
  ds.metadata_ = metadata_;
  ds.models_ = models_;
  ds.queries_ = queries_;

  for (std::size_t i = 0; i < ds.models_.size(); ++i) {
    const ModelInfo& m = ds.models_[i];
    if (m.id.empty()) throw DatasetError("empty model id in models");
    if (m.family.empty()) throw DatasetError("model '" + m.id + "' has empty family id");
    if (!(m.benchmark_score >= 0.0 && m.benchmark_score <= 1.0))
      throw DatasetError("benchmark score for model '" + m.id + "' outside [0,1]");
    if (!ds.model_index_.emplace(m.id, static_cast<int>(i)).second)
      throw DatasetError("duplicate model id '" + m.id + "'");
  }
  for (std::size_t j = 0; j < ds.queries_.size(); ++j) {
    if (ds.queries_[j].empty()) throw DatasetError("empty query id in queries");
    if (!ds.query_index_.emplace(ds.queries_[j], static_cast<int>(j)).second)
      throw DatasetError("duplicate query id '" + ds.queries_[j] + "'");
  }

  // Family grouping in first-appearance order.
  std::map<FamilyId, int> family_index;
  for (std::size_t i = 0; i < ds.models_.size(); ++i) {
    auto [it, inserted] = family_index.emplace(ds.models_[i].family,
                                               static_cast<int>(ds.families_.size()));
    if (inserted) {
      ds.families_.push_back(ds.models_[i].family);
      ds.family_members_.emplace_back();
    }
    ds.family_members_[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
  }

  const std::size_t n = ds.models_.size();
  const std::size_t M = ds.queries_.size();

  // Group embedding records, checking ids, dimension, and duplicates.
  int dim = -1;
  std::vector<std::vector<const EmbeddingRecord*>> per_pair(n * M);
  for (const EmbeddingRecord& rec : embeddings_) {
    const int mi = ds.has_model(rec.model) ? ds.model_index(rec.model) : -1;
    if (mi < 0) throw DatasetError("embedding record references unknown model '" + rec.model + "'");
    const int qi = ds.has_query(rec.query) ? ds.query_index(rec.query) : -1;
    if (qi < 0) throw DatasetError("embedding record references unknown query '" + rec.query + "'");
    if (rec.replicate < 0)
      throw DatasetError("negative replicate index for " + pair_name(rec.model, rec.query));
    if (rec.vector.empty())
      throw DatasetError("empty embedding vector for " + pair_name(rec.model, rec.query));
    for (double v : rec.vector)
      if (!std::isfinite(v))
        throw DatasetError("non-finite embedding value for " + pair_name(rec.model, rec.query));
    if (dim < 0) dim = static_cast<int>(rec.vector.size());
    if (static_cast<int>(rec.vector.size()) != dim)
      throw DatasetError("embedding dimension mismatch for " + pair_name(rec.model, rec.query) +
                         ": got " + std::to_string(rec.vector.size()) + ", expected " +
                         std::to_string(dim));
    auto& bucket = per_pair[static_cast<std::size_t>(mi) * M + static_cast<std::size_t>(qi)];
    for (const EmbeddingRecord* prev : bucket)
      if (prev->replicate == rec.replicate)
        throw DatasetError("duplicate embedding record " + pair_name(rec.model, rec.query) +
                           " replicate " + std::to_string(rec.replicate));
    bucket.push_back(&rec);
  }
  ds.dim_ = dim < 0 ? 0 : dim;

  // Replicate indices per pair must be 0..c-1 with no gaps.
  int max_replicates = 0;
  ds.pair_replicates_.assign(n * M, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      auto& bucket = per_pair[i * M + j];
      const int c = static_cast<int>(bucket.size());
      for (const EmbeddingRecord* rec : bucket) {
        if (rec->replicate >= c)
          throw DatasetError("replicate index gap for " +
                             pair_name(ds.models_[i].id, ds.queries_[j]) +
                             ": index " + std::to_string(rec->replicate) + " with only " +
                             std::to_string(c) + " record(s)");
      }
      ds.pair_replicates_[i * M + j] = c;
      max_replicates = std::max(max_replicates, c);
    }
  }
  ds.replicates_ = max_replicates;

  if (completeness == Completeness::Require) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < M; ++j) {
        const int c = ds.pair_replicates_[i * M + j];
        if (c == 0 && max_replicates > 0)
          throw DatasetError("missing (model,query) pair " +
                             pair_name(ds.models_[i].id, ds.queries_[j]));
        if (c != max_replicates)
          throw DatasetError("inconsistent replicate count for " +
                             pair_name(ds.models_[i].id, ds.queries_[j]) + ": " +
                             std::to_string(c) + " vs " + std::to_string(max_replicates));
      }
  }

  // Dense copy in [model][query][replicate][dim] order.
  ds.embeddings_.assign(n * M * static_cast<std::size_t>(ds.replicates_) *
                            static_cast<std::size_t>(ds.dim_),
                        0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      for (const EmbeddingRecord* rec : per_pair[i * M + j]) {
        const std::size_t offset =
            ((i * M + j) * static_cast<std::size_t>(ds.replicates_) +
             static_cast<std::size_t>(rec->replicate)) *
            static_cast<std::size_t>(ds.dim_);
        std::copy(rec->vector.begin(), rec->vector.end(), ds.embeddings_.begin() +
                                                              static_cast<std::ptrdiff_t>(offset));
      }
    }
  }

  if (!response_scores_.empty()) {
    ds.has_response_scores_ = true;
    ds.response_scores_.assign(n * M, std::nan(""));
    for (const auto& [model, query, score] : response_scores_) {
      const int mi = ds.model_index(model);
      const int qi = ds.query_index(query);
      if (!(score >= 0.0 && score <= 1.0))
        throw DatasetError("response score outside [0,1] for " + pair_name(model, query));
      double& slot = ds.response_scores_[static_cast<std::size_t>(mi) * M +
                                         static_cast<std::size_t>(qi)];
      if (!std::isnan(slot))
        throw DatasetError("duplicate response score for " + pair_name(model, query));
      slot = score;
    }
  }

  if (!correctness_.empty()) {
    ds.has_correctness_ = true;
    ds.correctness_.assign(n * M, -1);
    for (const auto& [model, query, correct] : correctness_) {
      const int mi = ds.model_index(model);
      const int qi = ds.query_index(query);
      if (correct != 0 && correct != 1)
        throw DatasetError("correctness value must be 0 or 1 for " + pair_name(model, query));
      int8_t& slot = ds.correctness_[static_cast<std::size_t>(mi) * M +
                                     static_cast<std::size_t>(qi)];
      if (slot >= 0) throw DatasetError("duplicate correctness record for " + pair_name(model, query));
      slot = static_cast<int8_t>(correct);
    }
  }

  return ds;
}

ValidationReport validate_common_query_set(const BenchmarkDataset& dataset) {
  ValidationReport report;
  if (dataset.model_count() == 0) {
    report.message = "no models";
    return report;
  }
  if (dataset.query_count() == 0) {
    report.message = "no queries";
    return report;
  }
  const int r = dataset.replicate_count();
  for (int i = 0; i < dataset.model_count(); ++i)
    for (int j = 0; j < dataset.query_count(); ++j)
      if (dataset.pair_replicates(i, j) != r)
        report.missing.emplace_back(dataset.models()[static_cast<std::size_t>(i)].id,
                                    dataset.queries()[static_cast<std::size_t>(j)]);
  if (r == 0) {
    report.message = "no embeddings";
    return report;
  }
  if (!report.missing.empty()) {
    report.message = std::to_string(report.missing.size()) +
                     " (model,query) pair(s) missing or with inconsistent replicate count";
    return report;
  }
  report.pass = true;
  report.message = "all " + std::to_string(dataset.model_count()) + " models cover all " +
                   std::to_string(dataset.query_count()) + " queries with r = " +
                   std::to_string(r);
  return report;
}

std::vector<double> one_hot_embedding(int choice_index, int num_choices) {
  if (num_choices < 1) throw InvalidArgument("one_hot_embedding: num_choices must be >= 1");
  if (choice_index < 0 || choice_index >= num_choices)
    throw InvalidArgument("one_hot_embedding: choice index " + std::to_string(choice_index) +
                          " out of range [0," + std::to_string(num_choices) + ")");
  std::vector<double> v(static_cast<std::size_t>(num_choices), 0.0);
  v[static_cast<std::size_t>(choice_index)] = 1.0;
  return v;
}

SubsetView::SubsetView(const BenchmarkDataset& dataset) : dataset_(&dataset) {
  model_indices_.resize(static_cast<std::size_t>(dataset.model_count()));
  for (int i = 0; i < dataset.model_count(); ++i) model_indices_[static_cast<std::size_t>(i)] = i;
  query_indices_.resize(static_cast<std::size_t>(dataset.query_count()));
  for (int j = 0; j < dataset.query_count(); ++j) query_indices_[static_cast<std::size_t>(j)] = j;
}

SubsetView::SubsetView(const BenchmarkDataset& dataset, std::vector<int> model_indices,
                       std::vector<int> query_indices)
    : dataset_(&dataset),
      model_indices_(std::move(model_indices)),
      query_indices_(std::move(query_indices)) {}

bool SubsetView::contains_model(const ModelId& id) const {
  if (!dataset_->has_model(id)) return false;
  const int idx = dataset_->model_index(id);
  return std::binary_search(model_indices_.begin(), model_indices_.end(), idx);
}

std::vector<ModelId> SubsetView::model_ids() const {
  std::vector<ModelId> ids;
  ids.reserve(model_indices_.size());
  for (int i : model_indices_) ids.push_back(dataset_->models()[static_cast<std::size_t>(i)].id);
  return ids;
}

std::vector<QueryId> SubsetView::query_ids() const {
  std::vector<QueryId> ids;
  ids.reserve(query_indices_.size());
  for (int j : query_indices_) ids.push_back(dataset_->queries()[static_cast<std::size_t>(j)]);
  return ids;
}

namespace {

std::vector<int> resolve_indices(std::span<const std::string> ids,
                                 const std::function<int(const std::string&)>& lookup,
                                 const char* what) {
  std::vector<int> out;
  out.reserve(ids.size());
  std::set<int> seen;
  for (const std::string& id : ids) {
    const int idx = lookup(id);
    if (!seen.insert(idx).second)
      throw InvalidArgument(std::string("duplicate ") + what + " id '" + id + "' in subset");
    out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SubsetView subset_view(const BenchmarkDataset& dataset, std::span<const ModelId> models,
                       std::span<const QueryId> queries) {
  auto model_idx = resolve_indices(
      models, [&](const std::string& id) { return dataset.model_index(id); }, "model");
  auto query_idx = resolve_indices(
      queries, [&](const std::string& id) { return dataset.query_index(id); }, "query");
  return SubsetView(dataset, std::move(model_idx), std::move(query_idx));
}

SubsetView subset_view(const SubsetView& view, std::span<const ModelId> models,
                       std::span<const QueryId> queries) {
  const BenchmarkDataset& ds = view.base();
  auto model_idx = resolve_indices(
      models,
      [&](const std::string& id) {
        const int idx = ds.model_index(id);
        if (!std::binary_search(view.model_indices().begin(), view.model_indices().end(), idx))
          throw InvalidArgument("model id '" + id + "' not in view");
        return idx;
      },
      "model");
  auto query_idx = resolve_indices(
      queries,
      [&](const std::string& id) {
        const int idx = ds.query_index(id);
        if (!std::binary_search(view.query_indices().begin(), view.query_indices().end(), idx))
          throw InvalidArgument("query id '" + id + "' not in view");
        return idx;
      },
      "query");
  return SubsetView(ds, std::move(model_idx), std::move(query_idx));
}

// ---------------------------------------------------------------------------
// Directory serialization

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void load_embeddings_jsonl(const fs::path& path, DatasetBuilder& builder) {
  const std::string text = read_text_file(path);
  const std::string origin = path.filename().string();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!line.empty()) {
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception& e) {
        throw DatasetError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
      const std::string where = origin + ":" + std::to_string(line_no);
      if (!rec.is_object() || !rec.contains("model_id") || !rec.contains("query_id") ||
          !rec.contains("replicate") || !rec.contains("vector"))
        throw DatasetError(where + ": record must carry model_id, query_id, replicate, vector");
      if (!rec["vector"].is_array())
        throw DatasetError(where + ": vector must be an array of numbers");
      std::vector<double> vec;
      vec.reserve(rec["vector"].size());
      for (const auto& v : rec["vector"]) {
        if (!v.is_number()) throw DatasetError(where + ": vector must be an array of numbers");
        vec.push_back(v.get<double>());
      }
      builder.add_embedding(rec["model_id"].get<std::string>(),
                            rec["query_id"].get<std::string>(), rec["replicate"].get<int>(),
                            std::move(vec));
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

void load_embeddings_binary(const fs::path& path, const std::vector<ModelId>& models,
                            const std::vector<QueryId>& queries, DatasetBuilder& builder) {
  const std::string bytes = read_text_file(path);
  const std::string origin = path.filename().string();
  if (bytes.size() < 28 || std::memcmp(bytes.data(), kBinaryMagic, 8) != 0)
    throw DatasetError(origin + ": not a packed embedding file");
  const std::uint32_t version = read_u32(bytes, 8);
  if (version != kBinaryVersion)
    throw DatasetError(origin + ": unsupported version " + std::to_string(version));
  const std::uint32_t dim = read_u32(bytes, 12);
  const std::uint32_t n_models = read_u32(bytes, 16);
  const std::uint32_t n_queries = read_u32(bytes, 20);
  const std::uint32_t replicates = read_u32(bytes, 24);
  if (n_models != models.size() || n_queries != queries.size())
    throw DatasetError(origin + ": header counts (" + std::to_string(n_models) + " models, " +
                       std::to_string(n_queries) + " queries) do not match the CSV files");
  const std::size_t total = static_cast<std::size_t>(n_models) * n_queries * replicates * dim;
  if (bytes.size() != 28 + total * 4)
    throw DatasetError(origin + ": payload size mismatch");
  std::size_t offset = 28;
  for (std::size_t i = 0; i < n_models; ++i) {
    for (std::size_t j = 0; j < n_queries; ++j) {
      for (std::uint32_t k = 0; k < replicates; ++k) {
        std::vector<double> vec(dim);
        for (std::uint32_t c = 0; c < dim; ++c) {
          float f = 0;
          std::memcpy(&f, bytes.data() + offset, 4);
          offset += 4;
          vec[c] = static_cast<double>(f);
        }
        builder.add_embedding(models[i], queries[j], static_cast<int>(k), std::move(vec));
      }
    }
  }
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void save_embeddings_binary(const BenchmarkDataset& ds, const fs::path& path) {
  const auto report = validate_common_query_set(ds);
  if (!report.pass && ds.model_count() > 0)
    throw DatasetError("packed format requires a complete dataset: " + report.message);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out.write(kBinaryMagic, 8);
  write_u32(out, kBinaryVersion);
  write_u32(out, static_cast<std::uint32_t>(ds.embedding_dim()));
  write_u32(out, static_cast<std::uint32_t>(ds.model_count()));
  write_u32(out, static_cast<std::uint32_t>(ds.query_count()));
  write_u32(out, static_cast<std::uint32_t>(ds.replicate_count()));
  for (int i = 0; i < ds.model_count(); ++i)
    for (int j = 0; j < ds.query_count(); ++j)
      for (int k = 0; k < ds.replicate_count(); ++k)
        for (double v : ds.embedding(i, j, k)) {
          const float f = static_cast<float>(v);
          out.write(reinterpret_cast<const char*>(&f), 4);
        }
}

void save_embeddings_jsonl(const BenchmarkDataset& ds, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (int i = 0; i < ds.model_count(); ++i) {
    for (int j = 0; j < ds.query_count(); ++j) {
      for (int k = 0; k < ds.pair_replicates(i, j); ++k) {
        out << "{\"model_id\":" << json(ds.models()[static_cast<std::size_t>(i)].id).dump()
            << ",\"query_id\":" << json(ds.queries()[static_cast<std::size_t>(j)]).dump()
            << ",\"replicate\":" << k << ",\"vector\":[";
        const auto vec = ds.embedding(i, j, k);
        for (std::size_t c = 0; c < vec.size(); ++c) {
          if (c) out << ',';
          out << format_double(vec[c]);
        }
        out << "]}\n";
      }
    }
  }
}

}  // namespace

BenchmarkDataset load_dataset(const std::filesystem::path& dir, EmbeddingFormat format) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());

  DatasetBuilder builder;

  const fs::path models_path = dir / "models.csv";
  if (!fs::exists(models_path)) throw DatasetError("missing file: " + models_path.string());
  CsvFile models_csv = read_csv_file(models_path, {"model_id", "family_id", "benchmark_score"});
  for (std::size_t i = 0; i < models_csv.rows.size(); ++i) {
    const auto& row = models_csv.rows[i];
    builder.add_model(row[0], row[1],
                      parse_double(row[2], "models.csv:" + std::to_string(models_csv.row_lines[i])));
  }

  const fs::path queries_path = dir / "queries.csv";
  if (!fs::exists(queries_path)) throw DatasetError("missing file: " + queries_path.string());
  CsvFile queries_csv = read_csv_file(queries_path, {"query_id"});
  std::vector<QueryId> query_ids;
  for (const auto& row : queries_csv.rows) {
    builder.add_query(row[0]);
    query_ids.push_back(row[0]);
  }
  std::vector<ModelId> model_ids;
  for (const auto& row : models_csv.rows) model_ids.push_back(row[0]);

  const fs::path jsonl_path = dir / "embeddings.jsonl";
  const fs::path bin_path = dir / "embeddings.bin";
  EmbeddingFormat effective = format;
  if (effective == EmbeddingFormat::Auto) {
    if (fs::exists(jsonl_path)) effective = EmbeddingFormat::RecordLines;
    else if (fs::exists(bin_path)) effective = EmbeddingFormat::Columnar;
    else throw DatasetError("missing file: " + jsonl_path.string() + " (or embeddings.bin)");
  }
  if (effective == EmbeddingFormat::RecordLines) {
    if (!fs::exists(jsonl_path)) throw DatasetError("missing file: " + jsonl_path.string());
    load_embeddings_jsonl(jsonl_path, builder);
  } else {
    if (!fs::exists(bin_path)) throw DatasetError("missing file: " + bin_path.string());
    load_embeddings_binary(bin_path, model_ids, query_ids, builder);
  }

  const fs::path scores_path = dir / "response_scores.csv";
  if (fs::exists(scores_path)) {
    CsvFile csv = read_csv_file(scores_path, {"model_id", "query_id", "score"});
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& row = csv.rows[i];
      builder.add_response_score(
          row[0], row[1],
          parse_double(row[2], "response_scores.csv:" + std::to_string(csv.row_lines[i])));
    }
  }

  const fs::path correctness_path = dir / "correctness.csv";
  if (fs::exists(correctness_path)) {
    CsvFile csv = read_csv_file(correctness_path, {"model_id", "query_id", "correct"});
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const auto& row = csv.rows[i];
      builder.add_correctness(
          row[0], row[1],
          static_cast<int>(parse_int(row[2], "correctness.csv:" + std::to_string(csv.row_lines[i]))));
    }
  }

  const fs::path meta_path = dir / "metadata.json";
  if (fs::exists(meta_path)) {
    json meta;
    try {
      meta = json::parse(read_text_file(meta_path));
    } catch (const json::exception& e) {
      throw DatasetError("metadata.json: " + std::string(e.what()));
    }
    DatasetMetadata md;
    md.benchmark = meta.value("benchmark", "");
    md.embedding = meta.value("embedding", "");
    if (meta.contains("extra"))
      for (auto& [key, value] : meta["extra"].items())
        md.extra[key] = value.is_string() ? value.get<std::string>() : value.dump();
    builder.metadata(std::move(md));
  }

  return builder.build(Completeness::Require);
}

void save_dataset(const BenchmarkDataset& ds, const std::filesystem::path& dir,
                  EmbeddingFormat format) {
  if (format == EmbeddingFormat::Auto) format = EmbeddingFormat::RecordLines;
  fs::create_directories(dir);

  {
    std::ofstream out(dir / "models.csv", std::ios::binary | std::ios::trunc);
    out << "model_id,family_id,benchmark_score\n";
    for (const ModelInfo& m : ds.models())
      out << csv_escape(m.id) << ',' << csv_escape(m.family) << ','
          << format_double(m.benchmark_score) << '\n';
  }
  {
    std::ofstream out(dir / "queries.csv", std::ios::binary | std::ios::trunc);
    out << "query_id\n";
    for (const QueryId& q : ds.queries()) out << csv_escape(q) << '\n';
  }
  if (format == EmbeddingFormat::RecordLines)
    save_embeddings_jsonl(ds, dir / "embeddings.jsonl");
  else
    save_embeddings_binary(ds, dir / "embeddings.bin");

  if (ds.has_response_scores()) {
    std::ofstream out(dir / "response_scores.csv", std::ios::binary | std::ios::trunc);
    out << "model_id,query_id,score\n";
    for (int i = 0; i < ds.model_count(); ++i)
      for (int j = 0; j < ds.query_count(); ++j)
        if (auto s = ds.response_score(i, j))
          out << csv_escape(ds.models()[static_cast<std::size_t>(i)].id) << ','
              << csv_escape(ds.queries()[static_cast<std::size_t>(j)]) << ','
              << format_double(*s) << '\n';
  }
  if (ds.has_correctness()) {
    std::ofstream out(dir / "correctness.csv", std::ios::binary | std::ios::trunc);
    out << "model_id,query_id,correct\n";
    for (int i = 0; i < ds.model_count(); ++i)
      for (int j = 0; j < ds.query_count(); ++j)
        if (auto c = ds.correctness(i, j))
          out << csv_escape(ds.models()[static_cast<std::size_t>(i)].id) << ','
              << csv_escape(ds.queries()[static_cast<std::size_t>(j)]) << ',' << *c << '\n';
  }
  {
    json meta;
    meta["schema_version"] = 1;
    meta["benchmark"] = ds.metadata().benchmark;
    meta["embedding"] = ds.metadata().embedding;
    json extra = json::object();
    for (const auto& [key, value] : ds.metadata().extra) extra[key] = value;
    meta["extra"] = extra;
    std::ofstream out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
    out << meta.dump(2) << '\n';
  }
}

}  // namespace dkps
