// SPDX-License-Identifier: Apache-2.0

#include "dkps/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dkps/geometry.hpp"
#include "dkps/irt.hpp"
#include "dkps/numeric.hpp"
#include "dkps/parallel.hpp"
#include "dkps/rng.hpp"

namespace dkps {

std::string method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::PopulationMean: return "population_mean";
    case MethodKind::SampleScore: return "sample_score";
    case MethodKind::DkpsOls: return "dkps_ols";
    case MethodKind::DkpsKnn: return "dkps_knn";
    case MethodKind::Ensemble: return "ensemble";
    case MethodKind::Irt: return "irt";
    case MethodKind::DkpsIrt: return "dkps_irt";
    case MethodKind::EnsDkpsIrt: return "ens_dkps_irt";
  }
  throw InvalidArgument("unknown method kind");
}

MethodKind method_from_name(const std::string& name) {
  static const std::map<std::string, MethodKind> lookup = {
      {"population_mean", MethodKind::PopulationMean},
      {"sample_score", MethodKind::SampleScore},
      {"dkps_ols", MethodKind::DkpsOls},
      {"dkps_knn", MethodKind::DkpsKnn},
      {"ensemble", MethodKind::Ensemble},
      {"irt", MethodKind::Irt},
      {"dkps_irt", MethodKind::DkpsIrt},
      {"ens_dkps_irt", MethodKind::EnsDkpsIrt},
  };
  auto it = lookup.find(name);
  if (it == lookup.end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

bool method_uses_dkps(MethodKind kind) {
  return kind == MethodKind::DkpsOls || kind == MethodKind::DkpsKnn ||
         kind == MethodKind::Ensemble || kind == MethodKind::DkpsIrt ||
         kind == MethodKind::EnsDkpsIrt;
}

bool method_uses_irt(MethodKind kind) {
  return kind == MethodKind::Irt || kind == MethodKind::DkpsIrt ||
         kind == MethodKind::EnsDkpsIrt;
}

bool method_uses_sample_score(MethodKind kind) {
  return kind == MethodKind::SampleScore || kind == MethodKind::Ensemble ||
         kind == MethodKind::EnsDkpsIrt;
}

int binary_outcome(const BenchmarkDataset& ds, int model_idx, int query_idx, double threshold) {
  if (ds.has_correctness()) {
    const auto c = ds.correctness(model_idx, query_idx);
    if (!c)
      throw InvalidArgument("correctness missing for (model=" +
                            ds.models()[static_cast<std::size_t>(model_idx)].id + ", query=" +
                            ds.queries()[static_cast<std::size_t>(query_idx)] + ")");
    return *c;
  }
  const auto s = ds.response_score(model_idx, query_idx);
  if (!s)
    throw InvalidArgument("response score missing for (model=" +
                          ds.models()[static_cast<std::size_t>(model_idx)].id + ", query=" +
                          ds.queries()[static_cast<std::size_t>(query_idx)] + ")");
  return *s >= threshold ? 1 : 0;
}

namespace {

void validate_config(const BenchmarkDataset& ds, const ExperimentConfig& config) {
  if (config.methods.empty()) throw ConfigError("no methods configured");
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (config.m < 1 || config.m > ds.query_count())
    throw ConfigError("m = " + std::to_string(config.m) + " outside [1, M = " +
                      std::to_string(ds.query_count()) + "]");
  if (config.d < 1) throw ConfigError("d must be >= 1");
  if (!config.alpha.m_over_M && !(config.alpha.value >= 0.0 && config.alpha.value <= 1.0))
    throw ConfigError("fixed alpha outside [0,1]");
  if (!config.k.sqrt_n && config.k.k < 1) throw ConfigError("k must be >= 1");

  const auto validation = validate_common_query_set(ds);
  if (!validation.pass)
    throw DatasetError("dataset fails common-query validation: " + validation.message);
  if (ds.families().size() < 2)
    throw InvalidArgument("leave-one-family-out requires at least 2 families");

  bool wants_sample = false, wants_irt = false;
  for (MethodKind kind : config.methods) {
    wants_sample = wants_sample || method_uses_sample_score(kind);
    wants_irt = wants_irt || method_uses_irt(kind);
  }
  if (wants_sample && !ds.has_response_scores())
    throw InvalidArgument("sample-score methods require response_scores");
  if (wants_irt && !ds.has_correctness() && !ds.has_response_scores())
    throw InvalidArgument("IRT methods require correctness or response_scores");
}

}  // namespace

double predict_score(const BenchmarkDataset& ds, const PredictRequest& request) {
  if (request.references.empty()) throw InvalidArgument("predict_score: no reference models");
  if (request.queries.empty()) throw InvalidArgument("predict_score: empty query subset");
  for (const ModelId& id : request.references)
    if (id == request.target)
      throw InvalidArgument("target '" + request.target + "' listed among references");

  std::vector<ModelId> all_ids = request.references;
  all_ids.push_back(request.target);
  const SubsetView view = subset_view(ds, all_ids, request.queries);

  std::vector<double> ref_scores;
  for (const ModelId& id : request.references)
    ref_scores.push_back(ds.models()[static_cast<std::size_t>(ds.model_index(id))]
                             .benchmark_score);

  const int m = static_cast<int>(request.queries.size());
  const double alpha = request.alpha.m_over_M
                           ? static_cast<double>(m) / static_cast<double>(ds.query_count())
                           : request.alpha.value;

  auto dkps_raw_value = [&](bool with_irt_feature, double target_theta,
                            const std::vector<double>& ref_thetas) {
    const PerspectiveSpace space =
        build_dkps(view, request.references, std::vector<ModelId>{request.target}, request.d);
    Eigen::MatrixXd features = space.reference_coordinates();
    Eigen::VectorXd target_features = space.coords(request.target).transpose();
    if (with_irt_feature) {
      Eigen::MatrixXd aug(features.rows(), features.cols() + 1);
      aug.leftCols(features.cols()) = features;
      for (Eigen::Index i = 0; i < aug.rows(); ++i)
        aug(i, features.cols()) = ref_thetas[static_cast<std::size_t>(i)];
      features = std::move(aug);
      target_features = dkps_irt_features(target_features, target_theta);
    }
    const Eigen::Map<const Eigen::VectorXd> y(ref_scores.data(),
                                              static_cast<Eigen::Index>(ref_scores.size()));
    return predict_affine(fit_ols(features, y), target_features);
  };

  auto irt_state = [&]() {
    Eigen::MatrixXi correct(static_cast<Eigen::Index>(request.references.size()),
                            ds.query_count());
    for (std::size_t i = 0; i < request.references.size(); ++i) {
      const int mi = ds.model_index(request.references[i]);
      for (int j = 0; j < ds.query_count(); ++j)
        correct(static_cast<Eigen::Index>(i), j) =
            binary_outcome(ds, mi, j, request.irt_binarize_threshold);
    }
    RaschItemBank bank = fit_difficulties(correct, ds.queries());
    std::vector<double> subset_difficulties;
    std::vector<int> subset_idx;
    for (const QueryId& q : request.queries) {
      const int j = ds.query_index(q);
      subset_idx.push_back(j);
      subset_difficulties.push_back(bank.difficulties(j));
    }
    auto ability_of = [&, subset_idx, subset_difficulties](const ModelId& id) {
      std::vector<int> outcomes;
      for (int j : subset_idx)
        outcomes.push_back(binary_outcome(ds, ds.model_index(id), j,
                                          request.irt_binarize_threshold));
      return fit_ability(outcomes, subset_difficulties).theta;
    };
    return std::make_pair(std::move(bank), ability_of);
  };

  switch (request.method) {
    case MethodKind::PopulationMean:
      return population_mean(ref_scores);
    case MethodKind::SampleScore:
      return sample_score(view, request.target);
    case MethodKind::DkpsOls:
      return clip01(dkps_raw_value(false, 0.0, {}));
    case MethodKind::DkpsKnn: {
      const PerspectiveSpace space =
          build_dkps(view, request.references, std::vector<ModelId>{request.target}, request.d);
      const int k = request.k.sqrt_n
                        ? sqrt_n_neighbors(static_cast<int>(request.references.size()))
                        : request.k.k;
      return knn_predict(space.reference_coordinates(), ref_scores, request.references,
                         space.coords(request.target), k);
    }
    case MethodKind::Ensemble: {
      const double sample = sample_score(view, request.target);
      const double raw = dkps_raw_value(false, 0.0, {});
      return request.clip_policy == ClipPolicy::ComponentsThenEnsemble
                 ? ensemble(sample, clip01(raw), alpha)
                 : clip01(alpha * sample + (1.0 - alpha) * raw);
    }
    case MethodKind::Irt: {
      auto [bank, ability_of] = irt_state();
      return irt_predict_score(ability_of(request.target), bank);
    }
    case MethodKind::DkpsIrt: {
      auto [bank, ability_of] = irt_state();
      std::vector<double> ref_thetas;
      for (const ModelId& id : request.references) ref_thetas.push_back(ability_of(id));
      return clip01(dkps_raw_value(true, ability_of(request.target), ref_thetas));
    }
    case MethodKind::EnsDkpsIrt: {
      auto [bank, ability_of] = irt_state();
      std::vector<double> ref_thetas;
      for (const ModelId& id : request.references) ref_thetas.push_back(ability_of(id));
      const double sample = sample_score(view, request.target);
      const double raw = dkps_raw_value(true, ability_of(request.target), ref_thetas);
      return request.clip_policy == ClipPolicy::ComponentsThenEnsemble
                 ? ensemble(sample, clip01(raw), alpha)
                 : clip01(alpha * sample + (1.0 - alpha) * raw);
    }
  }
  throw InvalidArgument("unknown method kind");
}

EvaluationReport lofo_evaluate(const BenchmarkDataset& ds, const ExperimentConfig& config) {
  std::vector<int> pool(static_cast<std::size_t>(ds.model_count()));
  for (int i = 0; i < ds.model_count(); ++i) pool[static_cast<std::size_t>(i)] = i;
  return lofo_evaluate(ds, config, pool);
}

EvaluationReport lofo_evaluate(const BenchmarkDataset& ds, const ExperimentConfig& config,
                               std::span<const int> reference_pool) {
  validate_config(ds, config);

  bool any_dkps = false, any_irt = false, any_sample = false;
  for (MethodKind kind : config.methods) {
    any_dkps = any_dkps || method_uses_dkps(kind);
    any_irt = any_irt || method_uses_irt(kind);
    any_sample = any_sample || method_uses_sample_score(kind);
  }

  const int M = ds.query_count();
  const int family_count = static_cast<int>(ds.families().size());
  const double alpha = config.alpha.m_over_M
                           ? static_cast<double>(config.m) / static_cast<double>(M)
                           : config.alpha.value;

  std::vector<std::vector<TrialRecord>> per_trial(static_cast<std::size_t>(config.trials));

  parallel_for(config.trials, config.workers, [&](int trial) {
    Rng rng(config.base_seed + static_cast<std::uint64_t>(trial));

    // (i) held-out family, (ii) reference sample, (iii) query subset; the
    // draw order is fixed so cells that differ only in d or alpha pair up.
    const int fam = rng.below_int(family_count);
    const std::vector<int>& target_idx = ds.family_members()[static_cast<std::size_t>(fam)];
    const std::set<int> target_set(target_idx.begin(), target_idx.end());

    std::vector<int> remaining;
    remaining.reserve(reference_pool.size());
    for (int idx : reference_pool)
      if (!target_set.count(idx)) remaining.push_back(idx);
    std::sort(remaining.begin(), remaining.end());

    std::vector<int> ref_idx;
    if (config.n == kAllReferences) {
      ref_idx = remaining;
    } else {
      if (config.n < 1 || config.n > static_cast<int>(remaining.size()))
        throw InvalidArgument("n = " + std::to_string(config.n) +
                              " exceeds available references (" +
                              std::to_string(remaining.size()) + ") in trial " +
                              std::to_string(trial));
      const auto picks = rng.sample_indices(static_cast<int>(remaining.size()), config.n);
      for (int p : picks) ref_idx.push_back(remaining[static_cast<std::size_t>(p)]);
    }
    if (ref_idx.empty())
      throw InvalidArgument("no reference models available after holding out family '" +
                            ds.families()[static_cast<std::size_t>(fam)] + "'");

    const std::vector<int> query_idx = rng.sample_indices(M, config.m);

    std::vector<ModelId> ref_ids, tgt_ids;
    for (int i : ref_idx) ref_ids.push_back(ds.models()[static_cast<std::size_t>(i)].id);
    for (int i : target_idx) tgt_ids.push_back(ds.models()[static_cast<std::size_t>(i)].id);
    std::vector<double> ref_scores;
    for (int i : ref_idx)
      ref_scores.push_back(ds.models()[static_cast<std::size_t>(i)].benchmark_score);

    std::vector<int> all_idx = ref_idx;
    all_idx.insert(all_idx.end(), target_idx.begin(), target_idx.end());
    std::sort(all_idx.begin(), all_idx.end());
    const SubsetView view(ds, all_idx, query_idx);

    // Shared per-trial state.
    PerspectiveSpace space;
    LinearModel ols;
    bool have_ols = false;
    Eigen::MatrixXd ref_coords;
    if (any_dkps) {
      space = build_dkps(view, ref_ids, tgt_ids, config.d);
      ref_coords = space.reference_coordinates();
    }

    RaschItemBank bank;
    std::vector<double> ref_abilities;
    LinearModel irt_ols;
    bool have_irt_ols = false;
    if (any_irt) {
      Eigen::MatrixXi ref_correct(static_cast<Eigen::Index>(ref_idx.size()), M);
      for (std::size_t i = 0; i < ref_idx.size(); ++i)
        for (int j = 0; j < M; ++j)
          ref_correct(static_cast<Eigen::Index>(i), j) =
              binary_outcome(ds, ref_idx[i], j, config.irt_binarize_threshold);
      bank = fit_difficulties(ref_correct, ds.queries());

      std::vector<double> subset_difficulties;
      for (int j : query_idx) subset_difficulties.push_back(bank.difficulties(j));
      auto ability_on_subset = [&](int model_index) {
        std::vector<int> outcomes;
        outcomes.reserve(query_idx.size());
        for (int j : query_idx)
          outcomes.push_back(binary_outcome(ds, model_index, j, config.irt_binarize_threshold));
        return fit_ability(outcomes, subset_difficulties).theta;
      };
      // Abilities for reference features use the same query subset as the
      // target so train and test features live on the same scale.
      bool need_irt_features = false;
      for (MethodKind kind : config.methods)
        need_irt_features = need_irt_features ||
                            kind == MethodKind::DkpsIrt || kind == MethodKind::EnsDkpsIrt;
      if (need_irt_features) {
        for (std::size_t i = 0; i < ref_idx.size(); ++i)
          ref_abilities.push_back(ability_on_subset(ref_idx[i]));
        Eigen::MatrixXd aug(ref_coords.rows(), ref_coords.cols() + 1);
        aug.leftCols(ref_coords.cols()) = ref_coords;
        for (Eigen::Index i = 0; i < aug.rows(); ++i)
          aug(i, ref_coords.cols()) = ref_abilities[static_cast<std::size_t>(i)];
        const Eigen::Map<const Eigen::VectorXd> y(ref_scores.data(),
                                                  static_cast<Eigen::Index>(ref_scores.size()));
        irt_ols = fit_ols(aug, y);
        have_irt_ols = true;
      }
    }

    const Eigen::Map<const Eigen::VectorXd> y_refs(ref_scores.data(),
                                                   static_cast<Eigen::Index>(ref_scores.size()));
    for (MethodKind kind : config.methods) {
      if ((kind == MethodKind::DkpsOls || kind == MethodKind::Ensemble) && !have_ols) {
        ols = fit_ols(ref_coords, y_refs);
        have_ols = true;
      }
    }

    const double pop_mean =
        ref_scores.empty() ? 0.0 : population_mean(ref_scores);
    const int k_neighbors = config.k.sqrt_n
                                ? sqrt_n_neighbors(static_cast<int>(ref_idx.size()))
                                : config.k.k;

    auto& records = per_trial[static_cast<std::size_t>(trial)];
    for (std::size_t t = 0; t < target_idx.size(); ++t) {
      const int model_index = target_idx[t];
      const ModelInfo& target = ds.models()[static_cast<std::size_t>(model_index)];

      double sample = 0.0;
      if (any_sample) sample = sample_score(view, target.id);
      double dkps_raw = 0.0, dkps_clipped = 0.0;
      Eigen::VectorXd tgt_coords;
      if (any_dkps) {
        tgt_coords = space.coords(target.id).transpose();
        if (have_ols) {
          dkps_raw = predict_affine(ols, tgt_coords);
          dkps_clipped = clip01(dkps_raw);
        }
      }
      double theta = 0.0;
      double dkps_irt_raw = 0.0;
      if (any_irt) {
        std::vector<int> outcomes;
        std::vector<double> subset_difficulties;
        for (int j : query_idx) {
          outcomes.push_back(binary_outcome(ds, model_index, j, config.irt_binarize_threshold));
          subset_difficulties.push_back(bank.difficulties(j));
        }
        theta = fit_ability(outcomes, subset_difficulties).theta;
        if (have_irt_ols)
          dkps_irt_raw = predict_affine(irt_ols, dkps_irt_features(tgt_coords, theta));
      }

      for (MethodKind kind : config.methods) {
        TrialRecord rec;
        rec.trial = trial;
        rec.method = kind;
        rec.family = target.family;
        rec.model = target.id;
        rec.n = static_cast<int>(ref_idx.size());
        rec.m = config.m;
        rec.d = config.d;
        switch (kind) {
          case MethodKind::PopulationMean:
            rec.prediction = pop_mean;
            break;
          case MethodKind::SampleScore:
            rec.prediction = sample;
            break;
          case MethodKind::DkpsOls:
            rec.prediction = dkps_clipped;
            break;
          case MethodKind::DkpsKnn:
            rec.k = k_neighbors;
            rec.prediction =
                knn_predict(ref_coords, ref_scores, ref_ids, tgt_coords.transpose(), k_neighbors);
            break;
          case MethodKind::Ensemble:
            rec.alpha = alpha;
            rec.prediction = config.clip_policy == ClipPolicy::ComponentsThenEnsemble
                                 ? ensemble(sample, dkps_clipped, alpha)
                                 : clip01(alpha * sample + (1.0 - alpha) * dkps_raw);
            break;
          case MethodKind::Irt:
            rec.prediction = irt_predict_score(theta, bank);
            break;
          case MethodKind::DkpsIrt:
            rec.prediction = clip01(dkps_irt_raw);
            break;
          case MethodKind::EnsDkpsIrt:
            rec.alpha = alpha;
            rec.prediction = config.clip_policy == ClipPolicy::ComponentsThenEnsemble
                                 ? ensemble(sample, clip01(dkps_irt_raw), alpha)
                                 : clip01(alpha * sample + (1.0 - alpha) * dkps_irt_raw);
            break;
        }
        rec.abs_error = std::abs(rec.prediction - target.benchmark_score);
        records.push_back(std::move(rec));
      }
    }
    if (config.progress) config.progress(trial, config.trials);
  });

  EvaluationReport report;
  report.config = config;
  for (auto& recs : per_trial)
    report.records.insert(report.records.end(), recs.begin(), recs.end());
  return report;
}

namespace {

double grouped_mae(const std::vector<const TrialRecord*>& records) {
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const TrialRecord* r : records) errors.push_back(r->abs_error);
  return stable_mean(errors);
}

}  // namespace

double report_mae(const EvaluationReport& report, MethodKind method) {
  std::vector<const TrialRecord*> group;
  for (const TrialRecord& r : report.records)
    if (r.method == method) group.push_back(&r);
  if (group.empty())
    throw InvalidArgument("report does not contain method '" + method_name(method) + "'");
  return grouped_mae(group);
}

std::map<ModelId, double> mae_by_model(const EvaluationReport& report, MethodKind method) {
  std::map<ModelId, std::vector<const TrialRecord*>> groups;
  for (const TrialRecord& r : report.records)
    if (r.method == method) groups[r.model].push_back(&r);
  if (groups.empty())
    throw InvalidArgument("report does not contain method '" + method_name(method) + "'");
  std::map<ModelId, double> out;
  for (const auto& [model, recs] : groups) out[model] = grouped_mae(recs);
  return out;
}

std::map<int, double> mae_by_trial(const EvaluationReport& report, MethodKind method) {
  std::map<int, std::vector<const TrialRecord*>> groups;
  for (const TrialRecord& r : report.records)
    if (r.method == method) groups[r.trial].push_back(&r);
  if (groups.empty())
    throw InvalidArgument("report does not contain method '" + method_name(method) + "'");
  std::map<int, double> out;
  for (const auto& [trial, recs] : groups) out[trial] = grouped_mae(recs);
  return out;
}

std::vector<SweepCell> sweep(const BenchmarkDataset& dataset, const ExperimentConfig& base,
                             const SweepGrid& grid) {
  if (grid.m_values.empty() && grid.n_values.empty() && grid.d_values.empty() &&
      grid.alpha_values.empty())
    throw ConfigError("empty sweep grid");
  const std::vector<int> ms = grid.m_values.empty() ? std::vector<int>{base.m} : grid.m_values;
  const std::vector<int> ns = grid.n_values.empty() ? std::vector<int>{base.n} : grid.n_values;
  const std::vector<int> ds = grid.d_values.empty() ? std::vector<int>{base.d} : grid.d_values;
  const std::vector<AlphaPolicy> alphas =
      grid.alpha_values.empty() ? std::vector<AlphaPolicy>{base.alpha} : grid.alpha_values;

  std::vector<SweepCell> cells;
  for (int n : ns)
    for (int d : ds)
      for (const AlphaPolicy& alpha : alphas)
        for (int m : ms) {
          SweepCell cell;
          cell.m = m;
          cell.n = n;
          cell.d = d;
          cell.alpha = alpha;
          ExperimentConfig cfg = base;
          cfg.m = m;
          cfg.n = n;
          cfg.d = d;
          cfg.alpha = alpha;
          cell.report = lofo_evaluate(dataset, cfg);
          cells.push_back(std::move(cell));
        }
  return cells;
}

std::vector<CollectionStats> reference_collection_stats(const BenchmarkDataset& dataset, int n,
                                                        int collections,
                                                        const ExperimentConfig& config) {
  if (collections < 1) throw InvalidArgument("reference_collection_stats: collections >= 1");
  if (n < 1 || n > dataset.model_count())
    throw InvalidArgument("reference_collection_stats: n outside [1, model count]");

  constexpr std::uint64_t kCollectionTag = 0xC0113C7104EED5AAULL;
  std::vector<CollectionStats> stats;
  for (MethodKind kind : config.methods) {
    CollectionStats s;
    s.method = kind;
    stats.push_back(std::move(s));
  }

  for (int c = 0; c < collections; ++c) {
    Rng pool_rng(derive_seed(config.base_seed, kCollectionTag, static_cast<std::uint64_t>(c)));
    const std::vector<int> pool = pool_rng.sample_indices(dataset.model_count(), n);
    const EvaluationReport report = lofo_evaluate(dataset, config, pool);
    for (std::size_t i = 0; i < config.methods.size(); ++i)
      stats[i].collection_mae.push_back(report_mae(report, config.methods[i]));
  }

  for (CollectionStats& s : stats) {
    std::vector<double> sorted = s.collection_mae;
    std::sort(sorted.begin(), sorted.end());
    s.min = quantile_sorted(sorted, 0.0);
    s.q25 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q75 = quantile_sorted(sorted, 0.75);
    s.max = quantile_sorted(sorted, 1.0);
  }
  return stats;
}

DeltaReport delta_report(const EvaluationReport& report) {
  const auto ss_model = mae_by_model(report, MethodKind::SampleScore);
  const auto ens_model = mae_by_model(report, MethodKind::Ensemble);
  const auto ss_trial = mae_by_trial(report, MethodKind::SampleScore);
  const auto ens_trial = mae_by_trial(report, MethodKind::Ensemble);

  DeltaReport deltas;
  for (const auto& [model, mae] : ss_model)
    deltas.per_model.emplace_back(model, mae - ens_model.at(model));
  for (const auto& [trial, mae] : ss_trial)
    deltas.per_query_set.emplace_back(trial, mae - ens_trial.at(trial));
  return deltas;
}

}  // namespace dkps
