// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: numbered end-to-end criteria, one pass/fail line each.
// Run all with `acceptance`, or a single criterion with `acceptance <id>`.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "dkps/geometry.hpp"
#include "dkps/harness.hpp"
#include "dkps/irt.hpp"
#include "dkps/numeric.hpp"
#include "dkps/predictors.hpp"
#include "dkps/report_io.hpp"
#include "dkps/rng.hpp"
#include "dkps/selection.hpp"
#include "dkps/synth.hpp"
#include "test_support.hpp"

using namespace dkps;

namespace {

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = (points.row(i) - points.row(j)).norm();
  return D;
}

SyntheticPopulationSpec default_spec(std::uint64_t seed) {
  SyntheticPopulationSpec spec;  // n=300, latent 2, M=200, p=16, r=1, sigma=0.05
  spec.seed = seed;
  return spec;
}

std::vector<ModelId> model_ids(const BenchmarkDataset& ds) {
  std::vector<ModelId> out;
  for (const ModelInfo& m : ds.models()) out.push_back(m.id);
  return out;
}

// Single-trial LOFO MAE for one method.
double trial_mae(const BenchmarkDataset& ds, MethodKind method, int m, int d,
                 std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.methods = {method};
  cfg.m = m;
  cfg.d = d;
  cfg.trials = 1;
  cfg.base_seed = seed;
  return report_mae(lofo_evaluate(ds, cfg), method);
}

// ---------------------------------------------------------------------------

bool criterion_1_mds_exactness() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20250810);
  for (int rep = 0; rep < 50; ++rep) {
    const int k = 1 + rng.below_int(6);
    const int n = std::max(k + 1, 2 + rng.below_int(39));
    Eigen::MatrixXd points(n, k);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) points(i, c) = 4.0 * rng.normal();
    const Eigen::MatrixXd D = pairwise_distances(points);
    const MdsResult res = classical_mds(D, k);
    const Eigen::MatrixXd out = pairwise_distances(res.coordinates);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (std::abs(out(i, j) - D(i, j)) > 1e-9 * std::max(1.0, D(i, j))) {
          std::cout << "    config " << rep << ": distance (" << i << "," << j
                    << ") off by " << std::abs(out(i, j) - D(i, j)) << "\n";
          return false;
        }
  }
  const double secs = elapsed_seconds(start);
  if (secs >= 1.0) {
    std::cout << "    runtime " << secs << " s exceeds 1 s\n";
    return false;
  }
  return true;
}

bool criterion_2_estimator_identities() {
  SyntheticPopulationSpec spec = dkps::test::small_spec(5, 4, 99);
  spec.embedding_dim = 3;
  spec.families = 2;
  const SyntheticPopulation pop = generate_population(spec);
  const BenchmarkDataset& ds = pop.dataset;
  const auto ids = model_ids(ds);
  const int M = ds.query_count();

  const std::vector<MethodKind> all_methods = {
      MethodKind::PopulationMean, MethodKind::SampleScore, MethodKind::DkpsOls,
      MethodKind::DkpsKnn,        MethodKind::Ensemble,    MethodKind::Irt,
      MethodKind::DkpsIrt,        MethodKind::EnsDkpsIrt};

  for (const ModelId& target : ids) {
    std::vector<ModelId> refs;
    for (const ModelId& id : ids)
      if (id != target) refs.push_back(id);

    for (int mask = 1; mask < (1 << M); ++mask) {
      std::vector<QueryId> queries;
      for (int j = 0; j < M; ++j)
        if (mask & (1 << j)) queries.push_back(ds.queries()[static_cast<std::size_t>(j)]);

      PredictRequest req;
      req.target = target;
      req.references = refs;
      req.queries = queries;
      req.d = 2;
      req.k = {false, 1};

      req.method = MethodKind::SampleScore;
      const double sample = predict_score(ds, req);
      req.method = MethodKind::DkpsOls;
      const double dkps = predict_score(ds, req);

      // ensemble(1) == sample_score, ensemble(0) == dkps, exactly.
      if (ensemble(sample, dkps, 1.0) != sample || ensemble(sample, dkps, 0.0) != dkps) {
        std::cout << "    endpoint identity failed for target " << target << "\n";
        return false;
      }
      req.method = MethodKind::Ensemble;
      req.alpha = {false, 1.0};
      if (predict_score(ds, req) != sample) return false;
      req.alpha = {false, 0.0};
      if (predict_score(ds, req) != dkps) return false;

      // Full-set sample score recovers the stored benchmark score exactly.
      if (static_cast<int>(queries.size()) == M) {
        const double y =
            ds.models()[static_cast<std::size_t>(ds.model_index(target))].benchmark_score;
        if (sample != y) {
          std::cout << "    m = M sample score " << sample << " != stored " << y << "\n";
          return false;
        }
      }

      // Every method lands in [0, 1].
      req.alpha = {true, 0.0};
      for (MethodKind kind : all_methods) {
        req.method = kind;
        const double value = predict_score(ds, req);
        if (!(value >= 0.0 && value <= 1.0)) {
          std::cout << "    " << method_name(kind) << " produced " << value << "\n";
          return false;
        }
      }
    }
  }
  return true;
}

bool criterion_3_nn_formula() {
  Rng rng(424242);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + rng.below_int(50);
    const int d = 1 + rng.below_int(5);
    const bool snap = rep % 2 == 0;  // half the instances force exact ties
    Eigen::MatrixXd refs(n, d);
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<ModelId> ids;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c)
        refs(i, c) = snap ? static_cast<double>(rng.below_int(4)) - 1.5 : rng.normal();
      scores[static_cast<std::size_t>(i)] = rng.uniform01();
      ids.push_back("m" + std::to_string(i));
    }
    Eigen::RowVectorXd target(d);
    for (int c = 0; c < d; ++c)
      target(c) = snap ? static_cast<double>(rng.below_int(4)) - 1.5 : rng.normal();

    // Indicator-sum formula, written independently.
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = refs(i, c) - target(c);
        acc += diff * diff;
      }
      dist[static_cast<std::size_t>(i)] = std::sqrt(acc);
    }
    double min_dist = dist[0];
    for (double v : dist) min_dist = std::min(min_dist, v);
    double num = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i)
      if (dist[static_cast<std::size_t>(i)] == min_dist) {
        num += scores[static_cast<std::size_t>(i)];
        ++count;
      }
    const double expected = num / count;

    if (knn_predict(refs, scores, ids, target, 1) != expected) {
      std::cout << "    mismatch on instance " << rep << " (n=" << n << ")\n";
      return false;
    }
  }
  return true;
}

bool criterion_4_query_efficiency() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticPopulation pop = generate_population(default_spec(1));
  const BenchmarkDataset& ds = pop.dataset;

  int successes = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(s);
    std::map<int, double> ss, ols;
    for (int m : {1, 2, 4, 16}) {
      ExperimentConfig cfg;
      cfg.methods = {MethodKind::SampleScore, MethodKind::DkpsOls};
      cfg.m = m;
      cfg.d = 8;
      cfg.trials = 1;
      cfg.base_seed = seed;
      const EvaluationReport report = lofo_evaluate(ds, cfg);
      ss[m] = report_mae(report, MethodKind::SampleScore);
      ols[m] = report_mae(report, MethodKind::DkpsOls);
    }
    const bool ok = ols[1] < ss[1] && ols[2] < ss[2] && ols[4] < ss[4] && ols[4] < ss[16];
    if (ok) ++successes;
  }
  const double secs = elapsed_seconds(start);
  std::cout << "    " << successes << "/" << seeds << " paired seeds satisfied the "
            << "m in {1,2,4} wins and the 4-vs-16 budget saving (runtime " << secs << " s)\n";
  if (secs >= 300.0) {
    std::cout << "    runtime exceeds 5 minutes\n";
    return false;
  }
  return successes >= 90;
}

bool criterion_5_reference_count_monotonicity() {
  const SyntheticPopulation pop = generate_population(default_spec(2));
  const BenchmarkDataset& ds = pop.dataset;
  const int seeds = 50;

  std::map<int, std::vector<double>> maes;  // keyed by n (kAllReferences = full pool)
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = 9000 + static_cast<std::uint64_t>(s);
    for (int n : {10, 50, kAllReferences}) {
      ExperimentConfig cfg;
      cfg.methods = {MethodKind::DkpsOls};
      cfg.n = n;
      cfg.m = 4;
      cfg.d = 8;
      cfg.trials = 1;
      cfg.base_seed = seed;
      maes[n].push_back(report_mae(lofo_evaluate(ds, cfg), MethodKind::DkpsOls));
    }
  }
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return median_sorted(v);
  };
  const double m10 = median_of(maes[10]);
  const double m50 = median_of(maes[50]);
  const double mall = median_of(maes[kAllReferences]);
  std::cout << "    median MAE at m=4: n=10 -> " << m10 << ", n=50 -> " << m50
            << ", n=all(300 pool) -> " << mall << "\n";
  return m10 >= m50 && m50 >= mall;
}

bool criterion_6_rasch() {
  // Recovery on 500 models x 200 items.
  const int n = 500, M = 200;
  Rng rng(31415);
  Eigen::VectorXd thetas(n);
  for (int i = 0; i < n; ++i) thetas(i) = rng.normal();
  Eigen::VectorXd truth(M);
  for (int j = 0; j < M; ++j) truth(j) = -2.0 + 4.0 * j / (M - 1);
  Eigen::MatrixXi X(n, M);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < M; ++j)
      X(i, j) = rng.uniform01() < rasch_probability(thetas(i), truth(j)) ? 1 : 0;

  std::vector<QueryId> items;
  for (int j = 0; j < M; ++j) items.push_back("item_" + std::to_string(j));
  const RaschItemBank bank = fit_difficulties(X, items);

  std::vector<double> fitted(M), expected(M);
  for (int j = 0; j < M; ++j) {
    fitted[static_cast<std::size_t>(j)] = bank.difficulties(j);
    expected[static_cast<std::size_t>(j)] = truth(j);
  }
  const double rho = dkps::test::spearman(fitted, expected);
  std::cout << "    Spearman(difficulties, truth) = " << rho << ", " << bank.iterations
            << " sweeps\n";
  if (!(rho > 0.95)) return false;

  // Log-likelihood nondecreasing per sweep.
  for (std::size_t i = 0; i + 1 < bank.ll_trace.size(); ++i)
    if (bank.ll_trace[i + 1] < bank.ll_trace[i] - 1e-9 * (1.0 + std::abs(bank.ll_trace[i]))) {
      std::cout << "    log-likelihood decreased at sweep " << i + 1 << "\n";
      return false;
    }

  // Translation invariance of the predicted score.
  RaschItemBank shifted = bank;
  const double c = 1.7;
  shifted.difficulties.array() += c;
  for (double theta : {-2.0, -0.3, 0.7, 2.2})
    if (std::abs(irt_predict_score(theta, bank) - irt_predict_score(theta + c, shifted)) >
        1e-10) {
      std::cout << "    translation invariance violated at theta = " << theta << "\n";
      return false;
    }
  return true;
}

bool criterion_7_active_selection() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticPopulation pop = generate_population(default_spec(3));
  const BenchmarkDataset& ds = pop.dataset;
  const int seeds = 50, B = 256, m = 8, d = 8;
  const int family_count = static_cast<int>(ds.families().size());

  int successes = 0;
  for (int s = 0; s < seeds; ++s) {
    const int fam = s % family_count;
    const std::vector<int>& target_idx = ds.family_members()[static_cast<std::size_t>(fam)];
    std::set<int> target_set(target_idx.begin(), target_idx.end());
    std::vector<ModelId> refs, targets;
    for (int i = 0; i < ds.model_count(); ++i) {
      if (target_set.count(i)) targets.push_back(ds.models()[static_cast<std::size_t>(i)].id);
      else refs.push_back(ds.models()[static_cast<std::size_t>(i)].id);
    }

    const std::uint64_t seed = derive_seed(777, 0xAC71F3ULL, static_cast<std::uint64_t>(s));
    const SelectionResult sel = select_query_set(ds, refs, m, B, d, seed);

    // Held-out MAE of a candidate query set.
    auto held_out_mae = [&](const std::vector<QueryId>& queries) {
      std::vector<ModelId> all = refs;
      all.insert(all.end(), targets.begin(), targets.end());
      const SubsetView view = subset_view(ds, all, queries);
      const PerspectiveSpace space = build_dkps(view, refs, targets, d);
      Eigen::VectorXd y(static_cast<Eigen::Index>(refs.size()));
      for (std::size_t i = 0; i < refs.size(); ++i)
        y(static_cast<Eigen::Index>(i)) =
            ds.models()[static_cast<std::size_t>(ds.model_index(refs[i]))].benchmark_score;
      const LinearModel fit = fit_ols(space.reference_coordinates(), y);
      std::vector<double> errors;
      for (const ModelId& t : targets) {
        const double pred = predict_linear(fit, space.coords(t).transpose());
        const double truth =
            ds.models()[static_cast<std::size_t>(ds.model_index(t))].benchmark_score;
        errors.push_back(std::abs(pred - truth));
      }
      return stable_mean(errors);
    };

    std::vector<double> candidate_maes;
    double selected_mae = 0.0;
    for (const QuerySetCandidate& cand : sel.candidates) {
      const double mae = held_out_mae(cand.queries);
      candidate_maes.push_back(mae);
      if (cand.index == sel.best.index) selected_mae = mae;
    }
    std::sort(candidate_maes.begin(), candidate_maes.end());
    const double median_mae = median_sorted(candidate_maes);
    if (selected_mae <= median_mae) ++successes;
    if ((s + 1) % 10 == 0)
      std::cerr << "  selection seed " << s + 1 << "/" << seeds << " ("
                << elapsed_seconds(start) << " s)\n";
  }
  std::cout << "    selected set beat the median random set in " << successes << "/" << seeds
            << " seeds (runtime " << elapsed_seconds(start) << " s)\n";
  return successes >= 40;
}

bool criterion_8_concentration() {
  // Noise-free recovery.
  SyntheticPopulationSpec clean;
  clean.n_models = 50;
  clean.noise_scale = 0.0;
  clean.seed = 4;
  const std::vector<int> n_grid = {50};
  const std::vector<int> r_small = {1, 4};
  for (const auto& cell : concentration_experiment(clean, n_grid, r_small, 2))
    if (cell.max_error > 1e-9) {
      std::cout << "    noise-free max error " << cell.max_error << " > 1e-9\n";
      return false;
    }

  // Median max-error nonincreasing in r at sigma = 0.05, n = 50.
  SyntheticPopulationSpec noisy;
  noisy.n_models = 50;
  noisy.noise_scale = 0.05;
  noisy.seed = 4;
  const std::vector<int> r_grid = {1, 4, 16};
  const auto cells = concentration_experiment(noisy, n_grid, r_grid, 20);
  std::map<int, std::vector<double>> by_r;
  for (const auto& cell : cells) by_r[cell.replicates].push_back(cell.max_error);
  std::map<int, double> med;
  for (auto& [r, errors] : by_r) {
    std::sort(errors.begin(), errors.end());
    med[r] = median_sorted(errors);
  }
  std::cout << "    median max-error: r=1 -> " << med[1] << ", r=4 -> " << med[4]
            << ", r=16 -> " << med[16] << "\n";
  return med[1] >= med[4] && med[4] >= med[16];
}

bool criterion_9_determinism_and_no_leakage() {
  const SyntheticPopulation pop = generate_population(dkps::test::small_spec(40, 20, 12));
  const BenchmarkDataset& ds = pop.dataset;

  ExperimentConfig cfg;
  cfg.methods = {MethodKind::PopulationMean, MethodKind::SampleScore, MethodKind::DkpsOls,
                 MethodKind::Ensemble};
  cfg.m = 5;
  cfg.d = 6;
  cfg.trials = 32;
  cfg.base_seed = 77;

  ExperimentConfig serial = cfg;
  serial.workers = 1;
  ExperimentConfig parallel = cfg;
  parallel.workers = 4;
  const EvaluationReport a = lofo_evaluate(ds, serial);
  const EvaluationReport b = lofo_evaluate(ds, parallel);
  std::ostringstream csv_a, csv_b;
  write_report_csv(csv_a, a);
  write_report_csv(csv_b, b);
  if (csv_a.str() != csv_b.str()) {
    std::cout << "    reports differ between 1 and 4 workers\n";
    return false;
  }

  // Poison the held-out family's stored scores; predictions must not move.
  const FamilyId poisoned_family = ds.families()[1];
  DatasetBuilder builder;
  builder.metadata(DatasetMetadata(ds.metadata()));
  for (const ModelInfo& m : ds.models())
    builder.add_model(m.id, m.family,
                      m.family == poisoned_family ? clip01(1.0 - m.benchmark_score)
                                                  : m.benchmark_score);
  for (const QueryId& q : ds.queries()) builder.add_query(q);
  for (int i = 0; i < ds.model_count(); ++i)
    for (int j = 0; j < ds.query_count(); ++j) {
      const auto vec = ds.embedding(i, j, 0);
      builder.add_embedding(ds.models()[i].id, ds.queries()[j], 0,
                            std::vector<double>(vec.begin(), vec.end()));
      builder.add_response_score(ds.models()[i].id, ds.queries()[j],
                                 *ds.response_score(i, j));
    }
  const BenchmarkDataset poisoned = builder.build();
  const EvaluationReport p = lofo_evaluate(poisoned, serial);

  bool saw_family = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].family != poisoned_family) continue;
    saw_family = true;
    if (a.records[i].prediction != p.records[i].prediction) {
      std::cout << "    prediction changed for " << a.records[i].model << " in trial "
                << a.records[i].trial << "\n";
      return false;
    }
  }
  if (!saw_family) {
    std::cout << "    no trial held out the poisoned family; increase trials\n";
    return false;
  }
  return true;
}

bool criterion_10_sweep_identities() {
  SyntheticPopulationSpec spec = dkps::test::small_spec(60, 24, 21);
  spec.families = 6;
  const SyntheticPopulation pop = generate_population(spec);
  const BenchmarkDataset& ds = pop.dataset;

  ExperimentConfig base;
  base.methods = {MethodKind::SampleScore, MethodKind::DkpsOls, MethodKind::Ensemble};
  base.m = 4;
  base.d = 8;
  base.trials = 16;
  base.base_seed = 55;

  // Alpha sweep mirrors the endpoint construction.
  SweepGrid alpha_grid;
  alpha_grid.alpha_values = {{true, 0.0}, {false, 0.0}, {false, 0.1},
                             {false, 0.5}, {false, 0.8}, {false, 1.0}};
  const auto alpha_cells = sweep(ds, base, alpha_grid);
  auto predictions = [](const EvaluationReport& report, MethodKind kind) {
    std::vector<double> out;
    for (const TrialRecord& rec : report.records)
      if (rec.method == kind) out.push_back(rec.prediction);
    return out;
  };
  const auto& zero_cell = alpha_cells[1];  // alpha = 0
  if (predictions(zero_cell.report, MethodKind::Ensemble) !=
      predictions(zero_cell.report, MethodKind::DkpsOls)) {
    std::cout << "    alpha = 0 column differs from the dkps column\n";
    return false;
  }
  const auto& one_cell = alpha_cells[5];  // alpha = 1
  if (predictions(one_cell.report, MethodKind::Ensemble) !=
      predictions(one_cell.report, MethodKind::SampleScore)) {
    std::cout << "    alpha = 1 column differs from the sample-score column\n";
    return false;
  }

  // d sweep leaves the sample-score column untouched.
  SweepGrid d_grid;
  d_grid.d_values = {1, 2, 4, 8, 16, 32};
  const auto d_cells = sweep(ds, base, d_grid);
  const double ss_mae = report_mae(d_cells[0].report, MethodKind::SampleScore);
  for (const SweepCell& cell : d_cells)
    if (report_mae(cell.report, MethodKind::SampleScore) != ss_mae) {
      std::cout << "    sample-score MAE moved across the d grid\n";
      return false;
    }
  return true;
}

struct Criterion {
  int id;
  const char* name;
  bool (*fn)();
};

const Criterion kCriteria[] = {
    {1, "classical MDS round-trip exactness", criterion_1_mds_exactness},
    {2, "estimator identities on a 5-model toy dataset", criterion_2_estimator_identities},
    {3, "1-NN tie formula equals the brute-force oracle", criterion_3_nn_formula},
    {4, "perspective regression is query-efficient at small m", criterion_4_query_efficiency},
    {5, "more references do not hurt (median MAE nonincreasing)",
     criterion_5_reference_count_monotonicity},
    {6, "Rasch difficulty recovery, monotone fit, translation invariance", criterion_6_rasch},
    {7, "R^2-selected query set beats the median random set", criterion_7_active_selection},
    {8, "perspective concentration improves with replicates", criterion_8_concentration},
    {9, "worker-count determinism and held-out-score isolation",
     criterion_9_determinism_and_no_leakage},
    {10, "sweep endpoint identities (alpha and d grids)", criterion_10_sweep_identities},
};

}  // namespace

int main(int argc, char** argv) {
  int only = -1;
  if (argc > 1) only = std::atoi(argv[1]);

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (only > 0 && criterion.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string error;
    try {
      ok = criterion.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = elapsed_seconds(start);
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id << ": "
              << criterion.name << " (" << secs << " s)\n";
    if (!error.empty()) std::cout << "    exception: " << error << "\n";
    if (!ok) ++failures;
  }
  return failures;
}
