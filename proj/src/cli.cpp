// SPDX-License-Identifier: Apache-2.0
//
// Command-line interface binding the library into reproducible runs. Every
// command that writes into an output directory also writes a manifest.json
// sufficient to re-run it bit-identically.

#include "dkps/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dkps/csv.hpp"
#include "dkps/dataset.hpp"
#include "dkps/geometry.hpp"
#include "dkps/harness.hpp"
#include "dkps/irt.hpp"
#include "dkps/manifest.hpp"
#include "dkps/numeric.hpp"
#include "dkps/parallel.hpp"
#include "dkps/report_io.hpp"
#include "dkps/rng.hpp"
#include "dkps/selection.hpp"
#include "dkps/synth.hpp"

namespace dkps {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string join_command(const std::vector<std::string>& args) {
  std::string out = "dkps";
  for (const std::string& a : args) {
    out.push_back(' ');
    if (a.find_first_of(" \t'\"") != std::string::npos) {
      out.push_back('\'');
      out += a;
      out.push_back('\'');
    } else {
      out += a;
    }
  }
  return out;
}

json load_json_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_schema(const json& doc, const std::string& origin) {
  if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");
  if (!doc.contains("schema_version"))
    throw ConfigError(origin + ": missing schema_version");
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != 1)
    throw ConfigError(origin + ": unsupported schema_version " + doc["schema_version"].dump() +
                      " (this tool reads version 1)");
}

AlphaPolicy parse_alpha(const json& v, const std::string& origin) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "m_over_M" || s == "m/M") return {true, 0.0};
    throw ConfigError(origin + ": alpha must be a number in [0,1] or \"m/M\"");
  }
  if (v.is_number()) {
    const double a = v.get<double>();
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError(origin + ": alpha outside [0,1]");
    return {false, a};
  }
  throw ConfigError(origin + ": alpha must be a number in [0,1] or \"m/M\"");
}

AlphaPolicy parse_alpha_flag(const std::string& s) {
  if (s == "m_over_M" || s == "m/M") return {true, 0.0};
  const double a = parse_double(s, "--alpha");
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("--alpha outside [0,1]");
  return {false, a};
}

KPolicy parse_k(const json& v, const std::string& origin) {
  if (v.is_string()) {
    if (v.get<std::string>() == "sqrt") return {true, 1};
    throw ConfigError(origin + ": k must be a positive integer or \"sqrt\"");
  }
  if (v.is_number_integer()) {
    const int k = v.get<int>();
    if (k < 1) throw ConfigError(origin + ": k must be >= 1");
    return {false, k};
  }
  throw ConfigError(origin + ": k must be a positive integer or \"sqrt\"");
}

int parse_n(const json& v, const std::string& origin) {
  if (v.is_string()) {
    if (v.get<std::string>() == "all") return kAllReferences;
    throw ConfigError(origin + ": n must be a positive integer or \"all\"");
  }
  if (v.is_number_integer()) {
    const int n = v.get<int>();
    if (n < 1) throw ConfigError(origin + ": n must be >= 1");
    return n;
  }
  throw ConfigError(origin + ": n must be a positive integer or \"all\"");
}

ClipPolicy parse_clip_policy(const std::string& s, const std::string& origin) {
  if (s == "components_then_ensemble") return ClipPolicy::ComponentsThenEnsemble;
  if (s == "ensemble_then_clip") return ClipPolicy::EnsembleThenClip;
  throw ConfigError(origin +
                    ": clip_policy must be components_then_ensemble or ensemble_then_clip");
}

ExperimentConfig parse_experiment_config(const json& doc, const std::string& origin) {
  check_schema(doc, origin);
  ExperimentConfig cfg;
  if (!doc.contains("methods") || !doc["methods"].is_array() || doc["methods"].empty())
    throw ConfigError(origin + ": methods must be a nonempty array of method names");
  for (const auto& m : doc["methods"]) {
    if (!m.is_string()) throw ConfigError(origin + ": methods must be strings");
    cfg.methods.push_back(method_from_name(m.get<std::string>()));
  }
  if (doc.contains("n")) cfg.n = parse_n(doc["n"], origin);
  if (doc.contains("m")) cfg.m = doc["m"].get<int>();
  if (doc.contains("d")) cfg.d = doc["d"].get<int>();
  if (doc.contains("alpha")) cfg.alpha = parse_alpha(doc["alpha"], origin);
  if (doc.contains("k")) cfg.k = parse_k(doc["k"], origin);
  if (doc.contains("trials")) cfg.trials = doc["trials"].get<int>();
  if (doc.contains("seed")) cfg.base_seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("clip_policy"))
    cfg.clip_policy = parse_clip_policy(doc["clip_policy"].get<std::string>(), origin);
  if (doc.contains("irt_binarize_threshold"))
    cfg.irt_binarize_threshold = doc["irt_binarize_threshold"].get<double>();
  return cfg;
}

json alpha_json(const AlphaPolicy& a) {
  return a.m_over_M ? json("m/M") : json(a.value);
}

json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["schema_version"] = 1;
  json methods = json::array();
  for (MethodKind kind : cfg.methods) methods.push_back(method_name(kind));
  doc["methods"] = std::move(methods);
  doc["n"] = cfg.n == kAllReferences ? json("all") : json(cfg.n);
  doc["m"] = cfg.m;
  doc["d"] = cfg.d;
  doc["alpha"] = alpha_json(cfg.alpha);
  doc["k"] = cfg.k.sqrt_n ? json("sqrt") : json(cfg.k.k);
  doc["trials"] = cfg.trials;
  doc["seed"] = cfg.base_seed;
  doc["clip_policy"] = cfg.clip_policy == ClipPolicy::ComponentsThenEnsemble
                           ? "components_then_ensemble"
                           : "ensemble_then_clip";
  doc["irt_binarize_threshold"] = cfg.irt_binarize_threshold;
  doc["workers"] = cfg.workers;
  return doc;
}

SyntheticPopulationSpec parse_population(const json& doc, const std::string& origin) {
  SyntheticPopulationSpec spec;
  if (!doc.is_object()) throw ConfigError(origin + ": population must be an object");
  if (doc.contains("n_models")) spec.n_models = doc["n_models"].get<int>();
  if (doc.contains("latent_dim")) spec.latent_dim = doc["latent_dim"].get<int>();
  if (doc.contains("num_queries")) spec.num_queries = doc["num_queries"].get<int>();
  if (doc.contains("embedding_dim")) spec.embedding_dim = doc["embedding_dim"].get<int>();
  if (doc.contains("replicates")) spec.replicates = doc["replicates"].get<int>();
  if (doc.contains("lipschitz_scale")) spec.lipschitz_scale = doc["lipschitz_scale"].get<double>();
  if (doc.contains("noise_scale")) spec.noise_scale = doc["noise_scale"].get<double>();
  if (doc.contains("families")) spec.families = doc["families"].get<int>();
  if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return spec;
}

json population_to_json(const SyntheticPopulationSpec& spec) {
  json doc;
  doc["n_models"] = spec.n_models;
  doc["latent_dim"] = spec.latent_dim;
  doc["num_queries"] = spec.num_queries;
  doc["embedding_dim"] = spec.embedding_dim;
  doc["replicates"] = spec.replicates;
  doc["lipschitz_scale"] = spec.lipschitz_scale;
  doc["noise_scale"] = spec.noise_scale;
  doc["families"] = spec.families;
  doc["seed"] = spec.seed;
  return doc;
}

// --queries accepts either "m,seed" (sample a size-m subset with that seed)
// or a path to a text file with one query id per line.
std::vector<QueryId> resolve_queries(const BenchmarkDataset& ds, const std::string& spec) {
  if (spec.empty()) return ds.queries();
  const std::size_t comma = spec.find(',');
  if (comma != std::string::npos && spec.find(',', comma + 1) == std::string::npos &&
      !fs::exists(spec)) {
    const long long m = parse_int(spec.substr(0, comma), "--queries");
    const long long seed = parse_int(spec.substr(comma + 1), "--queries");
    if (m < 1 || m > ds.query_count())
      throw ConfigError("--queries: m outside [1, M = " + std::to_string(ds.query_count()) + "]");
    Rng rng(static_cast<std::uint64_t>(seed));
    std::vector<QueryId> out;
    for (int qi : rng.sample_indices(ds.query_count(), static_cast<int>(m)))
      out.push_back(ds.queries()[static_cast<std::size_t>(qi)]);
    return out;
  }
  std::string text;
  try {
    text = read_text_file(spec);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  std::vector<QueryId> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line == "query_id") continue;
    out.push_back(line);
  }
  if (out.empty()) throw ConfigError("--queries file '" + spec + "' lists no queries");
  return out;
}

struct OutputWriter {
  fs::path dir;
  RunManifest manifest;

  void add(const std::string& name, const std::string& contents) {
    atomic_write(dir / name, contents);
    manifest.outputs.push_back(name);
  }
  void finish() { write_manifest(dir, manifest); }
};

// ---------------------------------------------------------------------------
// Subcommand implementations

int run_validate(const std::string& data_dir) {
  BenchmarkDataset ds;
  try {
    ds = load_dataset(data_dir);
  } catch (const DatasetError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return 1;
  }
  const ValidationReport report = validate_common_query_set(ds);
  if (!report.pass) {
    std::cerr << "validation failed: " << report.message << "\n";
    std::size_t shown = 0;
    for (const auto& [model, query] : report.missing) {
      if (++shown > 20) {
        std::cerr << "  ... " << (report.missing.size() - 20) << " more\n";
        break;
      }
      std::cerr << "  missing (" << model << ", " << query << ")\n";
    }
    return 1;
  }
  std::cout << "ok: " << report.message << "\n";
  return 0;
}

int run_dkps(const std::vector<std::string>& args, const std::string& data_dir,
             const std::string& queries_spec, int dim,
             const std::vector<std::string>& targets, const std::string& out_file) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  const std::vector<QueryId> queries = resolve_queries(ds, queries_spec);
  std::vector<ModelId> refs;
  for (const ModelInfo& m : ds.models())
    if (std::find(targets.begin(), targets.end(), m.id) == targets.end()) refs.push_back(m.id);
  std::vector<ModelId> all_ids = refs;
  all_ids.insert(all_ids.end(), targets.begin(), targets.end());
  const SubsetView view = subset_view(ds, all_ids, queries);
  const PerspectiveSpace space = build_dkps(view, refs, targets, dim);

  std::ostringstream csv;
  write_perspectives_csv(csv, space, ds);
  if (out_file.empty()) {
    std::cout << csv.str();
  } else {
    atomic_write(out_file, csv.str());
    RunManifest manifest;
    manifest.command = join_command(args);
    manifest.config = {{"dim", dim},
                       {"queries", queries},
                       {"targets", targets},
                       {"dataset", data_dir}};
    manifest.dataset_checksum = dataset_checksum(data_dir);
    manifest.outputs = {fs::path(out_file).filename().string()};
    write_manifest(fs::path(out_file).parent_path().empty() ? fs::path(".")
                                                            : fs::path(out_file).parent_path(),
                   manifest);
  }
  return 0;
}

int run_predict(const std::vector<std::string>& args, const std::string& data_dir,
                const std::string& target, const std::string& method_str, int m,
                std::uint64_t seed, const std::string& queries_spec, const std::string& alpha_str,
                const std::string& k_str, int dim, bool exclude_family,
                const std::string& out_dir) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  PredictRequest req;
  req.target = target;
  req.method = method_from_name(method_str);
  req.d = dim;
  req.alpha = parse_alpha_flag(alpha_str);
  if (k_str == "sqrt") req.k = {true, 1};
  else req.k = {false, static_cast<int>(parse_int(k_str, "--k"))};

  const int target_idx = ds.model_index(target);
  const FamilyId& family = ds.models()[static_cast<std::size_t>(target_idx)].family;
  for (const ModelInfo& info : ds.models()) {
    if (info.id == target) continue;
    if (exclude_family && info.family == family) continue;
    req.references.push_back(info.id);
  }

  if (!queries_spec.empty()) {
    req.queries = resolve_queries(ds, queries_spec);
  } else {
    if (m < 1 || m > ds.query_count())
      throw ConfigError("--m outside [1, M = " + std::to_string(ds.query_count()) + "]");
    Rng rng(seed);
    for (int qi : rng.sample_indices(ds.query_count(), m))
      req.queries.push_back(ds.queries()[static_cast<std::size_t>(qi)]);
  }

  const double value = predict_score(ds, req);
  std::cout << format_double(value) << "\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    OutputWriter out{out_dir, {}};
    out.manifest.command = join_command(args);
    out.manifest.config = {{"target", target},        {"method", method_str},
                           {"queries", req.queries},  {"d", dim},
                           {"alpha", alpha_str},      {"k", k_str},
                           {"exclude_family", exclude_family}, {"dataset", data_dir}};
    out.manifest.dataset_checksum = dataset_checksum(data_dir);
    out.manifest.seed = seed;
    json result;
    result["schema"] = "dkps.prediction.v1";
    result["model"] = target;
    result["method"] = method_str;
    result["m"] = static_cast<int>(req.queries.size());
    result["prediction"] = value;
    out.add("prediction.json", result.dump(2) + "\n");
    out.finish();
  }
  return 0;
}

void attach_progress(ExperimentConfig& cfg, int verbosity) {
  if (verbosity < 1) return;
  auto done = std::make_shared<std::atomic<int>>(0);
  auto mutex = std::make_shared<std::mutex>();
  cfg.progress = [done, mutex](int, int total) {
    const int d = ++*done;
    std::lock_guard<std::mutex> lock(*mutex);
    std::cerr << "trial " << d << "/" << total << " done\n";
  };
}

int run_evaluate(const std::vector<std::string>& args, const std::string& data_dir,
                 const std::string& config_path, const std::string& out_dir,
                 ExperimentConfig cfg, int collections, int collection_size, int verbosity) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  attach_progress(cfg, verbosity);
  const EvaluationReport report = lofo_evaluate(ds, cfg);

  SweepCell cell;
  cell.m = cfg.m;
  cell.n = cfg.n;
  cell.d = cfg.d;
  cell.alpha = cfg.alpha;
  cell.report = report;
  const std::vector<SweepCell> cells = {cell};

  std::ostringstream report_csv, summary_csv;
  write_report_csv(report_csv, report);
  write_summary_csv(summary_csv, cells);

  const bool has_deltas =
      std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::SampleScore) !=
          cfg.methods.end() &&
      std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::Ensemble) !=
          cfg.methods.end();

  if (out_dir.empty()) {
    std::cout << summary_csv.str();
    return 0;
  }
  fs::create_directories(out_dir);
  OutputWriter out{out_dir, {}};
  out.manifest.command = join_command(args);
  out.manifest.config = config_to_json(cfg);
  out.manifest.config["config_file"] = config_path;
  out.manifest.dataset_checksum = dataset_checksum(data_dir);
  out.manifest.seed = cfg.base_seed;
  out.add("report.csv", report_csv.str());
  out.add("report.json", report_json(report));
  out.add("summary.csv", summary_csv.str());
  out.add("summary.json", summary_json(cells));
  if (has_deltas) {
    const DeltaReport deltas = delta_report(report);
    std::ostringstream deltas_csv;
    write_deltas_csv(deltas_csv, deltas);
    out.add("deltas.csv", deltas_csv.str());
    out.add("deltas.json", deltas_json(deltas));
  }
  if (collections > 0) {
    const int size = collection_size > 0 ? collection_size : 20;
    const auto stats = reference_collection_stats(ds, size, collections, cfg);
    std::ostringstream stats_csv;
    write_collection_stats_csv(stats_csv, stats);
    out.add("collection_stats.csv", stats_csv.str());
  }
  out.finish();
  return 0;
}

int run_sweep(const std::vector<std::string>& args, const std::string& data_dir,
              const std::string& grid_path, const std::string& out_dir, ExperimentConfig base,
              const SweepGrid& grid, int verbosity) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  attach_progress(base, verbosity);
  const std::vector<SweepCell> cells = sweep(ds, base, grid);

  std::ostringstream sweep_csv, summary_csv;
  write_sweep_csv(sweep_csv, cells);
  write_summary_csv(summary_csv, cells);

  if (out_dir.empty()) {
    std::cout << summary_csv.str();
    return 0;
  }
  fs::create_directories(out_dir);
  OutputWriter out{out_dir, {}};
  out.manifest.command = join_command(args);
  out.manifest.config = config_to_json(base);
  out.manifest.config["config_file"] = grid_path;
  json grid_json;
  if (!grid.m_values.empty()) grid_json["m"] = grid.m_values;
  if (!grid.n_values.empty()) {
    json ns = json::array();
    for (int n : grid.n_values) ns.push_back(n == kAllReferences ? json("all") : json(n));
    grid_json["n"] = std::move(ns);
  }
  if (!grid.d_values.empty()) grid_json["d"] = grid.d_values;
  if (!grid.alpha_values.empty()) {
    json alphas = json::array();
    for (const AlphaPolicy& a : grid.alpha_values) alphas.push_back(alpha_json(a));
    grid_json["alpha"] = std::move(alphas);
  }
  out.manifest.config["grid"] = std::move(grid_json);
  out.manifest.dataset_checksum = dataset_checksum(data_dir);
  out.manifest.seed = base.base_seed;
  out.add("sweep.csv", sweep_csv.str());
  out.add("summary.csv", summary_csv.str());
  out.add("summary.json", summary_json(cells));
  out.finish();
  return 0;
}

int run_select(const std::vector<std::string>& args, const std::string& data_dir, int m, int B,
               int dim, std::uint64_t seed, bool loo, int workers, const std::string& out_dir) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  std::vector<ModelId> refs;
  for (const ModelInfo& info : ds.models()) refs.push_back(info.id);
  SelectionOptions options;
  options.leave_one_out = loo;
  options.workers = workers;
  const SelectionResult result = select_query_set(ds, refs, m, B, dim, seed, options);

  std::ostringstream selected, candidates;
  selected << "# schema: dkps.selected_queries.v1\n";
  selected << "query_id\n";
  for (const QueryId& q : result.best.queries) selected << csv_escape(q) << '\n';
  candidates << "# schema: dkps.selection_candidates.v1\n";
  candidates << "candidate,seed,r2,selected,queries\n";
  for (const QuerySetCandidate& cand : result.candidates) {
    std::string joined;
    for (std::size_t i = 0; i < cand.queries.size(); ++i) {
      if (i) joined.push_back(';');
      joined += cand.queries[i];
    }
    candidates << cand.index << ',' << cand.seed << ',' << format_double(cand.r2) << ','
               << (cand.index == result.best.index ? 1 : 0) << ',' << csv_escape(joined) << '\n';
  }

  if (out_dir.empty()) {
    std::cout << selected.str();
    std::cerr << "best candidate " << result.best.index << " with R^2 = "
              << format_double(result.best.r2) << "\n";
    return 0;
  }
  fs::create_directories(out_dir);
  OutputWriter out{out_dir, {}};
  out.manifest.command = join_command(args);
  out.manifest.config = {{"m", m}, {"B", B},          {"d", dim},
                         {"loo", loo}, {"dataset", data_dir}};
  out.manifest.dataset_checksum = dataset_checksum(data_dir);
  out.manifest.seed = seed;
  out.add("selected_queries.csv", selected.str());
  out.add("candidates.csv", candidates.str());
  out.finish();
  return 0;
}

int run_irt_fit(const std::vector<std::string>& args, const std::string& data_dir,
                double threshold, const std::string& out_dir) {
  const BenchmarkDataset ds = load_dataset(data_dir);
  if (!ds.has_correctness() && !ds.has_response_scores())
    throw InvalidArgument("irt-fit requires correctness or response_scores");
  Eigen::MatrixXi correct(ds.model_count(), ds.query_count());
  for (int i = 0; i < ds.model_count(); ++i)
    for (int j = 0; j < ds.query_count(); ++j)
      correct(i, j) = binary_outcome(ds, i, j, threshold);
  const RaschItemBank bank = fit_difficulties(correct, ds.queries());
  for (const std::string& w : bank.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "fit " << bank.difficulties.size() << " difficulties in " << bank.iterations
            << " sweep(s), final log-likelihood " << format_double(bank.log_likelihood) << "\n";

  if (out_dir.empty()) {
    std::ostringstream csv;
    csv << "# schema: dkps.item_bank.v1\nquery_id,difficulty\n";
    for (std::size_t j = 0; j < bank.queries.size(); ++j)
      csv << csv_escape(bank.queries[j]) << ','
          << format_double(bank.difficulties(static_cast<Eigen::Index>(j))) << '\n';
    std::cout << csv.str();
    return 0;
  }
  fs::create_directories(out_dir);
  save_item_bank(fs::path(out_dir) / "item_bank.csv", bank);
  RunManifest manifest;
  manifest.command = join_command(args);
  manifest.config = {{"irt_binarize_threshold", threshold}, {"dataset", data_dir}};
  manifest.dataset_checksum = dataset_checksum(data_dir);
  manifest.outputs = {"item_bank.csv"};
  write_manifest(out_dir, manifest);
  return 0;
}

int run_synth(const std::vector<std::string>& args, const std::string& spec_path,
              const std::string& out_dir, const std::string& format_str) {
  const json doc = load_json_config(spec_path);
  check_schema(doc, spec_path);
  const SyntheticPopulationSpec spec = parse_population(doc, spec_path);
  EmbeddingFormat format = EmbeddingFormat::RecordLines;
  if (format_str == "bin") format = EmbeddingFormat::Columnar;
  else if (format_str != "jsonl")
    throw ConfigError("--format must be jsonl or bin");

  const SyntheticPopulation pop = generate_population(spec);
  save_dataset(pop.dataset, out_dir, format);

  RunManifest manifest;
  manifest.command = join_command(args);
  manifest.config = population_to_json(spec);
  manifest.config["schema_version"] = 1;
  manifest.config["format"] = format_str;
  manifest.dataset_checksum = dataset_checksum(out_dir);
  manifest.seed = spec.seed;
  manifest.outputs = {"models.csv", "queries.csv",
                      format == EmbeddingFormat::RecordLines ? "embeddings.jsonl"
                                                             : "embeddings.bin",
                      "response_scores.csv", "correctness.csv", "metadata.json"};
  write_manifest(out_dir, manifest);
  std::cerr << "wrote synthetic dataset (" << spec.n_models << " models, " << spec.num_queries
            << " queries) to " << out_dir << "\n";
  return 0;
}

int run_theory(const std::vector<std::string>& args, const std::string& spec_path,
               const std::string& out_dir, int workers) {
  const json doc = load_json_config(spec_path);
  check_schema(doc, spec_path);
  if (!doc.contains("mode") || !doc["mode"].is_string())
    throw ConfigError(spec_path + ": missing mode (concentration or efficiency)");
  const std::string mode = doc["mode"].get<std::string>();
  const SyntheticPopulationSpec population =
      parse_population(doc.value("population", json::object()), spec_path);

  auto int_grid = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty())
      throw ConfigError(spec_path + ": missing grid '" + std::string(key) + "'");
    std::vector<int> out;
    for (const auto& v : doc[key]) out.push_back(v.get<int>());
    return out;
  };

  fs::create_directories(out_dir);
  OutputWriter out{out_dir, {}};
  out.manifest.command = join_command(args);
  out.manifest.config = doc;
  out.manifest.seed = population.seed;

  if (mode == "concentration") {
    const std::vector<int> n_grid = int_grid("n_grid");
    const std::vector<int> r_grid = int_grid("r_grid");
    const int seeds = doc.value("seeds", 20);
    const auto cells = concentration_experiment(population, n_grid, r_grid, seeds, workers);
    std::ostringstream csv;
    csv << "# schema: dkps.concentration.v1\n";
    csv << "n,r,seed,max_error\n";
    for (const ConcentrationCell& c : cells)
      csv << c.n_models << ',' << c.replicates << ',' << c.seed << ','
          << format_double(c.max_error) << '\n';
    out.add("concentration.csv", csv.str());

    // Median per (n, r) cell for trend reading.
    std::ostringstream summary;
    summary << "# schema: dkps.concentration_summary.v1\n";
    summary << "n,r,median_max_error\n";
    for (int n : n_grid)
      for (int r : r_grid) {
        std::vector<double> errors;
        for (const ConcentrationCell& c : cells)
          if (c.n_models == n && c.replicates == r) errors.push_back(c.max_error);
        std::sort(errors.begin(), errors.end());
        summary << n << ',' << r << ',' << format_double(median_sorted(errors)) << '\n';
      }
    out.add("concentration_summary.csv", summary.str());
  } else if (mode == "efficiency") {
    const std::vector<int> m_grid = int_grid("m_grid");
    const std::vector<int> n_grid = int_grid("n_grid");
    const int trials = doc.value("trials", 100);
    const EfficiencyResult result =
        efficiency_experiment(population, m_grid, n_grid, trials, workers);
    std::ostringstream csv;
    csv << "# schema: dkps.efficiency.v1\n";
    csv << "n,m,method,mae\n";
    for (const EfficiencyCell& c : result.cells)
      csv << c.n_references << ',' << c.m << ',' << c.method << ',' << format_double(c.mae)
          << '\n';
    out.add("efficiency.csv", csv.str());
    std::ostringstream cross;
    cross << "# schema: dkps.efficiency_crossover.v1\n";
    cross << "n,method,crossover_m\n";
    for (const EfficiencyCrossover& c : result.crossovers)
      cross << c.n_references << ',' << c.method << ',' << c.crossover_m << '\n';
    out.add("crossover.csv", cross.str());
  } else {
    throw ConfigError(spec_path + ": mode must be concentration or efficiency");
  }
  out.finish();
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{
      "Query-efficient benchmark score prediction from cached model responses.\n"
      "Embeds models into a low-dimensional perspective space via classical MDS\n"
      "on pairwise distances between mean-embedded responses, then regresses\n"
      "cached benchmark scores onto the perspectives."};
  app.require_subcommand(1);

  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "increase log verbosity (per-trial progress at -v)");

  // validate
  std::string v_dir;
  auto* sub_validate = app.add_subcommand("validate", "check a dataset directory");
  sub_validate->add_option("dir", v_dir, "dataset directory")->required();

  // dkps
  std::string g_dir, g_queries, g_out;
  int g_dim = 8;
  std::vector<std::string> g_targets;
  auto* sub_dkps =
      app.add_subcommand("dkps", "export perspective-space coordinates as CSV");
  sub_dkps->add_option("dir", g_dir, "dataset directory")->required();
  sub_dkps->add_option("--queries", g_queries,
                       "query subset: 'm,seed' to sample m queries, or a file of query ids "
                       "(default: all queries)");
  sub_dkps->add_option("--dim", g_dim, "perspective-space dimension d (default 8)");
  sub_dkps->add_option("--target", g_targets,
                       "model id to tag as a prediction target (repeatable)");
  sub_dkps->add_option("--out", g_out, "output CSV path (default: stdout)");

  // predict
  std::string p_dir, p_target, p_method, p_queries, p_alpha = "m/M", p_k = "1", p_out;
  int p_m = 0, p_dim = 8;
  std::uint64_t p_seed = 0;
  bool p_exclude_family = false;
  auto* sub_predict =
      app.add_subcommand("predict", "predict one model's benchmark score from a query subset");
  sub_predict->add_option("dir", p_dir, "dataset directory")->required();
  sub_predict->add_option("--target", p_target, "target model id")->required();
  sub_predict
      ->add_option("--method", p_method,
                   "population_mean | sample_score | dkps_ols | dkps_knn | ensemble | irt | "
                   "dkps_irt | ens_dkps_irt")
      ->required();
  sub_predict->add_option("--m", p_m, "query budget m (number of sampled queries)");
  sub_predict->add_option("--seed", p_seed, "seed for query sampling (default 0)");
  sub_predict->add_option("--queries", p_queries,
                          "explicit query subset: 'm,seed' or a file of query ids (overrides "
                          "--m/--seed)");
  sub_predict->add_option("--alpha", p_alpha,
                          "ensemble interpolation weight alpha in [0,1], or 'm/M' (default)");
  sub_predict->add_option("--k", p_k, "neighbor count k for dkps_knn, or 'sqrt' (default 1)");
  sub_predict->add_option("--dim", p_dim, "perspective-space dimension d (default 8)");
  sub_predict->add_flag("--exclude-family", p_exclude_family,
                        "drop the target's whole family from the references");
  sub_predict->add_option("--out", p_out, "output directory for prediction.json + manifest");

  // evaluate
  std::string e_dir, e_config, e_out;
  int e_trials = 0, e_m = 0, e_d = 0, e_workers = 0, e_collections = 0, e_collection_size = 0;
  std::string e_n;
  std::uint64_t e_seed = 0;
  auto* sub_evaluate = app.add_subcommand(
      "evaluate", "leave-one-family-out evaluation of the configured methods");
  sub_evaluate->add_option("dir", e_dir, "dataset directory")->required();
  sub_evaluate->add_option("--config", e_config, "experiment config JSON")->required();
  sub_evaluate->add_option("--out", e_out, "output directory (default: summary to stdout)");
  auto* e_trials_opt =
      sub_evaluate->add_option("--trials", e_trials, "override trial count (e.g. 1024 or 512)");
  auto* e_seed_opt = sub_evaluate->add_option("--seed", e_seed, "override base seed");
  auto* e_m_opt = sub_evaluate->add_option("--m", e_m, "override query budget m");
  auto* e_n_opt = sub_evaluate->add_option("--n", e_n, "override reference count n ('all' or int)");
  auto* e_d_opt = sub_evaluate->add_option("--d", e_d, "override perspective dimension d");
  sub_evaluate->add_option("--workers", e_workers,
                           "worker threads (default: logical cores)");
  sub_evaluate->add_option("--collections", e_collections,
                           "additionally evaluate this many random reference collections");
  sub_evaluate->add_option("--collection-size", e_collection_size,
                           "reference-pool size n per collection (default 20)");

  // sweep
  std::string s_dir, s_grid, s_out;
  int s_workers = 0;
  auto* sub_sweep = app.add_subcommand("sweep", "paired-seed sweep over m/n/d/alpha grids");
  sub_sweep->add_option("dir", s_dir, "dataset directory")->required();
  sub_sweep->add_option("--grid", s_grid, "grid config JSON (base config + grid axes)")
      ->required();
  sub_sweep->add_option("--out", s_out, "output directory (default: summary to stdout)");
  sub_sweep->add_option("--workers", s_workers, "worker threads (default: logical cores)");

  // select-queries
  std::string q_dir, q_out;
  int q_m = 0, q_B = 512, q_dim = 8, q_workers = 0;
  std::uint64_t q_seed = 0;
  bool q_loo = false;
  auto* sub_select = app.add_subcommand(
      "select-queries", "pick the size-m query set maximizing reference R^2");
  sub_select->add_option("dir", q_dir, "dataset directory")->required();
  sub_select->add_option("--m", q_m, "query budget m (size of each candidate set)")->required();
  sub_select->add_option("--B", q_B, "number of candidate query sets B (default 512)");
  sub_select->add_option("--dim", q_dim, "perspective-space dimension d (default 8)");
  sub_select->add_option("--seed", q_seed, "base sampling seed (candidate i uses seed+i)");
  sub_select->add_flag("--loo", q_loo, "score candidates by leave-one-out R^2");
  sub_select->add_option("--workers", q_workers, "worker threads (default: logical cores)");
  sub_select->add_option("--out", q_out, "output directory (default: stdout)");

  // irt-fit
  std::string i_dir, i_out;
  double i_threshold = 0.5;
  auto* sub_irt = app.add_subcommand("irt-fit", "fit item difficulties offline");
  sub_irt->add_option("dir", i_dir, "dataset directory")->required();
  sub_irt->add_option("--threshold", i_threshold,
                      "binarization threshold for response scores when no correctness layer "
                      "exists (default 0.5)");
  sub_irt->add_option("--out", i_out, "output directory for item_bank.csv + manifest");

  // synth
  std::string y_spec, y_out, y_format = "jsonl";
  auto* sub_synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  sub_synth->add_option("--spec", y_spec, "population spec JSON")->required();
  sub_synth->add_option("--out", y_out, "output dataset directory")->required();
  sub_synth->add_option("--format", y_format, "embedding payload: jsonl (default) or bin");

  // theory
  std::string t_spec, t_out;
  int t_workers = 0;
  auto* sub_theory = app.add_subcommand(
      "theory", "concentration / query-efficiency experiments on synthetic populations");
  sub_theory->add_option("--spec", t_spec, "experiment spec JSON (mode + population + grids)")
      ->required();
  sub_theory->add_option("--out", t_out, "output directory")->required();
  sub_theory->add_option("--workers", t_workers, "worker threads (default: logical cores)");

  std::vector<std::string> argv_storage = args;
  std::vector<const char*> argv;
  argv.push_back("dkps");
  for (const std::string& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(sub_validate)) return run_validate(v_dir);
    if (app.got_subcommand(sub_dkps))
      return run_dkps(args, g_dir, g_queries, g_dim, g_targets, g_out);
    if (app.got_subcommand(sub_predict))
      return run_predict(args, p_dir, p_target, p_method, p_m, p_seed, p_queries, p_alpha, p_k,
                         p_dim, p_exclude_family, p_out);
    if (app.got_subcommand(sub_evaluate)) {
      ExperimentConfig cfg = parse_experiment_config(load_json_config(e_config), e_config);
      if (e_trials_opt->count() > 0) cfg.trials = e_trials;
      if (e_seed_opt->count() > 0) cfg.base_seed = e_seed;
      if (e_m_opt->count() > 0) cfg.m = e_m;
      if (e_n_opt->count() > 0) cfg.n = parse_n(e_n == "all" ? json("all") : json(parse_int(e_n, "--n")), "--n");
      if (e_d_opt->count() > 0) cfg.d = e_d;
      cfg.workers = e_workers > 0 ? e_workers : default_workers();
      return run_evaluate(args, e_dir, e_config, e_out, cfg, e_collections, e_collection_size,
                          verbosity);
    }
    if (app.got_subcommand(sub_sweep)) {
      const json doc = load_json_config(s_grid);
      ExperimentConfig base = parse_experiment_config(doc, s_grid);
      base.workers = s_workers > 0 ? s_workers : default_workers();
      SweepGrid grid;
      if (doc.contains("grid")) {
        const json& g = doc["grid"];
        if (g.contains("m"))
          for (const auto& v : g["m"]) grid.m_values.push_back(v.get<int>());
        if (g.contains("n"))
          for (const auto& v : g["n"]) grid.n_values.push_back(parse_n(v, s_grid));
        if (g.contains("d"))
          for (const auto& v : g["d"]) grid.d_values.push_back(v.get<int>());
        if (g.contains("alpha"))
          for (const auto& v : g["alpha"]) grid.alpha_values.push_back(parse_alpha(v, s_grid));
      }
      return run_sweep(args, s_dir, s_grid, s_out, base, grid, verbosity);
    }
    if (app.got_subcommand(sub_select))
      return run_select(args, q_dir, q_m, q_B, q_dim, q_seed, q_loo,
                        q_workers > 0 ? q_workers : default_workers(), q_out);
    if (app.got_subcommand(sub_irt)) return run_irt_fit(args, i_dir, i_threshold, i_out);
    if (app.got_subcommand(sub_synth)) return run_synth(args, y_spec, y_out, y_format);
    if (app.got_subcommand(sub_theory))
      return run_theory(args, t_spec, t_out, t_workers > 0 ? t_workers : default_workers());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dkps
