// SPDX-License-Identifier: Apache-2.0

#include "dkps/report_io.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "dkps/csv.hpp"
#include "dkps/numeric.hpp"

namespace dkps {

using nlohmann::json;

std::string alpha_label(const AlphaPolicy& policy) {
  return policy.m_over_M ? "m/M" : format_double(policy.value);
}

std::string n_label(int n) { return n == kAllReferences ? "all" : std::to_string(n); }

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "# schema: dkps.report.v1\n";
  out << "trial,method,k,alpha,family,model,n,m,d,prediction,abs_error\n";
  for (const TrialRecord& r : report.records) {
    out << r.trial << ',' << method_name(r.method) << ',';
    if (r.k > 0) out << r.k;
    out << ',';
    if (r.alpha >= 0.0) out << format_double(r.alpha);
    out << ',' << csv_escape(r.family) << ',' << csv_escape(r.model) << ',' << r.n << ','
        << r.m << ',' << r.d << ',' << format_double(r.prediction) << ','
        << format_double(r.abs_error) << '\n';
  }
}

std::string report_json(const EvaluationReport& report) {
  json records = json::array();
  for (const TrialRecord& r : report.records) {
    json rec;
    rec["trial"] = r.trial;
    rec["method"] = method_name(r.method);
    if (r.k > 0) rec["k"] = r.k;
    if (r.alpha >= 0.0) rec["alpha"] = r.alpha;
    rec["family"] = r.family;
    rec["model"] = r.model;
    rec["n"] = r.n;
    rec["m"] = r.m;
    rec["d"] = r.d;
    rec["prediction"] = r.prediction;
    rec["abs_error"] = r.abs_error;
    records.push_back(std::move(rec));
  }
  json doc;
  doc["schema"] = "dkps.report.v1";
  doc["records"] = std::move(records);
  return doc.dump(2) + "\n";
}

namespace {

struct SummaryRow {
  std::string method;
  std::string k;
  std::string alpha;
  std::string n;
  int d = 0;
  std::map<int, double> mae_by_m;
};

std::vector<SummaryRow> summarize(std::span<const SweepCell> cells, std::vector<int>& m_columns) {
  std::set<int> ms;
  std::vector<SummaryRow> rows;
  for (const SweepCell& cell : cells) {
    ms.insert(cell.m);
    for (MethodKind kind : cell.report.config.methods) {
      SummaryRow key;
      key.method = method_name(kind);
      key.k = kind == MethodKind::DkpsKnn
                  ? (cell.report.config.k.sqrt_n ? std::string("sqrt")
                                                 : std::to_string(cell.report.config.k.k))
                  : std::string();
      key.alpha = (kind == MethodKind::Ensemble || kind == MethodKind::EnsDkpsIrt)
                      ? alpha_label(cell.alpha)
                      : std::string();
      key.n = n_label(cell.n);
      key.d = cell.d;
      auto match = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) {
        return r.method == key.method && r.k == key.k && r.alpha == key.alpha &&
               r.n == key.n && r.d == key.d;
      });
      if (match == rows.end()) {
        rows.push_back(key);
        match = rows.end() - 1;
      }
      match->mae_by_m[cell.m] = report_mae(cell.report, kind);
    }
  }
  m_columns.assign(ms.begin(), ms.end());
  return rows;
}

}  // namespace

void write_summary_csv(std::ostream& out, std::span<const SweepCell> cells) {
  std::vector<int> m_columns;
  const auto rows = summarize(cells, m_columns);
  out << "# schema: dkps.summary.v1\n";
  out << "method,k,alpha,n,d";
  for (int m : m_columns) out << ",m=" << m;
  out << '\n';
  for (const SummaryRow& row : rows) {
    out << row.method << ',' << row.k << ',' << csv_escape(row.alpha) << ',' << row.n << ','
        << row.d;
    for (int m : m_columns) {
      out << ',';
      auto it = row.mae_by_m.find(m);
      if (it != row.mae_by_m.end()) out << format_double(it->second);
    }
    out << '\n';
  }
}

std::string summary_json(std::span<const SweepCell> cells) {
  std::vector<int> m_columns;
  const auto rows = summarize(cells, m_columns);
  json doc;
  doc["schema"] = "dkps.summary.v1";
  doc["m"] = m_columns;
  json out_rows = json::array();
  for (const SummaryRow& row : rows) {
    json r;
    r["method"] = row.method;
    if (!row.k.empty()) r["k"] = row.k;
    if (!row.alpha.empty()) r["alpha"] = row.alpha;
    r["n"] = row.n;
    r["d"] = row.d;
    json mae = json::object();
    for (const auto& [m, value] : row.mae_by_m) mae[std::to_string(m)] = value;
    r["mae"] = std::move(mae);
    out_rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(out_rows);
  return doc.dump(2) + "\n";
}

void write_deltas_csv(std::ostream& out, const DeltaReport& deltas) {
  out << "# schema: dkps.deltas.v1\n";
  out << "scope,key,delta\n";
  for (const auto& [model, delta] : deltas.per_model)
    out << "model," << csv_escape(model) << ',' << format_double(delta) << '\n';
  for (const auto& [trial, delta] : deltas.per_query_set)
    out << "query_set," << trial << ',' << format_double(delta) << '\n';
}

std::string deltas_json(const DeltaReport& deltas) {
  json doc;
  doc["schema"] = "dkps.deltas.v1";
  json per_model = json::object();
  for (const auto& [model, delta] : deltas.per_model) per_model[model] = delta;
  json per_qs = json::object();
  for (const auto& [trial, delta] : deltas.per_query_set) per_qs[std::to_string(trial)] = delta;
  doc["per_model"] = std::move(per_model);
  doc["per_query_set"] = std::move(per_qs);
  return doc.dump(2) + "\n";
}

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells) {
  out << "# schema: dkps.sweep.v1\n";
  out << "n,d,alpha,m,method,k,mae\n";
  for (const SweepCell& cell : cells) {
    for (MethodKind kind : cell.report.config.methods) {
      out << n_label(cell.n) << ',' << cell.d << ',' << csv_escape(alpha_label(cell.alpha))
          << ',' << cell.m << ',' << method_name(kind) << ',';
      if (kind == MethodKind::DkpsKnn)
        out << (cell.report.config.k.sqrt_n ? std::string("sqrt")
                                            : std::to_string(cell.report.config.k.k));
      out << ',' << format_double(report_mae(cell.report, kind)) << '\n';
    }
  }
}

void write_collection_stats_csv(std::ostream& out, std::span<const CollectionStats> stats) {
  out << "# schema: dkps.collection_stats.v1\n";
  out << "method,collections,min,q25,median,q75,max\n";
  for (const CollectionStats& s : stats) {
    out << method_name(s.method) << ',' << s.collection_mae.size() << ','
        << format_double(s.min) << ',' << format_double(s.q25) << ','
        << format_double(s.median) << ',' << format_double(s.q75) << ','
        << format_double(s.max) << '\n';
  }
}

}  // namespace dkps
