// SPDX-License-Identifier: Apache-2.0
//
// Serialization of evaluation reports: long-format report.csv, the
// methods-by-m summary.csv, deltas.csv, and JSON mirrors. Output bytes are
// deterministic functions of the report contents.

#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "dkps/harness.hpp"

namespace dkps {

std::string alpha_label(const AlphaPolicy& policy);
std::string n_label(int n);

void write_report_csv(std::ostream& out, const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

// Summary over one or more sweep cells: rows keyed by
// (method, k, alpha, n, d), one MAE column per m.
void write_summary_csv(std::ostream& out, std::span<const SweepCell> cells);
std::string summary_json(std::span<const SweepCell> cells);

void write_deltas_csv(std::ostream& out, const DeltaReport& deltas);
std::string deltas_json(const DeltaReport& deltas);

void write_sweep_csv(std::ostream& out, std::span<const SweepCell> cells);

void write_collection_stats_csv(std::ostream& out, std::span<const CollectionStats> stats);

}  // namespace dkps
