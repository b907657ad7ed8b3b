// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
//
// Persistent record of a single training run: per-step metric rows plus a
// summary derived from them. Rows go to CSV and the summary to JSON; the
// wall-clock measurement lives only in the JSON so every other byte of
// output is reproducible bit for bit.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgl/bilevel.hpp"
#include "bgl/pipeline/problems.hpp"

namespace bgl {

struct StepRow {
  int64_t step = 0;
  double lr_upper = 0.0;
  double lr_lower = 0.0;
  double upper_value = 0.0;
  double lower_value = 0.0;
  double hyper_norm = 0.0;
  double coupling_norm = 0.0;
  // Cumulative counts after this step.
  int64_t lf_grad_evals = 0;
  int64_t lg_grad_evals = 0;
  int64_t lower_updates = 0;
};

// The part of the summary that is a pure function of the rows.
struct RowStats {
  int64_t steps = 0;
  double final_upper_value = 0.0;
  double final_lower_value = 0.0;
  double mean_upper_value = 0.0;
  double best_upper_value = 0.0;
  int64_t lf_grad_evals = 0;
  int64_t lg_grad_evals = 0;
  int64_t lower_updates = 0;
};

RowStats summarize_rows(const std::vector<StepRow>& rows);
bool operator==(const RowStats& a, const RowStats& b);

struct RunRecord {
  std::string config_hash;
  std::string build_id;
  std::string strategy;
  uint64_t seed = 0;
  std::vector<StepRow> rows;
  RowStats stats;
  EvalSummary heldout;
  double wall_seconds = 0.0;
};

// Shortest round-trip decimal form; used for every double in CSV output.
std::string format_double(double v);

std::string build_id();

std::string rows_to_csv(const std::vector<StepRow>& rows);
std::vector<StepRow> rows_from_csv(const std::string& text);

nlohmann::json record_summary_json(const RunRecord& rec);

// Writes <stem>_rows.csv and <stem>_summary.json under dir. Throws IoError
// on write failure and ConfigError if the rows are not monotone in step.
void write_run_record(const std::string& dir, const std::string& stem, const RunRecord& rec);

}  // namespace bgl
