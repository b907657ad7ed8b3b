// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/harness/run_record.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "bgl/errors.hpp"

namespace bgl {

namespace {

constexpr const char* kRowHeader =
    "step,lr_upper,lr_lower,upper_value,lower_value,hyper_norm,coupling_norm,"
    "lf_grad_evals,lg_grad_evals,lower_updates";

void check_monotone(const std::vector<StepRow>& rows) {
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].step <= rows[i - 1].step)
      throw ConfigError("run record rows must be strictly increasing in step");
  }
}

double parse_field(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw IoError("bad CSV field: '" + s + "'");
  }
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw NumericError("to_chars failed");
  return std::string(buf, p);
}

std::string build_id() { return "bgl-0.1.0"; }

RowStats summarize_rows(const std::vector<StepRow>& rows) {
  RowStats st;
  st.steps = static_cast<int64_t>(rows.size());
  if (rows.empty()) return st;
  st.final_upper_value = rows.back().upper_value;
  st.final_lower_value = rows.back().lower_value;
  double sum = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const StepRow& r : rows) {
    sum += r.upper_value;
    if (r.upper_value < best) best = r.upper_value;
  }
  st.mean_upper_value = sum / static_cast<double>(rows.size());
  st.best_upper_value = best;
  st.lf_grad_evals = rows.back().lf_grad_evals;
  st.lg_grad_evals = rows.back().lg_grad_evals;
  st.lower_updates = rows.back().lower_updates;
  return st;
}

bool operator==(const RowStats& a, const RowStats& b) {
  return a.steps == b.steps && a.final_upper_value == b.final_upper_value &&
         a.final_lower_value == b.final_lower_value &&
         a.mean_upper_value == b.mean_upper_value &&
         a.best_upper_value == b.best_upper_value && a.lf_grad_evals == b.lf_grad_evals &&
         a.lg_grad_evals == b.lg_grad_evals && a.lower_updates == b.lower_updates;
}

std::string rows_to_csv(const std::vector<StepRow>& rows) {
  std::string out = kRowHeader;
  out += "\n";
  for (const StepRow& r : rows) {
    out += std::to_string(r.step);
    out += ",";
    out += format_double(r.lr_upper);
    out += ",";
    out += format_double(r.lr_lower);
    out += ",";
    out += format_double(r.upper_value);
    out += ",";
    out += format_double(r.lower_value);
    out += ",";
    out += format_double(r.hyper_norm);
    out += ",";
    out += format_double(r.coupling_norm);
    out += ",";
    out += std::to_string(r.lf_grad_evals);
    out += ",";
    out += std::to_string(r.lg_grad_evals);
    out += ",";
    out += std::to_string(r.lower_updates);
    out += "\n";
  }
  return out;
}

std::vector<StepRow> rows_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw IoError("empty rows CSV");
  if (line != kRowHeader) throw IoError("unexpected rows CSV header: " + line);
  std::vector<StepRow> rows;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 10) throw IoError("bad row width in CSV: " + line);
    StepRow r;
    r.step = static_cast<int64_t>(parse_field(fields[0]));
    r.lr_upper = parse_field(fields[1]);
    r.lr_lower = parse_field(fields[2]);
    r.upper_value = parse_field(fields[3]);
    r.lower_value = parse_field(fields[4]);
    r.hyper_norm = parse_field(fields[5]);
    r.coupling_norm = parse_field(fields[6]);
    r.lf_grad_evals = static_cast<int64_t>(parse_field(fields[7]));
    r.lg_grad_evals = static_cast<int64_t>(parse_field(fields[8]));
    r.lower_updates = static_cast<int64_t>(parse_field(fields[9]));
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json record_summary_json(const RunRecord& rec) {
  nlohmann::json j;
  j["config_hash"] = rec.config_hash;
  j["build_id"] = rec.build_id;
  j["strategy"] = rec.strategy;
  j["seed"] = rec.seed;
  j["steps"] = rec.stats.steps;
  j["final_upper_value"] = rec.stats.final_upper_value;
  j["final_lower_value"] = rec.stats.final_lower_value;
  j["mean_upper_value"] = rec.stats.mean_upper_value;
  j["best_upper_value"] = rec.stats.best_upper_value;
  j["lf_grad_evals"] = rec.stats.lf_grad_evals;
  j["lg_grad_evals"] = rec.stats.lg_grad_evals;
  j["lower_updates"] = rec.stats.lower_updates;
  j["heldout_psnr"] = rec.heldout.psnr;
  j["heldout_ssim"] = rec.heldout.ssim;
  j["heldout_l1"] = rec.heldout.l1;
  j["wall_seconds"] = rec.wall_seconds;
  return j;
}

void write_run_record(const std::string& dir, const std::string& stem, const RunRecord& rec) {
  check_monotone(rec.rows);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string rows_path = dir + "/" + stem + "_rows.csv";
  const std::string summary_path = dir + "/" + stem + "_summary.json";
  {
    std::ofstream out(rows_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + rows_path);
    out << rows_to_csv(rec.rows);
    if (!out) throw IoError("write failed: " + rows_path);
  }
  {
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + summary_path);
    out << record_summary_json(rec).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + summary_path);
  }
}

}  // namespace bgl
