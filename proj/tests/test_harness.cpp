// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bgl/errors.hpp"
#include "bgl/estimators.hpp"
#include "bgl/harness/commands.hpp"
#include "bgl/harness/config.hpp"
#include "bgl/harness/run_record.hpp"
#include "bgl/harness/verification.hpp"

using namespace bgl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// Small but complete experiment: 16x16 images, toy widths, two outer steps.
const char* kTinyConfig = R"(# toy experiment
[pipeline]
height = 16
width = 16
train = 4
val = 2
test = 2
gb_enc1 = 2
gb_enc2 = 2
gb_enc3 = 2
gb_bottleneck = 2
enhancer_hidden = 4

[solver]
warm_steps = 2
outer_steps = 2
batch_size = 2
k = 2

[compare]
seeds = 1

[transfer]
steps = 2
batch_size = 2
seeds = 1

[verify]
seeds = 1
deltas = 1e-1, 1e-2
ks = 1, 5
)";

}  // namespace

TEST_CASE("key-value parser: sections, comments, types") {
  KvConfig kv = KvConfig::parse_string(R"(
; leading comment
top = 3
[solver]
k = 5          # trailing comment
momentum = 0.25
name = ibgl
flag = yes
seeds = 1, 2, 3
weights = 0.5,0.25
)");
  CHECK(kv.has("top"));
  CHECK(kv.get_int("top", 0) == 3);
  CHECK(kv.get_int("solver.k", 0) == 5);
  CHECK(kv.get_double("solver.momentum", 0.0) == doctest::Approx(0.25));
  CHECK(kv.get_string("solver.name", "") == "ibgl");
  CHECK(kv.get_bool("solver.flag", false));
  CHECK(kv.get_uint_list("solver.seeds", {}) == std::vector<uint64_t>{1, 2, 3});
  CHECK(kv.get_double_list("solver.weights", {}) == std::vector<double>{0.5, 0.25});
  CHECK(kv.get_int("solver.absent", 42) == 42);
  CHECK_NOTHROW(kv.reject_unknown());
}

TEST_CASE("key-value parser rejects malformed input") {
  CHECK_THROWS_AS(KvConfig::parse_string("[unclosed\nk = 1\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse_string("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse_string("just a bare line\n"), ConfigError);
  KvConfig kv = KvConfig::parse_string("k = notanumber\n");
  CHECK_THROWS_AS(kv.get_int("k", 0), ConfigError);
  KvConfig kv2 = KvConfig::parse_string("b = maybe\n");
  CHECK_THROWS_AS(kv2.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse_file("definitely_missing.cfg"), ConfigError);
}

TEST_CASE("unknown keys are reported by name") {
  KvConfig kv = KvConfig::parse_string("[solver]\nk = 1\ntypo_key = 2\n");
  (void)kv.get_int("solver.k", 0);
  try {
    kv.reject_unknown();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("solver.typo_key") != std::string::npos);
  }
}

TEST_CASE("config hash ignores comments and ordering but not values") {
  KvConfig a = KvConfig::parse_string("[s]\nx = 1\ny = 2\n");
  KvConfig b = KvConfig::parse_string("# different text\n[s]\ny = 2\n\nx = 1\n");
  KvConfig c = KvConfig::parse_string("[s]\nx = 1\ny = 3\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(hash_hex(a.hash()).size() == 16);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
}

TEST_CASE("experiment config applies overrides and validates") {
  const std::string path = "t_harness_exp.cfg";
  write_file(path, kTinyConfig);
  ExperimentConfig cfg = load_experiment_config(path);
  CHECK(cfg.pipeline.height == 16);
  CHECK(cfg.pipeline.train == 4);
  CHECK(cfg.pipeline.gb.enc1 == 2);
  CHECK(cfg.solver.outer_steps == 2);
  CHECK(cfg.solver.k == 2);
  CHECK(cfg.compare.seeds == std::vector<uint64_t>{1});
  CHECK(cfg.transfer.steps == 2);
  CHECK(cfg.verify.deltas.size() == 2);
  CHECK(cfg.hash_hex.size() == 16);
  fs::remove(path);

  ExperimentConfig defaults = load_experiment_config("");
  CHECK(defaults.pipeline.height == 32);
  CHECK(defaults.compare.seeds.size() == 3);

  write_file(path, "[solver]\nnot_a_real_key = 1\n");
  CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
  fs::remove(path);
  write_file(path, "[solver]\ndecay = sawtooth\n");
  CHECK_THROWS_AS(load_experiment_config(path), ConfigError);
  fs::remove(path);
}

TEST_CASE("doubles render in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(20.0) == "20");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("step rows round trip through CSV and summaries are pure") {
  std::vector<StepRow> rows;
  for (int64_t i = 0; i < 5; ++i) {
    StepRow r;
    r.step = i;
    r.lr_upper = 3e-3 / (1.0 + static_cast<double>(i));
    r.lr_lower = 1.0 / 3.0;
    r.upper_value = 1.0 / (static_cast<double>(i) + 2.0);
    r.lower_value = 0.25 * static_cast<double>(i);
    r.hyper_norm = 1e-17 * static_cast<double>(i + 1);
    r.coupling_norm = 0.0;
    r.lf_grad_evals = 2 * (i + 1);
    r.lg_grad_evals = 3 * (i + 1);
    r.lower_updates = i + 1;
    rows.push_back(r);
  }
  std::vector<StepRow> back = rows_from_csv(rows_to_csv(rows));
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].step == rows[i].step);
    CHECK(back[i].lr_upper == rows[i].lr_upper);
    CHECK(back[i].upper_value == rows[i].upper_value);
    CHECK(back[i].hyper_norm == rows[i].hyper_norm);
    CHECK(back[i].lg_grad_evals == rows[i].lg_grad_evals);
  }
  CHECK(summarize_rows(back) == summarize_rows(rows));
  RowStats st = summarize_rows(rows);
  CHECK(st.steps == 5);
  CHECK(st.final_upper_value == rows.back().upper_value);
  CHECK(st.best_upper_value == rows.back().upper_value);
  CHECK(st.lg_grad_evals == 15);

  CHECK_THROWS_AS(rows_from_csv("bad header\n1,2,3\n"), IoError);
}

TEST_CASE("run records reject non-monotone rows and write both files") {
  const std::string dir = "t_harness_rec";
  fs::remove_all(dir);
  RunRecord rec;
  rec.config_hash = "0123456789abcdef";
  rec.build_id = build_id();
  rec.strategy = "ibgl";
  rec.seed = 1;
  StepRow a;
  a.step = 0;
  StepRow b;
  b.step = 1;
  rec.rows = {a, b};
  rec.stats = summarize_rows(rec.rows);
  write_run_record(dir, "ibgl_seed1", rec);
  CHECK(fs::exists(dir + "/ibgl_seed1_rows.csv"));
  CHECK(fs::exists(dir + "/ibgl_seed1_summary.json"));
  nlohmann::json j = nlohmann::json::parse(slurp(dir + "/ibgl_seed1_summary.json"));
  CHECK(j.at("strategy") == "ibgl");
  CHECK(j.at("config_hash") == "0123456789abcdef");

  rec.rows = {b, a};
  CHECK_THROWS_AS(write_run_record(dir, "bad", rec), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("verification suite passes and catches an injected sign flip") {
  VerifyOptions opts;
  opts.seeds = 2;
  opts.ks = {1, 10, 50, 200};
  VerificationReport rep = run_verification(opts);
  for (const CheckResult& c : rep.checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }
  CHECK(rep.all_pass());
  CHECK(rep.delta_sweep.size() == opts.deltas.size());
  CHECK(rep.k_sweep.size() == opts.ks.size());

  // Negative control: an estimator with the coupling sign flipped must be
  // caught by the closed-form agreement check.
  VerificationHooks hooks;
  hooks.tbgl = [](const BilevelProblem& p, const ParameterVector& om, const ParameterVector& th,
                  const EstimatorConfig& cfg, EvalCounter& counter) {
    HypergradientReport rep2 = tbgl_hypergradient(p, om, th, cfg, counter);
    for (size_t i = 0; i < rep2.coupling_term.size(); ++i) {
      rep2.coupling_term[i] = -rep2.coupling_term[i];
      rep2.total[i] = rep2.direct_term[i] + rep2.coupling_term[i];
    }
    return rep2;
  };
  VerificationReport broken = run_verification(opts, hooks);
  CHECK_FALSE(broken.all_pass());
  std::vector<std::string> bad = broken.failing();
  bool found = false;
  for (const std::string& name : bad) found = found || name == "tbgl_exact_quadratic";
  CHECK(found);
}

TEST_CASE("synth command writes a reproducible dataset") {
  const std::string cfgp = "t_harness_synth.cfg";
  write_file(cfgp, "[pipeline]\nheight = 16\nwidth = 16\ntrain = 6\nval = 2\ntest = 2\n");
  const std::string out1 = "t_harness_synth_a";
  const std::string out2 = "t_harness_synth_b";
  fs::remove_all(out1);
  fs::remove_all(out2);

  CHECK(cmd_synth({cfgp, out1, 3}) == 0);
  CHECK(cmd_synth({cfgp, out2, 3}) == 0);

  nlohmann::json manifest = nlohmann::json::parse(slurp(out1 + "/manifest.json"));
  const auto& items = manifest.at("items");
  CHECK(items.size() == 10);
  for (const auto& item : items) {
    double gain = item.at("gain").get<double>();
    CHECK(gain >= 0.05);
    CHECK(gain <= 0.30);
  }
  CHECK(slurp(out1 + "/manifest.json") == slurp(out2 + "/manifest.json"));
  CHECK(slurp(out1 + "/raw/0000.bglt") == slurp(out2 + "/raw/0000.bglt"));
  CHECK(fs::exists(out1 + "/preview_clean.png"));
  CHECK(fs::exists(out1 + "/preview_raw.png"));

  // Unknown config keys are a config error, exit code 2.
  write_file(cfgp, "[pipeline]\nheight = 16\nwidht = 16\n");
  CHECK(cmd_synth({cfgp, out1, 3}) == 2);
  fs::remove(cfgp);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("verify command reports per-check lines and sweep tables") {
  const std::string cfgp = "t_harness_verify.cfg";
  write_file(cfgp, "[verify]\nseeds = 1\ndeltas = 1e-1, 1e-2, 1e-3\nks = 1, 10, 200\n");
  const std::string out = "t_harness_verify_out";
  fs::remove_all(out);
  CHECK(cmd_verify({cfgp, out, 0}) == 0);
  nlohmann::json rep = nlohmann::json::parse(slurp(out + "/verify_report.json"));
  CHECK(rep.at("all_pass").get<bool>());
  std::string deltas = slurp(out + "/delta_sweep.csv");
  CHECK(line_count(deltas) == 1 + 3);  // header plus one row per delta
  std::string ks = slurp(out + "/k_sweep.csv");
  CHECK(line_count(ks) == 1 + 3);
  fs::remove(cfgp);
  fs::remove_all(out);
}

TEST_CASE("compare command emits three strategies and is rerun-stable") {
  const std::string cfgp = "t_harness_cmp.cfg";
  write_file(cfgp, kTinyConfig);
  const std::string out1 = "t_harness_cmp_a";
  const std::string out2 = "t_harness_cmp_b";
  fs::remove_all(out1);
  fs::remove_all(out2);

  CHECK(cmd_compare({cfgp, out1, 5}) == 0);
  CHECK(cmd_compare({cfgp, out2, 5}) == 0);

  std::string summary = slurp(out1 + "/summary.csv");
  CHECK(line_count(summary) == 4);  // header + naive + tbgl + ibgl
  CHECK(summary.find("naive") != std::string::npos);
  CHECK(summary.find("tbgl") != std::string::npos);
  CHECK(summary.find("ibgl") != std::string::npos);

  for (const char* stem : {"naive_seed1", "tbgl_seed1", "ibgl_seed1"}) {
    CHECK(fs::exists(out1 + "/" + stem + "_rows.csv"));
    CHECK(fs::exists(out1 + "/" + stem + "_summary.json"));
    CHECK(fs::exists(out1 + "/ckpt_" + stem + "/meta.json"));
    // Byte-identical reruns, wall-clock-free outputs only.
    CHECK(slurp(out1 + "/" + stem + "_rows.csv") == slurp(out2 + "/" + stem + "_rows.csv"));
  }
  CHECK(slurp(out1 + "/summary.csv") == slurp(out2 + "/summary.csv"));

  // Grad-eval ordering: with k > 1 the stationary strategy costs more
  // lower-gradient evaluations than the one-step strategy.
  std::vector<StepRow> tb = rows_from_csv(slurp(out1 + "/tbgl_seed1_rows.csv"));
  std::vector<StepRow> ib = rows_from_csv(slurp(out1 + "/ibgl_seed1_rows.csv"));
  REQUIRE(tb.size() == 2);
  REQUIRE(ib.size() == 2);
  CHECK(ib.back().lg_grad_evals > tb.back().lg_grad_evals);

  fs::remove(cfgp);
  fs::remove_all(out2);
  // out1 is reused by the transfer test below.
}

TEST_CASE("transfer command compares checkpoint sources with a frozen block") {
  const std::string src = "t_harness_cmp_a";
  REQUIRE(fs::exists(src + "/ckpt_ibgl_seed1/meta.json"));

  const std::string cfgp = "t_harness_tr.cfg";
  {
    // The checkpoint directory key has to land inside the [transfer] section.
    std::string patched(kTinyConfig);
    const std::string anchor = "[transfer]\n";
    size_t pos = patched.find(anchor);
    REQUIRE(pos != std::string::npos);
    patched.insert(pos + anchor.size(), "checkpoint_dir = " + src + "\n");
    write_file(cfgp, patched);
  }
  const std::string out = "t_harness_tr_out";
  fs::remove_all(out);
  CHECK(cmd_transfer({cfgp, out, 5}) == 0);

  std::string summary = slurp(out + "/transfer_summary.csv");
  CHECK(line_count(summary) == 4);  // header + naive + ibgl + random
  CHECK(summary.find("random") != std::string::npos);
  std::string runs = slurp(out + "/transfer_runs.csv");
  CHECK(runs.find(",0\n") == std::string::npos);  // every omega_unchanged flag is 1

  fs::remove(cfgp);
  fs::remove_all(out);
  fs::remove_all(src);
}

TEST_CASE("commands surface config and IO failures as exit code 2") {
  const std::string cfgp = "t_harness_err.cfg";

  // compare requires a positive outer budget
  write_file(cfgp, "[solver]\nouter_steps = 0\n");
  CHECK(cmd_compare({cfgp, "t_harness_err_out", 0}) == 2);

  // compare with a dataset directory that does not exist
  write_file(cfgp, "[solver]\nouter_steps = 1\n[compare]\ndataset_dir = no_such_dataset\n");
  CHECK(cmd_compare({cfgp, "t_harness_err_out", 0}) == 2);

  // transfer without checkpoints
  write_file(cfgp, "[transfer]\ncheckpoint_dir = no_such_ckpts\n");
  CHECK(cmd_transfer({cfgp, "t_harness_err_out", 0}) == 2);

  // transfer with no checkpoint_dir configured at all
  write_file(cfgp, "[transfer]\nsteps = 1\n");
  CHECK(cmd_transfer({cfgp, "t_harness_err_out", 0}) == 2);

  fs::remove(cfgp);
  fs::remove_all("t_harness_err_out");
}
