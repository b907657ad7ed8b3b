// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/harness/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "bgl/checkpoint.hpp"
#include "bgl/errors.hpp"
#include "bgl/harness/config.hpp"
#include "bgl/harness/run_record.hpp"
#include "bgl/harness/verification.hpp"
#include "bgl/pipeline/png.hpp"
#include "bgl/pipeline/problems.hpp"
#include "bgl/pipeline/raw.hpp"
#include "bgl/solvers.hpp"

namespace bgl {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void require_out_dir(const CommandArgs& args) {
  if (args.out_dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + args.out_dir);
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

struct Aggregate {
  std::vector<double> xs;
  void push(double x) { xs.push_back(x); }
  double mean() const {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  }
  double stddev() const {
    const double m = mean();
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
  }
};

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int cmd_synth(const CommandArgs& args) {
  return guarded([&]() {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    require_out_dir(args);
    Dataset ds = make_dataset(cfg.pipeline, args.seed);
    save_dataset(args.out_dir, ds);

    const DatasetItem& first = ds.train.front();
    write_png_rgb8(args.out_dir + "/preview_clean.png", first.clean);
    Tensor demosaiced = bilinear_demosaic(unpack_bayer(first.raw.packed));
    std::vector<double> v = demosaiced.values();
    for (double& x : v) x = std::clamp(x / first.raw.gain, 0.0, 1.0);
    write_png_rgb8(args.out_dir + "/preview_raw.png", Tensor(demosaiced.shape(), std::move(v)));

    const size_t total = ds.train.size() + ds.val.size() + ds.test.size();
    std::printf("synth: %zu images (%zu train / %zu val / %zu test) -> %s\n", total,
                ds.train.size(), ds.val.size(), ds.test.size(), args.out_dir.c_str());
    return 0;
  });
}

int cmd_verify(const CommandArgs& args) {
  return guarded([&]() {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    require_out_dir(args);
    VerificationReport rep = run_verification(cfg.verify);
    write_verification_outputs(args.out_dir, rep);
    for (const CheckResult& c : rep.checks)
      std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    if (!rep.all_pass()) {
      std::string names;
      for (const std::string& n : rep.failing()) names += (names.empty() ? "" : ", ") + n;
      std::fprintf(stderr, "verification failed: %s\n", names.c_str());
      return 1;
    }
    return 0;
  });
}

int cmd_compare(const CommandArgs& args) {
  return guarded([&]() {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    require_out_dir(args);
    if (cfg.solver.outer_steps < 1)
      throw ConfigError("compare needs [solver] outer_steps >= 1");

    Dataset ds = cfg.compare.dataset_dir.empty()
                     ? make_dataset(cfg.pipeline, mix_seed(args.seed, 1000))
                     : load_dataset(cfg.compare.dataset_dir);
    const std::vector<DatasetItem>& heldout_split = ds.test.empty() ? ds.val : ds.test;

    const Strategy strategies[] = {Strategy::Naive, Strategy::Tbgl, Strategy::Ibgl};
    std::map<Strategy, Aggregate> psnr_agg, ssim_agg, l1_agg;
    std::map<Strategy, EvalCounter> counts;

    for (Strategy strat : strategies) {
      for (uint64_t seed : cfg.compare.seeds) {
        SolverConfig run_cfg = cfg.solver;
        run_cfg.strategy = strat;
        run_cfg.seed = seed;
        if (strat == Strategy::Tbgl) run_cfg.k = 1;

        EnhancementProblem problem(ds, run_cfg.batch_size, seed);
        const double t0 = now_seconds();
        TrainState state = warm_start(problem, run_cfg);
        std::vector<StepRow> rows;
        solve(problem, state, run_cfg, [&](const StepInfo& info) {
          StepRow r;
          r.step = info.step;
          r.lr_upper = info.lr_upper;
          r.lr_lower = info.lr_lower;
          r.upper_value = info.upper_value;
          r.lower_value = info.lower_value;
          r.hyper_norm = info.hyper_norm;
          r.coupling_norm = info.coupling_norm;
          r.lf_grad_evals = info.counters.lf_grad_evals;
          r.lg_grad_evals = info.counters.lg_grad_evals;
          r.lower_updates = info.counters.lower_updates;
          rows.push_back(r);
        });

        EvalSummary heldout = evaluate_split(
            [&](const DatasetItem& item) {
              return problem.render(state.omega, state.theta, item);
            },
            heldout_split);
        if (!std::isfinite(heldout.l1)) throw NumericError("non-finite held-out metrics");

        RunRecord rec;
        rec.config_hash = cfg.hash_hex;
        rec.build_id = build_id();
        rec.strategy = strategy_name(strat);
        rec.seed = seed;
        rec.rows = std::move(rows);
        rec.stats = summarize_rows(rec.rows);
        rec.heldout = heldout;
        rec.wall_seconds = now_seconds() - t0;
        const std::string stem =
            std::string(strategy_name(strat)) + "_seed" + std::to_string(seed);
        write_run_record(args.out_dir, stem, rec);

        CheckpointMeta meta;
        meta.step = cfg.solver.outer_steps;
        meta.config_hash = cfg.hash_hex;
        meta.metrics = {{"heldout_psnr", heldout.psnr}, {"heldout_l1", heldout.l1}};
        save_checkpoint(args.out_dir + "/ckpt_" + stem, state.omega, meta);

        psnr_agg[strat].push(heldout.psnr);
        ssim_agg[strat].push(heldout.ssim);
        l1_agg[strat].push(heldout.l1);
        counts[strat] = state.counters;
        std::printf("compare: %s seed %llu  psnr %.3f  ssim %.4f  l1 %.5f  (%.1fs)\n",
                    strategy_name(strat), static_cast<unsigned long long>(seed), heldout.psnr,
                    heldout.ssim, heldout.l1, rec.wall_seconds);
      }
    }

    std::string csv =
        "strategy,mean_psnr,std_psnr,mean_ssim,std_ssim,mean_l1,std_l1,"
        "lf_grad_evals,lg_grad_evals,lower_updates,outer_updates\n";
    for (Strategy strat : strategies) {
      const EvalCounter& ct = counts[strat];
      csv += std::string(strategy_name(strat)) + "," + format_double(psnr_agg[strat].mean()) +
             "," + format_double(psnr_agg[strat].stddev()) + "," +
             format_double(ssim_agg[strat].mean()) + "," +
             format_double(ssim_agg[strat].stddev()) + "," +
             format_double(l1_agg[strat].mean()) + "," + format_double(l1_agg[strat].stddev()) +
             "," + std::to_string(ct.lf_grad_evals) + "," + std::to_string(ct.lg_grad_evals) +
             "," + std::to_string(ct.lower_updates) + "," + std::to_string(ct.outer_updates) +
             "\n";
    }
    write_text(args.out_dir + "/summary.csv", csv);
    std::printf("%s", csv.c_str());

    if (counts[Strategy::Ibgl].lg_grad_evals <= counts[Strategy::Tbgl].lg_grad_evals) {
      std::fprintf(stderr, "check failed: ibgl lower-gradient count must exceed tbgl's\n");
      return 1;
    }
    return 0;
  });
}

int cmd_transfer(const CommandArgs& args) {
  return guarded([&]() {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    require_out_dir(args);
    if (cfg.transfer.checkpoint_dir.empty())
      throw ConfigError("transfer needs [transfer] checkpoint_dir pointing at compare output");

    Dataset task = make_dataset(cfg.pipeline, mix_seed(args.seed, 2000));

    struct Source {
      std::string name;
      bool from_checkpoint;
    };
    const Source sources[] = {{"naive", true}, {"ibgl", true}, {"random", false}};

    std::string runs_csv = "source,seed,heldout_l1,heldout_psnr,omega_unchanged\n";
    std::string summary_csv =
        "source,mean_l1,std_l1,mean_psnr,std_psnr,omega_unchanged\n";
    bool all_frozen = true;

    for (const Source& src : sources) {
      Aggregate l1_agg, psnr_agg;
      bool frozen = true;
      for (uint64_t seed : cfg.transfer.seeds) {
        ParameterVector omega =
            src.from_checkpoint
                ? load_checkpoint(cfg.transfer.checkpoint_dir + "/ckpt_" + src.name + "_seed" +
                                  std::to_string(seed))
                      .params
                : init_generative_block(cfg.pipeline.gb, mix_seed(seed, 555));

        TransferConfig tc;
        tc.steps = cfg.transfer.steps;
        tc.lr_init = cfg.transfer.lr_init;
        tc.lr_final = cfg.transfer.lr_final;
        tc.batch_size = cfg.transfer.batch_size;
        tc.seed = seed;
        tc.head = cfg.pipeline.enhancer;
        TransferRecord rec = freeze_and_transfer(omega, task, tc);

        l1_agg.push(rec.heldout_l1);
        psnr_agg.push(rec.heldout_psnr);
        frozen = frozen && rec.omega_unchanged;
        runs_csv += src.name + "," + std::to_string(seed) + "," +
                    format_double(rec.heldout_l1) + "," + format_double(rec.heldout_psnr) + "," +
                    (rec.omega_unchanged ? "1" : "0") + "\n";
        std::printf("transfer: %s seed %llu  l1 %.5f  psnr %.3f\n", src.name.c_str(),
                    static_cast<unsigned long long>(seed), rec.heldout_l1, rec.heldout_psnr);
      }
      summary_csv += src.name + "," + format_double(l1_agg.mean()) + "," +
                     format_double(l1_agg.stddev()) + "," + format_double(psnr_agg.mean()) +
                     "," + format_double(psnr_agg.stddev()) + "," + (frozen ? "1" : "0") + "\n";
      all_frozen = all_frozen && frozen;
    }

    write_text(args.out_dir + "/transfer_runs.csv", runs_csv);
    write_text(args.out_dir + "/transfer_summary.csv", summary_csv);
    std::printf("%s", summary_csv.c_str());

    if (!all_frozen) {
      std::fprintf(stderr, "check failed: frozen generator parameters changed during transfer\n");
      return 1;
    }
    return 0;
  });
}

}  // namespace bgl
