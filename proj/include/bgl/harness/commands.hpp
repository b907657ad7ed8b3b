// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
//
// The four CLI entry points. Each returns a process exit code:
//   0  success, all embedded checks passed
//   1  a check failed (verification suite, count ordering, frozen params)
//   2  bad config or IO failure
#pragma once

#include <cstdint>
#include <string>

namespace bgl {

struct CommandArgs {
  std::string config_path;  // empty means all defaults
  std::string out_dir;
  uint64_t seed = 0;
};

// Synthesizes the dataset described by [pipeline] into out_dir, with PNG
// previews of the first training image.
int cmd_synth(const CommandArgs& args);

// Runs the estimator invariant suite and writes verify_report.json plus the
// delta/k sweep CSVs into out_dir.
int cmd_verify(const CommandArgs& args);

// Trains naive, tbgl and ibgl on the enhancement task under an equal outer
// budget for each seed in [compare] seeds; writes per-run records, per-run
// generator checkpoints and summary.csv (3 rows, one per strategy).
int cmd_compare(const CommandArgs& args);

// Loads naive and ibgl generator checkpoints produced by `compare`, adds a
// random-init control, and adapts a fresh head on a second synthetic task
// with the generator frozen; writes transfer_runs.csv and
// transfer_summary.csv (3 rows).
int cmd_transfer(const CommandArgs& args);

}  // namespace bgl
