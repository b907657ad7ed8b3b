// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
//
// Plain-text key-value experiment configs.
//
// Files are INI-style: `[section]` headers, `key = value` pairs, `#` or `;`
// comments. Every key a file mentions must be consumed by the loader, so a
// typo like `uper_lr_init` fails loudly instead of silently using a default.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bgl/pipeline/dataset.hpp"
#include "bgl/solvers.hpp"

namespace bgl {

uint64_t fnv1a64(const std::string& text);
std::string hash_hex(uint64_t h);

class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;

  // Getters take fully qualified "section.key" names, mark the key as
  // consumed, and fall back to the given default when the key is absent.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_uint(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<uint64_t> get_uint_list(const std::string& key,
                                      const std::vector<uint64_t>& fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;

  // Throws ConfigError naming every key that was never consumed.
  void reject_unknown() const;

  // Sorted "section.key=value" lines; comments and spacing do not affect it.
  std::string canonical() const;
  uint64_t hash() const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> consumed_;
};

struct CompareOptions {
  std::vector<uint64_t> seeds{1, 2, 3};
  // When set, the dataset is loaded from this directory; when empty, it is
  // synthesized in memory from [pipeline] and the run seed.
  std::string dataset_dir;
};

struct TransferOptions {
  int64_t steps = 400;
  double lr_init = 3e-3;
  double lr_final = 3e-4;
  int64_t batch_size = 8;
  std::vector<uint64_t> seeds{1, 2, 3};
  // Directory holding `compare` checkpoints (ckpt_<strategy>_seed<seed>/).
  std::string checkpoint_dir;
};

struct VerifyOptions {
  std::vector<double> deltas{1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3, 1.5625e-3};
  std::vector<int64_t> ks{1, 2, 5, 10, 20, 50, 100, 200};
  int64_t seeds = 3;
};

struct ExperimentConfig {
  PipelineConfig pipeline;
  SolverConfig solver;
  CompareOptions compare;
  TransferOptions transfer;
  VerifyOptions verify;
  std::string hash_hex;
};

// Parses the file (an empty path yields all defaults), rejects unknown keys,
// and records the canonical-form hash. Throws ConfigError on bad input.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_kv(const KvConfig& kv);

}  // namespace bgl
