// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "bgl/pipeline/networks.hpp"
#include "bgl/pipeline/raw.hpp"
#include "bgl/random.hpp"

namespace bgl {

// Everything the image task needs to reproduce itself: geometry, split
// sizes, capture model and network widths.
struct PipelineConfig {
  int64_t height = 32;
  int64_t width = 32;
  int64_t train = 200;
  int64_t val = 50;
  int64_t test = 50;

  double gain_lo = 0.05;
  double gain_hi = 0.30;
  NoiseParams noise{1e-3, 1e-2};
  UnprocessParams unprocess;

  GbWidths gb;
  EnhancerWidths enhancer;
  double s_min = 0.05;
  double w_f = 1.0;
  double w_s = 0.1;

  void validate() const;
};

struct DatasetItem {
  Tensor clean;  // [3,H,W] reference
  RawImage raw;
  uint64_t seed = 0;  // per-image synthesis seed
};

struct Dataset {
  PipelineConfig config;
  uint64_t seed = 0;
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> val;
  std::vector<DatasetItem> test;
};

// Procedural scene: smooth gradients, soft shapes and a few glyph-like
// strokes, clamped to [0,1].
Tensor synthesize_clean_image(int64_t h, int64_t w, RandomStream& rng);

// Builds all three splits. Per-image work is keyed by mix_seed(seed, index)
// so results do not depend on how many threads synthesize them.
Dataset make_dataset(const PipelineConfig& cfg, uint64_t seed);

// Layout: clean/NNNN.bglt, raw/NNNN.bglt and manifest.json carrying split
// boundaries and per-image gain, noise and seed.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// Worker count for synthesis: hardware concurrency capped by BGL_THREADS.
int synthesis_threads();

}  // namespace bgl
