// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "bgl/parameter_vector.hpp"

namespace bgl {

struct CheckpointMeta {
  int64_t step = 0;
  std::string config_hash;
  std::map<std::string, double> metrics;
};

// Writes one tensor file per parameter segment plus manifest.json into `dir`
// (created if missing). Segment payloads are stored as f32, so a round trip
// is exact only at single precision.
void save_checkpoint(const std::string& dir, const ParameterVector& params,
                     const CheckpointMeta& meta);

struct Checkpoint {
  ParameterVector params;
  CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::string& dir);

}  // namespace bgl
