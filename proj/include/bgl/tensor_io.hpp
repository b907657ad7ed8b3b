// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "bgl/tensor.hpp"

namespace bgl {

// Binary tensor container: magic "BGLT", little-endian u32 rank, rank u32
// dims, then the payload as little-endian f32 in row-major order. Values are
// truncated to single precision on disk.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace bgl
