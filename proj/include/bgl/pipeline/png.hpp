// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "bgl/tensor.hpp"

namespace bgl {

// 8-bit RGB export for eyeballing results; values are clamped to [0,1] and
// quantized. Metrics never go through this path.
void write_png_rgb8(const std::string& path, const Tensor& rgb);

}  // namespace bgl
