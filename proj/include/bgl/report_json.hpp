// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "bgl/bilevel.hpp"

namespace bgl {

// Wire form consumed by the CLI and the run records.
nlohmann::json report_to_json(const HypergradientReport& rep);
nlohmann::json counts_to_json(const EvalCounter& counts);

}  // namespace bgl
