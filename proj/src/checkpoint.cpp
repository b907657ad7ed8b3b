// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bgl/errors.hpp"
#include "bgl/tensor_io.hpp"

namespace fs = std::filesystem;

namespace bgl {

namespace {

// Segment names become file names; keep them portable.
std::string file_name_for(const std::string& segment) {
  std::string out;
  out.reserve(segment.size());
  for (char c : segment) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  return out + ".bglt";
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParameterVector& params,
                     const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());

  nlohmann::json segments = nlohmann::json::array();
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const std::string file = file_name_for(name);
    save_tensor((fs::path(dir) / file).string(), params.tensor(i));
    segments.push_back({{"name", name}, {"file", file}});
  }

  nlohmann::json manifest{
      {"step", meta.step},
      {"config_hash", meta.config_hash},
      {"metrics", meta.metrics},
      {"segments", segments},
  };
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ofstream out(mpath);
  if (!out) throw IoError("cannot write " + mpath.string());
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + mpath.string());
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open " + mpath.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint manifest " + mpath.string() + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.meta.step = manifest.at("step").get<int64_t>();
    ckpt.meta.config_hash = manifest.at("config_hash").get<std::string>();
    ckpt.meta.metrics = manifest.at("metrics").get<std::map<std::string, double>>();
    for (const auto& seg : manifest.at("segments")) {
      const auto name = seg.at("name").get<std::string>();
      const auto file = seg.at("file").get<std::string>();
      ckpt.params.add(name, load_tensor((fs::path(dir) / file).string()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint manifest " + mpath.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace bgl
