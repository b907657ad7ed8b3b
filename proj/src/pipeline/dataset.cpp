// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "bgl/errors.hpp"
#include "bgl/tensor_io.hpp"

namespace fs = std::filesystem;

namespace bgl {

void PipelineConfig::validate() const {
  if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0) {
    throw ConfigError("image dims must be positive multiples of 16");
  }
  if (train < 1 || val < 1 || test < 0) throw ConfigError("split sizes invalid");
  if (!(gain_lo > 0.0 && gain_lo <= gain_hi && gain_hi <= 1.0)) {
    throw ConfigError("gain range must satisfy 0 < lo <= hi <= 1");
  }
  if (noise.shot_scale < 0.0 || noise.read_sigma < 0.0) {
    throw ConfigError("noise levels must be >= 0");
  }
  if (!(unprocess.gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (gb.enc1 < 1 || gb.enc2 < 1 || gb.enc3 < 1 || gb.bottleneck < 1 || enhancer.hidden < 1) {
    throw ConfigError("network widths must be >= 1");
  }
  if (!(s_min > 0.0 && s_min < 1.0)) throw ConfigError("s_min must lie in (0,1)");
  if (w_f < 0.0 || w_s < 0.0) throw ConfigError("loss weights must be >= 0");
}

namespace {

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

Tensor synthesize_clean_image(int64_t h, int64_t w, RandomStream& rng) {
  const size_t plane = static_cast<size_t>(h * w);
  std::vector<double> img(3 * plane);

  // Smooth background: per-channel bilinear ramp between random corners.
  double corners[3][4];
  for (auto& ch : corners) {
    for (double& c : ch) c = rng.uniform(0.15, 0.85);
  }
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < h; ++y) {
      const double fy = static_cast<double>(y) / static_cast<double>(h - 1);
      for (int64_t x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x) / static_cast<double>(w - 1);
        const double top = corners[c][0] * (1 - fx) + corners[c][1] * fx;
        const double bot = corners[c][2] * (1 - fx) + corners[c][3] * fx;
        img[static_cast<size_t>(c) * plane + static_cast<size_t>(y * w + x)] =
            top * (1 - fy) + bot * fy;
      }
    }
  }

  const double dim = static_cast<double>(std::min(h, w));

  // Soft ellipses.
  const int64_t n_blobs = 2 + static_cast<int64_t>(rng.index(3));
  for (int64_t s = 0; s < n_blobs; ++s) {
    const double cx = rng.uniform(0.1, 0.9) * static_cast<double>(w);
    const double cy = rng.uniform(0.1, 0.9) * static_cast<double>(h);
    const double rx = rng.uniform(0.10, 0.35) * dim;
    const double ry = rng.uniform(0.10, 0.35) * dim;
    const double alpha = rng.uniform(0.4, 0.9);
    double color[3];
    for (double& c : color) c = rng.uniform(0.0, 1.0);
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double dx = (static_cast<double>(x) - cx) / rx;
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double d = std::sqrt(dx * dx + dy * dy);
        const double cover = 1.0 - smoothstep(0.8, 1.0, d);
        if (cover <= 0.0) continue;
        for (int64_t c = 0; c < 3; ++c) {
          double& px = img[static_cast<size_t>(c) * plane + static_cast<size_t>(y * w + x)];
          px += alpha * cover * (color[c] - px);
        }
      }
    }
  }

  // Glyph-like strokes: short dark or bright line segments.
  const int64_t n_strokes = 2 + static_cast<int64_t>(rng.index(3));
  for (int64_t s = 0; s < n_strokes; ++s) {
    const double x0 = rng.uniform(0.1, 0.9) * static_cast<double>(w);
    const double y0 = rng.uniform(0.1, 0.9) * static_cast<double>(h);
    const double ang = rng.uniform(0.0, 6.28318530717958648);
    const double len = rng.uniform(0.15, 0.4) * dim;
    const double x1 = x0 + std::cos(ang) * len;
    const double y1 = y0 + std::sin(ang) * len;
    const double thick = rng.uniform(0.5, 1.2);
    const double level = rng.index(2) == 0 ? rng.uniform(0.0, 0.15) : rng.uniform(0.85, 1.0);
    const double vx = x1 - x0, vy = y1 - y0;
    const double vv = vx * vx + vy * vy;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double px = static_cast<double>(x) - x0;
        const double py = static_cast<double>(y) - y0;
        const double t = std::clamp((px * vx + py * vy) / vv, 0.0, 1.0);
        const double ddx = px - t * vx, ddy = py - t * vy;
        const double d = std::sqrt(ddx * ddx + ddy * ddy);
        const double cover = 1.0 - smoothstep(thick * 0.7, thick * 1.3, d);
        if (cover <= 0.0) continue;
        for (int64_t c = 0; c < 3; ++c) {
          double& q = img[static_cast<size_t>(c) * plane + static_cast<size_t>(y * w + x)];
          q += cover * (level - q);
        }
      }
    }
  }

  // Faint shared texture so flat regions carry gradient signal.
  const double amp = rng.uniform(0.01, 0.04);
  const double fx = rng.uniform(2.0, 6.0) / static_cast<double>(w);
  const double fy = rng.uniform(2.0, 6.0) / static_cast<double>(h);
  const double phase = rng.uniform(0.0, 6.28318530717958648);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double tex = amp * std::sin(6.28318530717958648 *
                                            (fx * static_cast<double>(x) +
                                             fy * static_cast<double>(y)) +
                                        phase);
      for (int64_t c = 0; c < 3; ++c) {
        img[static_cast<size_t>(c) * plane + static_cast<size_t>(y * w + x)] += tex;
      }
    }
  }

  for (double& x : img) x = std::clamp(x, 0.0, 1.0);
  return Tensor({3, h, w}, std::move(img));
}

int synthesis_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  int threads = static_cast<int>(std::min(hw, 8u));
  if (const char* env = std::getenv("BGL_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || parsed < 1) {
      throw ConfigError("BGL_THREADS must be a positive integer");
    }
    threads = static_cast<int>(std::min<long>(parsed, 64));
  }
  return threads;
}

namespace {

DatasetItem make_item(const PipelineConfig& cfg, uint64_t dataset_seed, int64_t index) {
  const uint64_t item_seed = mix_seed(dataset_seed, static_cast<uint64_t>(index));
  RandomStream clean_rng(mix_seed(item_seed, 1));
  Tensor clean = synthesize_clean_image(cfg.height, cfg.width, clean_rng);
  RandomStream gain_rng(mix_seed(item_seed, 2));
  const double gain = gain_rng.uniform(cfg.gain_lo, cfg.gain_hi);
  SynthesisResult synth =
      unprocess_synthesize(clean, gain, cfg.noise, mix_seed(item_seed, 3), cfg.unprocess);
  DatasetItem item;
  item.clean = std::move(synth.reference);
  item.raw = std::move(synth.raw);
  item.seed = item_seed;
  return item;
}

}  // namespace

Dataset make_dataset(const PipelineConfig& cfg, uint64_t seed) {
  cfg.validate();
  const int64_t total = cfg.train + cfg.val + cfg.test;
  std::vector<DatasetItem> items(static_cast<size_t>(total));

  const int threads = std::min<int>(synthesis_threads(), static_cast<int>(total));
  if (threads <= 1) {
    for (int64_t i = 0; i < total; ++i) items[static_cast<size_t>(i)] = make_item(cfg, seed, i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int64_t i = t; i < total; i += threads) {
          items[static_cast<size_t>(i)] = make_item(cfg, seed, i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  Dataset ds;
  ds.config = cfg;
  ds.seed = seed;
  auto it = items.begin();
  ds.train.assign(std::make_move_iterator(it), std::make_move_iterator(it + cfg.train));
  it += cfg.train;
  ds.val.assign(std::make_move_iterator(it), std::make_move_iterator(it + cfg.val));
  it += cfg.val;
  ds.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + cfg.test));
  return ds;
}

namespace {

std::string item_file(const char* folder, int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s/%04lld.bglt", folder, static_cast<long long>(index));
  return buf;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  return nlohmann::json{
      {"height", c.height},
      {"width", c.width},
      {"train", c.train},
      {"val", c.val},
      {"test", c.test},
      {"gain_lo", c.gain_lo},
      {"gain_hi", c.gain_hi},
      {"shot_scale", c.noise.shot_scale},
      {"read_sigma", c.noise.read_sigma},
      {"gamma", c.unprocess.gamma},
      {"cam_from_rgb", c.unprocess.cam_from_rgb},
      {"gb_widths", {c.gb.enc1, c.gb.enc2, c.gb.enc3, c.gb.bottleneck}},
      {"enhancer_hidden", c.enhancer.hidden},
      {"s_min", c.s_min},
      {"w_f", c.w_f},
      {"w_s", c.w_s},
  };
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.height = j.at("height").get<int64_t>();
  c.width = j.at("width").get<int64_t>();
  c.train = j.at("train").get<int64_t>();
  c.val = j.at("val").get<int64_t>();
  c.test = j.at("test").get<int64_t>();
  c.gain_lo = j.at("gain_lo").get<double>();
  c.gain_hi = j.at("gain_hi").get<double>();
  c.noise.shot_scale = j.at("shot_scale").get<double>();
  c.noise.read_sigma = j.at("read_sigma").get<double>();
  c.unprocess.gamma = j.at("gamma").get<double>();
  c.unprocess.cam_from_rgb = j.at("cam_from_rgb").get<std::array<double, 9>>();
  const auto widths = j.at("gb_widths").get<std::vector<int64_t>>();
  if (widths.size() != 4) throw IoError("gb_widths must have 4 entries");
  c.gb = GbWidths{widths[0], widths[1], widths[2], widths[3]};
  c.enhancer.hidden = j.at("enhancer_hidden").get<int64_t>();
  c.s_min = j.at("s_min").get<double>();
  c.w_f = j.at("w_f").get<double>();
  c.w_s = j.at("w_s").get<double>();
  return c;
}

}  // namespace

void save_dataset(const std::string& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "clean", ec);
  if (!ec) fs::create_directories(fs::path(dir) / "raw", ec);
  if (ec) throw IoError("cannot create dataset directory " + dir + ": " + ec.message());

  nlohmann::json items = nlohmann::json::array();
  int64_t index = 0;
  auto dump_split = [&](const std::vector<DatasetItem>& split, const char* name) {
    for (const DatasetItem& item : split) {
      const std::string clean_file = item_file("clean", index);
      const std::string raw_file = item_file("raw", index);
      save_tensor((fs::path(dir) / clean_file).string(), item.clean);
      save_tensor((fs::path(dir) / raw_file).string(), item.raw.packed);
      items.push_back({{"index", index},
                       {"split", name},
                       {"gain", item.raw.gain},
                       {"shot_scale", item.raw.noise.shot_scale},
                       {"read_sigma", item.raw.noise.read_sigma},
                       {"seed", item.seed},
                       {"clean", clean_file},
                       {"raw", raw_file}});
      ++index;
    }
  };
  dump_split(ds.train, "train");
  dump_split(ds.val, "val");
  dump_split(ds.test, "test");

  nlohmann::json manifest{
      {"config", config_to_json(ds.config)},
      {"seed", ds.seed},
      {"items", items},
  };
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write dataset manifest in " + dir);
  out << manifest.dump(2) << "\n";
  if (!out) throw IoError("failed writing dataset manifest in " + dir);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot open dataset manifest in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset manifest in " + dir + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.config = config_from_json(manifest.at("config"));
    ds.seed = manifest.at("seed").get<uint64_t>();
    for (const auto& j : manifest.at("items")) {
      DatasetItem item;
      item.clean = load_tensor((fs::path(dir) / j.at("clean").get<std::string>()).string());
      item.raw.packed = load_tensor((fs::path(dir) / j.at("raw").get<std::string>()).string());
      item.raw.gain = j.at("gain").get<double>();
      item.raw.noise.shot_scale = j.at("shot_scale").get<double>();
      item.raw.noise.read_sigma = j.at("read_sigma").get<double>();
      item.seed = j.at("seed").get<uint64_t>();
      const auto split = j.at("split").get<std::string>();
      if (split == "train") {
        ds.train.push_back(std::move(item));
      } else if (split == "val") {
        ds.val.push_back(std::move(item));
      } else if (split == "test") {
        ds.test.push_back(std::move(item));
      } else {
        throw IoError("unknown split '" + split + "' in dataset manifest");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset manifest in " + dir + ": " + e.what());
  }
  return ds;
}

}  // namespace bgl
