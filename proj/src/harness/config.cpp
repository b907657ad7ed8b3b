// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bgl/errors.hpp"

namespace bgl {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    size_t pos = 0;
    double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + raw + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& raw) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || p != raw.data() + raw.size())
    throw ConfigError("bad integer value for " + key + ": '" + raw + "'");
  return v;
}

uint64_t parse_uint(const std::string& key, const std::string& raw) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || p != raw.data() + raw.size())
    throw ConfigError("bad unsigned value for " + key + ": '" + raw + "'");
  return v;
}

}  // namespace

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full))
      throw ConfigError("duplicate key '" + full + "' at line " + std::to_string(lineno));
    cfg.entries_[full] = value;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(key, it->second);
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_int(key, it->second);
}

uint64_t KvConfig::get_uint(const std::string& key, uint64_t fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_uint(key, it->second);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

std::vector<uint64_t> KvConfig::get_uint_list(const std::string& key,
                                              const std::vector<uint64_t>& fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<uint64_t> out;
  for (const std::string& part : split_commas(it->second)) out.push_back(parse_uint(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& part : split_commas(it->second)) out.push_back(parse_double(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::vector<int64_t> KvConfig::get_int_list(const std::string& key,
                                            const std::vector<int64_t>& fallback) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<int64_t> out;
  for (const std::string& part : split_commas(it->second)) out.push_back(parse_int(key, part));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

void KvConfig::reject_unknown() const {
  std::string bad;
  for (const auto& [key, value] : entries_) {
    (void)value;
    if (!consumed_.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw ConfigError("unknown config keys: " + bad);
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + "=" + value + "\n";
  return out;
}

uint64_t KvConfig::hash() const { return fnv1a64(canonical()); }

ExperimentConfig experiment_config_from_kv(const KvConfig& kv) {
  ExperimentConfig cfg;

  PipelineConfig& p = cfg.pipeline;
  p.height = kv.get_int("pipeline.height", p.height);
  p.width = kv.get_int("pipeline.width", p.width);
  p.train = kv.get_int("pipeline.train", p.train);
  p.val = kv.get_int("pipeline.val", p.val);
  p.test = kv.get_int("pipeline.test", p.test);
  p.gain_lo = kv.get_double("pipeline.gain_lo", p.gain_lo);
  p.gain_hi = kv.get_double("pipeline.gain_hi", p.gain_hi);
  p.noise.shot_scale = kv.get_double("pipeline.shot_scale", p.noise.shot_scale);
  p.noise.read_sigma = kv.get_double("pipeline.read_sigma", p.noise.read_sigma);
  p.unprocess.gamma = kv.get_double("pipeline.gamma", p.unprocess.gamma);
  p.gb.enc1 = kv.get_int("pipeline.gb_enc1", p.gb.enc1);
  p.gb.enc2 = kv.get_int("pipeline.gb_enc2", p.gb.enc2);
  p.gb.enc3 = kv.get_int("pipeline.gb_enc3", p.gb.enc3);
  p.gb.bottleneck = kv.get_int("pipeline.gb_bottleneck", p.gb.bottleneck);
  p.enhancer.hidden = kv.get_int("pipeline.enhancer_hidden", p.enhancer.hidden);
  p.s_min = kv.get_double("pipeline.s_min", p.s_min);
  p.w_f = kv.get_double("pipeline.w_f", p.w_f);
  p.w_s = kv.get_double("pipeline.w_s", p.w_s);

  SolverConfig& s = cfg.solver;
  std::string strat = kv.get_string("solver.strategy", strategy_name(s.strategy));
  s.strategy = strategy_from_name(strat);
  s.warm_steps = kv.get_int("solver.warm_steps", s.warm_steps);
  s.warm_lr = kv.get_double("solver.warm_lr", s.warm_lr);
  s.upper_lr_init = kv.get_double("solver.upper_lr_init", s.upper_lr_init);
  s.upper_lr_final = kv.get_double("solver.upper_lr_final", s.upper_lr_final);
  s.lower_lr_init = kv.get_double("solver.lower_lr_init", s.lower_lr_init);
  s.lower_lr_final = kv.get_double("solver.lower_lr_final", s.lower_lr_final);
  std::string decay = kv.get_string("solver.decay", "cosine");
  if (decay == "constant") {
    s.decay = LrDecay::Constant;
  } else if (decay == "linear") {
    s.decay = LrDecay::Linear;
  } else if (decay == "cosine") {
    s.decay = LrDecay::Cosine;
  } else {
    throw ConfigError("unknown decay '" + decay + "' (constant, linear, cosine)");
  }
  s.k = kv.get_int("solver.k", s.k);
  s.outer_steps = kv.get_int("solver.outer_steps", s.outer_steps);
  s.batch_size = kv.get_int("solver.batch_size", s.batch_size);
  s.momentum = kv.get_double("solver.momentum", s.momentum);

  EstimatorConfig& e = cfg.solver.estimator;
  e.eta = kv.get_double("estimator.eta", e.eta);
  e.fd_scale = kv.get_double("estimator.fd_scale", e.fd_scale);
  e.fd_absolute = kv.get_bool("estimator.fd_absolute", e.fd_absolute);
  e.guard_eps = kv.get_double("estimator.guard_eps", e.guard_eps);
  e.cg_tol = kv.get_double("estimator.cg_tol", e.cg_tol);
  e.cg_max_iter = kv.get_int("estimator.cg_max_iter", e.cg_max_iter);
  e.hvp_eps = kv.get_double("estimator.hvp_eps", e.hvp_eps);

  cfg.compare.seeds = kv.get_uint_list("compare.seeds", cfg.compare.seeds);
  cfg.compare.dataset_dir = kv.get_string("compare.dataset_dir", "");

  TransferOptions& t = cfg.transfer;
  t.steps = kv.get_int("transfer.steps", t.steps);
  t.lr_init = kv.get_double("transfer.lr_init", t.lr_init);
  t.lr_final = kv.get_double("transfer.lr_final", t.lr_final);
  t.batch_size = kv.get_int("transfer.batch_size", t.batch_size);
  t.seeds = kv.get_uint_list("transfer.seeds", t.seeds);
  t.checkpoint_dir = kv.get_string("transfer.checkpoint_dir", "");

  VerifyOptions& v = cfg.verify;
  v.deltas = kv.get_double_list("verify.deltas", v.deltas);
  v.ks = kv.get_int_list("verify.ks", v.ks);
  v.seeds = kv.get_int("verify.seeds", v.seeds);
  if (v.deltas.empty() || v.ks.empty() || v.seeds < 1)
    throw ConfigError("verify sweeps must be non-empty");

  kv.reject_unknown();
  cfg.hash_hex = hash_hex(kv.hash());
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  KvConfig kv = path.empty() ? KvConfig::parse_string("") : KvConfig::parse_file(path);
  return experiment_config_from_kv(kv);
}

}  // namespace bgl
