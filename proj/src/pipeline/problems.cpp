// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/problems.hpp"

#include <algorithm>

#include "bgl/errors.hpp"
#include "bgl/estimators.hpp"
#include "bgl/solvers.hpp"

namespace bgl {

namespace {

// [B, ...rest] from selected per-item tensors.
Tensor stack_selected(const std::vector<Tensor>& pool, const std::vector<int64_t>& idx) {
  if (idx.empty()) throw ShapeError("empty batch");
  const Shape& one = pool[static_cast<size_t>(idx[0])].shape();
  Shape shape;
  shape.push_back(static_cast<int64_t>(idx.size()));
  shape.insert(shape.end(), one.begin(), one.end());
  const size_t stride = pool[static_cast<size_t>(idx[0])].values().size();
  std::vector<double> out(idx.size() * stride);
  for (size_t b = 0; b < idx.size(); ++b) {
    const Tensor& t = pool[static_cast<size_t>(idx[b])];
    if (t.shape() != one) throw ShapeError("ragged batch");
    std::copy(t.values().begin(), t.values().end(), out.begin() + static_cast<long>(b * stride));
  }
  return Tensor(std::move(shape), std::move(out));
}

std::vector<int64_t> draw_indices(RandomStream& rng, size_t pool, int64_t count) {
  std::vector<int64_t> idx(static_cast<size_t>(count));
  for (auto& i : idx) i = static_cast<int64_t>(rng.index(pool));
  return idx;
}

std::vector<Tensor> raw_pool(const std::vector<DatasetItem>& split) {
  std::vector<Tensor> out;
  out.reserve(split.size());
  for (const auto& item : split) out.push_back(item.raw.packed);
  return out;
}

std::vector<Tensor> clean_pool(const std::vector<DatasetItem>& split) {
  std::vector<Tensor> out;
  out.reserve(split.size());
  for (const auto& item : split) out.push_back(item.clean);
  return out;
}

Tensor clamp01_tensor(const Tensor& t) {
  std::vector<double> v = t.values();
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return Tensor(t.shape(), std::move(v));
}

void check_splits(const Dataset& ds) {
  if (ds.train.empty() || ds.val.empty()) throw ConfigError("dataset split empty");
}

}  // namespace

EnhancementProblem::EnhancementProblem(Dataset dataset, int64_t batch_size, uint64_t init_seed)
    : data_(std::move(dataset)), batch_size_(batch_size) {
  data_.config.validate();
  check_splits(data_);
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  omega0_ = init_generative_block(data_.config.gb, mix_seed(init_seed, 11));
  theta0_ = init_enhancer(data_.config.enhancer, mix_seed(init_seed, 12));
  draw_batches(0, 0);
}

void EnhancementProblem::draw_batches(uint64_t seed, uint64_t tick) {
  RandomStream rng(mix_seed(seed, tick));
  train_idx_ = draw_indices(rng, data_.train.size(), batch_size_);
  val_idx_ = draw_indices(rng, data_.val.size(), batch_size_);
  train_raw_ = stack_selected(raw_pool(data_.train), train_idx_);
  val_raw_ = stack_selected(raw_pool(data_.val), val_idx_);
  val_clean_ = stack_selected(clean_pool(data_.val), val_idx_);
}

Var EnhancementProblem::upper_loss(Tape& tape, const ParamVars& omega,
                                   const ParamVars& theta) const {
  Var x = generative_block_forward(tape, omega, tape.constant(val_raw_));
  EnhancerOut enh = enhancer_forward(tape, theta, x, data_.config.s_min);
  return loss_upper_l1(tape, enh.enhanced, tape.constant(val_clean_));
}

Var EnhancementProblem::lower_loss(Tape& tape, const ParamVars& omega,
                                   const ParamVars& theta) const {
  Var x = generative_block_forward(tape, omega, tape.constant(train_raw_));
  EnhancerOut enh = enhancer_forward(tape, theta, x, data_.config.s_min);
  return loss_lower_illum(tape, x, enh.illumination, data_.config.w_f, data_.config.w_s);
}

Tensor EnhancementProblem::render(const ParameterVector& omega, const ParameterVector& theta,
                                  const DatasetItem& item) const {
  Tape tape;
  ParamVars ov = register_params(tape, omega, false);
  ParamVars tv = register_params(tape, theta, false);
  const Tensor& packed = item.raw.packed;
  Var x = generative_block_forward(
      tape, ov, tape.constant(packed.reshaped({1, packed.dim(0), packed.dim(1), packed.dim(2)})));
  EnhancerOut enh = enhancer_forward(tape, tv, x, data_.config.s_min);
  const Tensor& out = tape.value(enh.enhanced);
  return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

DemosaicEnhanceProblem::DemosaicEnhanceProblem(Dataset dataset, int64_t batch_size,
                                               uint64_t init_seed)
    : data_(std::move(dataset)), batch_size_(batch_size) {
  data_.config.validate();
  check_splits(data_);
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  theta0_ = init_enhancer(data_.config.enhancer, mix_seed(init_seed, 12));
  train_in_.reserve(data_.train.size());
  for (const auto& item : data_.train) train_in_.push_back(frontend(item));
  val_in_.reserve(data_.val.size());
  for (const auto& item : data_.val) val_in_.push_back(frontend(item));
  draw_batches(0, 0);
}

Tensor DemosaicEnhanceProblem::frontend(const DatasetItem& item) const {
  Tensor rgb = bilinear_demosaic(unpack_bayer(item.raw.packed));
  std::vector<double> v = rgb.values();
  const double inv_gain = 1.0 / item.raw.gain;
  for (double& x : v) x = std::clamp(x * inv_gain, 0.0, 1.0);
  return Tensor(rgb.shape(), std::move(v));
}

void DemosaicEnhanceProblem::draw_batches(uint64_t seed, uint64_t tick) {
  RandomStream rng(mix_seed(seed, tick));
  train_idx_ = draw_indices(rng, data_.train.size(), batch_size_);
  val_idx_ = draw_indices(rng, data_.val.size(), batch_size_);
  train_batch_ = stack_selected(train_in_, train_idx_);
  val_batch_ = stack_selected(val_in_, val_idx_);
  val_clean_ = stack_selected(clean_pool(data_.val), val_idx_);
}

Var DemosaicEnhanceProblem::upper_loss(Tape& tape, const ParamVars& omega,
                                       const ParamVars& theta) const {
  (void)omega;
  EnhancerOut enh =
      enhancer_forward(tape, theta, tape.constant(val_batch_), data_.config.s_min);
  return loss_upper_l1(tape, enh.enhanced, tape.constant(val_clean_));
}

Var DemosaicEnhanceProblem::lower_loss(Tape& tape, const ParamVars& omega,
                                       const ParamVars& theta) const {
  (void)omega;
  Var x = tape.constant(train_batch_);
  EnhancerOut enh = enhancer_forward(tape, theta, x, data_.config.s_min);
  return loss_lower_illum(tape, x, enh.illumination, data_.config.w_f, data_.config.w_s);
}

Tensor DemosaicEnhanceProblem::render(const ParameterVector& theta,
                                      const DatasetItem& item) const {
  Tape tape;
  ParamVars tv = register_params(tape, theta, false);
  Tensor x = frontend(item);
  EnhancerOut enh = enhancer_forward(
      tape, tv, tape.constant(x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)})), data_.config.s_min);
  const Tensor& out = tape.value(enh.enhanced);
  return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

DenoisingProblem::DenoisingProblem(Dataset dataset, ParameterVector frozen_omega,
                                   EnhancerWidths head, int64_t batch_size, uint64_t init_seed)
    : data_(std::move(dataset)), frozen_omega_(std::move(frozen_omega)),
      batch_size_(batch_size) {
  check_splits(data_);
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  theta0_ = init_denoise_head(head, mix_seed(init_seed, 13));
  auto precompute = [this](const std::vector<DatasetItem>& split) {
    std::vector<Tensor> out;
    out.reserve(split.size());
    for (const auto& item : split) out.push_back(block_output(item));
    return out;
  };
  train_in_ = precompute(data_.train);
  val_in_ = precompute(data_.val);
  test_in_ = precompute(data_.test);
  draw_batches(0, 0);
}

Tensor DenoisingProblem::block_output(const DatasetItem& item) const {
  Tape tape;
  ParamVars ov = register_params(tape, frozen_omega_, false);
  const Tensor& packed = item.raw.packed;
  Var x = generative_block_forward(
      tape, ov, tape.constant(packed.reshaped({1, packed.dim(0), packed.dim(1), packed.dim(2)})));
  const Tensor& out = tape.value(x);
  return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

void DenoisingProblem::draw_batches(uint64_t seed, uint64_t tick) {
  RandomStream rng(mix_seed(seed, tick));
  train_idx_ = draw_indices(rng, data_.train.size(), batch_size_);
  val_idx_ = draw_indices(rng, data_.val.size(), batch_size_);
  train_batch_ = stack_selected(train_in_, train_idx_);
  train_clean_ = stack_selected(clean_pool(data_.train), train_idx_);
  val_batch_ = stack_selected(val_in_, val_idx_);
  val_clean_ = stack_selected(clean_pool(data_.val), val_idx_);
}

Var DenoisingProblem::upper_loss(Tape& tape, const ParamVars& omega,
                                 const ParamVars& theta) const {
  (void)omega;
  Var pred = denoise_head_forward(tape, theta, tape.constant(val_batch_));
  return loss_upper_l1(tape, pred, tape.constant(val_clean_));
}

Var DenoisingProblem::lower_loss(Tape& tape, const ParamVars& omega,
                                 const ParamVars& theta) const {
  (void)omega;
  Var pred = denoise_head_forward(tape, theta, tape.constant(train_batch_));
  return loss_upper_l1(tape, pred, tape.constant(train_clean_));
}

Tensor DenoisingProblem::render(const ParameterVector& theta, const DatasetItem& item) const {
  Tape tape;
  ParamVars tv = register_params(tape, theta, false);
  Tensor x = block_output(item);
  Var pred = denoise_head_forward(
      tape, tv, tape.constant(x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)})));
  const Tensor& out = tape.value(pred);
  return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

const std::vector<Tensor>& DenoisingProblem::inputs_for(
    const std::vector<DatasetItem>& split) const {
  if (&split == &data_.train) return train_in_;
  if (&split == &data_.val) return val_in_;
  return test_in_;
}

EvalSummary evaluate_split(const ImageRenderer& render, const std::vector<DatasetItem>& split) {
  if (split.empty()) throw ConfigError("cannot evaluate an empty split");
  EvalSummary acc;
  for (const DatasetItem& item : split) {
    const Tensor out = clamp01_tensor(render(item));
    acc.psnr += psnr(out, item.clean);
    acc.ssim += ssim(out, item.clean);
    acc.l1 += mean_abs_diff(out, item.clean);
  }
  const double n = static_cast<double>(split.size());
  acc.psnr /= n;
  acc.ssim /= n;
  acc.l1 /= n;
  return acc;
}

TransferRecord freeze_and_transfer(const ParameterVector& trained_omega, const Dataset& task_data,
                                   const TransferConfig& cfg) {
  if (cfg.steps < 0) throw ConfigError("transfer steps must be >= 0");
  if (task_data.test.empty()) throw ConfigError("transfer task needs a test split");
  DenoisingProblem problem(task_data, trained_omega, cfg.head, cfg.batch_size,
                           mix_seed(cfg.seed, 77));
  const ParameterVector omega_before = problem.frozen_omega();

  TransferRecord rec;
  ParameterVector theta = problem.theta_init();
  uint64_t tick = 0;
  for (int64_t step = 0; step < cfg.steps; ++step) {
    problem.draw_batches(cfg.seed, tick++);
    const double lr = lr_schedule(step, cfg.steps, cfg.lr_init, cfg.lr_final);
    LowerStepResult ls = lower_step(problem, problem.frozen_omega(), theta, lr, rec.counters);
    theta = ls.theta_next;
  }

  rec.omega_unchanged = bitwise_equal(omega_before, problem.frozen_omega());
  EvalSummary heldout = evaluate_split(
      [&](const DatasetItem& item) { return problem.render(theta, item); }, task_data.test);
  rec.heldout_l1 = heldout.l1;
  rec.heldout_psnr = heldout.psnr;
  rec.theta = std::move(theta);
  return rec;
}

}  // namespace bgl
