// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "bgl/bilevel.hpp"
#include "bgl/pipeline/dataset.hpp"
#include "bgl/pipeline/metrics.hpp"

namespace bgl {

// Enhancement as a bilevel problem: omega is the raw-to-RGB block trained on
// the reference L1 over validation batches, theta the illumination estimator
// trained on the self-supervised loss over training batches. Batches are
// redrawn via draw_batches(seed, tick); the constructor draws (0, 0) so the
// problem is evaluable immediately.
class EnhancementProblem : public BilevelProblem {
 public:
  EnhancementProblem(Dataset dataset, int64_t batch_size, uint64_t init_seed);

  const ParameterVector& omega_init() const override { return omega0_; }
  const ParameterVector& theta_init() const override { return theta0_; }
  Var upper_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  Var lower_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  void draw_batches(uint64_t seed, uint64_t tick) override;

  const Dataset& dataset() const { return data_; }
  const std::vector<int64_t>& current_train_indices() const { return train_idx_; }
  const std::vector<int64_t>& current_val_indices() const { return val_idx_; }

  // Frozen-parameter forward of one item for metrics and export.
  Tensor render(const ParameterVector& omega, const ParameterVector& theta,
                const DatasetItem& item) const;

 private:
  Dataset data_;
  int64_t batch_size_;
  ParameterVector omega0_, theta0_;
  std::vector<int64_t> train_idx_, val_idx_;
  Tensor train_raw_, val_raw_, val_clean_;
};

// The no-learned-front-end control: bilinear demosaic plus exposure (1/gain)
// correction feeding the same enhancer. omega is empty; only theta trains.
class DemosaicEnhanceProblem : public BilevelProblem {
 public:
  DemosaicEnhanceProblem(Dataset dataset, int64_t batch_size, uint64_t init_seed);

  const ParameterVector& omega_init() const override { return omega0_; }
  const ParameterVector& theta_init() const override { return theta0_; }
  Var upper_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  Var lower_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  void draw_batches(uint64_t seed, uint64_t tick) override;

  // The fixed front end, exposed so evaluation sees exactly what training saw.
  Tensor frontend(const DatasetItem& item) const;
  Tensor render(const ParameterVector& theta, const DatasetItem& item) const;

 private:
  Dataset data_;
  int64_t batch_size_;
  ParameterVector omega0_, theta0_;
  std::vector<Tensor> train_in_, val_in_;
  std::vector<int64_t> train_idx_, val_idx_;
  Tensor train_batch_, val_batch_, val_clean_;
};

// Second task for the generalization experiment: a small supervised
// denoising head on top of a frozen raw-to-RGB block. The block's outputs
// are precomputed once since its parameters never move here.
class DenoisingProblem : public BilevelProblem {
 public:
  DenoisingProblem(Dataset dataset, ParameterVector frozen_omega, EnhancerWidths head,
                   int64_t batch_size, uint64_t init_seed);

  const ParameterVector& omega_init() const override { return frozen_omega_; }
  const ParameterVector& theta_init() const override { return theta0_; }
  Var upper_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  Var lower_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  void draw_batches(uint64_t seed, uint64_t tick) override;

  const ParameterVector& frozen_omega() const { return frozen_omega_; }
  const Dataset& dataset() const { return data_; }
  Tensor render(const ParameterVector& theta, const DatasetItem& item) const;
  // Block output for one item (the head's input).
  Tensor block_output(const DatasetItem& item) const;

 private:
  Dataset data_;
  ParameterVector frozen_omega_, theta0_;
  int64_t batch_size_;
  std::vector<Tensor> train_in_, val_in_, test_in_;
  std::vector<int64_t> train_idx_, val_idx_;
  Tensor train_batch_, train_clean_, val_batch_, val_clean_;

  const std::vector<Tensor>& inputs_for(const std::vector<DatasetItem>& split) const;
};

struct EvalSummary {
  double psnr = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
};

using ImageRenderer = std::function<Tensor(const DatasetItem&)>;

// Mean metrics of rendered outputs (clamped to [0,1]) against the clean
// references of a split.
EvalSummary evaluate_split(const ImageRenderer& render, const std::vector<DatasetItem>& split);

struct TransferConfig {
  int64_t steps = 400;
  double lr_init = 3e-3;
  double lr_final = 3e-4;
  int64_t batch_size = 8;
  uint64_t seed = 0;
  EnhancerWidths head;
};

struct TransferRecord {
  double heldout_l1 = 0.0;
  double heldout_psnr = 0.0;
  bool omega_unchanged = false;
  ParameterVector theta;
  EvalCounter counters;
};

// Trains only the head of a denoising task built on `task_data` with the
// given block parameters frozen, then evaluates on the task's test split.
TransferRecord freeze_and_transfer(const ParameterVector& trained_omega, const Dataset& task_data,
                                   const TransferConfig& cfg);

}  // namespace bgl
