// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "bgl/errors.hpp"
#include "bgl/pipeline/dataset.hpp"
#include "bgl/pipeline/metrics.hpp"
#include "bgl/pipeline/networks.hpp"
#include "bgl/pipeline/png.hpp"
#include "bgl/pipeline/problems.hpp"
#include "bgl/pipeline/raw.hpp"
#include "bgl/grad_check.hpp"
#include "bgl/solvers.hpp"
#include "bgl/tape.hpp"

using namespace bgl;

namespace {

Tensor constant(const Shape& shape, double v) { return Tensor::full(shape, v); }

Tensor rand01(const Shape& shape, uint64_t seed) {
  RandomStream rng(seed);
  return random_uniform(shape, 0.0, 1.0, rng);
}

Tensor from_values(const Shape& shape, std::vector<double> v) {
  return Tensor(shape, std::move(v));
}

bool exactly_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.height = 16;
  cfg.width = 16;
  cfg.train = 4;
  cfg.val = 2;
  cfg.test = 2;
  cfg.gb = GbWidths{2, 2, 2, 2};
  cfg.enhancer = EnhancerWidths{4};
  return cfg;
}

}  // namespace

TEST_CASE("bayer packing splits a 2x2 block into the four plane values") {
  Tensor mosaic = from_values({1, 2, 2}, {0.1, 0.2, 0.3, 0.4});
  Tensor packed = pack_bayer(mosaic);
  REQUIRE(packed.shape() == Shape{4, 1, 1});
  CHECK(packed.data()[0] == 0.1);
  CHECK(packed.data()[1] == 0.2);
  CHECK(packed.data()[2] == 0.3);
  CHECK(packed.data()[3] == 0.4);
}

TEST_CASE("bayer packing round trips exactly and keeps shapes") {
  Tensor mosaic = rand01({1, 8, 8}, 5);
  CHECK(exactly_equal(unpack_bayer(pack_bayer(mosaic)), mosaic));
  CHECK(pack_bayer(rand01({1, 16, 16}, 6)).shape() == Shape{4, 8, 8});
  CHECK_THROWS_AS(pack_bayer(rand01({1, 7, 8}, 7)), ShapeError);
}

TEST_CASE("rggb subsampling picks the documented sites") {
  std::vector<double> planes(12);
  for (int64_t i = 0; i < 4; ++i) {
    planes[static_cast<size_t>(i)] = 0.9;
    planes[static_cast<size_t>(4 + i)] = 0.5;
    planes[static_cast<size_t>(8 + i)] = 0.2;
  }
  Tensor mosaic = mosaic_rggb(from_values({3, 2, 2}, std::move(planes)));
  REQUIRE(mosaic.shape() == Shape{1, 2, 2});
  CHECK(mosaic.data()[0] == 0.9);
  CHECK(mosaic.data()[1] == 0.5);
  CHECK(mosaic.data()[2] == 0.5);
  CHECK(mosaic.data()[3] == 0.2);
}

TEST_CASE("bilinear demosaic reproduces constants everywhere") {
  Tensor mosaic = constant({1, 8, 8}, 0.37);
  Tensor rgb = bilinear_demosaic(mosaic);
  REQUIRE(rgb.shape() == Shape{3, 8, 8});
  for (int64_t i = 0; i < rgb.numel(); ++i)
    CHECK(rgb.data()[i] == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("synthesis with disabled stages is a lossless rearrangement") {
  Tensor clean = rand01({3, 8, 8}, 11);
  SynthesisResult res =
      unprocess_synthesize(clean, 1.0, NoiseParams{0.0, 0.0}, 3, UnprocessParams::identity());
  CHECK(exactly_equal(unpack_bayer(res.raw.packed), mosaic_rggb(clean)));
  CHECK(exactly_equal(res.reference, clean));
  CHECK(res.raw.gain == 1.0);
}

TEST_CASE("gray card at a tenth of full exposure lands on 0.05") {
  Tensor clean = constant({3, 8, 8}, 0.5);
  SynthesisResult res =
      unprocess_synthesize(clean, 0.1, NoiseParams{0.0, 0.0}, 0, UnprocessParams::identity());
  for (int64_t i = 0; i < res.raw.packed.numel(); ++i)
    CHECK(res.raw.packed.data()[i] == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("sensor noise variance tracks the shot plus read model") {
  const double signal = 0.25;
  NoiseParams noise{1e-3, 1e-2};
  Tensor clean = constant({3, 8, 8}, signal);
  double sum = 0.0, sumsq = 0.0;
  int64_t count = 0;
  for (uint64_t patch = 0; patch < 1000; ++patch) {
    SynthesisResult res =
        unprocess_synthesize(clean, 1.0, noise, 1000 + patch, UnprocessParams::identity());
    for (int64_t i = 0; i < res.raw.packed.numel(); ++i) {
      double d = res.raw.packed.data()[i] - signal;
      sum += d;
      sumsq += d * d;
      ++count;
    }
  }
  double mean = sum / static_cast<double>(count);
  double var = sumsq / static_cast<double>(count) - mean * mean;
  double want = noise.shot_scale * signal + noise.read_sigma * noise.read_sigma;
  CHECK(var == doctest::Approx(want).epsilon(0.10));
}

TEST_CASE("synthesis is bit-identical for a fixed seed and differs otherwise") {
  Tensor clean = rand01({3, 8, 8}, 13);
  NoiseParams noise{1e-3, 1e-2};
  SynthesisResult a = unprocess_synthesize(clean, 0.2, noise, 42);
  SynthesisResult b = unprocess_synthesize(clean, 0.2, noise, 42);
  SynthesisResult c = unprocess_synthesize(clean, 0.2, noise, 43);
  CHECK(exactly_equal(a.raw.packed, b.raw.packed));
  CHECK_FALSE(exactly_equal(a.raw.packed, c.raw.packed));
  CHECK_THROWS_AS(unprocess_synthesize(rand01({3, 7, 8}, 1), 0.2, noise, 0), ShapeError);
}

TEST_CASE("psnr identities") {
  Tensor base = rand01({3, 8, 8}, 17);
  CHECK(std::isinf(psnr(base, base)));
  Tensor lifted = base;
  Tensor a = constant({3, 8, 8}, 0.2);
  Tensor b = constant({3, 8, 8}, 0.3);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(constant({3, 8, 8}, 0.0), constant({3, 8, 8}, 1.0)) == doctest::Approx(0.0));
  // Out-of-range inputs are clamped before comparison.
  CHECK(std::isinf(psnr(constant({3, 8, 8}, 2.0), constant({3, 8, 8}, 1.0))));
}

TEST_CASE("ssim identities") {
  Tensor x = rand01({3, 16, 16}, 19);
  Tensor y = rand01({3, 16, 16}, 23);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
  const double c1 = 1e-4;
  CHECK(ssim(constant({3, 16, 16}, 0.0), constant({3, 16, 16}, 1.0)) ==
        doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-10));
  CHECK_THROWS_AS(ssim(rand01({3, 8, 8}, 1), rand01({3, 8, 8}, 2)), ShapeError);
}

TEST_CASE("mean absolute difference") {
  Tensor a = constant({3, 4, 4}, 0.25);
  Tensor b = constant({3, 4, 4}, 0.4);
  CHECK(mean_abs_diff(a, b) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(mean_abs_diff(a, a) == 0.0);
}

TEST_CASE("generative block contract: shape, neutral init, divisibility") {
  GbWidths widths{2, 2, 2, 2};
  ParameterVector omega = init_generative_block(widths, 3);
  ParameterVector zeros = omega.zeros_like();
  Tensor packed = rand01({2, 4, 8, 8}, 29);

  Tape tape;
  ParamVars ov = register_params(tape, zeros, false);
  Var out = generative_block_forward(tape, ov, tape.constant(packed));
  const Tensor& val = tape.value(out);
  REQUIRE(val.shape() == Shape{2, 3, 16, 16});
  for (int64_t i = 0; i < val.numel(); ++i) CHECK(val.data()[i] == 0.5);

  Tape bad;
  ParamVars ov2 = register_params(bad, omega, false);
  CHECK_THROWS_AS(generative_block_forward(bad, ov2, bad.constant(rand01({1, 4, 6, 6}, 1))),
                  ShapeError);
}

TEST_CASE("generative block gradient matches central differences") {
  GbWidths widths{2, 2, 2, 2};
  // Nudge every parameter off the fresh init: zero biases can park relu
  // preactivations exactly on the kink, where one-sided AD and centered
  // differences legitimately disagree.
  ParameterVector omega = init_generative_block(widths, 31);
  {
    std::vector<double> flat = omega.flatten();
    RandomStream jiggle(97);
    for (double& v : flat) v += jiggle.uniform(-0.05, 0.05);
    omega = omega.unflatten(flat);
  }
  Tensor packed = rand01({1, 4, 8, 8}, 37);
  Tensor ref = rand01({1, 3, 16, 16}, 41);

  Tape tape;
  ParamVars ov = register_params(tape, omega, true);
  Var loss = loss_upper_l1(tape, generative_block_forward(tape, ov, tape.constant(packed)),
                           tape.constant(ref));
  auto grads = tape.backward(loss);
  ParameterVector analytic = collect_grads(ov, grads);

  ScalarFn f = [&](const ParameterVector& p) {
    Tape t;
    ParamVars v = register_params(t, p, false);
    Var l = loss_upper_l1(t, generative_block_forward(t, v, t.constant(packed)), t.constant(ref));
    return t.value(l).item();
  };
  // Hybrid bar: relative for ordinary coordinates, absolute for the handful
  // of near-dead ones where FD roundoff swamps the relative quotient.
  std::vector<double> fd = fd_gradient(f, omega, 1e-5);
  std::vector<double> ad = analytic.flatten();
  REQUIRE(fd.size() == ad.size());
  double worst = 0.0;
  for (size_t i = 0; i < fd.size(); ++i) {
    const double diff = std::abs(ad[i] - fd[i]);
    worst = std::max(worst, diff / std::max(std::abs(ad[i]) + std::abs(fd[i]), 1e-6));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("illumination division identities") {
  Tensor x = rand01({1, 3, 8, 8}, 43);
  Tape tape;
  Var xv = tape.constant(x);
  Var ones = tape.constant(constant({1, 3, 8, 8}, 1.0));
  Var halves = tape.constant(constant({1, 3, 8, 8}, 0.5));
  const Tensor& y1 = tape.value(apply_illumination(tape, xv, ones));
  const Tensor& y2 = tape.value(apply_illumination(tape, xv, halves));
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(y1.data()[i] == x.data()[i]);
    CHECK(y2.data()[i] == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-14));
  }
}

TEST_CASE("enhancer keeps illumination in range and only brightens") {
  const double s_min = 0.05;
  ParameterVector theta = init_enhancer(EnhancerWidths{4}, 47);
  Tensor x = rand01({2, 3, 8, 8}, 53);

  Tape tape;
  ParamVars tv = register_params(tape, theta, false);
  EnhancerOut out = enhancer_forward(tape, tv, tape.constant(x), s_min);
  const Tensor& s = tape.value(out.illumination);
  const Tensor& y = tape.value(out.enhanced);
  REQUIRE(s.shape() == x.shape());
  for (int64_t i = 0; i < s.numel(); ++i) {
    CHECK(s.data()[i] >= s_min);
    CHECK(s.data()[i] <= 1.0);
    CHECK(y.data()[i] >= x.data()[i] - 1e-12);
    CHECK(y.data()[i] == doctest::Approx(x.data()[i] / s.data()[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(enhancer_forward(tape, tv, tape.constant(x), 1.5), ConfigError);
}

TEST_CASE("upper loss identities and gradient") {
  Tensor ref = rand01({1, 3, 8, 8}, 59);
  std::vector<double> lifted = ref.values();
  for (double& v : lifted) v += 0.1;
  Tensor shifted = from_values(ref.shape(), std::move(lifted));

  Tape tape;
  CHECK(tape.value(loss_upper_l1(tape, tape.constant(ref), tape.constant(ref))).item() == 0.0);
  CHECK(tape.value(loss_upper_l1(tape, tape.constant(shifted), tape.constant(ref))).item() ==
        doctest::Approx(0.1).epsilon(1e-12));

  // Gradient w.r.t. the prediction, away from the |.| kink.
  ParameterVector pred;
  pred.add("pred", shifted);
  Tape g;
  ParamVars pv = register_params(g, pred, true);
  Var loss = loss_upper_l1(g, pv.at("pred"), g.constant(ref));
  auto grads = g.backward(loss);
  ParameterVector analytic = collect_grads(pv, grads);
  ScalarFn f = [&](const ParameterVector& p) {
    Tape t;
    ParamVars v = register_params(t, p, false);
    return t.value(loss_upper_l1(t, v.at("pred"), t.constant(ref))).item();
  };
  CHECK(grad_check(f, pred, analytic, 1e-6).max_rel_err < 1e-5);
}

TEST_CASE("illumination loss: vanishing cases and a hand-computed value") {
  Tape tape;
  std::vector<double> xs(12);
  for (int64_t i = 0; i < 4; ++i) {
    xs[static_cast<size_t>(i)] = 0.2;
    xs[static_cast<size_t>(4 + i)] = 0.5;
    xs[static_cast<size_t>(8 + i)] = 0.3;
  }
  Var xv = tape.constant(from_values({1, 3, 2, 2}, std::move(xs)));
  // s equals the channel max and is constant: both terms vanish.
  Var s_match = tape.constant(constant({1, 3, 2, 2}, 0.5));
  CHECK(tape.value(loss_lower_illum(tape, xv, s_match, 1.0, 0.1)).item() == 0.0);

  // Constant s kills the smoothness term only.
  Var s_flat = tape.constant(constant({1, 3, 2, 2}, 0.4));
  CHECK(tape.value(loss_lower_illum(tape, xv, s_flat, 1.0, 0.1)).item() ==
        doctest::Approx(0.01).epsilon(1e-12));

  // Striped s over zero x: fidelity mean(s^2) = 0.5; vertical diffs are zero,
  // all six horizontal diffs are one, so tv = 6 / 12.
  std::vector<double> stripe(12, 0.0);
  for (int64_t c = 0; c < 3; ++c) {
    stripe[static_cast<size_t>(4 * c + 1)] = 1.0;
    stripe[static_cast<size_t>(4 * c + 3)] = 1.0;
  }
  Var zeros = tape.constant(Tensor::zeros({1, 3, 2, 2}));
  Var sv = tape.constant(from_values({1, 3, 2, 2}, std::move(stripe)));
  CHECK(tape.value(loss_lower_illum(tape, zeros, sv, 1.0, 0.1)).item() ==
        doctest::Approx(0.5 + 0.1 * 0.5).epsilon(1e-12));
}

TEST_CASE("illumination loss gradient matches central differences") {
  Tensor x = rand01({1, 3, 6, 6}, 61);
  RandomStream rng(67);
  Tensor s0 = random_uniform({1, 3, 6, 6}, 0.2, 0.8, rng);
  ParameterVector sp;
  sp.add("s", s0);

  Tape tape;
  ParamVars pv = register_params(tape, sp, true);
  Var loss = loss_lower_illum(tape, tape.constant(x), pv.at("s"), 1.0, 0.1);
  auto grads = tape.backward(loss);
  ParameterVector analytic = collect_grads(pv, grads);
  ScalarFn f = [&](const ParameterVector& p) {
    Tape t;
    ParamVars v = register_params(t, p, false);
    return t.value(loss_lower_illum(t, t.constant(x), v.at("s"), 1.0, 0.1)).item();
  };
  CHECK(grad_check(f, sp, analytic, 1e-6).max_rel_err < 1e-5);
}

TEST_CASE("dataset synthesis is deterministic and thread-count independent") {
  PipelineConfig cfg = tiny_config();
  Dataset a = make_dataset(cfg, 7);
  Dataset b = make_dataset(cfg, 7);
  REQUIRE(a.train.size() == 4);
  REQUIRE(a.val.size() == 2);
  REQUIRE(a.test.size() == 2);
  CHECK(exactly_equal(a.train[0].clean, b.train[0].clean));
  CHECK(exactly_equal(a.train[3].raw.packed, b.train[3].raw.packed));
  CHECK(a.train[1].raw.gain == b.train[1].raw.gain);

  setenv("BGL_THREADS", "1", 1);
  Dataset one = make_dataset(cfg, 9);
  setenv("BGL_THREADS", "3", 1);
  Dataset three = make_dataset(cfg, 9);
  unsetenv("BGL_THREADS");
  for (size_t i = 0; i < one.train.size(); ++i)
    CHECK(exactly_equal(one.train[i].raw.packed, three.train[i].raw.packed));
  CHECK(exactly_equal(one.val[0].clean, three.val[0].clean));

  // Every item carries a distinct synthesis seed and an in-range gain.
  std::set<uint64_t> seeds;
  for (const auto* split : {&a.train, &a.val, &a.test})
    for (const auto& item : *split) {
      seeds.insert(item.seed);
      CHECK(item.raw.gain >= cfg.gain_lo);
      CHECK(item.raw.gain <= cfg.gain_hi);
    }
  CHECK(seeds.size() == 8);
}

TEST_CASE("dataset config validation") {
  PipelineConfig cfg = tiny_config();
  cfg.height = 20;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.gain_lo = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.train = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.s_min = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("dataset save and load round trip") {
  namespace fs = std::filesystem;
  const std::string dir = "t_pipe_ds";
  fs::remove_all(dir);
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 21);
  save_dataset(dir, ds);
  Dataset back = load_dataset(dir);

  CHECK(back.config.height == cfg.height);
  CHECK(back.config.train == cfg.train);
  CHECK(back.config.gb.enc1 == cfg.gb.enc1);
  CHECK(back.seed == ds.seed);
  REQUIRE(back.train.size() == ds.train.size());
  REQUIRE(back.test.size() == ds.test.size());
  for (size_t i = 0; i < ds.train.size(); ++i) {
    CHECK(back.train[i].raw.gain == ds.train[i].raw.gain);
    CHECK(back.train[i].seed == ds.train[i].seed);
    // Tensor payloads are stored at single precision.
    for (int64_t j = 0; j < ds.train[i].clean.numel(); ++j)
      CHECK(back.train[i].clean.data()[j] ==
            doctest::Approx(ds.train[i].clean.data()[j]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(load_dataset(dir + "_missing"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("png export writes a valid signature deterministically") {
  namespace fs = std::filesystem;
  const std::string path = "t_pipe_preview.png";
  Tensor img = rand01({3, 16, 16}, 71);
  write_png_rgb8(path, img);
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  unsigned char sig[8];
  in.read(reinterpret_cast<char*>(sig), 8);
  CHECK(sig[0] == 0x89);
  CHECK(sig[1] == 'P');
  CHECK(sig[2] == 'N');
  CHECK(sig[3] == 'G');
  in.seekg(0, std::ios::end);
  auto size1 = in.tellg();
  in.close();
  write_png_rgb8(path, img);
  std::ifstream again(path, std::ios::binary);
  again.seekg(0, std::ios::end);
  CHECK(again.tellg() == size1);
  again.close();
  fs::remove(path);
}

TEST_CASE("enhancement problem: finite losses, split bookkeeping, FD gradients") {
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 31);
  EnhancementProblem problem(ds, 2, 77);

  double upper = eval_loss_value(problem, LossKind::Upper, problem.omega_init(),
                                 problem.theta_init());
  double lower = eval_loss_value(problem, LossKind::Lower, problem.omega_init(),
                                 problem.theta_init());
  CHECK(std::isfinite(upper));
  CHECK(std::isfinite(lower));
  CHECK(lower >= 0.0);

  problem.draw_batches(7, 3);
  REQUIRE(problem.current_train_indices().size() == 2);
  REQUIRE(problem.current_val_indices().size() == 2);
  std::set<uint64_t> train_seeds, val_seeds;
  for (int64_t i : problem.current_train_indices()) {
    REQUIRE(i >= 0);
    REQUIRE(i < 4);
    train_seeds.insert(ds.train[static_cast<size_t>(i)].seed);
  }
  for (int64_t i : problem.current_val_indices()) {
    REQUIRE(i >= 0);
    REQUIRE(i < 2);
    val_seeds.insert(ds.val[static_cast<size_t>(i)].seed);
  }
  for (uint64_t s : train_seeds) CHECK(val_seeds.count(s) == 0);

  // End-to-end differentiability of the upper objective, both blocks.
  problem.draw_batches(0, 0);
  EvalCounter counter;
  GradEval ge = eval_loss_grad(problem, LossKind::Upper, problem.omega_init(),
                               problem.theta_init(), WrtBlocks::Both, &counter);
  ScalarFn f_omega = [&](const ParameterVector& p) {
    return eval_loss_value(problem, LossKind::Upper, p, problem.theta_init());
  };
  ScalarFn f_theta = [&](const ParameterVector& p) {
    return eval_loss_value(problem, LossKind::Upper, problem.omega_init(), p);
  };
  CHECK(grad_check(f_omega, problem.omega_init(), *ge.omega_grad, 1e-5).max_rel_err < 1e-4);
  CHECK(grad_check(f_theta, problem.theta_init(), *ge.theta_grad, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("warm phase on the image task lowers its own joint objective") {
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 37);
  EnhancementProblem problem(ds, 2, 99);

  SolverConfig scfg;
  scfg.warm_steps = 200;
  scfg.warm_lr = 1e-3;
  scfg.seed = 5;
  scfg.batch_size = 2;

  problem.draw_batches(1234, 0);
  double before = eval_loss_value(problem, LossKind::Lower, problem.omega_init(),
                                  problem.theta_init());
  TrainState st = warm_start(problem, scfg);
  problem.draw_batches(1234, 0);
  double after = eval_loss_value(problem, LossKind::Lower, st.omega, st.theta);
  CHECK(after < before);
  REQUIRE(st.lower_history.size() == 200);
  CHECK(std::isfinite(st.lower_history.back()));
  CHECK(all_finite(st.omega));
  CHECK(all_finite(st.theta));
}

TEST_CASE("split evaluation on a perfect renderer") {
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 41);
  EvalSummary perfect = evaluate_split([](const DatasetItem& it) { return it.clean; }, ds.val);
  CHECK(perfect.l1 == 0.0);
  CHECK(perfect.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(perfect.psnr));

  EvalSummary off = evaluate_split(
      [](const DatasetItem& it) {
        std::vector<double> v = it.clean.values();
        for (double& x : v) x = std::min(1.0, x + 0.1);
        return Tensor(it.clean.shape(), std::move(v));
      },
      ds.val);
  CHECK(off.l1 > 0.0);
  CHECK(off.l1 <= 0.1 + 1e-12);
  CHECK_THROWS_AS(evaluate_split([](const DatasetItem& it) { return it.clean; }, {}), ConfigError);
}

TEST_CASE("demosaic baseline problem trains only the enhancer head") {
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 43);
  DemosaicEnhanceProblem problem(ds, 2, 7);
  CHECK(problem.omega_init().total_len() == 0);
  double upper = eval_loss_value(problem, LossKind::Upper, problem.omega_init(),
                                 problem.theta_init());
  CHECK(std::isfinite(upper));
  Tensor img = problem.render(problem.theta_init(), ds.val[0]);
  CHECK(img.shape() == Shape{3, 16, 16});
}

TEST_CASE("transfer keeps the frozen block bitwise intact") {
  PipelineConfig cfg = tiny_config();
  Dataset ds = make_dataset(cfg, 47);
  ParameterVector omega = init_generative_block(cfg.gb, 123);

  TransferConfig tcfg;
  tcfg.steps = 3;
  tcfg.batch_size = 2;
  tcfg.seed = 9;
  tcfg.head = cfg.enhancer;
  TransferRecord rec = freeze_and_transfer(omega, ds, tcfg);
  CHECK(rec.omega_unchanged);
  CHECK(rec.counters.lower_updates == 3);
  CHECK(std::isfinite(rec.heldout_l1));
  CHECK(rec.heldout_l1 > 0.0);
  CHECK(std::isfinite(rec.heldout_psnr));
}
