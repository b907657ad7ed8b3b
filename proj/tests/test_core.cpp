// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bgl/errors.hpp"
#include "bgl/grad_check.hpp"
#include "bgl/parameter_vector.hpp"
#include "bgl/random.hpp"
#include "bgl/tape.hpp"
#include "bgl/tensor.hpp"
#include "bgl/tensor_io.hpp"

using namespace bgl;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RandomStream rng(seed);
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Checks the tape gradient of a scalar-valued builder against central
// differences over every entry of `point`.
double tape_vs_fd(const std::function<Var(Tape&, const ParamVars&)>& build,
                  const ParameterVector& point, double h = 1e-6) {
  Tape tape;
  ParamVars vars = register_params(tape, point, true);
  Var loss = build(tape, vars);
  auto grads = tape.backward(loss);
  ParameterVector analytic = collect_grads(vars, grads);

  ScalarFn f = [&](const ParameterVector& p) {
    Tape t;
    ParamVars vs = register_params(t, p, false);
    Var l = build(t, vs);
    return t.value(l).item();
  };
  return grad_check(f, point, analytic, h).max_rel_err;
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.values()[4] == 5.0);
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(Tensor({-1}, {1.0}), ShapeError);

  Tensor z = Tensor::zeros({4});
  for (double v : z.values()) CHECK(v == 0.0);
  CHECK(Tensor::full({2, 2}, 3.5).values()[3] == 3.5);
  CHECK(Tensor::scalar(7.0).item() == 7.0);
  CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("reshape preserves payload and rejects bad sizes") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  CHECK(r.values() == t.values());
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("random streams are reproducible and in range") {
  RandomStream a(42), b(42), c(43);
  bool same = true, diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform();
    same = same && (x == b.uniform());
    diff = diff || (x != c.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(same);
  CHECK(diff);

  RandomStream r(7);
  for (int i = 0; i < 100; ++i) {
    double u = r.uniform(2.0, 5.0);
    CHECK(u >= 2.0);
    CHECK(u < 5.0);
    CHECK(r.index(10) < 10);
  }
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
}

TEST_CASE("normal draws have sane moments") {
  RandomStream r(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("backward consumes the tape") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0), true);
  Var y = mul(x, x);
  auto grads = tape.backward(y);
  CHECK(grads.at(x.id).item() == doctest::Approx(4.0));
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.leaf(Tensor::scalar(1.0), true), TapeError);
}

TEST_CASE("gradients flow only to grad-requiring leaves") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0), true);
  Var c = tape.constant(Tensor::scalar(5.0));
  Var y = mul(x, c);
  auto grads = tape.backward(y);
  CHECK(grads.count(x.id) == 1);
  CHECK(grads.count(c.id) == 0);
  CHECK(grads.at(x.id).item() == doctest::Approx(5.0));
}

TEST_CASE("unused leaves get zero gradients") {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0), true);
  Var u = tape.leaf(Tensor({2}, {1.0, 2.0}), true);
  auto grads = tape.backward(mul(x, x));
  CHECK(grads.at(u.id).values()[0] == 0.0);
  CHECK(grads.at(u.id).values()[1] == 0.0);
}

TEST_CASE("elementwise op gradients match central differences") {
  ParameterVector p;
  p.add("a", random_tensor({3, 4}, 1, 0.3, 1.7));
  p.add("b", random_tensor({3, 4}, 2, 0.4, 1.9));

  auto check = [&](const char* name, std::function<Var(Tape&, const ParamVars&)> build) {
    double err = tape_vs_fd(build, p);
    INFO(name);
    CHECK(err < 1e-7);
  };

  check("add", [](Tape&, const ParamVars& v) { return sum_all(add(v.at("a"), v.at("b"))); });
  check("sub", [](Tape&, const ParamVars& v) { return sum_all(sub(v.at("a"), v.at("b"))); });
  check("mul", [](Tape&, const ParamVars& v) { return sum_all(mul(v.at("a"), v.at("b"))); });
  check("div", [](Tape&, const ParamVars& v) { return sum_all(div(v.at("a"), v.at("b"))); });
  check("safe_div_smooth",
        [](Tape&, const ParamVars& v) { return sum_all(safe_div(v.at("a"), v.at("b"), 0.1)); });
  check("neg_addc_mulc", [](Tape&, const ParamVars& v) {
    return sum_all(mul_scalar(add_scalar(neg(v.at("a")), 0.7), 1.3));
  });
  check("relu", [](Tape&, const ParamVars& v) {
    return sum_all(relu(add_scalar(v.at("a"), -1.0)));
  });
  check("sigmoid", [](Tape&, const ParamVars& v) { return sum_all(sigmoid(v.at("a"))); });
  check("abs", [](Tape&, const ParamVars& v) {
    return sum_all(abs(add_scalar(v.at("a"), -1.0)));
  });
  check("clamp", [](Tape&, const ParamVars& v) {
    return sum_all(clamp(v.at("a"), 0.5, 1.5));
  });
  check("mean", [](Tape&, const ParamVars& v) { return mean_all(mul(v.at("a"), v.at("a"))); });
  check("reduce_sum_axis", [](Tape&, const ParamVars& v) {
    return mean_all(reduce_sum(mul(v.at("a"), v.at("b")), {1}));
  });
  check("reduce_mean_axis", [](Tape&, const ParamVars& v) {
    return sum_all(reduce_mean(v.at("a"), {0}));
  });
  check("reduce_max", [](Tape&, const ParamVars& v) {
    return sum_all(reduce_max(v.at("a"), 1));
  });
  check("reshape_slice_concat", [](Tape&, const ParamVars& v) {
    Var r = reshape(v.at("a"), {2, 6});
    Var s = slice(r, {0, 1}, {2, 3});
    Var c = concat({s, s}, 0);
    return sum_all(mul(c, c));
  });
}

TEST_CASE("matmul and conv gradients match central differences") {
  ParameterVector p;
  p.add("w", random_tensor({4, 3}, 3));
  p.add("x", random_tensor({3, 2}, 4));
  p.add("img", random_tensor({2, 3, 5, 5}, 5, 0.0, 1.0));
  p.add("k", random_tensor({4, 3, 3, 3}, 6, -0.5, 0.5));
  p.add("bias", random_tensor({4}, 7, -0.2, 0.2));

  double err = tape_vs_fd(
      [](Tape&, const ParamVars& v) { return sum_all(matmul(v.at("w"), v.at("x"))); }, p);
  CHECK(err < 1e-7);

  err = tape_vs_fd(
      [](Tape&, const ParamVars& v) {
        Var y = conv2d(v.at("img"), v.at("k"), v.at("bias"), 1, 1);
        return mean_all(mul(y, y));
      },
      p);
  CHECK(err < 1e-6);

  err = tape_vs_fd(
      [](Tape&, const ParamVars& v) {
        Var y = conv2d(v.at("img"), v.at("k"), 2, 0);
        return mean_all(mul(y, y));
      },
      p);
  CHECK(err < 1e-6);

  err = tape_vs_fd(
      [](Tape&, const ParamVars& v) {
        Var crop = slice(v.at("img"), {0, 0, 0, 0}, {2, 3, 4, 4});
        Var u = upsample2(avg_pool2(crop));
        return mean_all(mul(u, u));
      },
      p);
  CHECK(err < 1e-7);
}

TEST_CASE("conv2d known values") {
  Tape tape;
  Var img = tape.constant(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  Var k1 = tape.constant(Tensor({1, 1, 1, 1}, {2.0}));
  const auto& doubled = tape.value(conv2d(img, k1));
  CHECK(doubled.values() == std::vector<double>{2, 4, 6, 8});

  Var k3 = tape.constant(Tensor::full({1, 1, 3, 3}, 1.0));
  const auto& summed = tape.value(conv2d(img, k3, 1, 1));
  // Zero padding: each output is the sum of the in-bounds 3x3 neighbourhood.
  CHECK(summed.values() == std::vector<double>{10, 10, 10, 10});
}

TEST_CASE("pooling and upsampling known values") {
  Tape tape;
  Var img = tape.constant(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  CHECK(tape.value(avg_pool2(img)).values() == std::vector<double>{2.5});
  const auto& up = tape.value(upsample2(img));
  CHECK(up.shape() == Shape{1, 1, 4, 4});
  CHECK(up.values()[0] == 1.0);
  CHECK(up.values()[1] == 1.0);
  CHECK(up.values()[5] == 1.0);  // row 1 col 1 still in the top-left block
  CHECK(up.values()[6] == 2.0);  // row 1 col 2 lands in the top-right block
}

TEST_CASE("div rejects exact zeros, safe_div clamps") {
  Tape tape;
  Var a = tape.constant(Tensor({2}, {1.0, 2.0}));
  Var z = tape.constant(Tensor({2}, {1.0, 0.0}));
  CHECK_THROWS_AS(div(a, z), NumericError);
  const auto& safe = tape.value(safe_div(a, z, 0.5));
  CHECK(safe.values()[0] == doctest::Approx(1.0));
  CHECK(safe.values()[1] == doctest::Approx(4.0));
}

TEST_CASE("scalar broadcast works on binary ops") {
  Tape tape;
  Var a = tape.constant(Tensor({3}, {1.0, 2.0, 3.0}));
  Var s = tape.constant(Tensor::scalar(2.0));
  CHECK(tape.value(mul(a, s)).values() == std::vector<double>{2, 4, 6});
  CHECK(tape.value(add(s, a)).values() == std::vector<double>{3, 4, 5});
  Var b = tape.constant(Tensor({4}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("reduce_max keeps the axis and picks the first maximum") {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 3}, {1, 5, 5, 2, 0, 2}), true);
  Var m = reduce_max(a, 1);
  CHECK(tape.value(m).shape() == Shape{2, 1});
  CHECK(tape.value(m).values() == std::vector<double>{5, 2});
  auto grads = tape.backward(sum_all(m));
  CHECK(grads.at(a.id).values() == std::vector<double>{0, 1, 0, 1, 0, 0});
}

TEST_CASE("parameter vector round trips and algebra") {
  ParameterVector p;
  p.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  p.add("b", Tensor({3}, {5, 6, 7}));
  CHECK(p.total_len() == 7);
  CHECK(p.name(1) == "b");
  CHECK(p.has("w"));
  CHECK_FALSE(p.has("nope"));
  CHECK_THROWS_AS(p.add("w", Tensor::scalar(0.0)), ShapeError);

  std::vector<double> flat = p.flatten();
  CHECK(flat == std::vector<double>{1, 2, 3, 4, 5, 6, 7});
  ParameterVector q = p.unflatten(flat);
  CHECK(bitwise_equal(p, q));
  CHECK(same_structure(p, q));

  ParameterVector z = p.zeros_like();
  CHECK(norm(z) == 0.0);
  z = add_scaled(z, 2.0, p);
  CHECK(dot(z, p) == doctest::Approx(2.0 * dot(p, p)));
  z = scale(z, 0.5);
  CHECK(bitwise_equal(z, p));
  CHECK(all_finite(p));
}

TEST_CASE("tensor file round trip is exact at single precision") {
  namespace fs = std::filesystem;
  const std::string dir = "t_core_io";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Values chosen representable in f32 so the round trip is exact.
  Tensor t({2, 3}, {0.5, -1.25, 3.0, 0.0, 100.0, -0.875});
  save_tensor(dir + "/t.bglt", t);
  Tensor back = load_tensor(dir + "/t.bglt");
  CHECK(back.shape() == t.shape());
  CHECK(back.values() == t.values());

  std::ofstream bad(dir + "/bad.bglt", std::ios::binary);
  bad << "NOPE";
  bad.close();
  CHECK_THROWS_AS(load_tensor(dir + "/bad.bglt"), IoError);
  CHECK_THROWS_AS(load_tensor(dir + "/missing.bglt"), IoError);

  // A trailing byte after the payload is corruption, not slack.
  std::ofstream app(dir + "/t.bglt", std::ios::binary | std::ios::app);
  app << 'x';
  app.close();
  CHECK_THROWS_AS(load_tensor(dir + "/t.bglt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("grad_check flags a wrong analytic gradient") {
  ParameterVector p;
  p.add("x", Tensor({2}, {0.7, -0.3}));
  ScalarFn f = [](const ParameterVector& q) {
    const auto& v = q.tensor("x").values();
    return v[0] * v[0] + 3.0 * v[1];
  };
  ParameterVector good = p.unflatten({2.0 * 0.7, 3.0});
  CHECK(grad_check(f, p, good).max_rel_err < 1e-9);
  ParameterVector bad = p.unflatten({-2.0 * 0.7, 3.0});
  GradCheckResult res = grad_check(f, p, bad);
  CHECK(res.max_rel_err > 0.5);
  CHECK(res.worst_index == 0);
}
