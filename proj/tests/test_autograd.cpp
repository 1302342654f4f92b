#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "compnet/autograd.hpp"
#include "compnet/gradcheck.hpp"
#include "compnet/ops_conv.hpp"
#include "compnet/optim.hpp"

using namespace compnet;

TEST_CASE("closed-form quadratic: loss = sum real(p*p)") {
  // real(p^2) = x^2 - y^2, so d/dx = 2x, d/dy = -2y
  CTensor<double> v({2, 2});
  std::fill(v.re.begin(), v.re.end(), 2.0);
  Parameter<double> p("p", v);
  Tape<double> t;
  Var pv = t.param(p);
  Var loss = reduce_sum_real(t, hadamard(t, pv, pv));
  t.backward(loss);
  for (auto g : p.grad.re) CHECK(g == doctest::Approx(4.0));
  for (auto g : p.grad.im) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("unreachable parameter keeps zero grad") {
  Parameter<double> used("used", random_tensor<double>({3}, 1));
  Parameter<double> frozen("frozen", random_tensor<double>({3}, 2));
  Tape<double> t;
  Var u = t.param(used);
  t.param(frozen);  // registered but not consumed by the loss
  Var loss = reduce_sum_abs2(t, u);
  t.backward(loss);
  for (auto g : frozen.grad.re) CHECK(g == 0.0);
  for (auto g : frozen.grad.im) CHECK(g == 0.0);
  bool any = false;
  for (auto g : used.grad.re) any |= (g != 0.0);
  CHECK(any);
}

TEST_CASE("non-scalar loss rejected; backward before forward rejected") {
  Tape<double> t;
  CHECK_THROWS_AS(t.backward(Var{0}), NumericError);
  Var x = t.input(random_tensor<double>({2, 2}, 3));
  CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("gradient linearity") {
  Parameter<double> p("p", random_tensor<double>({4, 3}, 5));
  const double alpha = 1.7;

  Parameter<double> pa = p, pb = p, pc = p;
  {  // alpha*L1 + L2
    Tape<double> t;
    Var pv = t.param(pa);
    Var l1 = reduce_sum_abs2(t, split_tanh(t, pv));
    Var l2 = reduce_sum_real(t, hadamard(t, pv, pv));
    pa.zero_grad();
    t.backward(add(t, scale(t, l1, {alpha, 0.0}), l2));
  }
  {  // L1 alone
    Tape<double> t;
    Var pv = t.param(pb);
    pb.zero_grad();
    t.backward(reduce_sum_abs2(t, split_tanh(t, pv)));
  }
  {  // L2 alone
    Tape<double> t;
    Var pv = t.param(pc);
    pc.zero_grad();
    t.backward(reduce_sum_real(t, hadamard(t, pv, pv)));
  }
  for (int64_t i = 0; i < p.value.numel(); ++i) {
    CHECK(pa.grad.re[i] ==
          doctest::Approx(alpha * pb.grad.re[i] + pc.grad.re[i]).epsilon(1e-5));
    CHECK(pa.grad.im[i] ==
          doctest::Approx(alpha * pb.grad.im[i] + pc.grad.im[i]).epsilon(1e-5));
  }
}

TEST_CASE("backward is bit-deterministic") {
  Parameter<double> p("p", random_tensor<double>({2, 4, 6, 6}, 7));
  auto cell = ComplexConv2d<double>::conv("c", 4, 4, 3, {.stride = 1, .pad = 1},
                                          true, InitScheme::kUniformFanScaled, 9);
  auto run = [&]() {
    p.zero_grad();
    cell.kernel.zero_grad();
    cell.bias.zero_grad();
    Tape<double> t;
    Var x = t.param(p);
    Var y = cell.forward(t, split_gelu(t, x));
    t.backward(reduce_sum_abs2(t, y));
    return std::make_pair(p.grad, cell.kernel.grad);
  };
  auto [g1, k1] = run();
  auto [g2, k2] = run();
  CHECK(bit_equal(g1, g2));
  CHECK(bit_equal(k1, k2));
}

TEST_CASE("random 3-layer complex-conv chain passes finite differences") {
  auto c1 = ComplexConv2d<double>::conv("c1", 2, 3, 3, {.stride = 1, .pad = 1},
                                        true, InitScheme::kUniformFanScaled, 11);
  auto c2 = ComplexConv2d<double>::conv("c2", 3, 3, 3, {.stride = 2, .pad = 1},
                                        true, InitScheme::kUniformFanScaled, 12);
  auto c3 = ComplexConv2d<double>::conv("c3", 3, 2, 1, {.stride = 1, .pad = 0},
                                        true, InitScheme::kUniformFanScaled, 13);
  auto x = random_tensor<double>({1, 2, 8, 8}, 14);
  std::vector<Parameter<double>*> params;
  c1.params(params);
  c2.params(params);
  c3.params(params);
  auto build = [&](Tape<double>& t) {
    Var v = t.input(x);
    v = split_gelu(t, c1.forward(t, v));
    v = split_tanh(t, c2.forward(t, v));
    v = c3.forward(t, v);
    return reduce_sum_abs2(t, v);
  };
  auto report = grad_check("conv_chain", build, params, 1e-4, 3);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-3));
}

TEST_CASE("grad_check detects non-determinism") {
  int counter = 0;
  Parameter<double> p("p", random_tensor<double>({2}, 1));
  auto build = [&](Tape<double>& t) {
    Var v = t.param(p);
    Var l = reduce_sum_abs2(t, v);
    return scale(t, l, {1.0 + 0.001 * (counter++), 0.0});
  };
  CHECK_THROWS_AS(grad_check("flaky", build, {&p}), NumericError);
}

TEST_CASE("grad_check corrupt hook names the failing fragment") {
  Parameter<double> p("p", random_tensor<double>({4}, 2));
  auto build = [&](Tape<double>& t) { return reduce_sum_abs2(t, t.param(p)); };
  auto clean = grad_check("frag", build, {&p});
  CHECK(clean.pass(1e-3));
  auto corrupted = grad_check("frag", build, {&p}, 1e-4, 0, 64, "frag");
  CHECK(!corrupted.pass(1e-3));
  CHECK(corrupted.name == "frag");
}

TEST_CASE("adam: zero grad leaves parameters unchanged") {
  Parameter<float> p("p", random_tensor<float>({5}, 3));
  auto before = p.value;
  Adam<float> opt;
  opt.init({&p});
  p.zero_grad();
  opt.step({&p});
  CHECK(bit_equal(p.value, before));
}

TEST_CASE("adam: constant gradient moves against its sign") {
  Parameter<float> p("p", CTensor<float>({1}));
  Adam<float> opt;
  opt.lr = 1e-2;
  opt.init({&p});
  for (int i = 0; i < 10; ++i) {
    p.grad.re[0] = 2.5f;  // positive grad -> parameter must decrease
    opt.step({&p});
  }
  CHECK(p.value.re[0] < 0.0f);
}

TEST_CASE("adam: quadratic (x-3)^2 converges from 0") {
  Parameter<float> p("x", CTensor<float>({1}));
  Adam<float> opt;
  opt.lr = 1e-2;
  opt.init({&p});
  for (int i = 0; i < 2000; ++i) {
    p.grad.re[0] = 2.0f * (p.value.re[0] - 3.0f);
    opt.step({&p});
    if (std::abs(p.value.re[0] - 3.0f) < 1e-2) break;
  }
  CHECK(std::abs(p.value.re[0] - 3.0f) < 1e-2);
}

TEST_CASE("adam rejects non-finite gradients") {
  Parameter<float> p("p", CTensor<float>({2}));
  Adam<float> opt;
  opt.init({&p});
  p.grad.re[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(opt.step({&p}), NumericError);
}

TEST_CASE("finite-value sweep surfaces NaNs with the op name") {
  Tape<float> t;
  CTensor<float> bad({2});
  bad.re[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(t.input(std::move(bad)), NumericError);
}
