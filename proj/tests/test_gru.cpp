#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "compnet/gradcheck.hpp"
#include "compnet/gru.hpp"
#include "compnet/reference.hpp"

using namespace compnet;

namespace {

// Equation-by-equation oracle for one CGM step in scalar complex
// arithmetic, built on the reference conv oracle.
CTensor<double> cgm_step_oracle(const CTensor<double>& z, const CTensor<double>& h,
                                CGMCell<float>& cell) {
  auto bias_of = [](const ComplexConv2d<float>& l) {
    std::vector<std::complex<double>> b;
    for (int64_t i = 0; i < l.bias.value.numel(); ++i)
      b.emplace_back(l.bias.value.re[i], l.bias.value.im[i]);
    return b;
  };
  auto act = [](CTensor<double> x, bool is_tanh) {
    for (int64_t i = 0; i < x.numel(); ++i) {
      if (is_tanh) {
        x.re[i] = std::tanh(x.re[i]);
        x.im[i] = std::tanh(x.im[i]);
      } else {
        x.re[i] = 1.0 / (1.0 + std::exp(-x.re[i]));
        x.im[i] = 1.0 / (1.0 + std::exp(-x.im[i]));
      }
    }
    return x;
  };
  auto zh = concat_channels<double>({z, h});
  auto r = act(reference::conv_oracle(zh, cell.conv_r.kernel.value.cast<double>(),
                                      bias_of(cell.conv_r), cell.conv_r.geom),
               false);
  auto u = act(reference::conv_oracle(zh, cell.conv_u.kernel.value.cast<double>(),
                                      bias_of(cell.conv_u), cell.conv_u.geom),
               false);
  auto zrh = concat_channels<double>({z, hadamard(r, h)});
  auto ht = act(reference::conv_oracle(zrh, cell.conv_h.kernel.value.cast<double>(),
                                       bias_of(cell.conv_h), cell.conv_h.geom),
                true);
  CTensor<double> one(u.shape);
  std::fill(one.re.begin(), one.re.end(), 1.0);
  return add(hadamard(sub(one, u), h), hadamard(u, ht));
}

}  // namespace

TEST_CASE("convex endpoints with stubbed gates are bit-exact") {
  auto h_prev = random_tensor<float>({1, 2, 4, 4}, 1, 0.1, 0.9);
  auto h_tilde = random_tensor<float>({1, 2, 4, 4}, 2, 0.1, 0.9);
  Tape<float> t;
  Var hp = t.input(h_prev), ht = t.input(h_tilde);

  CTensor<float> u0(h_prev.s4());  // U = 0+0i
  Var zero_gate = t.input(u0);
  CHECK(bit_equal(t.value(cgm_combine(t, zero_gate, hp, ht)), h_prev));

  CTensor<float> u1(h_prev.s4());  // U = 1+0i
  std::fill(u1.re.begin(), u1.re.end(), 1.0f);
  Var one_gate = t.input(u1);
  CHECK(bit_equal(t.value(cgm_combine(t, one_gate, hp, ht)), h_tilde));
}

TEST_CASE("cgm_step matches the equation-by-equation oracle") {
  CGMCell<float> cell("cell", 2, 7);
  auto z = random_tensor<float>({1, 2, 4, 4}, 3);
  auto h = random_tensor<float>({1, 2, 4, 4}, 4);
  Tape<float> t;
  Var out = cgm_step(t, t.input(z), t.input(h), cell);
  auto expect = cgm_step_oracle(z.cast<double>(), h.cast<double>(), cell);
  CHECK(max_abs_diff(t.value(out).cast<double>(), expect) < 1e-5);
}

TEST_CASE("gate ranges are strict") {
  CGMCell<float> cell("cell", 2, 9);
  auto z = random_tensor<float>({1, 2, 6, 6}, 5, -2, 2);
  auto h = random_tensor<float>({1, 2, 6, 6}, 6, -2, 2);
  Tape<float> t;
  Var zh = concat_channels(t, {t.input(z), t.input(h)});
  auto r = t.value(split_sigmoid(t, cell.conv_r.forward(t, zh)));
  auto u = t.value(split_sigmoid(t, cell.conv_u.forward(t, zh)));
  for (const auto* g : {&r, &u})
    for (int64_t i = 0; i < g->numel(); ++i) {
      CHECK(g->re[i] > 0.0f);
      CHECK(g->re[i] < 1.0f);
      CHECK(g->im[i] > 0.0f);
      CHECK(g->im[i] < 1.0f);
    }
  auto ht = t.value(split_tanh(t, cell.conv_h.forward(t, zh)));
  for (int64_t i = 0; i < ht.numel(); ++i) {
    CHECK(ht.re[i] > -1.0f);
    CHECK(ht.re[i] < 1.0f);
    CHECK(ht.im[i] > -1.0f);
    CHECK(ht.im[i] < 1.0f);
  }
}

TEST_CASE("length-1 sequence equals single steps from zero state") {
  CGMCell<float> fwd("fwd", 2, 11), bwd("bwd", 2, 12);
  auto z = random_tensor<float>({1, 2, 4, 4}, 7);
  Tape<float> t;
  Var zin = t.input(z);
  auto outs = run_bidirectional(t, {zin}, fwd, bwd);
  REQUIRE(outs.size() == 1);
  Var zero = t.input(CTensor<float>(1, 2, 4, 4));
  Var f = cgm_step(t, zin, zero, fwd);
  Var b = cgm_step(t, zin, zero, bwd);
  CHECK(bit_equal(t.value(outs[0]), t.value(concat_channels(t, {f, b}))));
}

TEST_CASE("time-reversal symmetry with swapped cells") {
  CGMCell<float> fwd("fwd", 2, 13), bwd("bwd", 2, 14);
  std::vector<CTensor<float>> frames = {random_tensor<float>({1, 2, 4, 4}, 8),
                                        random_tensor<float>({1, 2, 4, 4}, 9),
                                        random_tensor<float>({1, 2, 4, 4}, 10)};
  Tape<float> t;
  std::vector<Var> seq, rev;
  for (auto& f : frames) seq.push_back(t.input(f));
  for (auto it = frames.rbegin(); it != frames.rend(); ++it)
    rev.push_back(t.input(*it));
  auto orig = run_bidirectional(t, seq, fwd, bwd);
  auto flipped = run_bidirectional(t, rev, bwd, fwd);
  for (size_t k = 0; k < 3; ++k) {
    // reversed run, position 2-k, halves swapped == original position k
    auto a = t.value(orig[k]);
    auto f_half = slice_channels(t.value(flipped[2 - k]), 2, 4);
    auto b_half = slice_channels(t.value(flipped[2 - k]), 0, 2);
    auto swapped = concat_channels<float>({f_half, b_half});
    CHECK(bit_equal(a, swapped));
  }
}

TEST_CASE("three identical frames still accumulate recurrence") {
  CGMCell<float> fwd("fwd", 2, 15), bwd("bwd", 2, 16);
  auto z = random_tensor<float>({1, 2, 4, 4}, 11);
  Tape<float> t;
  Var zin = t.input(z);
  auto outs = run_bidirectional(t, {zin, zin, zin}, fwd, bwd);
  // forward hidden states: step oracle applied iteratively
  auto zd = z.cast<double>();
  CTensor<double> h(std::vector<int64_t>{1, 2, 4, 4});
  std::vector<CTensor<double>> expect_f;
  for (int k = 0; k < 3; ++k) {
    h = cgm_step_oracle(zd, h, fwd);
    expect_f.push_back(h);
  }
  CHECK(max_abs_diff(expect_f[0], expect_f[1]) > 1e-4);  // recurrence matters
  for (int k = 0; k < 3; ++k) {
    auto got_f = slice_channels(t.value(outs[k]), 0, 2).cast<double>();
    CHECK(max_abs_diff(got_f, expect_f[k]) < 1e-5);
  }
}

TEST_CASE("empty sequence rejected") {
  CGMCell<float> fwd("fwd", 2, 17), bwd("bwd", 2, 18);
  Tape<float> t;
  CHECK_THROWS_AS(run_bidirectional(t, {}, fwd, bwd), ShapeError);
}

TEST_CASE("gradients flow through two unrolled steps") {
  CGMCell<double> cell("cell", 2, 19);
  Parameter<double> z0("z0", random_tensor<double>({1, 2, 4, 4}, 12));
  Parameter<double> h0("h0", random_tensor<double>({1, 2, 4, 4}, 13));
  std::vector<Parameter<double>*> params{&z0, &h0};
  cell.params(params);
  auto build = [&](Tape<double>& t) {
    Var h = t.param(h0);
    Var z = t.param(z0);
    h = cgm_step(t, z, h, cell);
    h = cgm_step(t, z, h, cell);  // shared weights across time
    return reduce_sum_abs2(t, h);
  };
  auto report = grad_check("gru_2step", build, params, 1e-4, 21);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-3));
}

TEST_CASE("real ConvGRU variant gradients") {
  RealGruCell<double> cell("rcell", 3, 2, 23);
  Parameter<double> z0("z0", random_tensor<double>({1, 3, 4, 4}, 14));
  // real carrier: zero imaginary plane
  std::fill(z0.value.im.begin(), z0.value.im.end(), 0.0);
  Parameter<double> h0("h0", random_tensor<double>({1, 2, 4, 4}, 15));
  std::fill(h0.value.im.begin(), h0.value.im.end(), 0.0);
  std::vector<Parameter<double>*> params{&z0, &h0};
  cell.params(params);
  auto build = [&](Tape<double>& t) {
    Var h = real_gru_step(t, t.param(z0), t.param(h0), cell);
    return reduce_sum_abs2(t, h);
  };
  auto report = grad_check("real_gru", build, params, 1e-4, 24);
  CHECK(report.pass(1e-3));
}
