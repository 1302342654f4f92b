#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "compnet/csfl.hpp"
#include "compnet/gradcheck.hpp"
#include "compnet/reference.hpp"

using namespace compnet;

namespace {

template <typename T>
CTensor<T> eval1(const std::function<Var(Tape<T>&)>& f) {
  Tape<T> t;
  return t.value(f(t));
}

// identity 1x1 complex conv: K_R = I per channel, zero bias
template <typename T>
void set_identity_pw(ComplexConv2d<T>& l, int64_t c_in) {
  std::fill(l.kernel.value.re.begin(), l.kernel.value.re.end(), T(0));
  std::fill(l.kernel.value.im.begin(), l.kernel.value.im.end(), T(0));
  int64_t co = l.kernel.value.shape[0], ci = l.kernel.value.shape[1];
  for (int64_t c = 0; c < std::min(co, ci); ++c)
    l.kernel.value.re[c * ci + c] = T(1);
  (void)c_in;
  std::fill(l.bias.value.re.begin(), l.bias.value.re.end(), T(0));
  std::fill(l.bias.value.im.begin(), l.bias.value.im.end(), T(0));
}

// centered delta depthwise kernel scaled by a complex constant
template <typename T>
void set_delta_dw(ComplexConv2d<T>& l, std::complex<double> alpha) {
  std::fill(l.kernel.value.re.begin(), l.kernel.value.re.end(), T(0));
  std::fill(l.kernel.value.im.begin(), l.kernel.value.im.end(), T(0));
  int64_t co = l.kernel.value.shape[0];
  for (int64_t c = 0; c < co; ++c) {
    l.kernel.value.re[c * 9 + 4] = static_cast<T>(alpha.real());
    l.kernel.value.im[c * 9 + 4] = static_cast<T>(alpha.imag());
  }
  std::fill(l.bias.value.re.begin(), l.bias.value.re.end(), T(0));
  std::fill(l.bias.value.im.begin(), l.bias.value.im.end(), T(0));
}

}  // namespace

TEST_CASE("spatial branch: zero input with zero biases gives zero output") {
  CSFB<float> blk("b", 4, ClnMode::kWhiten, true, 3);
  CTensor<float> zero(1, 4, 8, 8);
  auto out = eval1<float>([&](Tape<float>& t) {
    return blk.spatial_branch(t, t.input(zero));
  });
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.re[i] == 0.0f);
    CHECK(out.im[i] == 0.0f);
  }
}

TEST_CASE("spatial branch near-identity configuration") {
  CSFB<float> blk("b", 3, ClnMode::kWhiten, false, 5);
  set_identity_pw(blk.sp_pw1, 3);
  set_identity_pw(blk.sp_pw2, 6);
  set_delta_dw(blk.sp_dw, {1.0, 0.0});
  // components far into GeLU's linear region
  auto x = random_tensor<float>({1, 3, 6, 6}, 7, 8.0, 12.0);
  auto out = eval1<float>([&](Tape<float>& t) {
    return blk.spatial_branch(t, t.input(x));
  });
  CHECK(max_abs_diff(out, x) < 1e-3);
}

TEST_CASE("spatial branch matches composition oracle") {
  CSFB<float> blk("b", 2, ClnMode::kWhiten, false, 9);
  blk.sp_pw2 = ComplexConv2d<float>::conv("b.sp_pw2r", 4, 2, 1, {}, true,
                                          InitScheme::kUniformFanScaled, 10);
  auto x = random_tensor<float>({1, 2, 5, 5}, 11);
  auto got = eval1<float>([&](Tape<float>& t) {
    return blk.spatial_branch(t, t.input(x));
  });
  auto bias_of = [](const ComplexConv2d<float>& l) {
    std::vector<std::complex<double>> b;
    for (int64_t i = 0; i < l.bias.value.numel(); ++i)
      b.emplace_back(l.bias.value.re[i], l.bias.value.im[i]);
    return b;
  };
  auto v = reference::conv_oracle(x.cast<double>(), blk.sp_pw1.kernel.value.cast<double>(),
                                  bias_of(blk.sp_pw1), blk.sp_pw1.geom);
  v = reference::conv_oracle(v, blk.sp_dw.kernel.value.cast<double>(),
                             bias_of(blk.sp_dw), blk.sp_dw.geom);
  for (int64_t i = 0; i < v.numel(); ++i) {  // exact-CDF split GeLU
    v.re[i] = v.re[i] * 0.5 * std::erfc(-v.re[i] / std::sqrt(2.0));
    v.im[i] = v.im[i] * 0.5 * std::erfc(-v.im[i] / std::sqrt(2.0));
  }
  v = reference::conv_oracle(v, blk.sp_pw2.kernel.value.cast<double>(),
                             bias_of(blk.sp_pw2), blk.sp_pw2.geom);
  CHECK(max_abs_diff(got.cast<double>(), v) < 1e-5);
}

TEST_CASE("frequency branch identity chain is an FFT roundtrip") {
  CSFB<float> blk("b", 3, ClnMode::kWhiten, true, 13);
  set_identity_pw(blk.fq_pw1, 3);
  set_identity_pw(blk.fq_pw2, 6);
  set_delta_dw(blk.fq_dw, {1.0, 0.0});
  blk.linear_mode = true;  // bypass sGeLU so the chain is exactly linear
  auto x = random_tensor<float>({1, 3, 8, 8}, 14);
  auto out = eval1<float>([&](Tape<float>& t) {
    return blk.frequency_branch(t, t.input(x));
  });
  CHECK(max_abs_diff(out, x) < 1e-4);
}

TEST_CASE("frequency branch pointwise spectral scaling equals global complex gain") {
  const std::complex<double> alpha{0.6, -1.1};
  CSFB<float> blk("b", 2, ClnMode::kWhiten, true, 15);
  set_identity_pw(blk.fq_pw1, 2);
  set_identity_pw(blk.fq_pw2, 4);
  set_delta_dw(blk.fq_dw, alpha);
  blk.linear_mode = true;
  auto x = random_tensor<float>({1, 2, 6, 6}, 16);
  auto out = eval1<float>([&](Tape<float>& t) {
    return blk.frequency_branch(t, t.input(x));
  });
  CHECK(max_abs_diff(out, scale(x, alpha)) < 1e-4);
}

TEST_CASE("frequency branch matches fft-ops-ifft composition oracle") {
  CSFB<float> blk("b", 2, ClnMode::kWhiten, true, 17);
  blk.fq_pw2 = ComplexConv2d<float>::conv("b.fq_pw2r", 4, 2, 1, {}, true,
                                          InitScheme::kUniformFanScaled, 18);
  auto x = random_tensor<float>({1, 2, 6, 6}, 19);
  auto got = eval1<float>([&](Tape<float>& t) {
    return blk.frequency_branch(t, t.input(x));
  });
  auto bias_of = [](const ComplexConv2d<float>& l) {
    std::vector<std::complex<double>> b;
    for (int64_t i = 0; i < l.bias.value.numel(); ++i)
      b.emplace_back(l.bias.value.re[i], l.bias.value.im[i]);
    return b;
  };
  auto spec = reference::naive_dft2d(x, -1);
  auto v = reference::conv_oracle(spec, blk.fq_pw1.kernel.value.cast<double>(),
                                  bias_of(blk.fq_pw1), blk.fq_pw1.geom);
  v = reference::conv_oracle(v, blk.fq_dw.kernel.value.cast<double>(),
                             bias_of(blk.fq_dw), blk.fq_dw.geom);
  for (int64_t i = 0; i < v.numel(); ++i) {
    v.re[i] = v.re[i] * 0.5 * std::erfc(-v.re[i] / std::sqrt(2.0));
    v.im[i] = v.im[i] * 0.5 * std::erfc(-v.im[i] / std::sqrt(2.0));
  }
  v = reference::conv_oracle(v, blk.fq_pw2.kernel.value.cast<double>(),
                             bias_of(blk.fq_pw2), blk.fq_pw2.geom);
  auto back = reference::naive_dft2d(v, +1);
  for (auto& e : back.re) e /= 36.0;
  for (auto& e : back.im) e /= 36.0;
  CHECK(max_abs_diff(got.cast<double>(), back) < 1e-4);
}

TEST_CASE("fresh CSFB is an exact identity (zero-initialized pw2/pw4)") {
  CSFB<float> blk("b", 4, ClnMode::kWhiten, true, 21);
  auto x = random_tensor<float>({2, 4, 8, 8}, 22);
  auto out = eval1<float>([&](Tape<float>& t) { return blk.forward(t, t.input(x)); });
  CHECK(bit_equal(out, x));
}

TEST_CASE("csfb_forward matches the two-equation composition") {
  CSFB<float> blk("b", 2, ClnMode::kWhiten, true, 23);
  blk.sp_pw2 = ComplexConv2d<float>::conv("b.sp2", 4, 2, 1, {}, true,
                                          InitScheme::kUniformFanScaled, 24);
  blk.fq_pw2 = ComplexConv2d<float>::conv("b.fq2", 4, 2, 1, {}, true,
                                          InitScheme::kUniformFanScaled, 25);
  blk.ff_pw4 = ComplexConv2d<float>::conv("b.ff4", 4, 2, 1, {}, true,
                                          InitScheme::kUniformFanScaled, 26);
  auto x = random_tensor<float>({1, 2, 6, 6}, 27);
  auto got = eval1<float>([&](Tape<float>& t) { return blk.forward(t, t.input(x)); });
  auto expect = eval1<float>([&](Tape<float>& t) {
    Var xv = t.input(x);
    Var xp = blk.cln1.forward(t, xv);
    Var mid = add(t, add(t, xv, blk.spatial_branch(t, xp)), blk.frequency_branch(t, xp));
    Var ff = blk.ff_pw4.forward(
        t, split_gelu(t, blk.ff_pw3.forward(t, blk.cln2.forward(t, mid))));
    return add(t, ff, mid);
  });
  CHECK(max_abs_diff(got.cast<double>(), expect.cast<double>()) < 1e-4);
}

TEST_CASE("unet shape contract and zero propagation") {
  UNetTrunk<float> unet("u", 6, 4, 3, 2, ClnMode::kWhiten, true, 31);
  for (auto [h, w] : {std::pair<int64_t, int64_t>{64, 64}, {48, 64}, {36, 36}}) {
    CTensor<float> x(1, 6, h, w);
    Tape<float> t;
    auto outs = unet.forward(t, t.input(x));
    for (auto& o : outs) {
      Shape4 s = t.value(o).s4();
      CHECK(s.c == 4);
      CHECK(s.h == h);
      CHECK(s.w == w);
    }
    // zero input with the zero-initialized biases stays zero
    for (auto& o : outs)
      for (int64_t i = 0; i < t.value(o).numel(); ++i) {
        CHECK(t.value(o).re[i] == 0.0f);
        CHECK(t.value(o).im[i] == 0.0f);
      }
  }
}

TEST_CASE("unet rejects indivisible extents") {
  UNetTrunk<float> unet("u", 4, 4, 3, 1, ClnMode::kWhiten, false, 33);
  CTensor<float> x(1, 4, 30, 32);
  Tape<float> t;
  CHECK_THROWS_AS(unet.forward(t, t.input(x)), ShapeError);
}

TEST_CASE("doubling base width roughly quadruples parameters") {
  UNetTrunk<float> a("u", 6 * 8, 8, 3, 2, ClnMode::kWhiten, true, 35);
  UNetTrunk<float> b("u", 6 * 16, 16, 3, 2, ClnMode::kWhiten, true, 35);
  double ratio = static_cast<double>(b.param_count()) / a.param_count();
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("CSFB gradients pass finite differences (FFT path included)") {
  CSFB<double> blk("b", 8, ClnMode::kWhiten, true, 41);
  // non-trivial pw2/pw4 so all paths carry gradient
  blk.sp_pw2 = ComplexConv2d<double>::conv("b.sp2", 16, 8, 1, {}, true,
                                           InitScheme::kUniformFanScaled, 42);
  blk.fq_pw2 = ComplexConv2d<double>::conv("b.fq2", 16, 8, 1, {}, true,
                                           InitScheme::kUniformFanScaled, 43);
  blk.ff_pw4 = ComplexConv2d<double>::conv("b.ff4", 16, 8, 1, {}, true,
                                           InitScheme::kUniformFanScaled, 44);
  auto x = random_tensor<double>({1, 8, 8, 8}, 45);
  std::vector<Parameter<double>*> params;
  blk.params(params);
  auto report = grad_check(
      "csfb",
      [&](Tape<double>& t) { return reduce_mean_abs2(t, blk.forward(t, t.input(x))); },
      params, 1e-4, 46, 16);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-3));
}

TEST_CASE("real CSFB identity at init and gradients") {
  RealCSFB<double> blk("rb", 6, true, 51);
  auto x = random_tensor<double>({1, 6, 8, 8}, 52);
  std::fill(x.im.begin(), x.im.end(), 0.0);
  auto out = eval1<double>([&](Tape<double>& t) { return blk.forward(t, t.input(x)); });
  CHECK(bit_equal(out, x));

  blk.sp_pw2 = RealConv2d<double>::conv("rb.sp2", 12, 6, 1, {}, true,
                                        InitScheme::kUniformFanScaled, 53);
  blk.fq_pw2 = RealConv2d<double>::conv("rb.fq2", 6, 12, 1, {}, true,
                                        InitScheme::kUniformFanScaled, 54);
  blk.ff_pw4 = RealConv2d<double>::conv("rb.ff4", 12, 6, 1, {}, true,
                                        InitScheme::kUniformFanScaled, 55);
  std::vector<Parameter<double>*> params;
  blk.params(params);
  auto report = grad_check(
      "real_csfb",
      [&](Tape<double>& t) { return reduce_mean_abs2(t, blk.forward(t, t.input(x))); },
      params, 1e-4, 56, 12);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-3));
}
