#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "compnet/gradcheck.hpp"
#include "compnet/model.hpp"

using namespace compnet;

namespace {

template <typename T>
FrameWindow<T> random_window(int64_t n, int64_t ce, int64_t h, int64_t w,
                             uint64_t seed) {
  FrameWindow<T> win;
  for (int k = 0; k < 3; ++k) {
    win.frames[k] = random_tensor<T>({n, 3, h, w}, seed + k, 0.0, 1.0);
    std::fill(win.frames[k].im.begin(), win.frames[k].im.end(), T(0));
    win.events[k] = random_tensor<T>({n, ce, h, w}, seed + 10 + k, -2.0, 2.0);
    std::fill(win.events[k].im.begin(), win.events[k].im.end(), T(0));
  }
  return win;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = 4;
  cfg.event_bins = 2;
  cfg.levels = 2;
  cfg.blocks = 1;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("embedding: modality separation and re-execution equivalence") {
  ModelConfig cfg = tiny_config();
  ComplexCompEvent<float> model(cfg);
  auto I = random_tensor<float>({1, 3, 8, 8}, 1, 0.0, 1.0);
  auto E = random_tensor<float>({1, 2, 8, 8}, 2, -1.0, 1.0);
  std::fill(I.im.begin(), I.im.end(), 0.0f);
  std::fill(E.im.begin(), E.im.end(), 0.0f);

  // Z = F_R(I) + i F_I(E); each part matches its independently run network
  Tape<float> t;
  Var z = make_complex(t, model.embed_frame.forward(t, t.input(I)),
                       model.embed_event.forward(t, t.input(E)));
  Tape<float> t2;
  auto fr = t2.value(model.embed_frame.forward(t2, t2.input(I)));
  auto fi = t2.value(model.embed_event.forward(t2, t2.input(E)));
  const auto& zv = t.value(z);
  CHECK(zv.re == fr.re);
  CHECK(zv.im == fi.re);

  // zero events: imag(Z) is the bias-only response, independent of the frame
  CTensor<float> zero_e(1, 2, 8, 8);
  Tape<float> t3;
  auto za = t3.value(make_complex(t3, model.embed_frame.forward(t3, t3.input(I)),
                                  model.embed_event.forward(t3, t3.input(zero_e))));
  auto I2 = random_tensor<float>({1, 3, 8, 8}, 9, 0.0, 1.0);
  std::fill(I2.im.begin(), I2.im.end(), 0.0f);
  Tape<float> t4;
  auto zb = t4.value(make_complex(t4, model.embed_frame.forward(t4, t4.input(I2)),
                                  model.embed_event.forward(t4, t4.input(zero_e))));
  CHECK(za.im == zb.im);
}

TEST_CASE("identity restoration at init (zero-initialized projections)") {
  for (const char* fusion : {"complex", "real-concat"}) {
    CAPTURE(fusion);
    ModelConfig cfg = tiny_config();
    cfg.fusion = fusion;
    auto model = build_model<float>(cfg);
    auto win = random_window<float>(1, 2, 8, 8, 31);
    Tape<float> t;
    auto out = model->forward(t, win);
    for (int k = 0; k < 3; ++k) CHECK(bit_equal(t.value(out[k]), win.frames[k]));
  }
}

TEST_CASE("output shape equals input shape for awkward extents") {
  ModelConfig cfg = tiny_config();
  auto model = build_model<float>(cfg);
  for (auto [h, w] : {std::pair<int64_t, int64_t>{100, 180}, {37, 50}, {16, 16}}) {
    auto win = random_window<float>(1, 2, h, w, 41);
    Tape<float> t;
    auto out = model->forward(t, win);
    for (int k = 0; k < 3; ++k) {
      Shape4 s = t.value(out[k]).s4();
      CHECK(s.c == 3);
      CHECK(s.h == h);
      CHECK(s.w == w);
    }
  }
}

TEST_CASE("window loss: floor, closed form, symmetry") {
  std::array<CTensor<float>, 3> target;
  std::array<CTensor<float>, 3> same;
  for (int k = 0; k < 3; ++k) {
    target[k] = random_tensor<float>({1, 3, 4, 4}, 51 + k, 0.0, 1.0);
    std::fill(target[k].im.begin(), target[k].im.end(), 0.0f);
    same[k] = target[k];
  }
  Tape<float> t;
  std::array<Var, 3> pred{t.input(same[0]), t.input(same[1]), t.input(same[2])};
  auto l0 = t.value(window_loss(t, pred, target));
  CHECK(l0.re[0] == doctest::Approx(1e-3).epsilon(1e-6));  // Charbonnier floor

  std::array<CTensor<float>, 3> shifted = target;
  for (int k = 0; k < 3; ++k)
    for (auto& v : shifted[k].re) v += 0.5f;
  std::array<Var, 3> pred2{t.input(shifted[0]), t.input(shifted[1]),
                           t.input(shifted[2])};
  auto l1 = t.value(window_loss(t, pred2, target));
  CHECK(l1.re[0] == doctest::Approx(std::sqrt(0.25 + 1e-6)).epsilon(1e-6));

  // symmetry: swap prediction and target
  std::array<Var, 3> tv{t.input(target[0]), t.input(target[1]), t.input(target[2])};
  auto l2 = t.value(window_loss(t, tv, shifted));
  CHECK(l1.re[0] == doctest::Approx(l2.re[0]));
}

TEST_CASE("all ablation variants build and preserve shape") {
  for (char v : {'a', 'b', 'c', 'd', 'e', 'f', 'g'}) {
    CAPTURE(v);
    ModelConfig cfg = ModelConfig::variant(v, tiny_config());
    auto model = build_model<float>(cfg);
    auto win = random_window<float>(1, 2, 12, 12, 61);
    Tape<float> t;
    auto out = model->forward(t, win);
    for (int k = 0; k < 3; ++k) {
      Shape4 s = t.value(out[k]).s4();
      CHECK(s.h == 12);
      CHECK(s.w == 12);
    }
  }
}

TEST_CASE("real-concat variant parameter count within 10% of the full model") {
  ModelConfig cfg;  // desk-scale default: C = 16
  cfg.channels = 16;
  cfg.event_bins = 5;
  auto full = build_model<float>(cfg);
  auto real = build_model<float>(ModelConfig::variant('b', cfg));
  double ratio = static_cast<double>(real->param_count()) / full->param_count();
  INFO("full ", full->param_count(), " real ", real->param_count(), " ratio ", ratio);
  CHECK(ratio > 0.9);
  CHECK(ratio < 1.1);
}

TEST_CASE("unknown switch values are rejected") {
  ModelConfig cfg = tiny_config();
  cfg.temporal = "lstm";
  CHECK_THROWS_AS(build_model<float>(cfg), ConfigError);
  cfg = tiny_config();
  cfg.cln = "nope";
  CHECK_THROWS_AS(build_model<float>(cfg), ConfigError);
}

TEST_CASE("config kv roundtrip") {
  ModelConfig cfg = ModelConfig::variant('e', tiny_config());
  cfg.seed = 99;
  auto back = ModelConfig::from_kv(cfg.to_kv());
  CHECK(back.channels == cfg.channels);
  CHECK(back.freq_branch == "off");
  CHECK(back.seed == 99);
}

TEST_CASE("gradient reaches every parameter group") {
  ModelConfig cfg = tiny_config();
  ComplexCompEvent<float> model(cfg);
  auto win = random_window<float>(1, 2, 8, 8, 71);
  std::array<CTensor<float>, 3> targets;
  for (int k = 0; k < 3; ++k) {
    targets[k] = random_tensor<float>({1, 3, 8, 8}, 81 + k, 0.0, 1.0);
    std::fill(targets[k].im.begin(), targets[k].im.end(), 0.0f);
  }
  auto backward_once = [&]() {
    for (auto* p : model.parameters()) p->zero_grad();
    Tape<float> t;
    auto out = model.forward(t, win);
    t.backward(window_loss(t, out, targets));
  };
  auto group_has_grad = [&](const std::string& prefix) {
    for (auto* p : model.parameters()) {
      if (p->name.rfind(prefix, 0) != 0) continue;
      for (auto g : p->grad.re)
        if (g != 0.0f) return true;
      for (auto g : p->grad.im)
        if (g != 0.0f) return true;
    }
    return false;
  };

  // at step 0 the zero-initialized projections still receive gradients
  backward_once();
  CHECK(group_has_grad("proj"));

  // away from the zero-init state, every group participates
  for (int k = 0; k < 3; ++k)
    model.proj[k].kernel.value =
        random_tensor<float>(model.proj[k].kernel.value.shape, 700 + k);
  backward_once();
  CHECK(group_has_grad("embed.frame"));
  CHECK(group_has_grad("embed.event"));
  CHECK(group_has_grad("gru."));
  CHECK(group_has_grad("unet."));
  CHECK(group_has_grad("proj"));
}

TEST_CASE("fixed seed gives bit-identical outputs across builds") {
  ModelConfig cfg = tiny_config();
  auto win = random_window<float>(1, 2, 8, 8, 91);
  // make projections non-trivial so the whole network participates
  auto run = [&](uint64_t seed) {
    ModelConfig c = cfg;
    c.seed = seed;
    ComplexCompEvent<float> m(c);
    for (int k = 0; k < 3; ++k)
      m.proj[k].kernel.value = random_tensor<float>(m.proj[k].kernel.value.shape,
                                                    seed + 7);
    Tape<float> t;
    auto out = m.forward(t, win);
    return t.value(out[1]);
  };
  CHECK(bit_equal(run(11), run(11)));
  CHECK(!bit_equal(run(11), run(12)));
}

TEST_CASE("end-to-end tiny model passes finite differences") {
  ModelConfig cfg = tiny_config();  // C=4, C_E=2
  ComplexCompEvent<double> model(cfg);
  auto win = random_window<double>(1, 2, 16, 16, 101);
  std::array<CTensor<double>, 3> targets;
  for (int k = 0; k < 3; ++k) {
    targets[k] = random_tensor<double>({1, 3, 16, 16}, 111 + k, 0.0, 1.0);
    std::fill(targets[k].im.begin(), targets[k].im.end(), 0.0);
  }
  // quadratic penalty: smooth in every coordinate, so central differences
  // at h = 1e-4 are conditioned well below the 1e-3 tolerance
  auto report = grad_check(
      "model_e2e",
      [&](Tape<double>& t) {
        auto out = model.forward(t, win);
        std::vector<Var> per;
        for (int k = 0; k < 3; ++k)
          per.push_back(reduce_mean_abs2(t, sub(t, out[k], t.input(targets[k]))));
        return mean_scalars(t, per);
      },
      model.parameters(), 1e-4, 120, 4);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.pass(1e-3));
}
