#pragma once

#include <vector>

#include "compnet/gradcheck.hpp"
#include "compnet/model.hpp"

namespace compnet {

/// Standing gradient-verification suite: every layer type, the CSFB with
/// its FFT path, a two-step unrolled GRU, and the end-to-end tiny model at
/// C = 4. Large fragments sample fewer coordinates per parameter; every
/// fragment uses a smooth O(1) loss so central differences at h stay well
/// conditioned.
inline std::vector<GradCheckReport> run_gradcheck_suite(
    double h = 1e-4, uint64_t seed = 17, const std::string& corrupt_hook = "") {
  std::vector<GradCheckReport> reports;
  auto push = [&](const std::string& name,
                  const std::function<Var(Tape<double>&)>& build,
                  std::vector<Parameter<double>*> params, int coords) {
    reports.push_back(grad_check(name, build, params, h, seed, coords, corrupt_hook));
  };

  {  // complex conv geometries
    struct Cfg {
      const char* name;
      int64_t co, k, stride, pad, groups;
      bool transposed;
    };
    auto x = random_tensor<double>({1, 4, 6, 6}, seed + 1);
    for (Cfg c : std::vector<Cfg>{{"conv3x3", 4, 3, 1, 1, 1, false},
                                  {"conv_strided", 4, 3, 2, 1, 1, false},
                                  {"conv_depthwise", 4, 3, 1, 1, 4, false},
                                  {"conv_transposed", 2, 3, 2, 1, 1, true}}) {
      ConvGeom geom{.stride = c.stride, .pad = c.pad, .groups = c.groups};
      auto l = c.transposed
                   ? ComplexConv2d<double>::transposed(c.name, 4, c.co, c.k, geom,
                                                       true, InitScheme::kUniformFanScaled,
                                                       seed + 2)
                   : ComplexConv2d<double>::conv(c.name, 4, c.co, c.k, geom, true,
                                                 InitScheme::kUniformFanScaled, seed + 2);
      auto layer = std::make_shared<decltype(l)>(std::move(l));
      std::vector<Parameter<double>*> params;
      layer->params(params);
      push(c.name,
           [layer, x](Tape<double>& t) {
             return reduce_mean_abs2(t, layer->forward(t, t.input(x)));
           },
           params, 64);
    }
  }

  {  // real conv
    auto l = std::make_shared<RealConv2d<double>>(RealConv2d<double>::conv(
        "real_conv", 3, 2, 3, {.stride = 1, .pad = 1}, true,
        InitScheme::kUniformFanScaled, seed + 3));
    auto x = random_tensor<double>({1, 3, 6, 6}, seed + 4);
    std::vector<Parameter<double>*> params;
    l->params(params);
    push("real_conv",
         [l, x](Tape<double>& t) {
           return reduce_mean_abs2(t, l->forward(t, t.input(x)));
         },
         params, 64);
  }

  {  // split activations
    auto p = std::make_shared<Parameter<double>>(
        "p", random_tensor<double>({2, 3, 4, 4}, seed + 5));
    const char* names[3] = {"split_sigmoid", "split_tanh", "split_gelu"};
    for (int which = 0; which < 3; ++which) {
      push(names[which],
           [p, which](Tape<double>& t) {
             Var v = t.param(*p);
             v = which == 0 ? split_sigmoid(t, v)
                            : which == 1 ? split_tanh(t, v) : split_gelu(t, v);
             return reduce_mean_abs2(t, v);
           },
           {p.get()}, 64);
    }
  }

  {  // CLN modes + real layer norm
    auto p = std::make_shared<Parameter<double>>(
        "p", random_tensor<double>({2, 3, 4, 4}, seed + 6));
    struct M {
      const char* name;
      ClnMode mode;
    };
    for (M m : std::vector<M>{{"cln_whiten", ClnMode::kWhiten},
                              {"cln_separate", ClnMode::kSeparate},
                              {"cln_concat", ClnMode::kConcat}}) {
      auto ln = std::make_shared<ComplexLayerNorm<double>>("cln", 3, m.mode);
      std::vector<Parameter<double>*> params{p.get()};
      ln->params(params);
      push(m.name,
           [ln, p](Tape<double>& t) {
             return reduce_mean_abs2(t, ln->forward(t, t.param(*p)));
           },
           params, 64);
    }
    auto rln = std::make_shared<RealLayerNorm<double>>("rln", 3);
    std::vector<Parameter<double>*> params{p.get()};
    rln->params(params);
    push("real_layer_norm",
         [rln, p](Tape<double>& t) {
           return reduce_mean_abs2(t, rln->forward(t, t.param(*p)));
         },
         params, 64);
  }

  {  // FFT path in isolation
    auto p = std::make_shared<Parameter<double>>(
        "p", random_tensor<double>({1, 2, 6, 5}, seed + 7));
    push("fft_roundtrip_path",
         [p](Tape<double>& t) {
           Var v = fft2d(t, t.param(*p));
           v = split_gelu(t, v);
           return reduce_mean_abs2(t, ifft2d(t, v));
         },
         {p.get()}, 64);
  }

  {  // GRU step, two-step unrolled recurrence
    auto cell = std::make_shared<CGMCell<double>>("gru", 2, seed + 8);
    auto z = std::make_shared<Parameter<double>>(
        "z", random_tensor<double>({1, 2, 4, 4}, seed + 9));
    std::vector<Parameter<double>*> params{z.get()};
    cell->params(params);
    push("gru_2step",
         [cell, z](Tape<double>& t) {
           Var zz = t.param(*z);
           Var h = t.input(CTensor<double>(1, 2, 4, 4));
           h = cgm_step(t, zz, h, *cell);
           h = cgm_step(t, zz, h, *cell);
           return reduce_mean_abs2(t, h);
         },
         params, 32);
  }

  {  // full CSFB with the FFT branch at 8 channels, 8x8
    auto blk = std::make_shared<CSFB<double>>("csfb", 8, ClnMode::kWhiten, true,
                                              seed + 10);
    // non-trivial branch outputs so every path carries gradient
    blk->sp_pw2 = ComplexConv2d<double>::conv("csfb.sp2", 16, 8, 1, {}, true,
                                              InitScheme::kUniformFanScaled, seed + 11);
    blk->fq_pw2 = ComplexConv2d<double>::conv("csfb.fq2", 16, 8, 1, {}, true,
                                              InitScheme::kUniformFanScaled, seed + 12);
    blk->ff_pw4 = ComplexConv2d<double>::conv("csfb.ff4", 16, 8, 1, {}, true,
                                              InitScheme::kUniformFanScaled, seed + 13);
    auto x = random_tensor<double>({1, 8, 8, 8}, seed + 14);
    std::vector<Parameter<double>*> params;
    blk->params(params);
    push("csfb_full",
         [blk, x](Tape<double>& t) {
           return reduce_mean_abs2(t, blk->forward(t, t.input(x)));
         },
         params, 8);
  }

  {  // end-to-end tiny model
    ModelConfig cfg;
    cfg.channels = 4;
    cfg.event_bins = 2;
    cfg.levels = 2;
    cfg.blocks = 1;
    cfg.seed = seed + 15;
    auto model = std::make_shared<ComplexCompEvent<double>>(cfg);
    auto win = std::make_shared<FrameWindow<double>>();
    std::array<CTensor<double>, 3> targets;
    for (int k = 0; k < 3; ++k) {
      win->frames[k] = random_tensor<double>({1, 3, 16, 16}, seed + 20 + k, 0.0, 1.0);
      std::fill(win->frames[k].im.begin(), win->frames[k].im.end(), 0.0);
      win->events[k] = random_tensor<double>({1, 2, 16, 16}, seed + 30 + k, -2.0, 2.0);
      std::fill(win->events[k].im.begin(), win->events[k].im.end(), 0.0);
      targets[k] = random_tensor<double>({1, 3, 16, 16}, seed + 40 + k, 0.0, 1.0);
      std::fill(targets[k].im.begin(), targets[k].im.end(), 0.0);
    }
    auto tg = std::make_shared<std::array<CTensor<double>, 3>>(std::move(targets));
    push("model_e2e_tiny",
         [model, win, tg](Tape<double>& t) {
           auto out = model->forward(t, *win);
           std::vector<Var> per;
           for (int k = 0; k < 3; ++k)
             per.push_back(reduce_mean_abs2(t, sub(t, out[k], t.input((*tg)[k]))));
           return mean_scalars(t, per);
         },
         model->parameters(), 4);
  }

  return reports;
}

}  // namespace compnet
