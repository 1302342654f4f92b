#pragma once

#include <string>
#include <vector>

#include "compnet/autograd.hpp"
#include "compnet/conv_kernels.hpp"

namespace compnet {

/// Validates geometry and resolves the underlying forward-conv dimensions.
/// layer_out receives the layer's output shape (scatter side for transposed).
inline convk::ConvDims resolve_conv(Shape4 in, const std::vector<int64_t>& kshape,
                                    const ConvGeom& g, Shape4* layer_out) {
  check_shape(kshape.size() == 4, "conv kernel must be rank 4");
  int64_t kco = kshape[0], kcig = kshape[1], kh = kshape[2], kw = kshape[3];
  check_shape(g.stride >= 1 && g.pad >= 0 && g.groups >= 1,
              "conv: invalid geometry");
  check_shape(kco % g.groups == 0, "conv: co not divisible by groups");
  convk::ConvDims d{};
  d.kh = kh;
  d.kw = kw;
  d.stride = g.stride;
  d.pad = g.pad;
  d.groups = g.groups;
  d.n = in.n;
  d.co = kco;
  if (!g.transposed) {
    check_shape(in.c == kcig * g.groups,
                "conv: input has " + std::to_string(in.c) + " channels, kernel expects " +
                    std::to_string(kcig * g.groups));
    check_shape(in.h + 2 * g.pad >= kh && in.w + 2 * g.pad >= kw,
                "conv: spatial extents too small for kernel");
    d.ci = in.c;
    d.hi = in.h;
    d.wi = in.w;
    d.ho = (in.h + 2 * g.pad - kh) / g.stride + 1;
    d.wo = (in.w + 2 * g.pad - kw) / g.stride + 1;
    if (layer_out) *layer_out = {d.n, d.co, d.ho, d.wo};
  } else {
    check_shape(in.c == kco, "transposed conv: input has " + std::to_string(in.c) +
                                 " channels, kernel expects " + std::to_string(kco));
    int64_t oph = 2 * g.pad + g.stride - kh;
    int64_t opw = 2 * g.pad + g.stride - kw;
    check_shape(oph >= 0 && oph < g.stride && opw >= 0 && opw < g.stride,
                "transposed conv: geometry cannot produce stride-exact output "
                "(need 0 <= 2*pad + stride - k < stride)");
    d.ci = kcig * g.groups;
    d.hi = in.h * g.stride;
    d.wi = in.w * g.stride;
    d.ho = in.h;
    d.wo = in.w;
    if (layer_out) *layer_out = {d.n, d.ci, d.hi, d.wi};
  }
  return d;
}

namespace detail {

template <typename T>
void add_channel_bias(CTensor<T>& out, const CTensor<T>& bias, bool complex_bias) {
  Shape4 s = out.s4();
  check_shape(bias.numel() == s.c, "conv bias length mismatch");
  for (int64_t n = 0; n < s.n; ++n)
    for (int64_t c = 0; c < s.c; ++c) {
      T br = bias.re[c], bi = complex_bias ? bias.im[c] : T(0);
      T* pr = out.re.data() + (n * s.c + c) * s.hw();
      T* pi = out.im.data() + (n * s.c + c) * s.hw();
      for (int64_t i = 0; i < s.hw(); ++i) pr[i] += br;
      if (complex_bias)
        for (int64_t i = 0; i < s.hw(); ++i) pi[i] += bi;
    }
}

template <typename T>
void bias_grad(const CTensor<T>& g, CTensor<T>& gbias, bool complex_bias) {
  Shape4 s = g.s4();
  for (int64_t c = 0; c < s.c; ++c) {
    double ar = 0, ai = 0;
    for (int64_t n = 0; n < s.n; ++n) {
      const T* pr = g.re.data() + (n * s.c + c) * s.hw();
      const T* pi = g.im.data() + (n * s.c + c) * s.hw();
      for (int64_t i = 0; i < s.hw(); ++i) ar += pr[i];
      if (complex_bias)
        for (int64_t i = 0; i < s.hw(); ++i) ai += pi[i];
    }
    gbias.re[c] += static_cast<T>(ar);
    if (complex_bias) gbias.im[c] += static_cast<T>(ai);
  }
}

}  // namespace detail

/// Complex convolution M' = K * M with the shared kernel K = K_R + i K_E:
/// out_re = conv(K_R, M_R) - conv(K_E, M_E), out_im = conv(K_R, M_E) +
/// conv(K_E, M_R), evaluated as four real convolutions. With the transposed
/// flag the layer is the real-space adjoint of the forward conv (the
/// conjugate-kernel scatter), so output extents are exactly stride * input
/// and <conv(x), y> == <x, conv_transposed(y)> holds in the paired real
/// inner product.
template <typename T>
Var complex_conv2d(Tape<T>& t, Var x, Var kernel, Var bias, ConvGeom geom) {
  const CTensor<T>& X = t.value(x);
  const CTensor<T>& K = t.value(kernel);
  Shape4 layer_out;
  convk::ConvDims d = resolve_conv(X.s4(), K.shape, geom, &layer_out);
  CTensor<T> out(layer_out);
  if (!geom.transposed) {
    convk::FwdFan<T> f1[] = {{K.re.data(), out.re.data(), T(1)},
                             {K.im.data(), out.im.data(), T(1)}};
    convk::conv_fwd_plane(d, X.re.data(), f1, 2);
    convk::FwdFan<T> f2[] = {{K.im.data(), out.re.data(), T(-1)},
                             {K.re.data(), out.im.data(), T(1)}};
    convk::conv_fwd_plane(d, X.im.data(), f2, 2);
  } else {
    convk::DgradIn<T> ir[] = {{K.re.data(), X.re.data(), T(1)},
                              {K.im.data(), X.im.data(), T(1)}};
    convk::conv_dgrad_plane(d, ir, 2, out.re.data());
    convk::DgradIn<T> ii[] = {{K.re.data(), X.im.data(), T(1)},
                              {K.im.data(), X.re.data(), T(-1)}};
    convk::conv_dgrad_plane(d, ii, 2, out.im.data());
  }
  if (bias.valid()) detail::add_channel_bias(out, t.value(bias), true);
  std::vector<int32_t> parents{x.id, kernel.id};
  if (bias.valid()) parents.push_back(bias.id);
  return t.make(
      std::move(out), std::move(parents),
      [x, kernel, bias, d, geom](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& X = t.value(x);
        const CTensor<T>& K = t.value(kernel);
        if (CTensor<T>* gx = t.grad_buffer(x.id)) {
          if (!geom.transposed) {
            convk::DgradIn<T> ir[] = {{K.re.data(), g.re.data(), T(1)},
                                      {K.im.data(), g.im.data(), T(1)}};
            convk::conv_dgrad_plane(d, ir, 2, gx->re.data());
            convk::DgradIn<T> ii[] = {{K.im.data(), g.re.data(), T(-1)},
                                      {K.re.data(), g.im.data(), T(1)}};
            convk::conv_dgrad_plane(d, ii, 2, gx->im.data());
          } else {
            convk::FwdFan<T> f1[] = {{K.re.data(), gx->re.data(), T(1)},
                                     {K.im.data(), gx->im.data(), T(1)}};
            convk::conv_fwd_plane(d, g.re.data(), f1, 2);
            convk::FwdFan<T> f2[] = {{K.im.data(), gx->re.data(), T(-1)},
                                     {K.re.data(), gx->im.data(), T(1)}};
            convk::conv_fwd_plane(d, g.im.data(), f2, 2);
          }
        }
        if (CTensor<T>* gk = t.grad_buffer(kernel.id)) {
          if (!geom.transposed) {
            convk::WgradFan<T> w1[] = {{g.re.data(), gk->re.data(), T(1)},
                                       {g.im.data(), gk->im.data(), T(1)}};
            convk::conv_wgrad_plane(d, X.re.data(), w1, 2);
            convk::WgradFan<T> w2[] = {{g.im.data(), gk->re.data(), T(1)},
                                       {g.re.data(), gk->im.data(), T(-1)}};
            convk::conv_wgrad_plane(d, X.im.data(), w2, 2);
          } else {
            convk::WgradFan<T> w1[] = {{X.re.data(), gk->re.data(), T(1)},
                                       {X.im.data(), gk->im.data(), T(1)}};
            convk::conv_wgrad_plane(d, g.re.data(), w1, 2);
            convk::WgradFan<T> w2[] = {{X.im.data(), gk->re.data(), T(1)},
                                       {X.re.data(), gk->im.data(), T(-1)}};
            convk::conv_wgrad_plane(d, g.im.data(), w2, 2);
          }
        }
        if (bias.valid()) {
          if (CTensor<T>* gb = t.grad_buffer(bias.id))
            detail::bias_grad(g, *gb, true);
        }
      },
      "complex_conv2d");
}

/// Real convolution on the real plane (used by embedding networks, output
/// heads, and the real-valued ablation variant). The imaginary plane of
/// input, kernel, and output is ignored and stays zero.
template <typename T>
Var real_conv2d(Tape<T>& t, Var x, Var kernel, Var bias, ConvGeom geom) {
  const CTensor<T>& X = t.value(x);
  const CTensor<T>& K = t.value(kernel);
  Shape4 layer_out;
  convk::ConvDims d = resolve_conv(X.s4(), K.shape, geom, &layer_out);
  CTensor<T> out(layer_out);
  if (!geom.transposed) {
    convk::FwdFan<T> f[] = {{K.re.data(), out.re.data(), T(1)}};
    convk::conv_fwd_plane(d, X.re.data(), f, 1);
  } else {
    convk::DgradIn<T> i[] = {{K.re.data(), X.re.data(), T(1)}};
    convk::conv_dgrad_plane(d, i, 1, out.re.data());
  }
  if (bias.valid()) detail::add_channel_bias(out, t.value(bias), false);
  std::vector<int32_t> parents{x.id, kernel.id};
  if (bias.valid()) parents.push_back(bias.id);
  return t.make(
      std::move(out), std::move(parents),
      [x, kernel, bias, d, geom](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& X = t.value(x);
        const CTensor<T>& K = t.value(kernel);
        if (CTensor<T>* gx = t.grad_buffer(x.id)) {
          if (!geom.transposed) {
            convk::DgradIn<T> i[] = {{K.re.data(), g.re.data(), T(1)}};
            convk::conv_dgrad_plane(d, i, 1, gx->re.data());
          } else {
            convk::FwdFan<T> f[] = {{K.re.data(), gx->re.data(), T(1)}};
            convk::conv_fwd_plane(d, g.re.data(), f, 1);
          }
        }
        if (CTensor<T>* gk = t.grad_buffer(kernel.id)) {
          if (!geom.transposed) {
            convk::WgradFan<T> w[] = {{g.re.data(), gk->re.data(), T(1)}};
            convk::conv_wgrad_plane(d, X.re.data(), w, 1);
          } else {
            convk::WgradFan<T> w[] = {{X.re.data(), gk->re.data(), T(1)}};
            convk::conv_wgrad_plane(d, g.re.data(), w, 1);
          }
        }
        if (bias.valid()) {
          if (CTensor<T>* gb = t.grad_buffer(bias.id))
            detail::bias_grad(g, *gb, false);
        }
      },
      "real_conv2d");
}

// ---------------------------------------------------------------------------
// Parameter-holding layer modules
// ---------------------------------------------------------------------------

/// Complex 2-D convolution layer: shared kernel (K_R, K_E) stored as the
/// real/imaginary planes of one parameter, optional complex bias.
template <typename T>
struct ComplexConv2d {
  Parameter<T> kernel;
  Parameter<T> bias;
  ConvGeom geom;
  bool has_bias = false;

  ComplexConv2d() = default;

  static ComplexConv2d conv(const std::string& name, int64_t in_c, int64_t out_c,
                            int64_t k, ConvGeom geom, bool with_bias,
                            InitScheme scheme, uint64_t seed) {
    check_shape(in_c % geom.groups == 0, name + ": in channels not divisible by groups");
    geom.transposed = false;
    return make(name, {out_c, in_c / geom.groups, k, k}, geom, with_bias, out_c,
                scheme, seed);
  }

  /// Fractionally-strided layer mapping in_c -> out_c with output extents
  /// exactly stride * input. Kernel is stored in forward orientation
  /// (in_c, out_c/groups, k, k).
  static ComplexConv2d transposed(const std::string& name, int64_t in_c,
                                  int64_t out_c, int64_t k, ConvGeom geom,
                                  bool with_bias, InitScheme scheme,
                                  uint64_t seed) {
    check_shape(out_c % geom.groups == 0, name + ": out channels not divisible by groups");
    geom.transposed = true;
    return make(name, {in_c, out_c / geom.groups, k, k}, geom, with_bias, out_c,
                scheme, seed);
  }

  Var forward(Tape<T>& t, Var x) {
    Var k = t.param(kernel);
    Var b = has_bias ? t.param(bias) : Var{};
    return complex_conv2d(t, x, k, b, geom);
  }

  void params(std::vector<Parameter<T>*>& out) {
    out.push_back(&kernel);
    if (has_bias) out.push_back(&bias);
  }

  /// Real scalar count: 2 * co * (ci/groups) * k^2 (+ 2 * co bias terms).
  int64_t param_count() const {
    return 2 * kernel.value.numel() + (has_bias ? 2 * bias.value.numel() : 0);
  }

 private:
  static ComplexConv2d make(const std::string& name, std::vector<int64_t> kshape,
                            ConvGeom geom, bool with_bias, int64_t bias_len,
                            InitScheme scheme, uint64_t seed) {
    ComplexConv2d l;
    l.geom = geom;
    l.has_bias = with_bias;
    l.kernel = Parameter<T>(
        name + ".kernel",
        seeded_init<T>(std::move(kshape), scheme, mix64(seed ^ hash_name(name))));
    if (with_bias)
      l.bias = Parameter<T>(name + ".bias",
                            CTensor<T>(std::vector<int64_t>{bias_len}));
    return l;
  }
};

/// Real 2-D convolution layer (real kernel plane + real bias).
template <typename T>
struct RealConv2d {
  Parameter<T> kernel;
  Parameter<T> bias;
  ConvGeom geom;
  bool has_bias = false;

  RealConv2d() = default;

  static RealConv2d conv(const std::string& name, int64_t in_c, int64_t out_c,
                         int64_t k, ConvGeom geom, bool with_bias,
                         InitScheme scheme, uint64_t seed) {
    check_shape(in_c % geom.groups == 0, name + ": in channels not divisible by groups");
    geom.transposed = false;
    return make(name, {out_c, in_c / geom.groups, k, k}, geom, with_bias, out_c,
                scheme, seed);
  }

  static RealConv2d transposed(const std::string& name, int64_t in_c,
                               int64_t out_c, int64_t k, ConvGeom geom,
                               bool with_bias, InitScheme scheme, uint64_t seed) {
    check_shape(out_c % geom.groups == 0, name + ": out channels not divisible by groups");
    geom.transposed = true;
    return make(name, {in_c, out_c / geom.groups, k, k}, geom, with_bias, out_c,
                scheme, seed);
  }

  Var forward(Tape<T>& t, Var x) {
    Var k = t.param(kernel);
    Var b = has_bias ? t.param(bias) : Var{};
    return real_conv2d(t, x, k, b, geom);
  }

  void params(std::vector<Parameter<T>*>& out) {
    out.push_back(&kernel);
    if (has_bias) out.push_back(&bias);
  }

  int64_t param_count() const {
    return kernel.value.numel() + (has_bias ? bias.value.numel() : 0);
  }

 private:
  static RealConv2d make(const std::string& name, std::vector<int64_t> kshape,
                         ConvGeom geom, bool with_bias, int64_t bias_len,
                         InitScheme scheme, uint64_t seed) {
    RealConv2d l;
    l.geom = geom;
    l.has_bias = with_bias;
    CTensor<T> k =
        seeded_init<T>(std::move(kshape), scheme, mix64(seed ^ hash_name(name)));
    // real layer: kernel lives on the real plane only
    std::fill(k.im.begin(), k.im.end(), T(0));
    if (scheme == InitScheme::kUniformFanScaled) {
      // widen to the real-valued Glorot bound sqrt(6/(fi+fo))
      for (auto& v : k.re) v *= static_cast<T>(1.41421356237309504880);
    }
    l.kernel = Parameter<T>(name + ".kernel", std::move(k));
    if (with_bias)
      l.bias = Parameter<T>(name + ".bias",
                            CTensor<T>(std::vector<int64_t>{bias_len}));
    return l;
  }
};

}  // namespace compnet
