#pragma once

#include <cmath>
#include <memory>

#include "compnet/autograd.hpp"

namespace compnet {

/// Normalization strategy for complex features. kWhiten is the paper's CLN
/// (2x2 covariance whitening); kSeparate and kConcat are the Table 3
/// ablation alternatives (f) and (g).
enum class ClnMode { kWhiten, kSeparate, kConcat };

inline ClnMode parse_cln_mode(std::string_view s) {
  if (s == "whiten") return ClnMode::kWhiten;
  if (s == "separate") return ClnMode::kSeparate;
  if (s == "concat-real") return ClnMode::kConcat;
  throw ConfigError("unknown cln mode: " + std::string(s));
}

namespace detail {

/// Per-sample statistics saved between forward and backward.
struct ClnStats {
  double mu_r, mu_i;        // concat mode stores the pooled mean in mu_r
  double u, v, w;           // regularized covariance entries (Vrr, Vii, Vri)
  double a11, a12, a22;     // whitening matrix
};

}  // namespace detail

/// Complex layer normalization. Statistics pool over all (c, h, w) positions
/// of each sample; gamma is a learnable per-channel real 2x2 matrix stored
/// as a (C, 2, 2) tensor on the real plane and beta a complex per-channel
/// offset.
///
/// kWhiten subtracts the component means and multiplies by the closed-form
/// inverse square root of the 2x2 covariance: with s = sqrt(det V) and
/// t = sqrt(trace V + 2s), V^(-1/2) = [[Vii+s, -Vri], [-Vri, Vrr+s]]/(s*t).
/// kSeparate normalizes each component by its own standard deviation
/// (diagonal gamma only); kConcat pools one mean/variance over both
/// components (diagonal gamma only).
template <typename T>
Var complex_layer_norm(Tape<T>& t, Var x, Var gamma, Var beta, ClnMode mode,
                       double eps) {
  const CTensor<T>& X = t.value(x);
  Shape4 s = X.s4();
  const CTensor<T>& G = t.value(gamma);
  const CTensor<T>& B = t.value(beta);
  check_shape(G.rank() == 3 && G.shape[0] == s.c && G.shape[1] == 2 && G.shape[2] == 2,
              "complex_layer_norm: gamma must be (C,2,2)");
  check_shape(B.numel() == s.c, "complex_layer_norm: beta must have C entries");
  const int64_t P = s.c * s.hw();
  auto stats = std::make_shared<std::vector<detail::ClnStats>>(s.n);
  CTensor<T> out(s);
  for (int64_t n = 0; n < s.n; ++n) {
    const T* xr = X.re.data() + n * P;
    const T* xi = X.im.data() + n * P;
    detail::ClnStats& st = (*stats)[n];
    if (mode == ClnMode::kConcat) {
      double acc = 0;
      for (int64_t k = 0; k < P; ++k) acc += xr[k];
      for (int64_t k = 0; k < P; ++k) acc += xi[k];
      double mu = acc / static_cast<double>(2 * P);
      double var = 0;
      for (int64_t k = 0; k < P; ++k) var += (xr[k] - mu) * (xr[k] - mu);
      for (int64_t k = 0; k < P; ++k) var += (xi[k] - mu) * (xi[k] - mu);
      var /= static_cast<double>(2 * P);
      st.mu_r = st.mu_i = mu;
      st.u = st.v = var + eps;
      st.w = 0;
      st.a11 = st.a22 = 1.0 / std::sqrt(var + eps);
      st.a12 = 0;
    } else {
      double ar = 0, ai = 0;
      for (int64_t k = 0; k < P; ++k) ar += xr[k];
      for (int64_t k = 0; k < P; ++k) ai += xi[k];
      st.mu_r = ar / static_cast<double>(P);
      st.mu_i = ai / static_cast<double>(P);
      double vrr = 0, vii = 0, vri = 0;
      for (int64_t k = 0; k < P; ++k) {
        double cr = xr[k] - st.mu_r, ci = xi[k] - st.mu_i;
        vrr += cr * cr;
        vii += ci * ci;
        vri += cr * ci;
      }
      st.u = vrr / static_cast<double>(P) + eps;
      st.v = vii / static_cast<double>(P) + eps;
      st.w = (mode == ClnMode::kWhiten) ? vri / static_cast<double>(P) : 0.0;
      if (mode == ClnMode::kWhiten) {
        double det = st.u * st.v - st.w * st.w;
        if (det <= 0 || st.u + st.v <= 0)
          throw NumericError("complex_layer_norm: covariance not SPD after regularization");
        double sq = std::sqrt(det);
        double tr = std::sqrt(st.u + st.v + 2.0 * sq);
        double q = 1.0 / (sq * tr);
        st.a11 = q * (st.v + sq);
        st.a22 = q * (st.u + sq);
        st.a12 = -q * st.w;
      } else {
        st.a11 = 1.0 / std::sqrt(st.u);
        st.a22 = 1.0 / std::sqrt(st.v);
        st.a12 = 0;
      }
    }
    const bool diag_gamma = mode != ClnMode::kWhiten;
    T* yr = out.re.data() + n * P;
    T* yi = out.im.data() + n * P;
    for (int64_t c = 0; c < s.c; ++c) {
      const T* gm = G.re.data() + c * 4;
      double g11 = gm[0], g12 = diag_gamma ? 0.0 : gm[1];
      double g21 = diag_gamma ? 0.0 : gm[2], g22 = gm[3];
      double br = B.re[c], bi = B.im[c];
      for (int64_t k = c * s.hw(); k < (c + 1) * s.hw(); ++k) {
        double cr = xr[k] - st.mu_r, ci = xi[k] - st.mu_i;
        double wr = st.a11 * cr + st.a12 * ci;
        double wi = st.a12 * cr + st.a22 * ci;
        yr[k] = static_cast<T>(g11 * wr + g12 * wi + br);
        yi[k] = static_cast<T>(g21 * wr + g22 * wi + bi);
      }
    }
  }
  return t.make(
      std::move(out), {x.id, gamma.id, beta.id},
      [x, gamma, beta, mode, stats](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& X = t.value(x);
        const CTensor<T>& G = t.value(gamma);
        Shape4 s = X.s4();
        const int64_t P = s.c * s.hw();
        const bool diag_gamma = mode != ClnMode::kWhiten;
        CTensor<T>* gx = t.grad_buffer(x.id);
        CTensor<T>* gg = t.grad_buffer(gamma.id);
        CTensor<T>* gb = t.grad_buffer(beta.id);
        std::vector<double> hr(P), hi(P), dcr(P), dci(P);
        for (int64_t n = 0; n < s.n; ++n) {
          const detail::ClnStats& st = (*stats)[n];
          const T* xr = X.re.data() + n * P;
          const T* xi = X.im.data() + n * P;
          const T* gr = g.re.data() + n * P;
          const T* gi = g.im.data() + n * P;
          // h = Gamma^T g per channel; accumulate gamma/beta grads
          double da11 = 0, da12 = 0, da22 = 0;  // dL/dA with symmetric fold
          for (int64_t c = 0; c < s.c; ++c) {
            const T* gm = G.re.data() + c * 4;
            double g11 = gm[0], g12 = diag_gamma ? 0.0 : gm[1];
            double g21 = diag_gamma ? 0.0 : gm[2], g22 = gm[3];
            double dg11 = 0, dg12 = 0, dg21 = 0, dg22 = 0, dbr = 0, dbi = 0;
            for (int64_t k = c * s.hw(); k < (c + 1) * s.hw(); ++k) {
              double cr = xr[k] - st.mu_r, ci = xi[k] - st.mu_i;
              double wr = st.a11 * cr + st.a12 * ci;
              double wi = st.a12 * cr + st.a22 * ci;
              double pr = gr[k], pi = gi[k];
              dg11 += pr * wr;
              dg12 += pr * wi;
              dg21 += pi * wr;
              dg22 += pi * wi;
              dbr += pr;
              dbi += pi;
              double hrk = g11 * pr + g21 * pi;
              double hik = g12 * pr + g22 * pi;
              hr[k] = hrk;
              hi[k] = hik;
              da11 += hrk * cr;
              da12 += hrk * ci + hik * cr;
              da22 += hik * ci;
            }
            if (gg) {
              T* dst = gg->re.data() + c * 4;
              dst[0] += static_cast<T>(dg11);
              if (!diag_gamma) {
                dst[1] += static_cast<T>(dg12);
                dst[2] += static_cast<T>(dg21);
              }
              dst[3] += static_cast<T>(dg22);
            }
            if (gb) {
              gb->re[c] += static_cast<T>(dbr);
              gb->im[c] += static_cast<T>(dbi);
            }
          }
          if (!gx) continue;
          // chain through A(V) into the covariance entries
          double du = 0, dv = 0, dw = 0;
          if (mode == ClnMode::kWhiten) {
            double u = st.u, v = st.v, w = st.w;
            double sq = std::sqrt(u * v - w * w);
            double tr = std::sqrt(u + v + 2.0 * sq);
            double q = 1.0 / (sq * tr);
            double su = v / (2.0 * sq), sv = u / (2.0 * sq), sw = -w / sq;
            double tu = (1.0 + 2.0 * su) / (2.0 * tr);
            double tv = (1.0 + 2.0 * sv) / (2.0 * tr);
            double tw = sw / tr;
            double qu = -q * (su / sq + tu / tr);
            double qv = -q * (sv / sq + tv / tr);
            double qw = -q * (sw / sq + tw / tr);
            double a11u = qu * (v + sq) + q * su;
            double a11v = qv * (v + sq) + q * (1.0 + sv);
            double a11w = qw * (v + sq) + q * sw;
            double a22u = qu * (u + sq) + q * (1.0 + su);
            double a22v = qv * (u + sq) + q * sv;
            double a22w = qw * (u + sq) + q * sw;
            double a12u = -qu * w;
            double a12v = -qv * w;
            double a12w = -(qw * w + q);
            du = da11 * a11u + da12 * a12u + da22 * a22u;
            dv = da11 * a11v + da12 * a12v + da22 * a22v;
            dw = da11 * a11w + da12 * a12w + da22 * a22w;
          } else if (mode == ClnMode::kSeparate) {
            du = da11 * (-0.5 * st.a11 / st.u);  // d(u^-1/2)/du = -1/2 u^-3/2
            dv = da22 * (-0.5 * st.a22 / st.v);
          } else {  // concat: u == v == pooled var + eps, single scale
            double dvar = (da11 + da22) * (-0.5 * st.a11 / st.u);
            du = dvar;  // folded below with the 1/(2P) pooled-variance factor
          }
          if (mode == ClnMode::kConcat) {
            double sum_dc = 0;
            for (int64_t k = 0; k < P; ++k) {
              double cr = xr[k] - st.mu_r, ci = xi[k] - st.mu_i;
              dcr[k] = st.a11 * hr[k] + cr * du / static_cast<double>(P);
              dci[k] = st.a11 * hi[k] + ci * du / static_cast<double>(P);
              sum_dc += dcr[k] + dci[k];
            }
            double corr = sum_dc / static_cast<double>(2 * P);
            T* dxr = gx->re.data() + n * P;
            T* dxi = gx->im.data() + n * P;
            for (int64_t k = 0; k < P; ++k) dxr[k] += static_cast<T>(dcr[k] - corr);
            for (int64_t k = 0; k < P; ++k) dxi[k] += static_cast<T>(dci[k] - corr);
          } else {
            double sum_dcr = 0, sum_dci = 0;
            for (int64_t k = 0; k < P; ++k) {
              double cr = xr[k] - st.mu_r, ci = xi[k] - st.mu_i;
              dcr[k] = st.a11 * hr[k] + st.a12 * hi[k] +
                       (2.0 * cr * du + ci * dw) / static_cast<double>(P);
              dci[k] = st.a12 * hr[k] + st.a22 * hi[k] +
                       (2.0 * ci * dv + cr * dw) / static_cast<double>(P);
              sum_dcr += dcr[k];
              sum_dci += dci[k];
            }
            double mr = sum_dcr / static_cast<double>(P);
            double mi = sum_dci / static_cast<double>(P);
            T* dxr = gx->re.data() + n * P;
            T* dxi = gx->im.data() + n * P;
            for (int64_t k = 0; k < P; ++k) dxr[k] += static_cast<T>(dcr[k] - mr);
            for (int64_t k = 0; k < P; ++k) dxi[k] += static_cast<T>(dci[k] - mi);
          }
        }
      },
      "complex_layer_norm");
}

/// Plain layer norm over the real plane (real-valued ablation variant).
/// gamma/beta are per-channel real scalars; statistics pool over (c, h, w).
template <typename T>
Var real_layer_norm(Tape<T>& t, Var x, Var gamma, Var beta, double eps) {
  const CTensor<T>& X = t.value(x);
  Shape4 s = X.s4();
  const CTensor<T>& G = t.value(gamma);
  const CTensor<T>& B = t.value(beta);
  check_shape(G.numel() == s.c && B.numel() == s.c,
              "real_layer_norm: gamma/beta must have C entries");
  const int64_t P = s.c * s.hw();
  auto stats = std::make_shared<std::vector<std::pair<double, double>>>(s.n);
  CTensor<T> out(s);
  for (int64_t n = 0; n < s.n; ++n) {
    const T* xr = X.re.data() + n * P;
    double mu = 0;
    for (int64_t k = 0; k < P; ++k) mu += xr[k];
    mu /= static_cast<double>(P);
    double var = 0;
    for (int64_t k = 0; k < P; ++k) var += (xr[k] - mu) * (xr[k] - mu);
    var /= static_cast<double>(P);
    double a = 1.0 / std::sqrt(var + eps);
    (*stats)[n] = {mu, a};
    T* yr = out.re.data() + n * P;
    for (int64_t c = 0; c < s.c; ++c) {
      double gc = G.re[c], bc = B.re[c];
      for (int64_t k = c * s.hw(); k < (c + 1) * s.hw(); ++k)
        yr[k] = static_cast<T>(gc * a * (xr[k] - mu) + bc);
    }
  }
  return t.make(
      std::move(out), {x.id, gamma.id, beta.id},
      [x, gamma, beta, eps, stats](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& X = t.value(x);
        const CTensor<T>& G = t.value(gamma);
        Shape4 s = X.s4();
        const int64_t P = s.c * s.hw();
        CTensor<T>* gx = t.grad_buffer(x.id);
        CTensor<T>* gg = t.grad_buffer(gamma.id);
        CTensor<T>* gb = t.grad_buffer(beta.id);
        std::vector<double> h(P), dc(P);
        for (int64_t n = 0; n < s.n; ++n) {
          auto [mu, a] = (*stats)[n];
          const T* xr = X.re.data() + n * P;
          const T* gr = g.re.data() + n * P;
          double da = 0;
          for (int64_t c = 0; c < s.c; ++c) {
            double gc = G.re[c], dgc = 0, dbc = 0;
            for (int64_t k = c * s.hw(); k < (c + 1) * s.hw(); ++k) {
              double cr = xr[k] - mu;
              dgc += gr[k] * a * cr;
              dbc += gr[k];
              h[k] = gc * gr[k];
              da += h[k] * cr;
            }
            if (gg) gg->re[c] += static_cast<T>(dgc);
            if (gb) gb->re[c] += static_cast<T>(dbc);
          }
          if (!gx) continue;
          double dvar = da * (-0.5) * a * a * a;
          double sum_dc = 0;
          for (int64_t k = 0; k < P; ++k) {
            double cr = xr[k] - mu;
            dc[k] = a * h[k] + 2.0 * cr * dvar / static_cast<double>(P);
            sum_dc += dc[k];
          }
          double corr = sum_dc / static_cast<double>(P);
          T* dxr = gx->re.data() + n * P;
          for (int64_t k = 0; k < P; ++k) dxr[k] += static_cast<T>(dc[k] - corr);
        }
      },
      "real_layer_norm");
}

// ---------------------------------------------------------------------------
// Parameter-holding modules
// ---------------------------------------------------------------------------

template <typename T>
struct ComplexLayerNorm {
  Parameter<T> gamma;  // (C, 2, 2), real plane
  Parameter<T> beta;   // (C), complex
  ClnMode mode = ClnMode::kWhiten;
  double eps = 1e-5;

  ComplexLayerNorm() = default;
  ComplexLayerNorm(const std::string& name, int64_t channels, ClnMode m)
      : mode(m) {
    CTensor<T> g({channels, 2, 2});
    const T diag = static_cast<T>(1.0 / std::sqrt(2.0));
    for (int64_t c = 0; c < channels; ++c) {
      g.re[c * 4 + 0] = diag;
      g.re[c * 4 + 3] = diag;
    }
    gamma = Parameter<T>(name + ".gamma", std::move(g));
    beta = Parameter<T>(name + ".beta", CTensor<T>(std::vector<int64_t>{channels}));
  }

  Var forward(Tape<T>& t, Var x) {
    return complex_layer_norm(t, x, t.param(gamma), t.param(beta), mode, eps);
  }

  void params(std::vector<Parameter<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <typename T>
struct RealLayerNorm {
  Parameter<T> gamma;  // (C)
  Parameter<T> beta;   // (C)
  double eps = 1e-5;

  RealLayerNorm() = default;
  RealLayerNorm(const std::string& name, int64_t channels) {
    CTensor<T> g(std::vector<int64_t>{channels});
    std::fill(g.re.begin(), g.re.end(), T(1));
    gamma = Parameter<T>(name + ".gamma", std::move(g));
    beta = Parameter<T>(name + ".beta", CTensor<T>(std::vector<int64_t>{channels}));
  }

  Var forward(Tape<T>& t, Var x) {
    return real_layer_norm(t, x, t.param(gamma), t.param(beta), eps);
  }

  void params(std::vector<Parameter<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

}  // namespace compnet
