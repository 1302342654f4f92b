#pragma once

// Naive reference implementations used as independent oracles by the test
// suites and the selftest command. These trade speed for obviousness and
// deliberately share no code with the optimized paths they check.

#include <complex>
#include <vector>

#include "compnet/conv_kernels.hpp"
#include "compnet/tensor.hpp"

namespace compnet::reference {

/// O((HW)^2) direct DFT over the last two axes, unnormalized.
template <typename T>
CTensor<double> naive_dft2d(const CTensor<T>& x, int sign) {
  Shape4 s = x.s4();
  CTensor<double> out(s);
  const double tau = sign * 2.0 * 3.14159265358979323846;
  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* xr = x.re.data() + nc * s.hw();
    const T* xi = x.im.data() + nc * s.hw();
    double* yr = out.re.data() + nc * s.hw();
    double* yi = out.im.data() + nc * s.hw();
    for (int64_t ky = 0; ky < s.h; ++ky)
      for (int64_t kx = 0; kx < s.w; ++kx) {
        std::complex<double> acc{0, 0};
        for (int64_t y = 0; y < s.h; ++y)
          for (int64_t xx = 0; xx < s.w; ++xx) {
            double ang = tau * (static_cast<double>(ky * y) / s.h +
                                static_cast<double>(kx * xx) / s.w);
            acc += std::complex<double>(xr[y * s.w + xx], xi[y * s.w + xx]) *
                   std::complex<double>(std::cos(ang), std::sin(ang));
          }
        yr[ky * s.w + kx] = acc.real();
        yi[ky * s.w + kx] = acc.imag();
      }
  }
  return out;
}

/// Direct complex-summation convolution oracle in scalar complex
/// arithmetic. Normal layers gather sum K(co,ci,u,v) * M(ci, y*s+u-p,
/// x*s+v-p); transposed layers scatter conj(K) * X onto the stride-upsampled
/// grid (the adjoint of the gather).
inline CTensor<double> conv_oracle(const CTensor<double>& m,
                                   const CTensor<double>& k,
                                   const std::vector<std::complex<double>>& bias,
                                   const ConvGeom& g) {
  Shape4 ms = m.s4();
  int64_t co = k.shape[0], cig = k.shape[1], kh = k.shape[2], kw = k.shape[3];
  int64_t cog = co / g.groups;
  auto kat = [&](int64_t oc, int64_t ic, int64_t u, int64_t v) {
    return std::complex<double>(k.re[((oc * cig + ic) * kh + u) * kw + v],
                                k.im[((oc * cig + ic) * kh + u) * kw + v]);
  };
  auto mat = [&](int64_t n, int64_t c, int64_t y, int64_t x) {
    return std::complex<double>(m.re[((n * ms.c + c) * ms.h + y) * ms.w + x],
                                m.im[((n * ms.c + c) * ms.h + y) * ms.w + x]);
  };
  if (!g.transposed) {
    int64_t ho = (ms.h + 2 * g.pad - kh) / g.stride + 1;
    int64_t wo = (ms.w + 2 * g.pad - kw) / g.stride + 1;
    CTensor<double> out(ms.n, co, ho, wo);
    for (int64_t n = 0; n < ms.n; ++n)
      for (int64_t oc = 0; oc < co; ++oc) {
        int64_t grp = oc / cog;
        for (int64_t oy = 0; oy < ho; ++oy)
          for (int64_t ox = 0; ox < wo; ++ox) {
            std::complex<double> acc = bias.empty() ? 0.0 : bias[oc];
            for (int64_t ic = 0; ic < cig; ++ic)
              for (int64_t u = 0; u < kh; ++u)
                for (int64_t v = 0; v < kw; ++v) {
                  int64_t iy = oy * g.stride + u - g.pad;
                  int64_t ix = ox * g.stride + v - g.pad;
                  if (iy < 0 || iy >= ms.h || ix < 0 || ix >= ms.w) continue;
                  acc += kat(oc, ic, u, v) * mat(n, grp * cig + ic, iy, ix);
                }
            out.re[((n * co + oc) * ho + oy) * wo + ox] = acc.real();
            out.im[((n * co + oc) * ho + oy) * wo + ox] = acc.imag();
          }
      }
    return out;
  }
  // transposed: input carries co channels, output cig*groups channels
  int64_t ci = cig * g.groups;
  int64_t ho = ms.h * g.stride, wo = ms.w * g.stride;
  CTensor<double> out(ms.n, ci, ho, wo);
  for (int64_t n = 0; n < ms.n; ++n)
    for (int64_t oc = 0; oc < co; ++oc) {
      int64_t grp = oc / cog;
      for (int64_t y = 0; y < ms.h; ++y)
        for (int64_t x = 0; x < ms.w; ++x) {
          std::complex<double> src = mat(n, oc, y, x);
          for (int64_t ic = 0; ic < cig; ++ic)
            for (int64_t u = 0; u < kh; ++u)
              for (int64_t v = 0; v < kw; ++v) {
                int64_t iy = y * g.stride + u - g.pad;
                int64_t ix = x * g.stride + v - g.pad;
                if (iy < 0 || iy >= ho || ix < 0 || ix >= wo) continue;
                std::complex<double> val = std::conj(kat(oc, ic, u, v)) * src;
                int64_t at = ((n * ci + grp * cig + ic) * ho + iy) * wo + ix;
                out.re[at] += val.real();
                out.im[at] += val.imag();
              }
        }
    }
  if (!bias.empty())
    for (int64_t n = 0; n < ms.n; ++n)
      for (int64_t c = 0; c < ci; ++c)
        for (int64_t i = 0; i < ho * wo; ++i) {
          out.re[(n * ci + c) * ho * wo + i] += bias[c].real();
          out.im[(n * ci + c) * ho * wo + i] += bias[c].imag();
        }
  return out;
}

/// Direct (non-separable) windowed-formula SSIM oracle: every valid 11x11
/// window evaluated with explicit double loops.
template <typename T>
double ssim_oracle(const CTensor<T>& a, const CTensor<T>& b) {
  int64_t c = a.shape[0], h = a.shape[1], w = a.shape[2];
  double win[11][11], sum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      double dy = i - 5, dx = j - 5;
      win[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      sum += win[i][j];
    }
  for (auto& row : win)
    for (double& v : row) v /= sum;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* pa = a.re.data() + ch * h * w;
    const T* pb = b.re.data() + ch * h * w;
    double acc = 0;
    int64_t count = 0;
    for (int64_t y = 0; y + 11 <= h; ++y)
      for (int64_t x = 0; x + 11 <= w; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            double va = pa[(y + i) * w + x + j], vb = pb[(y + i) * w + x + j];
            ma += win[i][j] * va;
            mb += win[i][j] * vb;
            saa += win[i][j] * va * va;
            sbb += win[i][j] * vb * vb;
            sab += win[i][j] * va * vb;
          }
        double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        ++count;
      }
    total += acc / count;
  }
  return total / c;
}

template <typename T>
double psnr_oracle(const CTensor<T>& a, const CTensor<T>& b) {
  double se = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = static_cast<double>(a.re[i]) - b.re[i];
    se += d * d;
  }
  double mse = se / a.numel();
  return mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);
}

/// Per-sample mean and covariance of the (re, im) pairs over all (c, h, w).
struct SampleStats {
  double mu_r, mu_i, vrr, vii, vri;
};

template <typename T>
std::vector<SampleStats> complex_stats(const CTensor<T>& x) {
  Shape4 s = x.s4();
  const int64_t P = s.c * s.hw();
  std::vector<SampleStats> out(s.n);
  for (int64_t n = 0; n < s.n; ++n) {
    const T* xr = x.re.data() + n * P;
    const T* xi = x.im.data() + n * P;
    double mr = 0, mi = 0;
    for (int64_t k = 0; k < P; ++k) mr += xr[k];
    for (int64_t k = 0; k < P; ++k) mi += xi[k];
    mr /= P;
    mi /= P;
    double vrr = 0, vii = 0, vri = 0;
    for (int64_t k = 0; k < P; ++k) {
      double cr = xr[k] - mr, ci = xi[k] - mi;
      vrr += cr * cr;
      vii += ci * ci;
      vri += cr * ci;
    }
    out[n] = {mr, mi, vrr / P, vii / P, vri / P};
  }
  return out;
}

}  // namespace compnet::reference
