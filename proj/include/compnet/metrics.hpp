#pragma once

#include <cmath>

#include "compnet/tensor.hpp"

namespace compnet {

/// PSNR in dB for [0,1] images (real plane), capped at 100 dB when
/// MSE < 1e-10.
template <typename T>
double psnr(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b), "psnr: shape mismatch");
  double mse = 0;
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(a.re[i]) - b.re[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window11() {
  std::vector<double> w(11);
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    double d = i - 5;
    w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// separable valid-mode Gaussian filter of one (H, W) plane
template <typename T>
std::vector<double> gauss_valid(const T* img, int64_t h, int64_t w,
                                const std::vector<double>& k) {
  const int64_t r = 11, oh = h - r + 1, ow = w - r + 1;
  std::vector<double> tmp(static_cast<size_t>(h * ow));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t i = 0; i < r; ++i) acc += k[i] * img[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh * ow));
  for (int64_t y = 0; y < oh; ++y)
    for (int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int64_t i = 0; i < r; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// SSIM with an 11x11 Gaussian window (sigma = 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1; computed per channel over valid window positions and
/// averaged. Images are (C, H, W) real tensors with H, W >= 11.
template <typename T>
double ssim(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b), "ssim: shape mismatch");
  check_shape(a.rank() == 3, "ssim: expected (C,H,W) images");
  int64_t c = a.shape[0], h = a.shape[1], w = a.shape[2];
  check_shape(h >= 11 && w >= 11, "ssim: images must be at least 11x11");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  auto win = detail::gaussian_window11();
  double total = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* pa = a.re.data() + ch * h * w;
    const T* pb = b.re.data() + ch * h * w;
    std::vector<T> aa(h * w), bb(h * w), ab(h * w);
    for (int64_t i = 0; i < h * w; ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    auto mu_a = detail::gauss_valid(pa, h, w, win);
    auto mu_b = detail::gauss_valid(pb, h, w, win);
    auto m_aa = detail::gauss_valid(aa.data(), h, w, win);
    auto m_bb = detail::gauss_valid(bb.data(), h, w, win);
    auto m_ab = detail::gauss_valid(ab.data(), h, w, win);
    double acc = 0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      double va = m_aa[i] - mu_a[i] * mu_a[i];
      double vb = m_bb[i] - mu_b[i] * mu_b[i];
      double cov = m_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(c);
}

}  // namespace compnet
