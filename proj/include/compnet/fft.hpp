#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "compnet/tensor.hpp"

namespace compnet {

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline int64_t next_pow2(int64_t n) {
  int64_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

/// One-dimensional DFT plan for a fixed length and sign. Power-of-two
/// lengths run iterative Cooley-Tukey; everything else goes through
/// Bluestein's chirp-z reduction to a power-of-two circular convolution.
/// Internal arithmetic is double precision regardless of tensor type.
class FftPlan {
 public:
  FftPlan(int64_t n, int sign) : n_(n), sign_(sign), pow2_(is_pow2(n)) {
    if (pow2_) {
      init_pow2(n, sign);
    } else {
      init_bluestein(n, sign);
    }
  }

  int64_t size() const { return n_; }

  /// In-place transform of buf[0..n); unnormalized.
  void transform(std::complex<double>* buf) const {
    if (pow2_) {
      transform_pow2(buf, n_, bitrev_, tw_);
      return;
    }
    // Bluestein: y_k = c_k * (u (*) v)_k with u_j = x_j c_j, v_j = conj(c_j).
    std::vector<std::complex<double>> u(m_, {0.0, 0.0});
    for (int64_t j = 0; j < n_; ++j) u[j] = buf[j] * chirp_[j];
    transform_pow2(u.data(), m_, inner_bitrev_, inner_tw_fwd_);
    for (int64_t j = 0; j < m_; ++j) u[j] *= chirp_fft_[j];
    transform_pow2(u.data(), m_, inner_bitrev_, inner_tw_inv_);
    const double inv_m = 1.0 / static_cast<double>(m_);
    for (int64_t k = 0; k < n_; ++k) buf[k] = u[k] * inv_m * chirp_[k];
  }

 private:
  static void transform_pow2(std::complex<double>* buf, int64_t n,
                             const std::vector<int32_t>& bitrev,
                             const std::vector<std::complex<double>>& tw) {
    for (int64_t i = 0; i < n; ++i) {
      int64_t j = bitrev[i];
      if (j > i) std::swap(buf[i], buf[j]);
    }
    for (int64_t len = 2; len <= n; len <<= 1) {
      int64_t step = n / len;
      for (int64_t blk = 0; blk < n; blk += len) {
        for (int64_t j = 0; j < len / 2; ++j) {
          std::complex<double> w = tw[j * step];
          std::complex<double> a = buf[blk + j];
          std::complex<double> b = buf[blk + j + len / 2] * w;
          buf[blk + j] = a + b;
          buf[blk + j + len / 2] = a - b;
        }
      }
    }
  }

  static std::vector<int32_t> make_bitrev(int64_t n) {
    std::vector<int32_t> rev(n, 0);
    int log2n = 0;
    while ((int64_t{1} << log2n) < n) ++log2n;
    for (int64_t i = 0; i < n; ++i) {
      int64_t r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (int64_t{1} << b)) r |= int64_t{1} << (log2n - 1 - b);
      rev[i] = static_cast<int32_t>(r);
    }
    return rev;
  }

  static std::vector<std::complex<double>> make_twiddles(int64_t n, int sign) {
    std::vector<std::complex<double>> tw(n / 2);
    for (int64_t j = 0; j < n / 2; ++j) {
      double a = sign * 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
      tw[j] = {std::cos(a), std::sin(a)};
    }
    return tw;
  }

  void init_pow2(int64_t n, int sign) {
    bitrev_ = make_bitrev(n);
    tw_ = make_twiddles(n, sign);
  }

  void init_bluestein(int64_t n, int sign) {
    m_ = next_pow2(2 * n - 1);
    chirp_.resize(n);
    for (int64_t j = 0; j < n; ++j) {
      // exp(sign*i*pi*j^2/n); reduce j^2 mod 2n to keep the angle small.
      int64_t q = (j * j) % (2 * n);
      double a = sign * kPi * static_cast<double>(q) / static_cast<double>(n);
      chirp_[j] = {std::cos(a), std::sin(a)};
    }
    inner_bitrev_ = make_bitrev(m_);
    inner_tw_fwd_ = make_twiddles(m_, -1);
    inner_tw_inv_ = make_twiddles(m_, +1);
    std::vector<std::complex<double>> v(m_, {0.0, 0.0});
    for (int64_t j = 0; j < n; ++j) {
      std::complex<double> c = std::conj(chirp_[j]);
      v[j] = c;
      if (j > 0) v[m_ - j] = c;
    }
    transform_pow2(v.data(), m_, inner_bitrev_, inner_tw_fwd_);
    chirp_fft_ = std::move(v);
  }

  int64_t n_;
  int sign_;
  bool pow2_;
  std::vector<int32_t> bitrev_;
  std::vector<std::complex<double>> tw_;
  // Bluestein state
  int64_t m_ = 0;
  std::vector<std::complex<double>> chirp_, chirp_fft_;
  std::vector<int32_t> inner_bitrev_;
  std::vector<std::complex<double>> inner_tw_fwd_, inner_tw_inv_;
};

}  // namespace detail

/// Unnormalized 2-D DFT with the given sign over the last two axes of a
/// rank-4 tensor, independently per (n, c) slice.
template <typename T>
CTensor<T> raw_dft2d(const CTensor<T>& x, int sign) {
  Shape4 s = x.s4();
  detail::FftPlan plan_w(s.w, sign);
  detail::FftPlan plan_h(s.h, sign);
  CTensor<T> out = x;
  int64_t slices = s.n * s.c;
  parallel_for(slices, [&](int64_t sl) {
    T* pr = out.re.data() + sl * s.hw();
    T* pi = out.im.data() + sl * s.hw();
    std::vector<std::complex<double>> buf(std::max(s.h, s.w));
    for (int64_t r = 0; r < s.h; ++r) {
      for (int64_t c = 0; c < s.w; ++c)
        buf[c] = {static_cast<double>(pr[r * s.w + c]),
                  static_cast<double>(pi[r * s.w + c])};
      plan_w.transform(buf.data());
      for (int64_t c = 0; c < s.w; ++c) {
        pr[r * s.w + c] = static_cast<T>(buf[c].real());
        pi[r * s.w + c] = static_cast<T>(buf[c].imag());
      }
    }
    for (int64_t c = 0; c < s.w; ++c) {
      for (int64_t r = 0; r < s.h; ++r)
        buf[r] = {static_cast<double>(pr[r * s.w + c]),
                  static_cast<double>(pi[r * s.w + c])};
      plan_h.transform(buf.data());
      for (int64_t r = 0; r < s.h; ++r) {
        pr[r * s.w + c] = static_cast<T>(buf[r].real());
        pi[r * s.w + c] = static_cast<T>(buf[r].imag());
      }
    }
  });
  return out;
}

/// Forward 2-D FFT, unnormalized.
template <typename T>
CTensor<T> fft2d(const CTensor<T>& x) {
  return raw_dft2d(x, -1);
}

/// Inverse 2-D FFT with 1/(H*W) normalization; ifft2d(fft2d(x)) == x.
template <typename T>
CTensor<T> ifft2d(const CTensor<T>& x) {
  Shape4 s = x.s4();
  CTensor<T> out = raw_dft2d(x, +1);
  const T scl = static_cast<T>(1.0 / static_cast<double>(s.hw()));
  for (auto& v : out.re) v *= scl;
  for (auto& v : out.im) v *= scl;
  return out;
}

}  // namespace compnet
