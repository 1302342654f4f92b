#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include "compnet/common.hpp"
#include "compnet/rng.hpp"

namespace compnet {

/// Canonical rank-4 extents (batch, channels, height, width).
struct Shape4 {
  int64_t n = 0, c = 0, h = 0, w = 0;
  int64_t numel() const { return n * c * h * w; }
  int64_t hw() const { return h * w; }
  bool operator==(const Shape4&) const = default;
};

/// Dense complex tensor stored as separate real/imaginary planar buffers.
/// Both planes are always materialized; a purely real tensor carries an
/// explicit zero imaginary buffer.
template <typename T>
struct CTensor {
  std::vector<int64_t> shape;
  std::vector<T> re, im;

  CTensor() = default;
  explicit CTensor(std::vector<int64_t> s) : shape(std::move(s)) {
    int64_t n = numel();
    re.assign(static_cast<size_t>(n), T(0));
    im.assign(static_cast<size_t>(n), T(0));
  }
  CTensor(std::initializer_list<int64_t> s)
      : CTensor(std::vector<int64_t>(s)) {}
  CTensor(int64_t n, int64_t c, int64_t h, int64_t w)
      : CTensor(std::vector<int64_t>{n, c, h, w}) {}
  explicit CTensor(Shape4 s) : CTensor(s.n, s.c, s.h, s.w) {}

  int64_t numel() const {
    int64_t p = 1;
    for (int64_t e : shape) p *= e;
    return shape.empty() ? 0 : p;
  }
  int rank() const { return static_cast<int>(shape.size()); }

  Shape4 s4() const {
    check_shape(rank() == 4, "expected rank-4 tensor, got rank " +
                                 std::to_string(rank()));
    return {shape[0], shape[1], shape[2], shape[3]};
  }

  bool same_shape(const CTensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i)
      os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }

  template <typename U>
  CTensor<U> cast() const {
    CTensor<U> out;
    out.shape = shape;
    out.re.assign(re.begin(), re.end());
    out.im.assign(im.begin(), im.end());
    return out;
  }

  bool all_finite() const {
    for (T v : re)
      if (!std::isfinite(v)) return false;
    for (T v : im)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

template <typename T>
void require_finite(const CTensor<T>& t, const char* where) {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite values produced by ") + where);
}

// --------------------------------------------------------------------------
// Elementwise algebra
// --------------------------------------------------------------------------

template <typename T>
CTensor<T> add(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  CTensor<T> out = a;
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] += b.re[i];
  for (int64_t i = 0; i < n; ++i) out.im[i] += b.im[i];
  return out;
}

template <typename T>
CTensor<T> sub(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b), "sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  CTensor<T> out = a;
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] -= b.re[i];
  for (int64_t i = 0; i < n; ++i) out.im[i] -= b.im[i];
  return out;
}

/// out = s * a for a complex scalar s.
template <typename T>
CTensor<T> scale(const CTensor<T>& a, std::complex<double> s) {
  CTensor<T> out = a;
  const T sr = static_cast<T>(s.real()), si = static_cast<T>(s.imag());
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    T xr = a.re[i], xi = a.im[i];
    out.re[i] = sr * xr - si * xi;
    out.im[i] = sr * xi + si * xr;
  }
  return out;
}

/// Elementwise complex product (a_r b_r - a_i b_i) + i (a_r b_i + a_i b_r).
template <typename T>
CTensor<T> hadamard(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b),
              "hadamard: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  CTensor<T> out = a;
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    T ar = a.re[i], ai = a.im[i], br = b.re[i], bi = b.im[i];
    out.re[i] = ar * br - ai * bi;
    out.im[i] = ar * bi + ai * br;
  }
  return out;
}

// --------------------------------------------------------------------------
// Channel concatenation / slicing (rank 4)
// --------------------------------------------------------------------------

template <typename T>
CTensor<T> concat_channels(const std::vector<const CTensor<T>*>& parts) {
  check_shape(!parts.empty(), "concat_channels: empty part list");
  Shape4 s0 = parts[0]->s4();
  int64_t c_total = 0;
  for (const auto* p : parts) {
    Shape4 s = p->s4();
    check_shape(s.n == s0.n && s.h == s0.h && s.w == s0.w,
                "concat_channels: N/H/W mismatch " + parts[0]->shape_str() +
                    " vs " + p->shape_str());
    c_total += s.c;
  }
  CTensor<T> out(s0.n, c_total, s0.h, s0.w);
  int64_t hw = s0.hw();
  for (int64_t n = 0; n < s0.n; ++n) {
    int64_t c_off = 0;
    for (const auto* p : parts) {
      int64_t pc = p->shape[1];
      const T* sr = p->re.data() + n * pc * hw;
      const T* si = p->im.data() + n * pc * hw;
      T* dr = out.re.data() + (n * c_total + c_off) * hw;
      T* di = out.im.data() + (n * c_total + c_off) * hw;
      std::copy(sr, sr + pc * hw, dr);
      std::copy(si, si + pc * hw, di);
      c_off += pc;
    }
  }
  return out;
}

template <typename T>
CTensor<T> concat_channels(const std::vector<CTensor<T>>& parts) {
  std::vector<const CTensor<T>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat_channels(ptrs);
}

/// Channels [c0, c1) of x.
template <typename T>
CTensor<T> slice_channels(const CTensor<T>& x, int64_t c0, int64_t c1) {
  Shape4 s = x.s4();
  check_shape(0 <= c0 && c0 < c1 && c1 <= s.c, "slice_channels: bad range");
  CTensor<T> out(s.n, c1 - c0, s.h, s.w);
  int64_t hw = s.hw(), cc = c1 - c0;
  for (int64_t n = 0; n < s.n; ++n) {
    const T* sr = x.re.data() + (n * s.c + c0) * hw;
    const T* si = x.im.data() + (n * s.c + c0) * hw;
    std::copy(sr, sr + cc * hw, out.re.data() + n * cc * hw);
    std::copy(si, si + cc * hw, out.im.data() + n * cc * hw);
  }
  return out;
}

// --------------------------------------------------------------------------
// Seeded initialization
// --------------------------------------------------------------------------

enum class InitScheme { kZeros, kUniformFanScaled, kUnitGaussian };

inline InitScheme parse_init_scheme(std::string_view s) {
  if (s == "zeros") return InitScheme::kZeros;
  if (s == "uniform-complex") return InitScheme::kUniformFanScaled;
  if (s == "unit-gaussian") return InitScheme::kUnitGaussian;
  throw ConfigError("unknown init scheme: " + std::string(s));
}

/// Fan counts in complex units. Rank-4 kernels (co, ci, kh, kw) use
/// fan_in = ci*kh*kw, fan_out = co*kh*kw; rank-2 uses (in, out); anything
/// else treats the whole tensor as both fans.
inline std::pair<int64_t, int64_t> fan_in_out(const std::vector<int64_t>& shape) {
  if (shape.size() == 4)
    return {shape[1] * shape[2] * shape[3], shape[0] * shape[2] * shape[3]};
  if (shape.size() == 2) return {shape[1], shape[0]};
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return {n, n};
}

template <typename T>
CTensor<T> seeded_init(std::vector<int64_t> shape, InitScheme scheme,
                       uint64_t seed) {
  CTensor<T> out(std::move(shape));
  if (scheme == InitScheme::kZeros) return out;
  Rng rng(seed);
  int64_t n = out.numel();
  if (scheme == InitScheme::kUniformFanScaled) {
    auto [fi, fo] = fan_in_out(out.shape);
    double b = std::sqrt(3.0 / static_cast<double>(fi + fo));
    for (int64_t i = 0; i < n; ++i) out.re[i] = static_cast<T>(rng.uniform(-b, b));
    for (int64_t i = 0; i < n; ++i) out.im[i] = static_cast<T>(rng.uniform(-b, b));
  } else {
    for (int64_t i = 0; i < n; ++i) out.re[i] = static_cast<T>(rng.normal());
    for (int64_t i = 0; i < n; ++i) out.im[i] = static_cast<T>(rng.normal());
  }
  return out;
}

// --------------------------------------------------------------------------
// Small helpers shared by tests and modules
// --------------------------------------------------------------------------

template <typename T>
double max_abs_diff(const CTensor<T>& a, const CTensor<T>& b) {
  check_shape(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.re[i]) - b.re[i]));
    m = std::max(m, std::abs(static_cast<double>(a.im[i]) - b.im[i]));
  }
  return m;
}

template <typename T>
bool bit_equal(const CTensor<T>& a, const CTensor<T>& b) {
  return a.shape == b.shape && a.re == b.re && a.im == b.im;
}

template <typename T>
CTensor<T> random_tensor(std::vector<int64_t> shape, uint64_t seed,
                         double lo = -1.0, double hi = 1.0) {
  CTensor<T> out(std::move(shape));
  Rng rng(seed);
  for (auto& v : out.re) v = static_cast<T>(rng.uniform(lo, hi));
  for (auto& v : out.im) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

}  // namespace compnet
