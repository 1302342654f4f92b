#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <vector>

#include "compnet/common.hpp"
#include "compnet/tensor.hpp"

namespace compnet {

/// Geometry of a 2-D convolution layer. Kernels are always stored in
/// forward orientation (co, ci/groups, kh, kw); a transposed layer maps
/// co -> ci with output extents exactly stride * input.
struct ConvGeom {
  int64_t stride = 1;
  int64_t pad = 0;
  int64_t groups = 1;
  bool transposed = false;

  bool operator==(const ConvGeom&) const = default;
};

namespace convk {

/// Resolved dimensions of the underlying forward convolution. For a
/// transposed layer these describe the adjoint direction: (ci, hi, wi) is
/// the layer output and (co, ho, wo) the layer input.
struct ConvDims {
  int64_t n, ci, hi, wi;
  int64_t co, ho, wo;
  int64_t kh, kw, stride, pad, groups;
  int64_t cig() const { return ci / groups; }
  int64_t cog() const { return co / groups; }
  int64_t krows() const { return cig() * kh * kw; }
  int64_t howo() const { return ho * wo; }
  int64_t hiwi() const { return hi * wi; }
  bool depthwise() const { return cig() == 1 && cog() == 1; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

constexpr int64_t kColBlock = 2048;

/// Fills patch-matrix columns [col0, col0+ncols) for sample n, group g.
/// Row r = (ci_in_group, u, v); column j = output position ho*wo + wo.
template <typename T>
void im2col_block(const ConvDims& d, const T* x, int64_t n, int64_t g,
                  int64_t col0, int64_t ncols, T* p) {
  const int64_t khkw = d.kh * d.kw;
  for (int64_t r = 0; r < d.krows(); ++r) {
    int64_t ci = r / khkw, u = (r / d.kw) % d.kh, v = r % d.kw;
    const T* src = x + ((n * d.ci + g * d.cig() + ci) * d.hi) * d.wi;
    T* dst = p + r * ncols;
    int64_t j = 0;
    while (j < ncols) {
      int64_t col = col0 + j;
      int64_t oh = col / d.wo, ow0 = col % d.wo;
      int64_t seg = std::min(ncols - j, d.wo - ow0);  // same output row
      int64_t iy = oh * d.stride + u - d.pad;
      if (iy < 0 || iy >= d.hi) {
        std::fill(dst + j, dst + j + seg, T(0));
        j += seg;
        continue;
      }
      const T* row = src + iy * d.wi;
      if (d.stride == 1) {
        int64_t ix0 = ow0 + v - d.pad;  // ix for first element of the segment
        int64_t lead = std::clamp(-ix0, int64_t{0}, seg);
        int64_t valid_end = std::clamp(d.wi - ix0, int64_t{0}, seg);
        std::fill(dst + j, dst + j + lead, T(0));
        if (valid_end > lead)
          std::memcpy(dst + j + lead, row + ix0 + lead,
                      sizeof(T) * static_cast<size_t>(valid_end - lead));
        std::fill(dst + j + valid_end, dst + j + seg, T(0));
      } else {
        for (int64_t k = 0; k < seg; ++k) {
          int64_t ix = (ow0 + k) * d.stride + v - d.pad;
          dst[j + k] = (ix >= 0 && ix < d.wi) ? row[ix] : T(0);
        }
      }
      j += seg;
    }
  }
}

/// Forward: for each fan, dst += sign * conv(kmat, x). dst is laid out
/// (n, co, ho, wo); kmat is the flattened (co, ci/g, kh, kw) kernel.
template <typename T>
struct FwdFan {
  const T* kmat;
  T* dst;
  T sign;
};

template <typename T>
void conv_fwd_plane(const ConvDims& d, const T* x, const FwdFan<T>* fans,
                    int nfans) {
  if (d.depthwise()) {
    parallel_for(d.n * d.co, [&](int64_t nc) {
      int64_t n = nc / d.co, c = nc % d.co;
      const T* src = x + (n * d.ci + c) * d.hiwi();
      for (int f = 0; f < nfans; ++f) {
        const T* k = fans[f].kmat + c * d.kh * d.kw;
        T* dst = fans[f].dst + (n * d.co + c) * d.howo();
        const T sign = fans[f].sign;
        for (int64_t oh = 0; oh < d.ho; ++oh)
          for (int64_t ow = 0; ow < d.wo; ++ow) {
            T acc = T(0);
            for (int64_t u = 0; u < d.kh; ++u) {
              int64_t iy = oh * d.stride + u - d.pad;
              if (iy < 0 || iy >= d.hi) continue;
              for (int64_t v = 0; v < d.kw; ++v) {
                int64_t ix = ow * d.stride + v - d.pad;
                if (ix < 0 || ix >= d.wi) continue;
                acc += k[u * d.kw + v] * src[iy * d.wi + ix];
              }
            }
            dst[oh * d.wo + ow] += sign * acc;
          }
      }
    });
    return;
  }
  const int64_t nblocks = (d.howo() + kColBlock - 1) / kColBlock;
  parallel_for(d.n * d.groups * nblocks, [&](int64_t item) {
    int64_t blk = item % nblocks;
    int64_t g = (item / nblocks) % d.groups;
    int64_t n = item / (nblocks * d.groups);
    int64_t col0 = blk * kColBlock;
    int64_t ncols = std::min(kColBlock, d.howo() - col0);
    std::vector<T> scratch;
    const T* pdata;
    int64_t pstride;
    if (d.pointwise()) {
      pdata = x + (n * d.ci + g * d.cig()) * d.hiwi() + col0;
      pstride = d.hiwi();
    } else {
      scratch.resize(static_cast<size_t>(d.krows() * ncols));
      im2col_block(d, x, n, g, col0, ncols, scratch.data());
      pdata = scratch.data();
      pstride = ncols;
    }
    ConstMatMap<T> P(pdata, d.krows(), ncols, Eigen::OuterStride<>(pstride));
    for (int f = 0; f < nfans; ++f) {
      ConstMatMap<T> K(fans[f].kmat + g * d.cog() * d.krows(), d.cog(),
                       d.krows(), Eigen::OuterStride<>(d.krows()));
      MatMap<T> dst(fans[f].dst + (n * d.co + g * d.cog()) * d.howo() + col0,
                    d.cog(), ncols, Eigen::OuterStride<>(d.howo()));
      if (fans[f].sign > T(0))
        dst.noalias() += K * P;
      else
        dst.noalias() -= K * P;
    }
  });
}

/// Data gradient / transposed forward: gx += sum_i sign_i * scatter(k_i, gy_i).
template <typename T>
struct DgradIn {
  const T* kmat;
  const T* gy;
  T sign;
};

template <typename T>
void conv_dgrad_plane(const ConvDims& d, const DgradIn<T>* ins, int nins,
                      T* gx) {
  if (d.depthwise()) {
    parallel_for(d.n * d.ci, [&](int64_t nc) {
      int64_t n = nc / d.ci, c = nc % d.ci;
      T* dst = gx + (n * d.ci + c) * d.hiwi();
      for (int64_t h = 0; h < d.hi; ++h)
        for (int64_t w = 0; w < d.wi; ++w) {
          T acc = T(0);
          for (int64_t u = 0; u < d.kh; ++u) {
            int64_t t = h + d.pad - u;
            if (t < 0 || t % d.stride) continue;
            int64_t oh = t / d.stride;
            if (oh >= d.ho) continue;
            for (int64_t v = 0; v < d.kw; ++v) {
              int64_t tw = w + d.pad - v;
              if (tw < 0 || tw % d.stride) continue;
              int64_t ow = tw / d.stride;
              if (ow >= d.wo) continue;
              for (int i = 0; i < nins; ++i)
                acc += ins[i].sign * ins[i].kmat[(c * d.kh + u) * d.kw + v] *
                       ins[i].gy[(n * d.co + c) * d.howo() + oh * d.wo + ow];
            }
          }
          dst[h * d.wi + w] += acc;
        }
    });
    return;
  }
  if (d.pointwise()) {
    const int64_t nblocks = (d.howo() + kColBlock - 1) / kColBlock;
    parallel_for(d.n * d.groups * nblocks, [&](int64_t item) {
      int64_t blk = item % nblocks;
      int64_t g = (item / nblocks) % d.groups;
      int64_t n = item / (nblocks * d.groups);
      int64_t col0 = blk * kColBlock;
      int64_t ncols = std::min(kColBlock, d.howo() - col0);
      MatMap<T> dst(gx + (n * d.ci + g * d.cig()) * d.hiwi() + col0, d.cig(),
                    ncols, Eigen::OuterStride<>(d.hiwi()));
      for (int i = 0; i < nins; ++i) {
        ConstMatMap<T> K(ins[i].kmat + g * d.cog() * d.krows(), d.cog(),
                         d.krows(), Eigen::OuterStride<>(d.krows()));
        ConstMatMap<T> GY(ins[i].gy + (n * d.co + g * d.cog()) * d.howo() + col0,
                          d.cog(), ncols, Eigen::OuterStride<>(d.howo()));
        if (ins[i].sign > T(0))
          dst.noalias() += K.transpose() * GY;
        else
          dst.noalias() -= K.transpose() * GY;
      }
    });
    return;
  }
  // General path: per (n, g) column matrix, then gather.
  std::vector<T> colmat(
      static_cast<size_t>(d.n * d.groups * d.krows() * d.howo()));
  const int64_t nblocks = (d.howo() + kColBlock - 1) / kColBlock;
  parallel_for(d.n * d.groups * nblocks, [&](int64_t item) {
    int64_t blk = item % nblocks;
    int64_t g = (item / nblocks) % d.groups;
    int64_t n = item / (nblocks * d.groups);
    int64_t col0 = blk * kColBlock;
    int64_t ncols = std::min(kColBlock, d.howo() - col0);
    MatMap<T> C(colmat.data() + (n * d.groups + g) * d.krows() * d.howo() + col0,
                d.krows(), ncols, Eigen::OuterStride<>(d.howo()));
    bool first = true;
    for (int i = 0; i < nins; ++i) {
      ConstMatMap<T> K(ins[i].kmat + g * d.cog() * d.krows(), d.cog(),
                       d.krows(), Eigen::OuterStride<>(d.krows()));
      ConstMatMap<T> GY(ins[i].gy + (n * d.co + g * d.cog()) * d.howo() + col0,
                        d.cog(), ncols, Eigen::OuterStride<>(d.howo()));
      if (first) {
        if (ins[i].sign > T(0))
          C.noalias() = K.transpose() * GY;
        else
          C.noalias() = -(K.transpose() * GY);
        first = false;
      } else if (ins[i].sign > T(0)) {
        C.noalias() += K.transpose() * GY;
      } else {
        C.noalias() -= K.transpose() * GY;
      }
    }
  });
  parallel_for(d.n * d.groups * d.cig(), [&](int64_t item) {
    int64_t ci = item % d.cig();
    int64_t g = (item / d.cig()) % d.groups;
    int64_t n = item / (d.cig() * d.groups);
    const T* cm =
        colmat.data() + ((n * d.groups + g) * d.krows() + ci * d.kh * d.kw) * d.howo();
    T* dst = gx + (n * d.ci + g * d.cig() + ci) * d.hiwi();
    for (int64_t u = 0; u < d.kh; ++u)
      for (int64_t v = 0; v < d.kw; ++v) {
        const T* crow = cm + (u * d.kw + v) * d.howo();
        for (int64_t oh = 0; oh < d.ho; ++oh) {
          int64_t iy = oh * d.stride + u - d.pad;
          if (iy < 0 || iy >= d.hi) continue;
          T* drow = dst + iy * d.wi;
          const T* srow = crow + oh * d.wo;
          if (d.stride == 1) {
            int64_t ix0 = v - d.pad;
            int64_t w0 = std::clamp(-ix0, int64_t{0}, d.wo);
            int64_t w1 = std::clamp(d.wi - ix0, int64_t{0}, d.wo);
            for (int64_t ow = w0; ow < w1; ++ow) drow[ix0 + ow] += srow[ow];
          } else {
            for (int64_t ow = 0; ow < d.wo; ++ow) {
              int64_t ix = ow * d.stride + v - d.pad;
              if (ix >= 0 && ix < d.wi) drow[ix] += srow[ow];
            }
          }
        }
      }
  });
}

/// Row-range im2col over all output columns (helper for the weight grad).
template <typename T>
void im2col_rows(const ConvDims& d, const T* x, int64_t n, int64_t g,
                 int64_t r0, int64_t rn, T* p) {
  const int64_t khkw = d.kh * d.kw;
  for (int64_t ri = 0; ri < rn; ++ri) {
    int64_t r = r0 + ri;
    int64_t ci = r / khkw, u = (r / d.kw) % d.kh, v = r % d.kw;
    const T* src = x + ((n * d.ci + g * d.cig() + ci) * d.hi) * d.wi;
    T* dst = p + ri * d.howo();
    for (int64_t oh = 0; oh < d.ho; ++oh) {
      int64_t iy = oh * d.stride + u - d.pad;
      T* drow = dst + oh * d.wo;
      if (iy < 0 || iy >= d.hi) {
        std::fill(drow, drow + d.wo, T(0));
        continue;
      }
      const T* row = src + iy * d.wi;
      if (d.stride == 1) {
        int64_t ix0 = v - d.pad;
        int64_t w0 = std::clamp(-ix0, int64_t{0}, d.wo);
        int64_t w1 = std::clamp(d.wi - ix0, int64_t{0}, d.wo);
        std::fill(drow, drow + w0, T(0));
        if (w1 > w0)
          std::memcpy(drow + w0, row + ix0 + w0,
                      sizeof(T) * static_cast<size_t>(w1 - w0));
        std::fill(drow + w1, drow + d.wo, T(0));
      } else {
        for (int64_t ow = 0; ow < d.wo; ++ow) {
          int64_t ix = ow * d.stride + v - d.pad;
          drow[ow] = (ix >= 0 && ix < d.wi) ? row[ix] : T(0);
        }
      }
    }
  }
}

/// Weight gradient: for each fan, gk += sign * wgrad(x, gy). Samples are
/// reduced in index order so results are bit-identical for any thread count.
template <typename T>
struct WgradFan {
  const T* gy;
  T* gk;
  T sign;
};

template <typename T>
void conv_wgrad_plane(const ConvDims& d, const T* x, const WgradFan<T>* fans,
                      int nfans) {
  if (d.depthwise()) {
    parallel_for(d.co, [&](int64_t c) {
      for (int f = 0; f < nfans; ++f) {
        T* gk = fans[f].gk + c * d.kh * d.kw;
        for (int64_t u = 0; u < d.kh; ++u)
          for (int64_t v = 0; v < d.kw; ++v) {
            T acc = T(0);
            for (int64_t n = 0; n < d.n; ++n) {
              const T* src = x + (n * d.ci + c) * d.hiwi();
              const T* gy = fans[f].gy + (n * d.co + c) * d.howo();
              for (int64_t oh = 0; oh < d.ho; ++oh) {
                int64_t iy = oh * d.stride + u - d.pad;
                if (iy < 0 || iy >= d.hi) continue;
                for (int64_t ow = 0; ow < d.wo; ++ow) {
                  int64_t ix = ow * d.stride + v - d.pad;
                  if (ix < 0 || ix >= d.wi) continue;
                  acc += src[iy * d.wi + ix] * gy[oh * d.wo + ow];
                }
              }
            }
            gk[u * d.kw + v] += fans[f].sign * acc;
          }
      }
    });
    return;
  }
  const int64_t kchunk = 64;
  const int64_t nchunks = (d.krows() + kchunk - 1) / kchunk;
  std::vector<T> scratch;
  if (!d.pointwise())
    scratch.resize(static_cast<size_t>(d.krows() * d.howo()));
  for (int64_t n = 0; n < d.n; ++n) {
    for (int64_t g = 0; g < d.groups; ++g) {
      const T* pdata;
      int64_t pstride;
      if (d.pointwise()) {
        pdata = x + (n * d.ci + g * d.cig()) * d.hiwi();
        pstride = d.hiwi();
      } else {
        parallel_for(nchunks, [&](int64_t ch) {
          int64_t r0 = ch * kchunk;
          int64_t rn = std::min(kchunk, d.krows() - r0);
          im2col_rows(d, x, n, g, r0, rn, scratch.data() + r0 * d.howo());
        });
        pdata = scratch.data();
        pstride = d.howo();
      }
      parallel_for(nchunks, [&](int64_t ch) {
        int64_t c0 = ch * kchunk;
        int64_t cn = std::min(kchunk, d.krows() - c0);
        ConstMatMap<T> P(pdata + c0 * pstride, cn, d.howo(),
                         Eigen::OuterStride<>(pstride));
        for (int f = 0; f < nfans; ++f) {
          ConstMatMap<T> GY(fans[f].gy + (n * d.co + g * d.cog()) * d.howo(),
                            d.cog(), d.howo(), Eigen::OuterStride<>(d.howo()));
          MatMap<T> GK(fans[f].gk + g * d.cog() * d.krows() + c0, d.cog(), cn,
                       Eigen::OuterStride<>(d.krows()));
          if (fans[f].sign > T(0))
            GK.noalias() += GY * P.transpose();
          else
            GK.noalias() -= GY * P.transpose();
        }
      });
    }
  }
}

}  // namespace convk
}  // namespace compnet
