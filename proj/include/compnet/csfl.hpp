#pragma once

#include <string>
#include <vector>

#include "compnet/ops_conv.hpp"
#include "compnet/ops_fft.hpp"
#include "compnet/ops_norm.hpp"

namespace compnet {

/// Complex Space-Frequency Block. Dual branches over a CLN-normalized
/// input with expansion factor 2, residual composition, then a CFFN:
///   X'  = CLN1(X)
///   X'' = X + pw2(sGeLU(dw(pw1(X')))) + IFFT(pw2'(sGeLU(dw'(pw1'(FFT(X'))))))
///   out = pw4(sGeLU(pw3(CLN2(X'')))) + X''
/// pw2/pw2'/pw4 are zero-initialized so a fresh block is an exact identity.
template <typename T>
struct CSFB {
  ComplexLayerNorm<T> cln1, cln2;
  ComplexConv2d<T> sp_pw1, sp_dw, sp_pw2;
  ComplexConv2d<T> fq_pw1, fq_dw, fq_pw2;
  ComplexConv2d<T> ff_pw3, ff_pw4;
  int64_t channels = 0;
  bool freq_branch = true;
  /// Diagnostic switch: skip the branch activations so linearity properties
  /// (Fourier multiplication theorem) can be tested directly.
  bool linear_mode = false;

  CSFB() = default;
  CSFB(const std::string& name, int64_t c, ClnMode cln_mode, bool with_freq,
       uint64_t seed)
      : cln1(name + ".cln1", c, cln_mode),
        cln2(name + ".cln2", c, cln_mode),
        channels(c),
        freq_branch(with_freq) {
    ConvGeom pw{}, dw{.stride = 1, .pad = 1, .groups = 2 * c};
    auto u = InitScheme::kUniformFanScaled;
    sp_pw1 = ComplexConv2d<T>::conv(name + ".sp_pw1", c, 2 * c, 1, pw, true, u, seed);
    sp_dw = ComplexConv2d<T>::conv(name + ".sp_dw", 2 * c, 2 * c, 3, dw, true, u, seed);
    sp_pw2 = ComplexConv2d<T>::conv(name + ".sp_pw2", 2 * c, c, 1, pw, true,
                                    InitScheme::kZeros, seed);
    if (with_freq) {
      fq_pw1 = ComplexConv2d<T>::conv(name + ".fq_pw1", c, 2 * c, 1, pw, true, u, seed);
      fq_dw = ComplexConv2d<T>::conv(name + ".fq_dw", 2 * c, 2 * c, 3, dw, true, u, seed);
      fq_pw2 = ComplexConv2d<T>::conv(name + ".fq_pw2", 2 * c, c, 1, pw, true,
                                      InitScheme::kZeros, seed);
    }
    ff_pw3 = ComplexConv2d<T>::conv(name + ".ff_pw3", c, 2 * c, 1, pw, true, u, seed);
    ff_pw4 = ComplexConv2d<T>::conv(name + ".ff_pw4", 2 * c, c, 1, pw, true,
                                    InitScheme::kZeros, seed);
  }

  Var spatial_branch(Tape<T>& t, Var xp) {
    Var v = sp_dw.forward(t, sp_pw1.forward(t, xp));
    if (!linear_mode) v = split_gelu(t, v);
    return sp_pw2.forward(t, v);
  }

  /// The spectrum is processed holistically as one complex field; no
  /// real/imaginary separation around the convolutions.
  Var frequency_branch(Tape<T>& t, Var xp) {
    Var v = fft2d(t, xp);
    v = fq_dw.forward(t, fq_pw1.forward(t, v));
    if (!linear_mode) v = split_gelu(t, v);
    v = fq_pw2.forward(t, v);
    return ifft2d(t, v);
  }

  Var forward(Tape<T>& t, Var x) {
    Var xp = cln1.forward(t, x);
    Var mid = add(t, x, spatial_branch(t, xp));
    if (freq_branch) mid = add(t, mid, frequency_branch(t, xp));
    Var ff = ff_pw4.forward(
        t, split_gelu(t, ff_pw3.forward(t, cln2.forward(t, mid))));
    return add(t, ff, mid);
  }

  void params(std::vector<Parameter<T>*>& out) {
    cln1.params(out);
    cln2.params(out);
    sp_pw1.params(out);
    sp_dw.params(out);
    sp_pw2.params(out);
    if (freq_branch) {
      fq_pw1.params(out);
      fq_dw.params(out);
      fq_pw2.params(out);
    }
    ff_pw3.params(out);
    ff_pw4.params(out);
  }

  int64_t param_count() const {
    int64_t n = sp_pw1.param_count() + sp_dw.param_count() + sp_pw2.param_count() +
                ff_pw3.param_count() + ff_pw4.param_count();
    if (freq_branch)
      n += fq_pw1.param_count() + fq_dw.param_count() + fq_pw2.param_count();
    bool diag = cln1.mode != ClnMode::kWhiten;
    n += 2 * ((diag ? 2 : 4) * channels + 2 * channels);  // two CLNs
    return n;
  }
};

/// Hierarchical U-Net of CSFBs: per-level encoder stacks with strided
/// complex-conv downsampling, a bottleneck stack, transposed-conv
/// upsampling, concat+1x1 skip fusion, and three per-frame 1x1 heads on the
/// shared trunk output. Channel width doubles per level.
template <typename T>
struct UNetTrunk {
  ComplexConv2d<T> fuse_in;
  std::vector<std::vector<CSFB<T>>> enc;  // levels 0..L-1 (last = bottleneck)
  std::vector<ComplexConv2d<T>> down;     // L-1
  std::vector<ComplexConv2d<T>> up;       // L-1
  std::vector<ComplexConv2d<T>> skip;     // L-1
  std::vector<std::vector<CSFB<T>>> dec;  // levels L-2..0 stored by level index
  std::vector<ComplexConv2d<T>> heads;    // 3 per-frame 1x1 convs, C -> C
  int64_t base_c = 0, levels = 3, blocks = 2;

  UNetTrunk() = default;
  UNetTrunk(const std::string& name, int64_t in_c, int64_t c, int64_t L,
            int64_t B, ClnMode cln_mode, bool with_freq, uint64_t seed)
      : base_c(c), levels(L), blocks(B) {
    check_shape(L >= 2 && L <= 4, "unet: supported depth range is 2-4 levels");
    auto u = InitScheme::kUniformFanScaled;
    fuse_in = ComplexConv2d<T>::conv(name + ".fuse_in", in_c, c, 1, {}, true, u, seed);
    enc.resize(L);
    dec.resize(L - 1);
    for (int64_t l = 0; l < L; ++l) {
      int64_t cl = c << l;
      for (int64_t b = 0; b < B; ++b)
        enc[l].emplace_back(name + ".enc" + std::to_string(l) + "." + std::to_string(b),
                            cl, cln_mode, with_freq, seed);
      if (l + 1 < L) {
        down.push_back(ComplexConv2d<T>::conv(name + ".down" + std::to_string(l),
                                              cl, 2 * cl, 3, {.stride = 2, .pad = 1},
                                              true, u, seed));
        up.push_back(ComplexConv2d<T>::transposed(
            name + ".up" + std::to_string(l), 2 * cl, cl, 3,
            {.stride = 2, .pad = 1}, true, u, seed));
        skip.push_back(ComplexConv2d<T>::conv(name + ".skip" + std::to_string(l),
                                              2 * cl, cl, 1, {}, true, u, seed));
        for (int64_t b = 0; b < B; ++b)
          dec[l].emplace_back(name + ".dec" + std::to_string(l) + "." + std::to_string(b),
                              cl, cln_mode, with_freq, seed);
      }
    }
    for (int k = 0; k < 3; ++k)
      heads.push_back(ComplexConv2d<T>::conv(name + ".head" + std::to_string(k),
                                             c, c, 1, {}, true, u, seed));
  }

  Var forward_trunk(Tape<T>& t, Var x) {
    Shape4 s = t.value(x).s4();
    int64_t div = int64_t{1} << (levels - 1);
    check_shape(s.h % div == 0 && s.w % div == 0,
                "unet: spatial extents must be divisible by " + std::to_string(div));
    Var v = fuse_in.forward(t, x);
    std::vector<Var> skips(levels - 1);
    for (int64_t l = 0; l + 1 < levels; ++l) {
      for (auto& blk : enc[l]) v = blk.forward(t, v);
      skips[l] = v;
      v = down[l].forward(t, v);
    }
    for (auto& blk : enc[levels - 1]) v = blk.forward(t, v);
    for (int64_t l = levels - 2; l >= 0; --l) {
      v = up[l].forward(t, v);
      v = skip[l].forward(t, concat_channels(t, {skips[l], v}));
      for (auto& blk : dec[l]) v = blk.forward(t, v);
    }
    return v;
  }

  /// Trunk + the three per-frame heads.
  std::array<Var, 3> forward(Tape<T>& t, Var x) {
    Var trunk = forward_trunk(t, x);
    return {heads[0].forward(t, trunk), heads[1].forward(t, trunk),
            heads[2].forward(t, trunk)};
  }

  void params(std::vector<Parameter<T>*>& out) {
    fuse_in.params(out);
    for (auto& lv : enc)
      for (auto& b : lv) b.params(out);
    for (auto& d : down) d.params(out);
    for (auto& u : up) u.params(out);
    for (auto& s : skip) s.params(out);
    for (auto& lv : dec)
      for (auto& b : lv) b.params(out);
    for (auto& h : heads) h.params(out);
  }

  int64_t param_count() const {
    int64_t n = fuse_in.param_count();
    for (const auto& lv : enc)
      for (const auto& b : lv) n += b.param_count();
    for (const auto& d : down) n += d.param_count();
    for (const auto& u : up) n += u.param_count();
    for (const auto& s : skip) n += s.param_count();
    for (const auto& lv : dec)
      for (const auto& b : lv) n += b.param_count();
    for (const auto& h : heads) n += h.param_count();
    return n;
  }
};

// ---------------------------------------------------------------------------
// Real-valued twin (ablation variant (b)). Complex width C maps to a real
// carrier width of about sqrt(2)*C so parameter counts stay comparable; the
// frequency branch stacks the spectrum's components into channels, convolves,
// and returns to the spatial domain through the inverse FFT's real part.
// ---------------------------------------------------------------------------

inline int64_t real_width(int64_t complex_c) {
  return static_cast<int64_t>(std::llround(std::sqrt(2.0) * static_cast<double>(complex_c)));
}

template <typename T>
struct RealCSFB {
  RealLayerNorm<T> ln1, ln2;
  RealConv2d<T> sp_pw1, sp_dw, sp_pw2;
  RealConv2d<T> fq_pw1, fq_dw, fq_pw2;
  RealConv2d<T> ff_pw3, ff_pw4;
  int64_t channels = 0;
  bool freq_branch = true;

  RealCSFB() = default;
  RealCSFB(const std::string& name, int64_t m, bool with_freq, uint64_t seed)
      : ln1(name + ".ln1", m), ln2(name + ".ln2", m), channels(m),
        freq_branch(with_freq) {
    ConvGeom pw{}, dw{.stride = 1, .pad = 1, .groups = 2 * m};
    ConvGeom dwf{.stride = 1, .pad = 1, .groups = m};
    auto u = InitScheme::kUniformFanScaled;
    sp_pw1 = RealConv2d<T>::conv(name + ".sp_pw1", m, 2 * m, 1, pw, true, u, seed);
    sp_dw = RealConv2d<T>::conv(name + ".sp_dw", 2 * m, 2 * m, 3, dw, true, u, seed);
    sp_pw2 = RealConv2d<T>::conv(name + ".sp_pw2", 2 * m, m, 1, pw, true,
                                 InitScheme::kZeros, seed);
    if (with_freq) {
      fq_pw1 = RealConv2d<T>::conv(name + ".fq_pw1", 2 * m, m, 1, pw, true, u, seed);
      fq_dw = RealConv2d<T>::conv(name + ".fq_dw", m, m, 3, dwf, true, u, seed);
      fq_pw2 = RealConv2d<T>::conv(name + ".fq_pw2", m, 2 * m, 1, pw, true,
                                   InitScheme::kZeros, seed);
    }
    ff_pw3 = RealConv2d<T>::conv(name + ".ff_pw3", m, 2 * m, 1, pw, true, u, seed);
    ff_pw4 = RealConv2d<T>::conv(name + ".ff_pw4", 2 * m, m, 1, pw, true,
                                 InitScheme::kZeros, seed);
  }

  Var forward(Tape<T>& t, Var x) {
    Var xp = ln1.forward(t, x);
    Var sp = sp_pw2.forward(t, real_gelu(t, sp_dw.forward(t, sp_pw1.forward(t, xp))));
    Var mid = add(t, x, sp);
    if (freq_branch) {
      // split the spectrum into stacked real channels (the staged-fusion way)
      Var f = stack_reim(t, fft2d(t, xp));
      f = real_gelu(t, fq_dw.forward(t, fq_pw1.forward(t, f)));
      f = fq_pw2.forward(t, f);
      Var back = take_real(t, ifft2d(t, unstack_reim(t, f)));
      mid = add(t, mid, back);
    }
    Var ff = ff_pw4.forward(t, real_gelu(t, ff_pw3.forward(t, ln2.forward(t, mid))));
    return add(t, ff, mid);
  }

  void params(std::vector<Parameter<T>*>& out) {
    ln1.params(out);
    ln2.params(out);
    sp_pw1.params(out);
    sp_dw.params(out);
    sp_pw2.params(out);
    if (freq_branch) {
      fq_pw1.params(out);
      fq_dw.params(out);
      fq_pw2.params(out);
    }
    ff_pw3.params(out);
    ff_pw4.params(out);
  }

  int64_t param_count() const {
    int64_t n = sp_pw1.param_count() + sp_dw.param_count() + sp_pw2.param_count() +
                ff_pw3.param_count() + ff_pw4.param_count() + 4 * channels;
    if (freq_branch)
      n += fq_pw1.param_count() + fq_dw.param_count() + fq_pw2.param_count();
    return n;
  }
};

template <typename T>
struct RealUNetTrunk {
  RealConv2d<T> fuse_in;
  std::vector<std::vector<RealCSFB<T>>> enc;
  std::vector<RealConv2d<T>> down, up, skip;
  std::vector<std::vector<RealCSFB<T>>> dec;
  std::vector<RealConv2d<T>> heads;
  int64_t base_c = 0, levels = 3, blocks = 2;

  RealUNetTrunk() = default;
  RealUNetTrunk(const std::string& name, int64_t in_c, int64_t base_complex_c,
                int64_t L, int64_t B, bool with_freq, uint64_t seed)
      : base_c(real_width(base_complex_c)), levels(L), blocks(B) {
    check_shape(L >= 2 && L <= 4, "unet: supported depth range is 2-4 levels");
    auto u = InitScheme::kUniformFanScaled;
    auto width = [&](int64_t l) { return real_width(base_complex_c << l); };
    fuse_in = RealConv2d<T>::conv(name + ".fuse_in", in_c, width(0), 1, {}, true, u, seed);
    enc.resize(L);
    dec.resize(L - 1);
    for (int64_t l = 0; l < L; ++l) {
      for (int64_t b = 0; b < B; ++b)
        enc[l].emplace_back(name + ".enc" + std::to_string(l) + "." + std::to_string(b),
                            width(l), with_freq, seed);
      if (l + 1 < L) {
        down.push_back(RealConv2d<T>::conv(name + ".down" + std::to_string(l),
                                           width(l), width(l + 1), 3,
                                           {.stride = 2, .pad = 1}, true, u, seed));
        up.push_back(RealConv2d<T>::transposed(name + ".up" + std::to_string(l),
                                               width(l + 1), width(l), 3,
                                               {.stride = 2, .pad = 1}, true, u, seed));
        skip.push_back(RealConv2d<T>::conv(name + ".skip" + std::to_string(l),
                                           2 * width(l), width(l), 1, {}, true, u, seed));
        for (int64_t b = 0; b < B; ++b)
          dec[l].emplace_back(name + ".dec" + std::to_string(l) + "." + std::to_string(b),
                              width(l), with_freq, seed);
      }
    }
    for (int k = 0; k < 3; ++k)
      heads.push_back(RealConv2d<T>::conv(name + ".head" + std::to_string(k),
                                          width(0), width(0), 1, {}, true, u, seed));
  }

  Var forward_trunk(Tape<T>& t, Var x) {
    Shape4 s = t.value(x).s4();
    int64_t div = int64_t{1} << (levels - 1);
    check_shape(s.h % div == 0 && s.w % div == 0,
                "unet: spatial extents must be divisible by " + std::to_string(div));
    Var v = fuse_in.forward(t, x);
    std::vector<Var> skips(levels - 1);
    for (int64_t l = 0; l + 1 < levels; ++l) {
      for (auto& blk : enc[l]) v = blk.forward(t, v);
      skips[l] = v;
      v = down[l].forward(t, v);
    }
    for (auto& blk : enc[levels - 1]) v = blk.forward(t, v);
    for (int64_t l = levels - 2; l >= 0; --l) {
      v = up[l].forward(t, v);
      v = skip[l].forward(t, concat_channels(t, {skips[l], v}));
      for (auto& blk : dec[l]) v = blk.forward(t, v);
    }
    return v;
  }

  void params(std::vector<Parameter<T>*>& out) {
    fuse_in.params(out);
    for (auto& lv : enc)
      for (auto& b : lv) b.params(out);
    for (auto& d : down) d.params(out);
    for (auto& u : up) u.params(out);
    for (auto& s : skip) s.params(out);
    for (auto& lv : dec)
      for (auto& b : lv) b.params(out);
    for (auto& h : heads) h.params(out);
  }

  int64_t param_count() const {
    int64_t n = fuse_in.param_count();
    for (const auto& lv : enc)
      for (const auto& b : lv) n += b.param_count();
    for (const auto& d : down) n += d.param_count();
    for (const auto& u : up) n += u.param_count();
    for (const auto& s : skip) n += s.param_count();
    for (const auto& lv : dec)
      for (const auto& b : lv) n += b.param_count();
    for (const auto& h : heads) n += h.param_count();
    return n;
  }
};

}  // namespace compnet
