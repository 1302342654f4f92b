#pragma once

#include <functional>
#include <vector>

#include "compnet/ops_conv.hpp"

namespace compnet {

/// Complex GRU Module: three gate convolutions mapping the channel
/// concatenation [Z, H] (2C channels) back to C channels, 3x3, stride 1,
/// zero padding 1.
template <typename T>
struct CGMCell {
  ComplexConv2d<T> conv_r, conv_u, conv_h;
  int64_t channels = 0;

  CGMCell() = default;
  CGMCell(const std::string& name, int64_t c, uint64_t seed) : channels(c) {
    ConvGeom g{.stride = 1, .pad = 1};
    conv_r = ComplexConv2d<T>::conv(name + ".conv_r", 2 * c, c, 3, g, true,
                                    InitScheme::kUniformFanScaled, seed);
    conv_u = ComplexConv2d<T>::conv(name + ".conv_u", 2 * c, c, 3, g, true,
                                    InitScheme::kUniformFanScaled, seed);
    conv_h = ComplexConv2d<T>::conv(name + ".conv_h", 2 * c, c, 3, g, true,
                                    InitScheme::kUniformFanScaled, seed);
  }

  void params(std::vector<Parameter<T>*>& out) {
    conv_r.params(out);
    conv_u.params(out);
    conv_h.params(out);
  }
};

/// H_t = (1 - U) ⊙ H_prev + U ⊙ H_tilde with complex gates and complex
/// Hadamard products. Exposed separately so the convex-endpoint identities
/// (U = 0, U = 1) can be exercised with stubbed gates.
template <typename T>
Var cgm_combine(Tape<T>& t, Var u, Var h_prev, Var h_tilde) {
  return add(t, hadamard(t, one_minus(t, u), h_prev), hadamard(t, u, h_tilde));
}

/// One CGM step:
///   R = sigma_c(conv_r([Z, H]));  U = sigma_c(conv_u([Z, H]))
///   H~ = tanh_c(conv_h([Z, R ⊙ H]));  H' = (1-U) ⊙ H + U ⊙ H~
template <typename T>
Var cgm_step(Tape<T>& t, Var z, Var h_prev, CGMCell<T>& cell) {
  check_shape(t.value(z).s4() == t.value(h_prev).s4(),
              "cgm_step: Z and H must share shape");
  Var zh = concat_channels(t, {z, h_prev});
  Var r = split_sigmoid(t, cell.conv_r.forward(t, zh));
  Var u = split_sigmoid(t, cell.conv_u.forward(t, zh));
  Var zrh = concat_channels(t, {z, hadamard(t, r, h_prev)});
  Var h_tilde = split_tanh(t, cell.conv_h.forward(t, zrh));
  return cgm_combine(t, u, h_prev, h_tilde);
}

/// Runs a step function forward and backward over a frame sequence with
/// zero initial hidden states; per-frame output is the channel concat of
/// the two direction states at that frame.
template <typename T>
std::vector<Var> run_bidirectional_with(
    Tape<T>& t, const std::vector<Var>& seq,
    const std::function<Var(Tape<T>&, Var, Var)>& step_fwd,
    const std::function<Var(Tape<T>&, Var, Var)>& step_bwd,
    int64_t hidden_channels) {
  check_shape(!seq.empty(), "run_bidirectional: empty sequence");
  Shape4 s = t.value(seq[0]).s4();
  const size_t len = seq.size();
  CTensor<T> zeros(s.n, hidden_channels, s.h, s.w);
  std::vector<Var> fwd(len), bwd(len);
  Var h = t.input(zeros);
  for (size_t k = 0; k < len; ++k) {
    h = step_fwd(t, seq[k], h);
    fwd[k] = h;
  }
  h = t.input(zeros);
  for (size_t k = len; k-- > 0;) {
    h = step_bwd(t, seq[k], h);
    bwd[k] = h;
  }
  std::vector<Var> out(len);
  for (size_t k = 0; k < len; ++k)
    out[k] = concat_channels(t, {fwd[k], bwd[k]});
  return out;
}

/// Bidirectional CTA-GRU with untied forward/backward cells.
template <typename T>
std::vector<Var> run_bidirectional(Tape<T>& t, const std::vector<Var>& seq,
                                   CGMCell<T>& fwd, CGMCell<T>& bwd) {
  return run_bidirectional_with<T>(
      t, seq,
      [&fwd](Tape<T>& t, Var z, Var h) { return cgm_step(t, z, h, fwd); },
      [&bwd](Tape<T>& t, Var z, Var h) { return cgm_step(t, z, h, bwd); },
      fwd.channels);
}

/// Real-valued ConvGRU cell for the real-concat ablation variant; gates are
/// real convolutions with real split-free activations.
template <typename T>
struct RealGruCell {
  RealConv2d<T> conv_r, conv_u, conv_h;
  int64_t in_channels = 0, hidden_channels = 0;

  RealGruCell() = default;
  RealGruCell(const std::string& name, int64_t in_c, int64_t hidden_c,
              uint64_t seed)
      : in_channels(in_c), hidden_channels(hidden_c) {
    ConvGeom g{.stride = 1, .pad = 1};
    conv_r = RealConv2d<T>::conv(name + ".conv_r", in_c + hidden_c, hidden_c, 3,
                                 g, true, InitScheme::kUniformFanScaled, seed);
    conv_u = RealConv2d<T>::conv(name + ".conv_u", in_c + hidden_c, hidden_c, 3,
                                 g, true, InitScheme::kUniformFanScaled, seed);
    conv_h = RealConv2d<T>::conv(name + ".conv_h", in_c + hidden_c, hidden_c, 3,
                                 g, true, InitScheme::kUniformFanScaled, seed);
  }

  void params(std::vector<Parameter<T>*>& out) {
    conv_r.params(out);
    conv_u.params(out);
    conv_h.params(out);
  }
};

template <typename T>
Var real_gru_step(Tape<T>& t, Var z, Var h_prev, RealGruCell<T>& cell) {
  Var zh = concat_channels(t, {z, h_prev});
  Var r = real_sigmoid(t, cell.conv_r.forward(t, zh));
  Var u = real_sigmoid(t, cell.conv_u.forward(t, zh));
  Var zrh = concat_channels(t, {z, hadamard(t, r, h_prev)});
  Var h_tilde = real_tanh(t, cell.conv_h.forward(t, zrh));
  return cgm_combine(t, u, h_prev, h_tilde);  // zero-imag carriers
}

template <typename T>
std::vector<Var> run_bidirectional_real(Tape<T>& t, const std::vector<Var>& seq,
                                        RealGruCell<T>& fwd, RealGruCell<T>& bwd) {
  return run_bidirectional_with<T>(
      t, seq,
      [&fwd](Tape<T>& t, Var z, Var h) { return real_gru_step(t, z, h, fwd); },
      [&bwd](Tape<T>& t, Var z, Var h) { return real_gru_step(t, z, h, bwd); },
      fwd.hidden_channels);
}

}  // namespace compnet
