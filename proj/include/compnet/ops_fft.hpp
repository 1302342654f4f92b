#pragma once

#include "compnet/autograd.hpp"
#include "compnet/fft.hpp"

namespace compnet {

/// Unnormalized forward 2-D FFT over (H, W). The real-space adjoint of the
/// DFT matrix is its conjugate, so the backward pass applies the
/// unnormalized inverse transform to the cotangent.
template <typename T>
Var fft2d(Tape<T>& t, Var x) {
  CTensor<T> out = fft2d(t.value(x));
  return t.make(std::move(out), {x.id},
                [x](Tape<T>& t, int32_t self) {
                  t.add_grad(x.id, raw_dft2d(*t.grad_of(Var{self}), +1));
                },
                "fft2d");
}

/// Inverse 2-D FFT with 1/(H*W) normalization.
template <typename T>
Var ifft2d(Tape<T>& t, Var x) {
  CTensor<T> out = ifft2d(t.value(x));
  return t.make(std::move(out), {x.id},
                [x](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> gx = raw_dft2d(g, -1);
                  const T scl = static_cast<T>(1.0 / static_cast<double>(g.s4().hw()));
                  for (auto& v : gx.re) v *= scl;
                  for (auto& v : gx.im) v *= scl;
                  t.add_grad(x.id, gx);
                },
                "ifft2d");
}

}  // namespace compnet
