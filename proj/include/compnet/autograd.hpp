#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "compnet/tensor.hpp"

namespace compnet {

/// Learnable tensor. Gradients accumulate the cotangents of the real and
/// imaginary components separately; the optimizer zeroes them between steps.
template <typename T>
struct Parameter {
  std::string name;
  CTensor<T> value;
  CTensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, CTensor<T> v) : name(std::move(n)), value(std::move(v)) {
    grad = CTensor<T>(value.shape);
  }

  void zero_grad() {
    std::fill(grad.re.begin(), grad.re.end(), T(0));
    std::fill(grad.im.begin(), grad.im.end(), T(0));
  }
};

/// Handle to a node on a Tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape. Complex values are differentiated as
/// pairs of real components: node gradients are CTensors whose re/im planes
/// hold dLoss/d(value.re) and dLoss/d(value.im).
template <typename T>
class Tape {
 public:
  struct Node {
    CTensor<T> value;
    std::vector<int32_t> parents;
    std::function<void(Tape&, int32_t)> back;
    bool needs_grad = false;
    const char* op = "";
  };

  /// Sweep every op output for non-finite values (debug-mode guard).
  bool check_finite = true;

  Var input(CTensor<T> v) {
    return Var{emit(std::move(v), {}, nullptr, false, "input")};
  }

  /// Registers a parameter leaf; memoized so repeated use (weight sharing)
  /// fans out from a single node and accumulates one gradient.
  Var param(Parameter<T>& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Var{it->second};
    int32_t id = emit(p.value, {}, nullptr, true, "param");
    param_ids_.emplace(&p, id);
    param_leaves_.emplace_back(&p, id);
    return Var{id};
  }

  const CTensor<T>& value(Var v) const { return nodes_[check_id(v)].value; }

  /// Gradient buffer of a node after backward(); null when untouched.
  const CTensor<T>* grad_of(Var v) const {
    check_id(v);
    if (static_cast<size_t>(v.id) >= grads_.size()) return nullptr;
    const auto& g = grads_[v.id];
    return g.shape.empty() ? nullptr : &g;
  }

  size_t size() const { return nodes_.size(); }

  int32_t emit(CTensor<T> value, std::vector<int32_t> parents,
               std::function<void(Tape&, int32_t)> back, bool needs_grad,
               const char* op) {
    if (check_finite) require_finite(value, op);
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.needs_grad = needs_grad;
    for (int32_t p : n.parents) needs_grad |= nodes_[p].needs_grad;
    n.needs_grad = needs_grad;
    if (needs_grad) n.back = std::move(back);
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<int32_t>(nodes_.size() - 1);
  }

  /// Convenience emit: needs_grad derived from parents only.
  Var make(CTensor<T> value, std::vector<int32_t> parents,
           std::function<void(Tape&, int32_t)> back, const char* op) {
    return Var{emit(std::move(value), std::move(parents), std::move(back),
                    false, op)};
  }

  bool needs_grad(Var v) const { return nodes_[check_id(v)].needs_grad; }

  const Node& node(int32_t id) const { return nodes_[id]; }

  /// Accumulates delta into the gradient buffer of node id.
  void add_grad(int32_t id, const CTensor<T>& delta) {
    if (!nodes_[id].needs_grad) return;
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    CTensor<T>& g = grads_[id];
    if (g.shape.empty()) {
      g = delta;
      return;
    }
    check_shape(g.same_shape(delta), "gradient shape mismatch at op " +
                                         std::string(nodes_[id].op));
    int64_t n = g.numel();
    for (int64_t i = 0; i < n; ++i) g.re[i] += delta.re[i];
    for (int64_t i = 0; i < n; ++i) g.im[i] += delta.im[i];
  }

  /// Mutable gradient of node id for in-place accumulation by op kernels;
  /// allocates zeros on first touch.
  CTensor<T>* grad_buffer(int32_t id) {
    if (!nodes_[id].needs_grad) return nullptr;
    if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
    CTensor<T>& g = grads_[id];
    if (g.shape.empty()) g = CTensor<T>(nodes_[id].value.shape);
    return &g;
  }

  /// Reverse sweep from a scalar loss. Populates Parameter::grad for every
  /// parameter registered on this tape (accumulating into existing grads).
  void backward(Var loss) {
    if (nodes_.empty()) throw NumericError("backward called before any forward");
    int32_t lid = check_id(loss);
    if (nodes_[lid].value.numel() != 1)
      throw ShapeError("backward: loss must be scalar, got shape " +
                       nodes_[lid].value.shape_str());
    grads_.assign(nodes_.size(), CTensor<T>());
    CTensor<T> seed(nodes_[lid].value.shape);
    seed.re[0] = T(1);
    grads_[lid] = std::move(seed);
    for (int32_t id = lid; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || grads_[id].shape.empty() || !n.back) continue;
      n.back(*this, id);
    }
    for (auto& [p, id] : param_leaves_) {
      if (grads_[id].shape.empty()) continue;
      const CTensor<T>& g = grads_[id];
      int64_t n = g.numel();
      for (int64_t i = 0; i < n; ++i) p->grad.re[i] += g.re[i];
      for (int64_t i = 0; i < n; ++i) p->grad.im[i] += g.im[i];
    }
  }

 private:
  int32_t check_id(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
      throw NumericError("invalid tape handle");
    return v.id;
  }

  std::vector<Node> nodes_;
  std::vector<CTensor<T>> grads_;
  std::unordered_map<const Parameter<T>*, int32_t> param_ids_;
  std::vector<std::pair<Parameter<T>*, int32_t>> param_leaves_;
};

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  CTensor<T> out = add(t.value(a), t.value(b));
  return t.make(std::move(out), {a.id, b.id},
                [a, b](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  t.add_grad(a.id, g);
                  t.add_grad(b.id, g);
                },
                "add");
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  CTensor<T> out = sub(t.value(a), t.value(b));
  return t.make(std::move(out), {a.id, b.id},
                [a, b](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  t.add_grad(a.id, g);
                  t.add_grad(b.id, scale(g, {-1.0, 0.0}));
                },
                "sub");
}

/// out = s * a, complex scalar s. Real-adjoint of multiplication by s is
/// multiplication by conj(s).
template <typename T>
Var scale(Tape<T>& t, Var a, std::complex<double> s) {
  CTensor<T> out = scale(t.value(a), s);
  return t.make(std::move(out), {a.id},
                [a, s](Tape<T>& t, int32_t self) {
                  t.add_grad(a.id, scale(*t.grad_of(Var{self}), std::conj(s)));
                },
                "scale");
}

/// out = (1+0i) - z.
template <typename T>
Var one_minus(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] = T(1) - A.re[i];
  for (int64_t i = 0; i < n; ++i) out.im[i] = -A.im[i];
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  t.add_grad(a.id, scale(*t.grad_of(Var{self}), {-1.0, 0.0}));
                },
                "one_minus");
}

/// Complex Hadamard product. Gradients: ga = conj(b) ⊙ g, gb = conj(a) ⊙ g.
template <typename T>
Var hadamard(Tape<T>& t, Var a, Var b) {
  CTensor<T> out = hadamard(t.value(a), t.value(b));
  return t.make(
      std::move(out), {a.id, b.id},
      [a, b](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& A = t.value(a);
        const CTensor<T>& B = t.value(b);
        int64_t n = g.numel();
        if (t.needs_grad(a)) {
          CTensor<T> ga(g.shape);
          for (int64_t i = 0; i < n; ++i) {
            ga.re[i] = B.re[i] * g.re[i] + B.im[i] * g.im[i];
            ga.im[i] = B.re[i] * g.im[i] - B.im[i] * g.re[i];
          }
          t.add_grad(a.id, ga);
        }
        if (t.needs_grad(b)) {
          CTensor<T> gb(g.shape);
          for (int64_t i = 0; i < n; ++i) {
            gb.re[i] = A.re[i] * g.re[i] + A.im[i] * g.im[i];
            gb.im[i] = A.re[i] * g.im[i] - A.im[i] * g.re[i];
          }
          t.add_grad(b.id, gb);
        }
      },
      "hadamard");
}

template <typename T>
Var concat_channels(Tape<T>& t, const std::vector<Var>& parts) {
  check_shape(!parts.empty(), "concat_channels: empty part list");
  std::vector<const CTensor<T>*> ptrs;
  std::vector<int32_t> ids;
  for (Var v : parts) {
    ptrs.push_back(&t.value(v));
    ids.push_back(v.id);
  }
  CTensor<T> out = concat_channels(ptrs);
  std::vector<Var> saved(parts);
  return t.make(std::move(out), std::move(ids),
                [saved](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  int64_t c0 = 0;
                  for (Var v : saved) {
                    int64_t c = t.value(v).shape[1];
                    if (t.needs_grad(v))
                      t.add_grad(v.id, slice_channels(g, c0, c0 + c));
                    c0 += c;
                  }
                },
                "concat_channels");
}

template <typename T>
Var slice_channels(Tape<T>& t, Var a, int64_t c0, int64_t c1) {
  CTensor<T> out = slice_channels(t.value(a), c0, c1);
  return t.make(std::move(out), {a.id},
                [a, c0, c1](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T>* ga = t.grad_buffer(a.id);
                  if (!ga) return;
                  Shape4 s = ga->s4();
                  int64_t hw = s.hw(), cc = c1 - c0;
                  for (int64_t n = 0; n < s.n; ++n) {
                    T* dr = ga->re.data() + (n * s.c + c0) * hw;
                    T* di = ga->im.data() + (n * s.c + c0) * hw;
                    const T* sr = g.re.data() + n * cc * hw;
                    const T* si = g.im.data() + n * cc * hw;
                    for (int64_t i = 0; i < cc * hw; ++i) dr[i] += sr[i];
                    for (int64_t i = 0; i < cc * hw; ++i) di[i] += si[i];
                  }
                },
                "slice_channels");
}

// --------------------------------------------------------------------------
// Split activations: the real nonlinearity applied independently to the
// real and imaginary planes. Real variants act on the real plane only and
// keep the imaginary plane zero (for real-valued carriers).
// --------------------------------------------------------------------------

namespace act {

template <typename T>
inline T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                   : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
inline T sigmoid_grad(T y) {  // from output
  return y * (T(1) - y);
}

template <typename T>
inline T gelu(T x) {  // exact Gaussian-CDF form x * Phi(x)
  return x * T(0.5) * std::erfc(-x * T(0.70710678118654752440));
}

template <typename T>
inline T gelu_grad(T x) {
  T phi = T(0.5) * std::erfc(-x * T(0.70710678118654752440));
  T pdf = std::exp(-x * x * T(0.5)) * T(0.39894228040143267794);
  return phi + x * pdf;
}

}  // namespace act

template <typename T, typename F, typename B>
Var unary_split(Tape<T>& t, Var a, F f, const char* name, B back) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] = f(A.re[i]);
  for (int64_t i = 0; i < n; ++i) out.im[i] = f(A.im[i]);
  return t.make(std::move(out), {a.id}, std::move(back), name);
}

template <typename T>
Var split_sigmoid(Tape<T>& t, Var a) {
  return unary_split(
      t, a, [](T x) { return act::sigmoid(x); }, "split_sigmoid",
      [a](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& y = t.node(self).value;
        CTensor<T> ga(g.shape);
        int64_t n = g.numel();
        for (int64_t i = 0; i < n; ++i) ga.re[i] = g.re[i] * act::sigmoid_grad(y.re[i]);
        for (int64_t i = 0; i < n; ++i) ga.im[i] = g.im[i] * act::sigmoid_grad(y.im[i]);
        t.add_grad(a.id, ga);
      });
}

template <typename T>
Var split_tanh(Tape<T>& t, Var a) {
  return unary_split(
      t, a, [](T x) { return std::tanh(x); }, "split_tanh",
      [a](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& y = t.node(self).value;
        CTensor<T> ga(g.shape);
        int64_t n = g.numel();
        for (int64_t i = 0; i < n; ++i) ga.re[i] = g.re[i] * (T(1) - y.re[i] * y.re[i]);
        for (int64_t i = 0; i < n; ++i) ga.im[i] = g.im[i] * (T(1) - y.im[i] * y.im[i]);
        t.add_grad(a.id, ga);
      });
}

template <typename T>
Var split_gelu(Tape<T>& t, Var a) {
  return unary_split(
      t, a, [](T x) { return act::gelu(x); }, "split_gelu",
      [a](Tape<T>& t, int32_t self) {
        const CTensor<T>& g = *t.grad_of(Var{self});
        const CTensor<T>& x = t.value(a);
        CTensor<T> ga(g.shape);
        int64_t n = g.numel();
        for (int64_t i = 0; i < n; ++i) ga.re[i] = g.re[i] * act::gelu_grad(x.re[i]);
        for (int64_t i = 0; i < n; ++i) ga.im[i] = g.im[i] * act::gelu_grad(x.im[i]);
        t.add_grad(a.id, ga);
      });
}

/// Real GeLU on the real plane; imaginary plane stays zero.
template <typename T>
Var real_gelu(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] = act::gelu(A.re[i]);
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  const CTensor<T>& x = t.value(a);
                  CTensor<T> ga(g.shape);
                  int64_t n = g.numel();
                  for (int64_t i = 0; i < n; ++i)
                    ga.re[i] = g.re[i] * act::gelu_grad(x.re[i]);
                  t.add_grad(a.id, ga);
                },
                "real_gelu");
}

template <typename T>
Var real_sigmoid(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] = act::sigmoid(A.re[i]);
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  const CTensor<T>& y = t.node(self).value;
                  CTensor<T> ga(g.shape);
                  int64_t n = g.numel();
                  for (int64_t i = 0; i < n; ++i)
                    ga.re[i] = g.re[i] * act::sigmoid_grad(y.re[i]);
                  t.add_grad(a.id, ga);
                },
                "real_sigmoid");
}

template <typename T>
Var real_tanh(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) out.re[i] = std::tanh(A.re[i]);
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  const CTensor<T>& y = t.node(self).value;
                  CTensor<T> ga(g.shape);
                  int64_t n = g.numel();
                  for (int64_t i = 0; i < n; ++i)
                    ga.re[i] = g.re[i] * (T(1) - y.re[i] * y.re[i]);
                  t.add_grad(a.id, ga);
                },
                "real_tanh");
}

// --------------------------------------------------------------------------
// Component plumbing between real carriers and complex tensors
// --------------------------------------------------------------------------

/// Z = re(a) + i * re(b): combines two real carriers into a complex tensor.
template <typename T>
Var make_complex(Tape<T>& t, Var a, Var b) {
  const CTensor<T>& A = t.value(a);
  const CTensor<T>& B = t.value(b);
  check_shape(A.same_shape(B), "make_complex: shape mismatch");
  CTensor<T> out(A.shape);
  out.re = A.re;
  out.im = B.re;
  return t.make(std::move(out), {a.id, b.id},
                [a, b](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  if (t.needs_grad(a)) {
                    CTensor<T> ga(g.shape);
                    ga.re = g.re;
                    t.add_grad(a.id, ga);
                  }
                  if (t.needs_grad(b)) {
                    CTensor<T> gb(g.shape);
                    gb.re = g.im;
                    t.add_grad(b.id, gb);
                  }
                },
                "make_complex");
}

/// Complex (N,C,H,W) -> real carrier (N,2C,H,W): real parts then imaginary
/// parts along the channel axis.
template <typename T>
Var stack_reim(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  Shape4 s = A.s4();
  CTensor<T> out(s.n, 2 * s.c, s.h, s.w);
  int64_t chw = s.c * s.hw();
  for (int64_t n = 0; n < s.n; ++n) {
    std::copy(A.re.begin() + n * chw, A.re.begin() + (n + 1) * chw,
              out.re.begin() + n * 2 * chw);
    std::copy(A.im.begin() + n * chw, A.im.begin() + (n + 1) * chw,
              out.re.begin() + n * 2 * chw + chw);
  }
  return t.make(std::move(out), {a.id},
                [a, s, chw](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> ga(t.value(a).shape);
                  for (int64_t n = 0; n < s.n; ++n) {
                    const T* gr = g.re.data() + n * 2 * chw;
                    for (int64_t i = 0; i < chw; ++i) ga.re[n * chw + i] = gr[i];
                    for (int64_t i = 0; i < chw; ++i) ga.im[n * chw + i] = gr[chw + i];
                  }
                  t.add_grad(a.id, ga);
                },
                "stack_reim");
}

/// Real carrier (N,2C,H,W) -> complex (N,C,H,W): first C channels become the
/// real parts, the rest the imaginary parts. Inverse of stack_reim.
template <typename T>
Var unstack_reim(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  Shape4 s = A.s4();
  check_shape(s.c % 2 == 0, "unstack_reim: channel count must be even");
  int64_t c = s.c / 2, chw = c * s.hw();
  CTensor<T> out(s.n, c, s.h, s.w);
  for (int64_t n = 0; n < s.n; ++n) {
    const T* src = A.re.data() + n * 2 * chw;
    std::copy(src, src + chw, out.re.begin() + n * chw);
    std::copy(src + chw, src + 2 * chw, out.im.begin() + n * chw);
  }
  return t.make(std::move(out), {a.id},
                [a, s, chw](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> ga(t.value(a).shape);
                  for (int64_t n = 0; n < s.n; ++n) {
                    T* dst = ga.re.data() + n * 2 * chw;
                    for (int64_t i = 0; i < chw; ++i) dst[i] = g.re[n * chw + i];
                    for (int64_t i = 0; i < chw; ++i) dst[chw + i] = g.im[n * chw + i];
                  }
                  t.add_grad(a.id, ga);
                },
                "unstack_reim");
}

/// Keeps the real plane, zeroes the imaginary plane.
template <typename T>
Var take_real(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out(A.shape);
  out.re = A.re;
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> ga(g.shape);
                  ga.re = g.re;
                  t.add_grad(a.id, ga);
                },
                "take_real");
}

// --------------------------------------------------------------------------
// Padding / cropping (rank 4, spatial axes)
// --------------------------------------------------------------------------

inline int64_t reflect_index(int64_t i, int64_t n) {
  // mirror without repeating the border sample: -1 -> 1, n -> n-2
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

template <typename T>
Var reflect_pad2d(Tape<T>& t, Var a, int64_t pt, int64_t pb, int64_t pl, int64_t pr) {
  const CTensor<T>& A = t.value(a);
  Shape4 s = A.s4();
  check_shape(pt < s.h && pb < s.h && pl < s.w && pr < s.w,
              "reflect_pad2d: pad must be smaller than the extent");
  int64_t ho = s.h + pt + pb, wo = s.w + pl + pr;
  CTensor<T> out(s.n, s.c, ho, wo);
  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const T* sr = A.re.data() + nc * s.hw();
    const T* si = A.im.data() + nc * s.hw();
    T* dr = out.re.data() + nc * ho * wo;
    T* di = out.im.data() + nc * ho * wo;
    for (int64_t y = 0; y < ho; ++y) {
      int64_t sy = reflect_index(y - pt, s.h);
      for (int64_t x = 0; x < wo; ++x) {
        int64_t sx = reflect_index(x - pl, s.w);
        dr[y * wo + x] = sr[sy * s.w + sx];
        di[y * wo + x] = si[sy * s.w + sx];
      }
    }
  }
  return t.make(std::move(out), {a.id},
                [a, s, pt, pl, ho = s.h + pt + pb, wo = s.w + pl + pr](
                    Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T>* ga = t.grad_buffer(a.id);
                  if (!ga) return;
                  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
                    T* dr = ga->re.data() + nc * s.hw();
                    T* di = ga->im.data() + nc * s.hw();
                    const T* gr = g.re.data() + nc * ho * wo;
                    const T* gi = g.im.data() + nc * ho * wo;
                    for (int64_t y = 0; y < ho; ++y) {
                      int64_t sy = reflect_index(y - pt, s.h);
                      for (int64_t x = 0; x < wo; ++x) {
                        int64_t sx = reflect_index(x - pl, s.w);
                        dr[sy * s.w + sx] += gr[y * wo + x];
                        di[sy * s.w + sx] += gi[y * wo + x];
                      }
                    }
                  }
                },
                "reflect_pad2d");
}

template <typename T>
Var crop2d(Tape<T>& t, Var a, int64_t top, int64_t left, int64_t h, int64_t w) {
  const CTensor<T>& A = t.value(a);
  Shape4 s = A.s4();
  check_shape(top + h <= s.h && left + w <= s.w, "crop2d: window out of range");
  CTensor<T> out(s.n, s.c, h, w);
  for (int64_t nc = 0; nc < s.n * s.c; ++nc)
    for (int64_t y = 0; y < h; ++y) {
      const T* sr = A.re.data() + nc * s.hw() + (top + y) * s.w + left;
      const T* si = A.im.data() + nc * s.hw() + (top + y) * s.w + left;
      std::copy(sr, sr + w, out.re.data() + (nc * h + y) * w);
      std::copy(si, si + w, out.im.data() + (nc * h + y) * w);
    }
  return t.make(std::move(out), {a.id},
                [a, s, top, left, h, w](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T>* ga = t.grad_buffer(a.id);
                  if (!ga) return;
                  for (int64_t nc = 0; nc < s.n * s.c; ++nc)
                    for (int64_t y = 0; y < h; ++y) {
                      T* dr = ga->re.data() + nc * s.hw() + (top + y) * s.w + left;
                      T* di = ga->im.data() + nc * s.hw() + (top + y) * s.w + left;
                      const T* gr = g.re.data() + (nc * h + y) * w;
                      const T* gi = g.im.data() + (nc * h + y) * w;
                      for (int64_t x = 0; x < w; ++x) dr[x] += gr[x];
                      for (int64_t x = 0; x < w; ++x) di[x] += gi[x];
                    }
                },
                "crop2d");
}

// --------------------------------------------------------------------------
// Reductions and losses
// --------------------------------------------------------------------------

/// Scalar sum of the real plane.
template <typename T>
Var reduce_sum_real(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out({1});
  double acc = 0;
  for (T v : A.re) acc += static_cast<double>(v);
  out.re[0] = static_cast<T>(acc);
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> ga(t.value(a).shape);
                  std::fill(ga.re.begin(), ga.re.end(), g.re[0]);
                  t.add_grad(a.id, ga);
                },
                "reduce_sum_real");
}

/// Scalar sum of squared magnitudes sum(re^2 + im^2).
template <typename T>
Var reduce_sum_abs2(Tape<T>& t, Var a) {
  const CTensor<T>& A = t.value(a);
  CTensor<T> out({1});
  double acc = 0;
  for (int64_t i = 0; i < A.numel(); ++i)
    acc += static_cast<double>(A.re[i]) * A.re[i] +
           static_cast<double>(A.im[i]) * A.im[i];
  out.re[0] = static_cast<T>(acc);
  return t.make(std::move(out), {a.id},
                [a](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  const CTensor<T>& x = t.value(a);
                  CTensor<T> ga(x.shape);
                  T s = g.re[0];
                  for (int64_t i = 0; i < x.numel(); ++i) ga.re[i] = T(2) * x.re[i] * s;
                  for (int64_t i = 0; i < x.numel(); ++i) ga.im[i] = T(2) * x.im[i] * s;
                  t.add_grad(a.id, ga);
                },
                "reduce_sum_abs2");
}

/// Scalar mean of squared magnitudes; keeps grad-check losses O(1) so
/// finite-difference noise stays well under the comparison floor.
template <typename T>
Var reduce_mean_abs2(Tape<T>& t, Var a) {
  int64_t n = t.value(a).numel();
  return scale(t, reduce_sum_abs2(t, a), {1.0 / static_cast<double>(n), 0.0});
}

/// Mean Charbonnier penalty sqrt(d^2 + eps^2) over the real plane against a
/// fixed target.
template <typename T>
Var charbonnier_mean(Tape<T>& t, Var pred, const CTensor<T>& target, double eps) {
  const CTensor<T>& P = t.value(pred);
  check_shape(P.same_shape(target), "charbonnier_mean: shape mismatch " +
                                        P.shape_str() + " vs " + target.shape_str());
  int64_t n = P.numel();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    double d = static_cast<double>(P.re[i]) - target.re[i];
    acc += std::sqrt(d * d + eps * eps);
  }
  CTensor<T> out({1});
  out.re[0] = static_cast<T>(acc / static_cast<double>(n));
  auto tgt = std::make_shared<CTensor<T>>(target);
  return t.make(std::move(out), {pred.id},
                [pred, tgt, eps, n](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  const CTensor<T>& P = t.value(pred);
                  CTensor<T> gp(P.shape);
                  double s = static_cast<double>(g.re[0]) / static_cast<double>(n);
                  for (int64_t i = 0; i < n; ++i) {
                    double d = static_cast<double>(P.re[i]) - tgt->re[i];
                    gp.re[i] = static_cast<T>(s * d / std::sqrt(d * d + eps * eps));
                  }
                  t.add_grad(pred.id, gp);
                },
                "charbonnier_mean");
}

/// Arithmetic mean of scalar nodes.
template <typename T>
Var mean_scalars(Tape<T>& t, const std::vector<Var>& xs) {
  check_shape(!xs.empty(), "mean_scalars: empty list");
  double acc = 0;
  std::vector<int32_t> ids;
  for (Var v : xs) {
    check_shape(t.value(v).numel() == 1, "mean_scalars: non-scalar input");
    acc += static_cast<double>(t.value(v).re[0]);
    ids.push_back(v.id);
  }
  CTensor<T> out({1});
  out.re[0] = static_cast<T>(acc / static_cast<double>(xs.size()));
  std::vector<Var> saved(xs);
  return t.make(std::move(out), std::move(ids),
                [saved](Tape<T>& t, int32_t self) {
                  const CTensor<T>& g = *t.grad_of(Var{self});
                  CTensor<T> gi({1});
                  gi.re[0] = g.re[0] / static_cast<T>(saved.size());
                  for (Var v : saved) t.add_grad(v.id, gi);
                },
                "mean_scalars");
}

}  // namespace compnet
