#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "compnet/autograd.hpp"

namespace compnet {

/// Per-parameter central-difference verification report.
struct GradCheckReport {
  struct Entry {
    std::string param;
    double max_rel_err = 0;
    int checked = 0;
  };
  std::string name;
  std::vector<Entry> entries;
  double max_rel_err = 0;

  bool pass(double tol) const { return max_rel_err <= tol; }
};

/// Checks analytic gradients of a deterministic scalar-loss fragment against
/// central finite differences. The fragment is re-run in full for every
/// probe, so it must be a pure function of the registered parameters. At
/// most max_coords coordinates per parameter are sampled (seeded).
///
/// The relative error uses max(|fd|, |analytic|, 1e-8) as denominator.
/// corrupt_hook, when equal to name, doubles one analytic gradient entry so
/// reporting paths can be exercised (fault injection for tests).
inline GradCheckReport grad_check(
    const std::string& name, const std::function<Var(Tape<double>&)>& build,
    const std::vector<Parameter<double>*>& params, double h = 1e-4,
    uint64_t seed = 0, int max_coords = 64, const std::string& corrupt_hook = "") {
  auto eval = [&]() -> double {
    Tape<double> t;
    Var loss = build(t);
    check_shape(t.value(loss).numel() == 1, "grad_check: loss must be scalar");
    return t.value(loss).re[0];
  };
  double base_a = eval();
  double base_b = eval();
  if (std::memcmp(&base_a, &base_b, sizeof(double)) != 0)
    throw NumericError("grad_check(" + name + "): fragment is non-deterministic");

  for (auto* p : params) p->zero_grad();
  {
    Tape<double> t;
    Var loss = build(t);
    t.backward(loss);
  }

  GradCheckReport report;
  report.name = name;
  for (auto* p : params) {
    GradCheckReport::Entry e;
    e.param = p->name;
    int64_t ncoord = 2 * p->value.numel();
    int64_t take = std::min<int64_t>(max_coords, ncoord);
    // partial Fisher-Yates for a seeded sample without replacement
    std::vector<int64_t> idx(ncoord);
    for (int64_t i = 0; i < ncoord; ++i) idx[i] = i;
    Rng rng(seed ^ hash_name(p->name));
    for (int64_t i = 0; i < take; ++i) {
      int64_t j = i + rng.uniform_int(ncoord - i);
      std::swap(idx[i], idx[j]);
    }
    for (int64_t i = 0; i < take; ++i) {
      int64_t coord = idx[i];
      bool imag = coord >= p->value.numel();
      int64_t at = imag ? coord - p->value.numel() : coord;
      double* slot = imag ? &p->value.im[at] : &p->value.re[at];
      double analytic = imag ? p->grad.im[at] : p->grad.re[at];
      if (corrupt_hook == name && i == 0) analytic = analytic * 2.0 + 1.0;
      double orig = *slot;
      *slot = orig + h;
      double lp = eval();
      *slot = orig - h;
      double lm = eval();
      *slot = orig;
      double fd = (lp - lm) / (2.0 * h);
      double rel = std::abs(fd - analytic) /
                   std::max({std::abs(fd), std::abs(analytic), 1e-8});
      e.max_rel_err = std::max(e.max_rel_err, rel);
      ++e.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace compnet
