#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace texsig {

// Result of comparing an analytic gradient against central differences.
struct FdReport {
  double max_abs = 0.0;       // max |analytic - fd|
  double max_rel = 0.0;       // max |analytic - fd| / max(|analytic|, |fd|)
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  // Pass iff every coordinate meets the absolute OR the relative bound,
  // whichever is looser for that coordinate.
  bool ok() const { return failed == 0; }
  std::size_t failed = 0;
  double atol_used = 0.0, rtol_used = 0.0;
};

// Central finite differences with step `eps`, compared per coordinate against
// `analytic`. `f` re-evaluates the scalar objective at the (mutated) point;
// the point is restored after each probe. Coordinates where `skip` returns
// true are excluded (relu kinks, pool ties).
template <class F>
FdReport finite_diff_check(F&& f, std::span<double> x,
                           std::span<const double> analytic, double eps,
                           double atol = 1e-6, double rtol = 1e-4,
                           const std::function<bool(std::size_t)>& skip = {}) {
  FdReport r;
  r.atol_used = atol;
  r.rtol_used = rtol;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (skip && skip(i)) continue;
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f();
    x[i] = orig - eps;
    const double fm = f();
    x[i] = orig;
    const double fd = (fp - fm) / (2.0 * eps);
    const double dev = std::abs(analytic[i] - fd);
    const double scale = std::max(std::abs(analytic[i]), std::abs(fd));
    const double rel = scale > 0.0 ? dev / scale : 0.0;
    ++r.checked;
    if (dev > r.max_abs) {
      r.max_abs = dev;
      r.worst_index = i;
    }
    r.max_rel = std::max(r.max_rel, rel);
    if (dev > atol && rel > rtol) ++r.failed;
  }
  return r;
}

}  // namespace texsig
