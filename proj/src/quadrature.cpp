#include "mwlab/quadrature.hpp"

#include <algorithm>
#include <cstdlib>

namespace mwlab {

namespace {

double midpoint_sum(const Integrand& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = 0.0;
  for (int i = 0; i < panels; ++i) s += f(a + (i + 0.5) * h);
  return s * h;
}

// Shared shell-sum bookkeeping for the graded and to-infinity rules.
class ShellTracker {
 public:
  explicit ShellTracker(const QuadOptions& opts) : opts_(opts) {}

  // Returns true when the verdict is final.
  bool add(double shellValue, QuadResult& r) {
    if (!std::isfinite(shellValue)) {
      r.status = QuadStatus::Divergent;
      return true;
    }
    total_ += shellValue;
    const double mag = std::abs(shellValue);
    if (opts_.recordPartials) r.partialSums.push_back(total_);
    r.levels = ++count_;
    r.value = total_;

    if (prevMag_ > 1e-300 && mag > opts_.divergenceFactor * prevMag_) {
      if (++growthRun_ >= opts_.divergenceRuns) {
        r.status = QuadStatus::Divergent;
        return true;
      }
    } else {
      growthRun_ = 0;
    }
    if (prevMag_ > 1e-300 && mag > opts_.flatFactor * prevMag_) {
      if (++flatRun_ >= opts_.flatRuns) {
        r.status = QuadStatus::Divergent;
        return true;
      }
    } else {
      flatRun_ = 0;
    }
    prevMag_ = mag;

    const double scale = std::max(std::abs(total_), 1e-300);
    r.relChange = mag / scale;
    if (r.relChange < opts_.relTol) {
      r.status = QuadStatus::Converged;
      return true;
    }
    return false;
  }

 private:
  const QuadOptions& opts_;
  double total_ = 0.0;
  double prevMag_ = -1.0;
  int growthRun_ = 0;
  int flatRun_ = 0;
  int count_ = 0;
};

}  // namespace

QuadResult integrate_midpoint(const Integrand& f, double a, double b,
                              const QuadOptions& opts) {
  QuadResult r;
  if (b <= a) return r;
  int panels = opts.initialPanels;
  double prev = midpoint_sum(f, a, b, panels);
  for (int k = 0; k < opts.maxDoublings; ++k) {
    panels *= 2;
    const double cur = midpoint_sum(f, a, b, panels);
    const double diff = std::abs(cur - prev);
    const double scale = std::max({std::abs(cur), std::abs(prev), 1e-300});
    r.relChange = diff / scale;
    r.levels = k + 1;
    prev = cur;
    if (!std::isfinite(cur)) {
      r.value = cur;
      r.status = QuadStatus::Divergent;
      return r;
    }
    if (r.relChange < opts.relTol || diff <= opts.absTol) {
      r.value = cur;
      r.status = QuadStatus::Converged;
      return r;
    }
  }
  r.value = prev;
  r.status = QuadStatus::Inconclusive;
  return r;
}

QuadResult integrate_graded(const Integrand& f, double a, double b,
                            bool singularAtA, bool singularAtB,
                            const QuadOptions& opts) {
  QuadResult r;
  if (b <= a) return r;
  if (!singularAtA && !singularAtB) return integrate_midpoint(f, a, b, opts);
  if (singularAtA && singularAtB) {
    const double mid = 0.5 * (a + b);
    QuadResult left = integrate_graded(f, a, mid, true, false, opts);
    QuadResult right = integrate_graded(f, mid, b, false, true, opts);
    r.value = left.value + right.value;
    r.relChange = std::max(left.relChange, right.relChange);
    r.levels = std::max(left.levels, right.levels);
    if (left.status == QuadStatus::Divergent || right.status == QuadStatus::Divergent)
      r.status = QuadStatus::Divergent;
    else if (!left.converged() || !right.converged())
      r.status = QuadStatus::Inconclusive;
    else
      r.status = QuadStatus::Converged;
    return r;
  }
  if (singularAtB) {
    auto g = [&f, a, b](double x) { return f(a + b - x); };
    return integrate_graded(g, a, b, true, false, opts);
  }

  QuadOptions shellOpts = opts;
  shellOpts.initialPanels = 4;
  shellOpts.maxDoublings = 10;

  // Shells [a + len*q^{k+1}, a + len*q^k] marching toward a.
  ShellTracker tracker(opts);
  double hi = b - a;
  for (int k = 0; k < opts.maxShells; ++k) {
    const double lo = hi * opts.shellRatio;
    QuadResult shell = integrate_midpoint(f, a + lo, a + hi, shellOpts);
    if (tracker.add(shell.value, r)) return r;
    hi = lo;
  }
  r.status = QuadStatus::Inconclusive;
  return r;
}

QuadResult integrate_singular_aware(const Integrand& f, double a, double b,
                                    const std::vector<double>& singularPts,
                                    const QuadOptions& opts) {
  std::vector<double> cuts{a};
  for (double s : singularPts)
    if (s > a + 1e-300 && s < b - 1e-300) cuts.push_back(s);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(b);
  auto isSingular = [&singularPts](double x) {
    for (double s : singularPts)
      if (std::abs(x - s) < 1e-300) return true;
    return false;
  };
  QuadResult r;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    QuadResult piece = integrate_graded(f, cuts[i], cuts[i + 1], isSingular(cuts[i]),
                                        isSingular(cuts[i + 1]), opts);
    r.value += piece.value;
    r.relChange = std::max(r.relChange, piece.relChange);
    r.levels = std::max(r.levels, piece.levels);
    if (piece.status == QuadStatus::Divergent)
      r.status = QuadStatus::Divergent;
    else if (piece.status == QuadStatus::Inconclusive && r.status != QuadStatus::Divergent)
      r.status = QuadStatus::Inconclusive;
  }
  return r;
}

QuadResult integrate_to_infinity(const Integrand& f, double a,
                                 const QuadOptions& opts) {
  QuadOptions shellOpts = opts;
  shellOpts.initialPanels = 8;
  shellOpts.maxDoublings = 10;

  QuadResult r;
  ShellTracker tracker(opts);
  double lo = a;
  double width = std::max(std::abs(a), 1.0);
  for (int k = 0; k < opts.maxShells; ++k) {
    const double hi = lo + width;
    QuadResult shell = integrate_midpoint(f, lo, hi, shellOpts);
    if (tracker.add(shell.value, r)) return r;
    lo = hi;
    width *= 2.0;
  }
  r.status = QuadStatus::Inconclusive;
  return r;
}

}  // namespace mwlab
