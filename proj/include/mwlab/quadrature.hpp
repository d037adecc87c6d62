#pragma once

// Composite midpoint quadrature with Richardson-style refinement, plus a
// geometrically graded variant for integrands that are singular (but possibly
// integrable) at an endpoint. Midpoint rules never evaluate at the endpoints,
// so weights like x^alpha with alpha in (-1,0) integrate cleanly.
//
// Divergent integrals are detected, not computed. Two tests run on the
// geometric shell sums approaching a singular endpoint (or infinity):
//   - growth: shell sums grow by divergenceFactor over divergenceRuns
//     successive shells (power-type divergence);
//   - flatness: shell sums fail to decay over flatRuns successive shells
//     (log-type divergence, where every dyadic shell contributes ~equally).
// A convergent integral must have decaying shell sums, so both flags are safe.

#include <cmath>
#include <functional>
#include <vector>

namespace mwlab {

enum class QuadStatus { Converged, Divergent, Inconclusive };

struct QuadResult {
  double value = 0.0;
  QuadStatus status = QuadStatus::Converged;
  double relChange = 0.0;  // last relative update
  int levels = 0;
  std::vector<double> partialSums;  // cumulative totals per shell (graded only)

  bool converged() const { return status == QuadStatus::Converged; }
};

struct QuadOptions {
  double relTol = 1e-3;        // relative-change stopping criterion
  double absTol = 0.0;         // absolute floor, for integrals near zero
  int initialPanels = 8;
  int maxDoublings = 14;       // cap on midpoint refinement (8 * 2^14 panels)
  int maxShells = 160;         // cap on graded shells toward a singularity
  double shellRatio = 0.5;     // geometric shrink factor toward the endpoint
  double divergenceFactor = 2.0;
  int divergenceRuns = 3;
  double flatFactor = 0.995;   // shell ratio above which sums count as non-decaying
  int flatRuns = 12;
  bool recordPartials = false;
};

using Integrand = std::function<double(double)>;

// Plain composite midpoint with panel doubling until the relative change is
// below relTol. The integrand must be finite on the open interval.
QuadResult integrate_midpoint(const Integrand& f, double a, double b,
                              const QuadOptions& opts = {});

// Graded quadrature on (a,b): geometric shells accumulate toward whichever
// endpoints are marked singular; each shell is integrated by the midpoint rule.
QuadResult integrate_graded(const Integrand& f, double a, double b,
                            bool singularAtA, bool singularAtB,
                            const QuadOptions& opts = {});

// Quadrature on (a, +inf): outward doubling shells with the same divergence
// detection as the graded rule.
QuadResult integrate_to_infinity(const Integrand& f, double a,
                                 const QuadOptions& opts = {});

// Splits [a,b] at interior singular points and grades toward singular
// endpoints; the workhorse for weights with point singularities.
QuadResult integrate_singular_aware(const Integrand& f, double a, double b,
                                    const std::vector<double>& singularPts,
                                    const QuadOptions& opts = {});

}  // namespace mwlab
