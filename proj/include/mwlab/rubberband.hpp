#pragma once

// One-dimensional change of variables rho with rho' = sqrt(mu/w), the induced
// single weight nu = sqrt(mu w) on the image, the pullback isometry
//
//   T: (v1(y), v2(y)) |-> (v1(rho(x)), v2(rho(x)) rho'(x))
//
// between L2(nu) (+) L2(nu) and L2(mu) (+) L2(w), and discrete verification of
// the similarity T^{-1} D T = D_M. rho is tabulated by cumulative graded
// quadrature and evaluated by monotone cubic Hermite interpolation with the
// exact density as slope data; the inverse is solved by bisection.

#include <functional>
#include <vector>

#include "mwlab/opcalc.hpp"
#include "mwlab/quadrature.hpp"
#include "mwlab/weights.hpp"

namespace mwlab {

struct RhoOptions {
  int nCells = 256;
  double gradingPower = 1.0;   // >1 crowds nodes toward a singular left endpoint
  QuadOptions cellQuad{.relTol = 1e-10, .initialPanels = 4, .maxDoublings = 18};
  double inverseTol = 1e-12;
};

class RhoMap {
 public:
  RhoMap(std::vector<double> nodes, std::vector<double> rhoVals,
         std::vector<double> slopes, double inverseTol = 1e-12);

  double forward(double x) const;
  double derivative(double x) const;  // exact at nodes, Hermite elsewhere
  double inverse(double y) const;

  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& values() const { return rho_; }
  const std::vector<double>& slopes() const { return drho_; }
  std::vector<double> imageNodes() const { return rho_; }
  double xMin() const { return x_.front(); }
  double xMax() const { return x_.back(); }
  double yMin() const { return rho_.front(); }
  double yMax() const { return rho_.back(); }

 private:
  std::vector<double> x_, rho_, drho_;
  double invTol_;
  size_t cellOf(double x) const;
};

// rho(x) = int_anchor^x sqrt(mu/w); the anchor may coincide with a singular
// endpoint as long as the improper integral converges (NonIntegrableDensity
// otherwise). Nodes span [xMin, xMax].
RhoMap build_rho(const WeightField& mu, const WeightField& w, double xMin,
                 double xMax, double anchor, const RhoOptions& opts = {});

// Same, with a caller-supplied strictly increasing node set.
RhoMap build_rho_on_nodes(const WeightField& mu, const WeightField& w,
                          std::vector<double> nodes, double anchor,
                          const RhoOptions& opts = {});

struct CompletenessVerdict {
  bool leftDivergent = false;
  bool rightDivergent = false;
  std::vector<double> leftPartialIntegrals;
  std::vector<double> rightPartialIntegrals;
  bool leftConclusive = true;   // false when the budget ran out undecided
  bool rightConclusive = true;
};

CompletenessVerdict completeness_check(const WeightField& mu, const WeightField& w,
                                       double c1, double c2, double anchor,
                                       const QuadOptions& opts = {});

// nu on M = rho([xMin,xMax]) with nu(rho(x)) = sqrt(mu(x) w(x)).
WeightField nu_from_rho(const WeightField& mu, const WeightField& w,
                        const RhoMap& rho);

// Max over nodes of the defects in mu = (nu o rho) rho' and w rho' = nu o rho.
double rho_identity_defect(const WeightField& mu, const WeightField& w,
                           const RhoMap& rho);

struct PowerClassification {
  int powerCase = 1;      // 1: a+b+2>0, 2: <0, 3: =0
  bool nuInA2 = false;
  double nuExponent = 0.0;  // power-law exponent (cases 1,2) or rate (case 3)
};

PowerClassification classify_power_weights(double alpha, double beta);

// Pullback of a pair sampled on the image nodes of rho.
struct GridPair {
  std::vector<double> first, second;
};
GridPair pullback_pair(const RhoMap& rho, const std::vector<double>& v1,
                       const std::vector<double>& v2);

// |  ||Tv||^2_{mu (+) w}  -  ||v||^2_{nu (+) nu}  | / ||v||^2, trapezoid
// quadrature on matching node sets; max over the supplied test pairs.
using ScalarFn = std::function<double(double)>;
double verify_isometry(const RhoMap& rho, const WeightField& mu, const WeightField& w,
                       const std::vector<std::pair<ScalarFn, ScalarFn>>& testPairs);

// Relative weighted-norm discrepancy of T(D_M v) against D(T v) over test
// pairs given as callables on the image. Both operators are the staggered
// interval discretizations from the operator module; the image grid must be
// the pushforward of the x-grid (GridMismatch otherwise).
double verify_similarity_1d(const WeightField& mu, const WeightField& w,
                            const RhoMap& rho,
                            const std::vector<std::pair<ScalarFn, ScalarFn>>& testPairs);

}  // namespace mwlab
