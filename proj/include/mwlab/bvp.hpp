#pragma once

// Boundary-value-problem machinery on the weighted half-cylinder
// [0, delta) x M0 with M0 a circle: the coefficient involution and the induced
// multiplier B, a dense divergence-form solver, the conormal gradient and its
// first-order evolution residual, adapted non-tangential maximal functions
// over Whitney regions, Carleson discrepancy of coefficient perturbations, and
// the Neumann solvability ratio.
//
// The distance on M0 is arc length in the rubber-band parametrisation
// (cumulative sqrt(mu/w) around the circle), so approach regions adapt to the
// weight pair exactly where mu/w degenerates.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mwlab/opcalc.hpp"
#include "mwlab/weights.hpp"

namespace mwlab {

struct CylinderConfig {
  int nBase = 32;
  int nT = 32;           // solver levels t_i = delta * i / nT
  double delta = 1.0;
  double baseLength = 1.0;
  double c0 = 2.0;       // Whitney t-window (t/c0, c0 t)
  double c1 = 1.0;       // Whitney base radius c1 t
  int ladderPerOctave = 4;   // geometric t-ladder ratio 2^{-1/4}
  int ladderOctaves = 24;    // from delta/2 down to delta 2^{-24}
  std::string cutoff = "linear";  // eta(t): "linear" ramp or "cosine"
};

class CylinderGrid {
 public:
  CylinderGrid(const CylinderConfig& cfg, const WeightField& mu, const WeightField& w);

  const CylinderConfig& config() const { return cfg_; }
  int nBase() const { return cfg_.nBase; }
  int nT() const { return cfg_.nT; }
  double delta() const { return cfg_.delta; }
  double baseSpacing() const { return h_; }
  double dt() const { return cfg_.delta / cfg_.nT; }
  const std::vector<double>& basePoints() const { return basePts_; }
  const std::vector<double>& solverLevels() const { return tSolver_; }
  const std::vector<double>& ladder() const { return ladder_; }
  const VecR& muVals() const { return mu_; }
  const VecR& wVals() const { return w_; }

  double dist0(int i, int j) const { return dist0_(i, j); }
  double eta(double t) const;

  std::vector<int> whitneyBaseNodes(int center, double t) const;
  std::vector<int> whitneyTLevels(double t) const;  // solver levels in the window

  WeightedGrid baseGrid() const;  // periodic operator grid with (mu, w)

 private:
  CylinderConfig cfg_;
  double h_ = 0.0;
  std::vector<double> basePts_, tSolver_, ladder_;
  VecR mu_, w_;
  MatR dist0_;
};

// ---- coefficient transforms ----

// I([a, b; c, d]) = [a^{-1}, -a^{-1} b; c a^{-1}, d - c a^{-1} b] with the
// scalar pivot at (0,0). An involution preserving accretivity.
MatC involution(const MatC& A, double pivotTol = 1e-14);

// B = [mu a^{-1}, -a^{-1} b; W^{-1} c a^{-1} mu, W^{-1}(d - c a^{-1} b)].
Eigen::Matrix2cd coefficient_B_point(const Eigen::Matrix2cd& A0, double mu, double w);

// Defect of the equivalent conjugation construction
// diag(1, W^{-1}) I(A0) diag(mu, I); should vanish to rounding.
double coefficient_B_conjugation_gap(const Eigen::Matrix2cd& A0, double mu, double w);

// min real eigenvalue of the Hermitian part (plain Euclidean accretivity).
double accretivity_constant(const MatC& A);

// Multiplier matrix B(t) on the 2n base dofs from pointwise coefficient_B.
using CoefficientField = std::function<Eigen::Matrix2cd(double t, double x)>;
MatC coefficient_B_multiplier(const CylinderGrid& grid, const CoefficientField& A0,
                              double t);

// ---- fields on the cylinder ----

struct CylinderField {
  // rows: solver t-levels (nT+1), cols: base nodes
  MatC comp1, comp2;
};

// ---- divergence form solve ----

enum class BottomCondition { Dirichlet, Neumann };

struct DivFormProblem {
  CoefficientField A0;
  BottomCondition bottom = BottomCondition::Dirichlet;
  std::function<Complex(double)> dataBottom;  // u(0,x) or conormal at t=0
  std::function<Complex(double)> dataTop;     // u(delta, x)
};

// Dense solve of the compact flux-form discretization; returns u on the
// (nT+1) x nBase solver lattice. Residual of the interior equations is
// checked against solver tolerance.
MatC solve_divform_cylinder(const CylinderGrid& grid, const DivFormProblem& problem,
                            double residualTol = 1e-10);

// Conormal gradient f0 = [(1/mu) (e0 . A0 grad u), grad_x u].
CylinderField conormal_gradient(const CylinderGrid& grid, const MatC& u,
                                const CoefficientField& A0);

// Full cylinder gradient (dt u, dx u), optionally damped by eta(t).
CylinderField cylinder_gradient(const CylinderGrid& grid, const MatC& u,
                                bool applyEta = false);

struct CrResidual {
  double residual = 0.0;
  bool zeroNorm = false;
};

// || d_t f0 - D B(t) f0 || / ||f0|| over interior levels: the first-order
// system solved by conormal gradients of weak solutions. Backward-in-t
// difference, first order.
CrResidual cr_residual(const CylinderGrid& grid, const MatC& u, const CoefficientField& A0);

// ---- non-tangential maximal function ----

struct NontangentialResult {
  VecR values;           // per base node
  int emptyLadderRungs = 0;  // rungs skipped: no solver level in the t-window
};

NontangentialResult nontangential_maximal(const CylinderGrid& grid,
                                          const CylinderField& f);

// ---- Carleson discrepancy ----

double carleson_discrepancy(const CylinderGrid& grid, const CoefficientField& E);

// ---- Neumann solvability ratio ----

struct NeumannReport {
  double lhsNontangential = 0.0;
  double lhsBulk = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool degenerate = false;  // rhs vanished
  double crResidual = 0.0;
  double carlesonOfDiscrepancy = 0.0;  // ||A0 - A0(0,.)||_*
  double traceSelfAdjointGap = 0.0;
};

NeumannReport neumann_ratio(const CylinderGrid& grid, const MatC& u,
                            const CoefficientField& A0);

}  // namespace mwlab
