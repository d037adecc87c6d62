#pragma once

// Dense discretizations of the first-order operator pair on weighted grids:
//
//   D = [ 0        -(1/mu) div W ]        B = [ mu/a   0      ]
//       [ grad      0            ]            [ 0      W^-1 A ]
//
// acting on L2(mu) (+) L2(W), together with a holomorphic functional calculus
// (sign, sqrt-of-square, psi_t, resolvent products), sampled bisectorial
// resolvent profiles, square-function quadratic estimates, and off-diagonal
// decay profiles. Periodic grids use centered stencils so div = -grad^T holds
// exactly; interval grids are staggered (scalars at interior nodes, fluxes at
// cell midpoints) with Dirichlet elimination, which keeps the duality exact as
// a matrix identity on nonuniform nodes too.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "mwlab/jsonio.hpp"
#include "mwlab/weights.hpp"

namespace mwlab {

using Complex = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr int kDenseDimCap = 4096;

// SPD block-diagonal Gram matrix with blocks of size 1 or 2.
class Gram {
 public:
  static Gram diagonal(VecR d);
  // Mixed layout: leading diagonal part, then contiguous 2x2 blocks.
  static Gram diagonalWithBlocks(VecR d, const std::vector<Mat2>& blocks);

  int dim() const { return dim_; }
  VecC apply(const VecC& x) const;       // G x
  VecC applyInv(const VecC& x) const;    // G^{-1} x
  VecC applySqrt(const VecC& x) const;   // G^{1/2} x
  VecC applyInvSqrt(const VecC& x) const;
  double norm(const VecC& x) const;      // sqrt(<Gx, x>)
  double innerRe(const VecC& x, const VecC& y) const;  // Re <Gx, y>

  MatC sqrtScale(const MatC& M) const;      // G^{1/2} M G^{-1/2}
  MatC invSqrtScale(const MatC& M) const;   // G^{-1/2} M G^{1/2}
  MatC conjugateAdjoint(const MatC& M) const;  // G^{-1} M^H G

  MatR dense() const;

 private:
  int dim_ = 0;
  VecR d_, dSqrt_, dInvSqrt_, dInv_;     // diagonal part (size diagDim_)
  int diagDim_ = 0;
  std::vector<Mat2> blocks_, blockSqrt_, blockInvSqrt_, blockInv_;
};

enum class Topology { Periodic, DirichletInterval };

struct WeightedGrid {
  Topology topology = Topology::Periodic;
  int dim = 1;

  // 1D periodic: n collocated nodes on a circle of circumference length.
  // 1D interval: full node list including the two Dirichlet boundary nodes.
  // 2D periodic: n x n torus, nodes collocated, vector dofs interleaved.
  int n = 0;
  double length = 1.0;
  std::vector<double> nodes;  // interval topology only

  VecR muVals;                  // mu at scalar dofs
  VecR wVals;                   // 1D: w at vector dofs
  std::vector<Mat2> WVals;      // 2D: W at nodes

  static WeightedGrid periodic1d(int n, double length, const WeightField& mu,
                                 const WeightField& w);
  static WeightedGrid interval1d(std::vector<double> fullNodes, const WeightField& mu,
                                 const WeightField& w);
  static WeightedGrid periodic2d(int n, double length, const WeightField& mu2d,
                                 const WeightField& W2d);

  int scalarDim() const;
  int vectorDim() const;
  int totalDim() const { return scalarDim() + vectorDim(); }

  std::vector<double> scalarPoints() const;  // 1D dof coordinates
  std::vector<double> vectorPoints() const;
  double spacing() const;

  VecR scalarCellMeasures() const;
  VecR vectorCellMeasures() const;

  Gram scalarGram() const;   // mu-weighted
  Gram vectorGram() const;   // W-weighted
  Gram fullGram() const;     // scalar (+) vector blocks

  // Sample a scalar function at scalar dofs (1D).
  VecC sampleScalar(const std::function<Complex(double)>& f) const;
  VecC sampleVector(const std::function<Complex(double)>& f) const;
};

struct WeightedOperator {
  MatC A;
  Gram G;
  std::string label;

  int dim() const { return static_cast<int>(A.rows()); }
  MatC adjoint() const { return G.conjugateAdjoint(A); }
  double selfAdjointGap() const;           // ||A - A*|| / ||A||
  double weightedOpNorm(const MatC& M) const;  // ||G^{1/2} M G^{-1/2}||_2
};

JsonValue operator_to_json(const WeightedOperator& op);

// ---- assembly ----

// Discrete gradient and measure-consistent divergence with div = -C_s^{-1} G^T C_v,
// exact at matrix level.
struct GradDiv {
  MatR grad;
  MatR div;
};
GradDiv build_grad_div(const WeightedGrid& grid);

WeightedOperator assemble_D(const WeightedGrid& grid);

struct MultiplierReport {
  double boundConst = 0.0;
  double accrConst = 0.0;
  bool accretive = false;
  bool warningFlag = false;  // set when accretivity fails at some node
};

struct BOperator {
  WeightedOperator op;
  MultiplierReport report;
};

// B = diag(mu/a, W^{-1} A); 1D takes scalar coefficient callables a(x), b(x).
BOperator assemble_B(const WeightedGrid& grid,
                     const std::function<Complex(double)>& a,
                     const std::function<Complex(double)>& b);
BOperator assemble_B_2d(const WeightedGrid& grid,
                        const std::function<Complex(Vec2)>& a,
                        const std::function<Eigen::Matrix2cd(Vec2)>& A);

// Inhomogeneous three-block operator on L2(mu) (+) L2(mu) (+) L2(W).
WeightedOperator assemble_inhomogeneous(const WeightedGrid& grid);

WeightedOperator multiply(const WeightedOperator& lhs, const MatC& rhs,
                          const std::string& label);

// ---- spectra and functional calculus ----

struct SpectralData {
  enum class Kind { HermitianEigen, GeneralEigen, Schur } kind = Kind::GeneralEigen;
  VecC eigenvalues;
  double eigvecCond = 0.0;
  double reconstructErr = 0.0;
};

enum class CalcFn { Sign, SqrtOfSquare, PsiT, ResolventProduct };

struct FnSpec {
  CalcFn kind = CalcFn::Sign;
  double t = 1.0;  // PsiT / ResolventProduct scale
};

struct FnCalcOptions {
  double eigCondMax = 1e6;
  double reconstructTol = 1e-10;
  double kernelTolRel = 1e-12;  // |lambda| below this (times spectral radius) is kernel
  double axisTolRel = 1e-8;     // |Re lambda| below this (times radius) rejects sign/sqrt
  double hermitianGapTol = 1e-13;
  double clusterTolRel = 1e-6;
};

MatC fn_calculus(const WeightedOperator& T, const FnSpec& f,
                 const FnCalcOptions& opts = {}, SpectralData* diag = nullptr);

// Spectral projection onto the closure of the range (complement of the kernel).
MatC range_projection(const WeightedOperator& T, const FnCalcOptions& opts = {});

VecC eigenvalues_of(const WeightedOperator& T);

// ---- bisectorial resolvent profile ----

double dist_to_bisector(Complex lambda, double theta);

struct BisectorialProfile {
  double maxProfile = 0.0;
  std::vector<double> perLambda;
  std::vector<Complex> lambdas;
  int singularCount = 0;  // lambda samples that hit the spectrum
};

BisectorialProfile bisectorial_profile(const WeightedOperator& T, double theta,
                                       const std::vector<Complex>& lambdaSamples);

// ---- quadratic estimate ----

struct QuadraticEstimate {
  double Q = 0.0;   // square root of the square function integral
  double Q2 = 0.0;  // the integral itself
  double truncationEstimate = 0.0;
  double tMin = 0.0, tMax = 0.0;
  int nT = 0;
};

// psi(z) = z / (1 + z^2); integral of ||psi(tT)u||_G^2 dt/t over a log-spaced
// grid (perDecade points per decade). tMin/tMax of 0 auto-derive coverage from
// the spectrum; explicit values are validated (InsufficientTCoverage).
QuadraticEstimate quadratic_functional(const WeightedOperator& T, const VecC& u,
                                       double tMin = 0.0, double tMax = 0.0,
                                       int perDecade = 40);

VecC apply_psi(const WeightedOperator& T, double t, const VecC& u);

// ---- off-diagonal decay ----

// E, F are grid node indices (1D); both scalar and vector dofs at those nodes
// participate. Returns the weighted operator norm of P_F (I + itT)^{-1} P_E
// relative to unit weighted mass on E.
double offdiagonal_profile(const WeightedOperator& T, const WeightedGrid& grid,
                           const std::vector<int>& E, const std::vector<int>& F,
                           double t);

double circle_node_distance(const WeightedGrid& grid, const std::vector<int>& E,
                            const std::vector<int>& F);

}  // namespace mwlab
