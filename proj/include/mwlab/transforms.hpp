#pragma once

// Change of variables under monotone/conformal homeomorphisms, the non-smooth
// chain rule and Piola transformation with residual certification, and
// Friedrichs mollification with maximal-function domination.
//
// Residuals compare two discrete routes to the same identity, so the identity
// map gives exactly zero. 1D routes use the same interior stencils as the
// operator module on matching grids; the planar inversion family produces
// curvilinear image grids, so its routes differentiate callables by central
// differences at a step tied to the refinement level.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mwlab/rubberband.hpp"
#include "mwlab/weights.hpp"

namespace mwlab {

class Homeomorphism {
 public:
  static Homeomorphism identity1d();
  static Homeomorphism scaling1d(double c);                 // x -> c x, c > 0
  static Homeomorphism cubic1d();                           // x -> x^3 on (0, inf)
  static Homeomorphism smoothPerturbation1d(double eps);    // x + eps sin(2 pi x)
  static Homeomorphism rubberBand(const RhoMap& rho);
  static Homeomorphism identity2d();
  static Homeomorphism inversionConformal2d();  // z -> 1/z; orientation-preserving

  int dim() const { return dim_; }
  const std::string& id() const { return id_; }

  double fwd1(double x) const { return f1_(x); }
  double inv1(double y) const { return i1_(y); }
  double jac1(double x) const { return j1_(x); }  // derivative, > 0

  Vec2 fwd2(const Vec2& p) const { return f2_(p); }
  Vec2 inv2(const Vec2& p) const { return i2_(p); }
  Mat2 dmap2(const Vec2& p) const { return d2_(p); }
  double jac2(const Vec2& p) const;  // det of dmap2, must be > 0

  double roundTripDefect1d(double a, double b, int samples = 64) const;

 private:
  int dim_ = 1;
  std::string id_;
  std::function<double(double)> f1_, i1_, j1_;
  std::function<Vec2(Vec2)> f2_, i2_;
  std::function<Mat2(Vec2)> d2_;
};

using Scalar2dFn = std::function<double(Vec2)>;
using Field2dFn = std::function<Vec2(Vec2)>;
using Matrix2dFn = std::function<Mat2(Vec2)>;

// ---- change of variables:  int_Omega (f o rho) J_rho  vs  int_rho(Omega) f ----

double change_of_variables_residual_1d(const Homeomorphism& rho, const ScalarFn& f,
                                       double a, double b, int panels);

// Omega is the annulus r0 < |p| < r1 (closed under the registered 2D maps);
// tensor midpoint quadrature in polar coordinates on both sides.
double change_of_variables_residual_2d(const Homeomorphism& rho, const Scalar2dFn& f,
                                       double r0, double r1, int nRadial, int nAngular);

// ---- chain rule:  grad(f o rho)  vs  drho^T (grad f) o rho ----

// Discrete gradients: 3-point nonuniform interior stencils on the x-grid and
// its image grid. Weighted by V_rho = J_rho V(rho)/J_rho^2 (1D), normalized by
// ||f||_{L2(v)}.
double chain_rule_residual_1d(const Homeomorphism& rho, const ScalarFn& f,
                              const WeightField& v, const WeightField& V, double a,
                              double b, int n);

double chain_rule_residual_2d(const Homeomorphism& rho, const Scalar2dFn& f,
                              const Scalar2dFn& v, const Matrix2dFn& V, double r0,
                              double r1, int nRadial, int nAngular, double fdStep);

// ---- Piola:  div(J^{-1} rho_* h)  vs  (J^{-1} div h) o rho^{-1} ----

double piola_residual_1d(const Homeomorphism& rho, const ScalarFn& h,
                         const WeightField& v, double a, double b, int n);

double piola_residual_2d(const Homeomorphism& rho, const Field2dFn& h,
                         const Scalar2dFn& v, double r0, double r1, int nRadial,
                         int nAngular, double fdStep);

// ---- Piola isometry:  ||J^{-1} rho_* h||_{L2(V^rho)} = ||h||_{L2(V)} ----

double piola_isometry_check_1d(const Homeomorphism& rho, const ScalarFn& h,
                               const WeightField& V, double a, double b, int n);

double piola_isometry_check_2d(const Homeomorphism& rho, const Field2dFn& h,
                               const Matrix2dFn& V, double r0, double r1, int nRadial,
                               int nAngular);

// ---- Friedrichs mollification ----

struct MollifyReport {
  std::vector<double> weightedErrors;  // ||f_t - f||_{L2(weight)} per t
  std::vector<double> supErrors;       // max-norm error per t
  int dominationViolations = 0;        // grid points with sup_t f_t > M f + tol
  double maxViolationGap = 0.0;
  double kernelMassDefect = 0.0;       // |1 - discrete kernel mass| before normalizing
};

// Scalar samples on the uniform grid over [a,b]; mollifier is the normalized
// smooth bump supported on (-1,1), discretely renormalized per scale so the
// convolution is an exact convex combination. Throws SupportTouchesBoundary if
// the support of f comes within max(tList) of an endpoint.
MollifyReport mollify_and_dominate(const std::vector<double>& f,
                                   const std::vector<double>& tList,
                                   const WeightField& weight, double a, double b);

// 2-component samples against a 1D-domain matrix weight; domination is checked
// against M(|W^{1/2}(x) f(.)|) pointwise in x.
MollifyReport mollify_and_dominate_vector(const std::vector<Eigen::Vector2d>& f,
                                          const std::vector<double>& tList,
                                          const WeightField& W, double a, double b);

// Discrete Hardy-Littlewood maximal function over all index windows.
std::vector<double> discrete_maximal(const std::vector<double>& f);

// Local Christ-Goldberg vector maximal operator over windows inside the grid.
std::vector<double> christ_goldberg_max(const std::vector<Eigen::Vector2d>& f,
                                        const WeightField& W, double a, double b);

}  // namespace mwlab
