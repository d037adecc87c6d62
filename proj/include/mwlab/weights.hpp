#pragma once

// Scalar and matrix weights: named families, pointwise evaluation, and
// Muckenhoupt A2 characteristics sampled over dyadic interval/square families.
//
// A scalar weight is positive a.e., a matrix weight symmetric positive
// definite a.e.; both may blow up or vanish on a declared singular set which
// quadrature avoids by geometric grading.

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mwlab/quadrature.hpp"

namespace mwlab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct Domain {
  // 1D: [lo[0], hi[0]]; 2D: axis-aligned rectangle. +-inf allowed in 1D.
  int dim = 1;
  double lo[2] = {-std::numeric_limits<double>::infinity(), 0.0};
  double hi[2] = {std::numeric_limits<double>::infinity(), 0.0};

  static Domain interval(double a, double b) {
    Domain d;
    d.dim = 1;
    d.lo[0] = a;
    d.hi[0] = b;
    return d;
  }
  static Domain rectangle(double ax, double bx, double ay, double by) {
    Domain d;
    d.dim = 2;
    d.lo[0] = ax;
    d.hi[0] = bx;
    d.lo[1] = ay;
    d.hi[1] = by;
    return d;
  }
  bool contains1d(double x) const { return x >= lo[0] && x <= hi[0]; }
  bool contains2d(const Vec2& p) const {
    return p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
  }
};

class WeightField {
 public:
  enum class Kind { Scalar, Matrix };

  // --- named families ---
  static WeightField power(double alpha);             // x^alpha on (0,inf)
  static WeightField absPower(double alpha);          // |x|^alpha on R
  static WeightField constant(double c);              // scalar constant
  static WeightField rotationExample(double r);      // 2x2 on R, R(x) diag(1,1+2r) R(x)^T
  static WeightField constantDiag(double r);         // 2x2 constant diag(1, 1+2r)
  static WeightField closedForm(std::string id, std::function<double(double)> f,
                                Domain dom, std::vector<double> singular = {});
  static WeightField closedFormMatrix(std::string id,
                                      std::function<Mat2(double)> f, Domain dom,
                                      std::vector<double> singular = {});
  static WeightField gridSamples(std::vector<double> pts, std::vector<double> vals,
                                 Domain dom);
  // 2D scalar field (used by the metric module).
  static WeightField closedForm2d(std::string id, std::function<double(Vec2)> f,
                                  Domain dom, bool singularAtOrigin = false);
  static WeightField closedFormMatrix2d(std::string id,
                                        std::function<Mat2(Vec2)> f, Domain dom,
                                        bool singularAtOrigin = false);

  Kind kind() const { return kind_; }
  int spatialDim() const { return domain_.dim; }
  const Domain& domain() const { return domain_; }
  const std::string& spec() const { return spec_; }
  const std::vector<double>& singularPoints() const { return singular1d_; }
  bool singularAtOrigin2d() const { return singularOrigin2d_; }

  // Pointwise evaluation. Throws PointOutsideDomain / PointOnSingularSet;
  // positivity of the result is checked (SingularWeightAtSample otherwise).
  double evalScalar(double x) const;
  Mat2 evalMatrix(double x) const;
  double evalScalar2d(const Vec2& p) const;
  Mat2 evalMatrix2d(const Vec2& p) const;

  std::vector<double> evalScalarMany(const std::vector<double>& pts) const;
  std::vector<Mat2> evalMatrixMany(const std::vector<double>& pts) const;

 private:
  Kind kind_ = Kind::Scalar;
  Domain domain_;
  std::string spec_;
  std::function<double(double)> scalar1d_;
  std::function<Mat2(double)> matrix1d_;
  std::function<double(Vec2)> scalar2d_;
  std::function<Mat2(Vec2)> matrix2d_;
  std::vector<double> singular1d_;
  bool singularOrigin2d_ = false;

  void checkPoint1d(double x) const;
};

// Parse "power:0.5", "abspower:-1", "const:2", "rotation:100", "constdiag:10".
WeightField parse_weight_spec(const std::string& spec);

// ---- A2 characteristics ----

struct BallFamily {
  // Dyadic subintervals of [lo, hi] (1D) or dyadic squares of the rectangle
  // (2D), refined maxDepth times. scaleLadder > 1 additionally scans shrunken
  // copies [lo, lo + (hi-lo)/2^s] to expose scale growth of the characteristic.
  double lo = -1.0, hi = 1.0;
  double lo2 = 0.0, hi2 = 0.0;  // second axis, 2D only
  int dim = 1;
  int maxDepth = 8;
  int scaleLadder = 1;

  std::string describe() const;
};

struct A2Report {
  double characteristic = 0.0;
  std::string family;
  double argmaxLo = 0.0, argmaxHi = 0.0;  // interval attaining the supremum
  double argmaxLo2 = 0.0, argmaxHi2 = 0.0;
  double quadratureTolerance = 0.0;
  bool finite = true;          // all averages converged and depth/scale stable
  bool quadratureDiverged = false;
  std::vector<double> perDepthSup;   // sup over intervals at each dyadic depth
  std::vector<double> perScaleSup;   // sup per scale rung of the ladder
};

struct A2Options {
  QuadOptions quad;
  double depthStabilityFactor = 1.5;  // growth across last depths flags non-A2
};

A2Report a2_characteristic_scalar(const WeightField& w, const BallFamily& family,
                                  const A2Options& opts = {});
A2Report a2_characteristic_matrix(const WeightField& W, const BallFamily& family,
                                  const A2Options& opts = {});

// ---- accretivity / boundedness equivalence ----

struct AccretivityReport {
  double boundConst = 0.0;   // sup over samples of |V^{-1/2} A V^{-1/2}|
  double accrConst = 0.0;    // inf over samples of lambda_min(Re V^{-1/2} A V^{-1/2})
  bool threeWayAgreement = false;
  double maxRouteDiscrepancy = 0.0;
};

using MatrixFieldFn = std::function<Eigen::Matrix2cd(double)>;

AccretivityReport check_accretivity_equivalence(
    const MatrixFieldFn& A, const WeightField& V,
    const std::vector<double>& samplePts,
    const std::vector<Eigen::Vector2cd>& testVectors, double tol = 1e-9);

// Symmetric SPD square root via eigendecomposition.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S);
Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& S);

}  // namespace mwlab
