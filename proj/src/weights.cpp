#include "mwlab/weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mwlab/errors.hpp"

namespace mwlab {

namespace {

bool near(double a, double b, double tol = 1e-14) { return std::abs(a - b) <= tol; }

Mat2 rotation_weight(double x, double r) {
  const double c = std::cos(x), s = std::sin(x);
  Mat2 q;
  q << c, s, -s, c;
  Mat2 d = Mat2::Zero();
  d(0, 0) = 1.0;
  d(1, 1) = 1.0 + 2.0 * r;
  return q * d * q.transpose();
}

}  // namespace

WeightField WeightField::power(double alpha) {
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = Domain::interval(0.0, std::numeric_limits<double>::infinity());
  std::ostringstream os;
  os << "power:" << alpha;
  w.spec_ = os.str();
  w.scalar1d_ = [alpha](double x) { return std::pow(x, alpha); };
  if (alpha != 0.0) w.singular1d_ = {0.0};
  return w;
}

WeightField WeightField::absPower(double alpha) {
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = Domain::interval(-std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity());
  std::ostringstream os;
  os << "abspower:" << alpha;
  w.spec_ = os.str();
  w.scalar1d_ = [alpha](double x) { return std::pow(std::abs(x), alpha); };
  if (alpha != 0.0) w.singular1d_ = {0.0};
  return w;
}

WeightField WeightField::constant(double c) {
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = Domain::interval(-std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity());
  std::ostringstream os;
  os << "const:" << c;
  w.spec_ = os.str();
  w.scalar1d_ = [c](double) { return c; };
  return w;
}

WeightField WeightField::rotationExample(double r) {
  WeightField w;
  w.kind_ = Kind::Matrix;
  w.domain_ = Domain::interval(-std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity());
  std::ostringstream os;
  os << "rotation:" << r;
  w.spec_ = os.str();
  w.matrix1d_ = [r](double x) { return rotation_weight(x, r); };
  return w;
}

WeightField WeightField::constantDiag(double r) {
  WeightField w;
  w.kind_ = Kind::Matrix;
  w.domain_ = Domain::interval(-std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity());
  std::ostringstream os;
  os << "constdiag:" << r;
  w.spec_ = os.str();
  w.matrix1d_ = [r](double) {
    Mat2 d = Mat2::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = 1.0 + 2.0 * r;
    return d;
  };
  return w;
}

WeightField WeightField::closedForm(std::string id, std::function<double(double)> f,
                                    Domain dom, std::vector<double> singular) {
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = dom;
  w.spec_ = std::move(id);
  w.scalar1d_ = std::move(f);
  w.singular1d_ = std::move(singular);
  return w;
}

WeightField WeightField::closedFormMatrix(std::string id, std::function<Mat2(double)> f,
                                          Domain dom, std::vector<double> singular) {
  WeightField w;
  w.kind_ = Kind::Matrix;
  w.domain_ = dom;
  w.spec_ = std::move(id);
  w.matrix1d_ = std::move(f);
  w.singular1d_ = std::move(singular);
  return w;
}

WeightField WeightField::gridSamples(std::vector<double> pts, std::vector<double> vals,
                                     Domain dom) {
  if (pts.size() != vals.size() || pts.size() < 2)
    throw ConfigInvalid("gridSamples needs matching pts/vals with >= 2 entries");
  for (double p : pts)
    if (p <= dom.lo[0] || p >= dom.hi[0])
      throw PointOutsideDomain("gridSamples point not strictly inside domain");
  for (double v : vals)
    if (!(v > 0.0)) throw SingularWeightAtSample("gridSamples value not positive");
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = dom;
  w.spec_ = "gridSamples";
  auto xs = std::make_shared<std::vector<double>>(std::move(pts));
  auto ys = std::make_shared<std::vector<double>>(std::move(vals));
  w.scalar1d_ = [xs, ys](double x) {
    const auto& p = *xs;
    const auto& v = *ys;
    if (x <= p.front()) return v.front();
    if (x >= p.back()) return v.back();
    auto it = std::upper_bound(p.begin(), p.end(), x);
    const size_t i = static_cast<size_t>(it - p.begin());
    const double t = (x - p[i - 1]) / (p[i] - p[i - 1]);
    return (1.0 - t) * v[i - 1] + t * v[i];
  };
  return w;
}

WeightField WeightField::closedForm2d(std::string id, std::function<double(Vec2)> f,
                                      Domain dom, bool singularAtOrigin) {
  WeightField w;
  w.kind_ = Kind::Scalar;
  w.domain_ = dom;
  w.spec_ = std::move(id);
  w.scalar2d_ = std::move(f);
  w.singularOrigin2d_ = singularAtOrigin;
  return w;
}

WeightField WeightField::closedFormMatrix2d(std::string id, std::function<Mat2(Vec2)> f,
                                            Domain dom, bool singularAtOrigin) {
  WeightField w;
  w.kind_ = Kind::Matrix;
  w.domain_ = dom;
  w.spec_ = std::move(id);
  w.matrix2d_ = std::move(f);
  w.singularOrigin2d_ = singularAtOrigin;
  return w;
}

void WeightField::checkPoint1d(double x) const {
  if (!domain_.contains1d(x)) throw PointOutsideDomain(spec_ + " at x=" + std::to_string(x));
  for (double s : singular1d_)
    if (near(x, s)) throw PointOnSingularSet(spec_ + " at x=" + std::to_string(x));
}

double WeightField::evalScalar(double x) const {
  if (!scalar1d_) throw Error("weight " + spec_ + " is not a 1d scalar field");
  checkPoint1d(x);
  const double v = scalar1d_(x);
  if (!(v > 0.0) || !std::isfinite(v))
    throw SingularWeightAtSample(spec_ + " nonpositive at x=" + std::to_string(x));
  return v;
}

Mat2 WeightField::evalMatrix(double x) const {
  if (!matrix1d_) throw Error("weight " + spec_ + " is not a 1d matrix field");
  checkPoint1d(x);
  Mat2 m = matrix1d_(x);
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (m + m.transpose()));
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw SingularWeightAtSample(spec_ + " not SPD at x=" + std::to_string(x));
  return m;
}

double WeightField::evalScalar2d(const Vec2& p) const {
  if (!scalar2d_) throw Error("weight " + spec_ + " is not a 2d scalar field");
  if (!domain_.contains2d(p)) throw PointOutsideDomain(spec_);
  if (singularOrigin2d_ && p.norm() < 1e-14) throw PointOnSingularSet(spec_);
  const double v = scalar2d_(p);
  if (!(v > 0.0) || !std::isfinite(v)) throw SingularWeightAtSample(spec_);
  return v;
}

Mat2 WeightField::evalMatrix2d(const Vec2& p) const {
  if (!matrix2d_) throw Error("weight " + spec_ + " is not a 2d matrix field");
  if (!domain_.contains2d(p)) throw PointOutsideDomain(spec_);
  if (singularOrigin2d_ && p.norm() < 1e-14) throw PointOnSingularSet(spec_);
  Mat2 m = matrix2d_(p);
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (m + m.transpose()));
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw SingularWeightAtSample(spec_);
  return m;
}

std::vector<double> WeightField::evalScalarMany(const std::vector<double>& pts) const {
  std::vector<double> out;
  out.reserve(pts.size());
  for (double x : pts) out.push_back(evalScalar(x));
  return out;
}

std::vector<Mat2> WeightField::evalMatrixMany(const std::vector<double>& pts) const {
  std::vector<Mat2> out;
  out.reserve(pts.size());
  for (double x : pts) out.push_back(evalMatrix(x));
  return out;
}

WeightField parse_weight_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  double arg = 0.0;
  if (colon != std::string::npos) {
    try {
      arg = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigInvalid("bad numeric argument in weight spec '" + spec + "'");
    }
  }
  if (name == "power") return WeightField::power(arg);
  if (name == "abspower") return WeightField::absPower(arg);
  if (name == "const") return WeightField::constant(colon == std::string::npos ? 1.0 : arg);
  if (name == "rotation") return WeightField::rotationExample(arg);
  if (name == "constdiag") return WeightField::constantDiag(arg);
  throw ConfigInvalid("unknown weight family '" + spec + "'");
}

// ---------------------------------------------------------------------------
// A2 characteristics
// ---------------------------------------------------------------------------

std::string BallFamily::describe() const {
  std::ostringstream os;
  if (dim == 1)
    os << "dyadic intervals of [" << lo << "," << hi << "], depth " << maxDepth
       << ", scale ladder " << scaleLadder;
  else
    os << "dyadic squares of [" << lo << "," << hi << "]x[" << lo2 << "," << hi2
       << "], depth " << maxDepth;
  return os.str();
}

namespace {

struct AvgResult {
  double value = 0.0;
  QuadStatus status = QuadStatus::Converged;
};

// Average of f over [a,b], splitting at interior singular points and grading
// toward singular endpoints.
AvgResult average_1d(const std::function<double(double)>& f, double a, double b,
                     const std::vector<double>& singular, const QuadOptions& quad) {
  QuadResult q = integrate_singular_aware(f, a, b, singular, quad);
  AvgResult r;
  r.value = q.value / (b - a);
  r.status = q.status;
  return r;
}

struct IntervalChar {
  double value = 0.0;
  bool diverged = false;
};

IntervalChar scalar_interval_characteristic(const WeightField& w, double a, double b,
                                            const QuadOptions& quad) {
  auto f = [&w](double x) { return w.evalScalar(x); };
  auto finv = [&w](double x) { return 1.0 / w.evalScalar(x); };
  AvgResult aw = average_1d(f, a, b, w.singularPoints(), quad);
  AvgResult awi = average_1d(finv, a, b, w.singularPoints(), quad);
  IntervalChar c;
  c.value = aw.value * awi.value;
  c.diverged = !(aw.status == QuadStatus::Converged && awi.status == QuadStatus::Converged);
  return c;
}

Mat2 matrix_average_1d(const WeightField& w, double a, double b, bool inverse,
                       const QuadOptions& quadIn, bool& diverged) {
  // Entries can integrate to zero; anchor the stopping rule to the matrix
  // scale at the midpoint so those entries converge too.
  QuadOptions quad = quadIn;
  Mat2 scaleProbe = w.evalMatrix(0.5 * (a + b));
  if (inverse) scaleProbe = scaleProbe.inverse().eval();
  quad.absTol = quad.relTol * std::max(scaleProbe.norm(), 1e-12) * (b - a);

  Mat2 avg;
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j) {
      auto f = [&w, i, j, inverse](double x) {
        Mat2 m = w.evalMatrix(x);
        if (inverse) m = m.inverse().eval();
        return m(i, j);
      };
      AvgResult r = average_1d(f, a, b, w.singularPoints(), quad);
      if (r.status != QuadStatus::Converged) diverged = true;
      avg(i, j) = r.value;
      avg(j, i) = r.value;
    }
  return avg;
}

IntervalChar matrix_interval_characteristic(const WeightField& w, double a, double b,
                                            const QuadOptions& quad) {
  IntervalChar c;
  bool diverged = false;
  Mat2 avgW = matrix_average_1d(w, a, b, false, quad, diverged);
  Mat2 avgWi = matrix_average_1d(w, a, b, true, quad, diverged);
  Eigen::MatrixXd s1 = spd_sqrt(avgW);
  Eigen::MatrixXd s2 = spd_sqrt(avgWi);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s1 * s2);
  c.value = svd.singularValues()(0) * svd.singularValues()(0);
  c.diverged = diverged;
  return c;
}

IntervalChar matrix_square_characteristic_2d(const WeightField& w, double ax, double bx,
                                             double ay, double by, const QuadOptions& quad) {
  // Plain tensor midpoint; 2d families are scanned away from the singular set.
  auto avg = [&](bool inverse) {
    Mat2 prev = Mat2::Zero();
    int panels = 4;
    Mat2 cur = Mat2::Zero();
    for (int it = 0; it < 8; ++it) {
      cur.setZero();
      const double hx = (bx - ax) / panels, hy = (by - ay) / panels;
      for (int i = 0; i < panels; ++i)
        for (int j = 0; j < panels; ++j) {
          Vec2 p(ax + (i + 0.5) * hx, ay + (j + 0.5) * hy);
          Mat2 m = w.evalMatrix2d(p);
          if (inverse) m = m.inverse().eval();
          cur += m;
        }
      cur /= double(panels) * panels;
      if (it > 0 && (cur - prev).norm() <= quad.relTol * std::max(cur.norm(), 1e-300)) break;
      prev = cur;
      panels *= 2;
    }
    return cur;
  };
  IntervalChar c;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(spd_sqrt(avg(false)) * spd_sqrt(avg(true)));
  c.value = svd.singularValues()(0) * svd.singularValues()(0);
  return c;
}

// Shared driver over ladder/depth dyadic windows.
template <typename CharFn>
A2Report scan_family(const BallFamily& family, const A2Options& opts, CharFn&& charOf) {
  A2Report rep;
  rep.family = family.describe();
  rep.quadratureTolerance = opts.quad.relTol;
  rep.perDepthSup.assign(family.maxDepth + 1, 0.0);
  rep.perScaleSup.assign(family.scaleLadder, 0.0);

  const double H = family.hi - family.lo;
  for (int s = family.scaleLadder - 1; s >= 0; --s) {
    const double winHi = family.lo + H / std::pow(2.0, s);
    for (int depth = 0; depth <= family.maxDepth; ++depth) {
      const long nIv = 1L << depth;
      const double len = (winHi - family.lo) / double(nIv);
      for (long k = 0; k < nIv; ++k) {
        const double a = family.lo + k * len;
        const double b = a + len;
        IntervalChar c = charOf(a, b);
        if (c.diverged) {
          rep.quadratureDiverged = true;
          continue;
        }
        if (c.value > rep.characteristic) {
          rep.characteristic = c.value;
          rep.argmaxLo = a;
          rep.argmaxHi = b;
        }
        rep.perDepthSup[depth] = std::max(rep.perDepthSup[depth], c.value);
        rep.perScaleSup[s] = std::max(rep.perScaleSup[s], c.value);
      }
    }
  }

  // Finiteness: quadratures converged, and the sup neither keeps growing with
  // dyadic depth nor with the window scale.
  bool depthStable = true;
  if (family.maxDepth >= 2) {
    double shallow = 0.0, deep = 0.0;
    for (int d = 0; d <= family.maxDepth / 2; ++d) shallow = std::max(shallow, rep.perDepthSup[d]);
    for (int d = 0; d <= family.maxDepth; ++d) deep = std::max(deep, rep.perDepthSup[d]);
    depthStable = deep <= opts.depthStabilityFactor * std::max(shallow, 1e-300);
  }
  bool scaleStable = true;
  if (family.scaleLadder >= 2) {
    double inner = 0.0, outer = 0.0;
    for (int s = family.scaleLadder / 2; s < family.scaleLadder; ++s)
      inner = std::max(inner, rep.perScaleSup[s]);
    for (int s = 0; s < family.scaleLadder; ++s) outer = std::max(outer, rep.perScaleSup[s]);
    scaleStable = outer <= opts.depthStabilityFactor * std::max(inner, 1e-300);
  }
  rep.finite = !rep.quadratureDiverged && depthStable && scaleStable;
  return rep;
}

}  // namespace

A2Report a2_characteristic_scalar(const WeightField& w, const BallFamily& family,
                                  const A2Options& opts) {
  if (w.kind() != WeightField::Kind::Scalar)
    throw Error("a2_characteristic_scalar needs a scalar weight");
  A2Report rep = scan_family(family, opts, [&](double a, double b) {
    return scalar_interval_characteristic(w, a, b, opts.quad);
  });
  // every scanned interval diverged: there is no characteristic to report
  if (rep.quadratureDiverged && rep.characteristic == 0.0)
    throw NonIntegrableWeight(w.spec() + " has no convergent averages on the family");
  return rep;
}

A2Report a2_characteristic_matrix(const WeightField& W, const BallFamily& family,
                                  const A2Options& opts) {
  if (W.kind() != WeightField::Kind::Matrix)
    throw Error("a2_characteristic_matrix needs a matrix weight");
  if (family.dim == 2) {
    A2Report rep;
    rep.family = family.describe();
    rep.quadratureTolerance = opts.quad.relTol;
    const double H = family.hi - family.lo, H2 = family.hi2 - family.lo2;
    rep.perDepthSup.assign(family.maxDepth + 1, 0.0);
    for (int depth = 0; depth <= family.maxDepth; ++depth) {
      const long nIv = 1L << depth;
      for (long i = 0; i < nIv; ++i)
        for (long j = 0; j < nIv; ++j) {
          const double ax = family.lo + i * H / nIv, ay = family.lo2 + j * H2 / nIv;
          IntervalChar c = matrix_square_characteristic_2d(W, ax, ax + H / nIv, ay,
                                                           ay + H2 / nIv, opts.quad);
          if (c.value > rep.characteristic) {
            rep.characteristic = c.value;
            rep.argmaxLo = ax;
            rep.argmaxHi = ax + H / nIv;
            rep.argmaxLo2 = ay;
            rep.argmaxHi2 = ay + H2 / nIv;
          }
          rep.perDepthSup[depth] = std::max(rep.perDepthSup[depth], c.value);
        }
    }
    rep.finite = true;
    return rep;
  }
  A2Report rep = scan_family(family, opts, [&](double a, double b) {
    return matrix_interval_characteristic(W, a, b, opts.quad);
  });
  if (rep.quadratureDiverged && rep.characteristic == 0.0)
    throw NonIntegrableWeight(W.spec() + " has no convergent averages on the family");
  return rep;
}

// ---------------------------------------------------------------------------
// Accretivity equivalence
// ---------------------------------------------------------------------------

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw SingularWeight("matrix not positive definite in spd_sqrt");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_inv_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw SingularWeight("matrix not positive definite in spd_inv_sqrt");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

AccretivityReport check_accretivity_equivalence(
    const MatrixFieldFn& A, const WeightField& V, const std::vector<double>& samplePts,
    const std::vector<Eigen::Vector2cd>& testVectors, double tol) {
  AccretivityReport rep;
  rep.boundConst = 0.0;
  rep.accrConst = std::numeric_limits<double>::infinity();
  rep.threeWayAgreement = true;

  for (double x : samplePts) {
    Mat2 Vx;
    try {
      Vx = V.evalMatrix(x);
    } catch (const Error& e) {
      throw SingularWeightAtSample(std::string(e.what()));
    }
    const Eigen::Matrix2cd Vs = spd_sqrt(Vx).cast<std::complex<double>>();
    const Eigen::Matrix2cd Vis = spd_inv_sqrt(Vx).cast<std::complex<double>>();
    const Eigen::Matrix2cd Ax = A(x);

    // Route 1: M = V^{-1/2} A V^{-1/2} directly.
    const Eigen::Matrix2cd M1 = Vis * Ax * Vis;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(M1);
    const double bound1 = svd.singularValues()(0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> re1(
        0.5 * (M1 + Eigen::Matrix2cd(M1.adjoint())));
    const double accr1 = re1.eigenvalues().minCoeff();

    // Route 2: the V-bounded/V-accretive reading of V^{-1} A, which conjugates
    // back to V^{1/2} (V^{-1}A) V^{-1/2} -- a distinct arithmetic path.
    const Eigen::Matrix2cd M2 =
        Vs * (Vx.inverse().cast<std::complex<double>>() * Ax) * Vis;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd2(M2);
    const double bound2 = svd2.singularValues()(0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> re2(
        0.5 * (M2 + Eigen::Matrix2cd(M2.adjoint())));
    const double accr2 = re2.eigenvalues().minCoeff();

    rep.maxRouteDiscrepancy = std::max(
        {rep.maxRouteDiscrepancy, std::abs(bound1 - bound2), std::abs(accr1 - accr2)});
    if (std::abs(bound1 - bound2) > tol * std::max(1.0, bound1) ||
        std::abs(accr1 - accr2) > tol * std::max(1.0, std::abs(accr1)))
      rep.threeWayAgreement = false;

    // Route 3: sampled quotients of the bilinear form must sit inside the
    // eigenvalue-derived interval.
    const Eigen::Matrix2cd VxC = Vx.cast<std::complex<double>>();
    for (const auto& v : testVectors) {
      const double vV = std::real((VxC * v).dot(v));  // dot conjugates its argument
      if (vV <= 0.0) continue;
      const double quotAccr = std::real((Ax * v).dot(v)) / vV;
      if (quotAccr < accr1 - tol * std::max(1.0, std::abs(accr1)))
        rep.threeWayAgreement = false;
      for (const auto& u : testVectors) {
        const double uV = std::real((VxC * u).dot(u));
        if (uV <= 0.0) continue;
        const double quotBound = std::abs((Ax * v).dot(u)) / std::sqrt(vV * uV);
        if (quotBound > bound1 + tol * std::max(1.0, bound1))
          rep.threeWayAgreement = false;
      }
    }

    rep.boundConst = std::max(rep.boundConst, bound1);
    rep.accrConst = std::min(rep.accrConst, accr1);
  }
  if (rep.accrConst <= 0.0) rep.threeWayAgreement = false;
  return rep;
}

}  // namespace mwlab
