#include "mwlab/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "mwlab/errors.hpp"

namespace mwlab {

// ---------------------------------------------------------------------------
// Homeomorphism families
// ---------------------------------------------------------------------------

Homeomorphism Homeomorphism::identity1d() {
  Homeomorphism h;
  h.dim_ = 1;
  h.id_ = "identity";
  h.f1_ = [](double x) { return x; };
  h.i1_ = [](double y) { return y; };
  h.j1_ = [](double) { return 1.0; };
  return h;
}

Homeomorphism Homeomorphism::scaling1d(double c) {
  if (!(c > 0.0)) throw SingularJacobian("scaling factor must be positive");
  Homeomorphism h;
  h.dim_ = 1;
  h.id_ = "scaling";
  h.f1_ = [c](double x) { return c * x; };
  h.i1_ = [c](double y) { return y / c; };
  h.j1_ = [c](double) { return c; };
  return h;
}

Homeomorphism Homeomorphism::cubic1d() {
  Homeomorphism h;
  h.dim_ = 1;
  h.id_ = "cubic";
  h.f1_ = [](double x) { return x * x * x; };
  h.i1_ = [](double y) { return std::cbrt(y); };
  h.j1_ = [](double x) { return 3.0 * x * x; };
  return h;
}

Homeomorphism Homeomorphism::smoothPerturbation1d(double eps) {
  if (!(std::abs(eps) * 2.0 * M_PI < 1.0))
    throw SingularJacobian("perturbation amplitude violates |eps s'| < 1");
  Homeomorphism h;
  h.dim_ = 1;
  h.id_ = "smoothPerturbation";
  h.f1_ = [eps](double x) { return x + eps * std::sin(2.0 * M_PI * x); };
  h.j1_ = [eps](double x) { return 1.0 + eps * 2.0 * M_PI * std::cos(2.0 * M_PI * x); };
  h.i1_ = [eps](double y) {
    double x = y;  // fixed point of a contraction: x = y - eps sin(2 pi x)
    for (int it = 0; it < 200; ++it) {
      const double next = y - eps * std::sin(2.0 * M_PI * x);
      if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(y))) return next;
      x = next;
    }
    return x;
  };
  return h;
}

Homeomorphism Homeomorphism::rubberBand(const RhoMap& rho) {
  auto r = std::make_shared<RhoMap>(rho);
  Homeomorphism h;
  h.dim_ = 1;
  h.id_ = "rubberBand";
  h.f1_ = [r](double x) { return r->forward(x); };
  h.i1_ = [r](double y) { return r->inverse(y); };
  h.j1_ = [r](double x) { return r->derivative(x); };
  return h;
}

Homeomorphism Homeomorphism::identity2d() {
  Homeomorphism h;
  h.dim_ = 2;
  h.id_ = "identity2d";
  h.f2_ = [](Vec2 p) { return p; };
  h.i2_ = [](Vec2 p) { return p; };
  h.d2_ = [](Vec2) { return Mat2::Identity(); };
  return h;
}

Homeomorphism Homeomorphism::inversionConformal2d() {
  Homeomorphism h;
  h.dim_ = 2;
  h.id_ = "inversion2d";
  auto mapz = [](Vec2 p) {
    const std::complex<double> z(p[0], p[1]);
    const std::complex<double> w = 1.0 / z;
    return Vec2(w.real(), w.imag());
  };
  h.f2_ = mapz;
  h.i2_ = mapz;  // involution
  h.d2_ = [](Vec2 p) {
    // derivative of z -> 1/z is -1/z^2, a conformal 2x2 block
    const std::complex<double> z(p[0], p[1]);
    const std::complex<double> w = -1.0 / (z * z);
    Mat2 m;
    m << w.real(), -w.imag(), w.imag(), w.real();
    return m;
  };
  return h;
}

double Homeomorphism::jac2(const Vec2& p) const {
  const double det = dmap2(p).determinant();
  if (!(det > 0.0)) throw SingularJacobian(id_ + " jacobian not positive");
  return det;
}

double Homeomorphism::roundTripDefect1d(double a, double b, int samples) const {
  double worst = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double x = a + (b - a) * i / samples;
    worst = std::max(worst, std::abs(inv1(fwd1(x)) - x));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Change of variables
// ---------------------------------------------------------------------------

double change_of_variables_residual_1d(const Homeomorphism& rho, const ScalarFn& f,
                                       double a, double b, int panels) {
  const double h = (b - a) / panels;
  double lhs = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double x = a + (i + 0.5) * h;
    lhs += f(rho.fwd1(x)) * rho.jac1(x) * h;
  }
  const double ya = rho.fwd1(a), yb = rho.fwd1(b);
  const double hy = (yb - ya) / panels;
  double rhs = 0.0;
  for (int i = 0; i < panels; ++i) rhs += f(ya + (i + 0.5) * hy) * hy;
  return std::abs(lhs - rhs);
}

namespace {

// Tensor midpoint rule on the annulus r0 < |p| < r1 in polar coordinates.
template <typename F>
double polar_integral(const F& f, double r0, double r1, int nRadial, int nAngular) {
  const double dr = (r1 - r0) / nRadial;
  const double dth = 2.0 * M_PI / nAngular;
  double total = 0.0;
  for (int i = 0; i < nRadial; ++i) {
    const double r = r0 + (i + 0.5) * dr;
    for (int j = 0; j < nAngular; ++j) {
      const double th = (j + 0.5) * dth;
      const Vec2 p(r * std::cos(th), r * std::sin(th));
      total += f(p) * r * dr * dth;
    }
  }
  return total;
}

}  // namespace

double change_of_variables_residual_2d(const Homeomorphism& rho, const Scalar2dFn& f,
                                       double r0, double r1, int nRadial, int nAngular) {
  const double lhs = polar_integral(
      [&](Vec2 p) { return f(rho.fwd2(p)) * rho.jac2(p); }, r0, r1, nRadial, nAngular);
  // the registered 2D maps send the annulus (r0,r1) to the annulus (1/r1,1/r0);
  // the identity keeps it in place
  double s0 = r0, s1 = r1;
  if (rho.id() == "inversion2d") {
    s0 = 1.0 / r1;
    s1 = 1.0 / r0;
  }
  const double rhs = polar_integral(f, s0, s1, nRadial, nAngular);
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Chain rule
// ---------------------------------------------------------------------------

namespace {

// Second-order first derivative on a nonuniform 3-point stencil.
double d1_nonuniform(double fm, double f0, double fp, double dm, double dp) {
  return (-dp / (dm * (dm + dp))) * fm + ((dp - dm) / (dm * dp)) * f0 +
         (dm / (dp * (dm + dp))) * fp;
}

}  // namespace

double chain_rule_residual_1d(const Homeomorphism& rho, const ScalarFn& f,
                              const WeightField& v, const WeightField& V, double a,
                              double b, int n) {
  std::vector<double> x(n + 1), y(n + 1), fx(n + 1), fy(n + 1);
  for (int i = 0; i <= n; ++i) {
    x[i] = a + (b - a) * i / n;
    y[i] = rho.fwd1(x[i]);
    fy[i] = f(y[i]);
    fx[i] = fy[i];  // f o rho at x_i is f at y_i
  }
  double num2 = 0.0, den2 = 0.0;
  for (int i = 1; i < n; ++i) {
    const double dxm = x[i] - x[i - 1], dxp = x[i + 1] - x[i];
    const double lhs = d1_nonuniform(fx[i - 1], fx[i], fx[i + 1], dxm, dxp);
    const double dym = y[i] - y[i - 1], dyp = y[i + 1] - y[i];
    const double gradf = d1_nonuniform(fy[i - 1], fy[i], fy[i + 1], dym, dyp);
    const double rhs = rho.jac1(x[i]) * gradf;
    const double J = rho.jac1(x[i]);
    const double Vrho = V.evalScalar(y[i]) / J;  // J * V(rho) * J^{-2} in 1D
    const double cell = 0.5 * (x[i + 1] - x[i - 1]);
    num2 += Vrho * (lhs - rhs) * (lhs - rhs) * cell;
    den2 += v.evalScalar(y[i]) * fy[i] * fy[i] * (0.5 * (y[i + 1] - y[i - 1]));
  }
  return std::sqrt(num2) / std::max(std::sqrt(den2), 1e-300);
}

double chain_rule_residual_2d(const Homeomorphism& rho, const Scalar2dFn& f,
                              const Scalar2dFn& v, const Matrix2dFn& V, double r0,
                              double r1, int nRadial, int nAngular, double fdStep) {
  auto gradFd = [fdStep](const Scalar2dFn& fn, Vec2 p) {
    Vec2 g;
    g[0] = (fn(p + Vec2(fdStep, 0)) - fn(p - Vec2(fdStep, 0))) / (2 * fdStep);
    g[1] = (fn(p + Vec2(0, fdStep)) - fn(p - Vec2(0, fdStep))) / (2 * fdStep);
    return g;
  };
  Scalar2dFn frho = [&rho, &f](Vec2 p) { return f(rho.fwd2(p)); };
  double num2 = 0.0, den2 = 0.0;
  const double dr = (r1 - r0) / nRadial;
  const double dth = 2.0 * M_PI / nAngular;
  for (int i = 0; i < nRadial; ++i) {
    const double r = r0 + (i + 0.5) * dr;
    for (int j = 0; j < nAngular; ++j) {
      const double th = (j + 0.5) * dth;
      const Vec2 p(r * std::cos(th), r * std::sin(th));
      const Vec2 lhs = gradFd(frho, p);
      const Vec2 rhs = rho.dmap2(p).transpose() * gradFd(f, rho.fwd2(p));
      const double J = rho.jac2(p);
      const Mat2 dinv = rho.dmap2(p).inverse();
      const Mat2 Vrho = J * dinv * V(rho.fwd2(p)) * dinv.transpose();
      const Vec2 e = lhs - rhs;
      const double area = r * dr * dth;
      num2 += e.dot(Vrho * e) * area;
      const double fv = f(rho.fwd2(p));
      den2 += v(rho.fwd2(p)) * fv * fv * J * area;
    }
  }
  return std::sqrt(num2) / std::max(std::sqrt(den2), 1e-300);
}

// ---------------------------------------------------------------------------
// Piola transformation
// ---------------------------------------------------------------------------

double piola_residual_1d(const Homeomorphism& rho, const ScalarFn& h,
                         const WeightField& v, double a, double b, int n) {
  // In 1D the Piola pushforward is plain composition: J^{-1} drho = 1.
  std::vector<double> x(n + 1), y(n + 1), hx(n + 1);
  for (int i = 0; i <= n; ++i) {
    x[i] = a + (b - a) * i / n;
    y[i] = rho.fwd1(x[i]);
    hx[i] = h(x[i]);
  }
  double num2 = 0.0, den2 = 0.0;
  for (int i = 1; i < n; ++i) {
    const double dym = y[i] - y[i - 1], dyp = y[i + 1] - y[i];
    const double lhs = d1_nonuniform(hx[i - 1], hx[i], hx[i + 1], dym, dyp);
    const double dxm = x[i] - x[i - 1], dxp = x[i + 1] - x[i];
    const double divh = d1_nonuniform(hx[i - 1], hx[i], hx[i + 1], dxm, dxp);
    const double rhs = divh / rho.jac1(x[i]);
    const double vrho = v.evalScalar(x[i]) * rho.jac1(x[i]);  // v^rho at y_i
    const double cell = 0.5 * (y[i + 1] - y[i - 1]);
    num2 += vrho * (lhs - rhs) * (lhs - rhs) * cell;
    den2 += hx[i] * hx[i] * (0.5 * (x[i + 1] - x[i - 1]));
  }
  return std::sqrt(num2) / std::max(std::sqrt(den2), 1e-300);
}

double piola_residual_2d(const Homeomorphism& rho, const Field2dFn& h,
                         const Scalar2dFn& v, double r0, double r1, int nRadial,
                         int nAngular, double fdStep) {
  auto divFd = [fdStep](const Field2dFn& fn, Vec2 p) {
    const Vec2 fx1 = fn(p + Vec2(fdStep, 0)), fx0 = fn(p - Vec2(fdStep, 0));
    const Vec2 fy1 = fn(p + Vec2(0, fdStep)), fy0 = fn(p - Vec2(0, fdStep));
    return (fx1[0] - fx0[0]) / (2 * fdStep) + (fy1[1] - fy0[1]) / (2 * fdStep);
  };
  Field2dFn pushed = [&rho, &h](Vec2 q) -> Vec2 {
    const Vec2 x = rho.inv2(q);
    return (rho.dmap2(x) * h(x)) / rho.jac2(x);
  };
  // integrate over the image annulus
  double s0 = r0, s1 = r1;
  if (rho.id() == "inversion2d") {
    s0 = 1.0 / r1;
    s1 = 1.0 / r0;
  }
  double num2 = 0.0;
  const double dr = (s1 - s0) / nRadial;
  const double dth = 2.0 * M_PI / nAngular;
  for (int i = 0; i < nRadial; ++i) {
    const double r = s0 + (i + 0.5) * dr;
    for (int j = 0; j < nAngular; ++j) {
      const double th = (j + 0.5) * dth;
      const Vec2 q(r * std::cos(th), r * std::sin(th));
      const double lhs = divFd(pushed, q);
      const Vec2 x = rho.inv2(q);
      const double rhs = divFd(h, x) / rho.jac2(x);
      const double vrho = v(x) * rho.jac2(x);  // v^rho at q
      num2 += vrho * (lhs - rhs) * (lhs - rhs) * r * dr * dth;
    }
  }
  const double den2 = polar_integral(
      [&](Vec2 p) { return h(p).squaredNorm(); }, r0, r1, nRadial, nAngular);
  return std::sqrt(num2) / std::max(std::sqrt(den2), 1e-300);
}

// ---------------------------------------------------------------------------
// Piola isometry
// ---------------------------------------------------------------------------

double piola_isometry_check_1d(const Homeomorphism& rho, const ScalarFn& h,
                               const WeightField& V, double a, double b, int n) {
  // rhs: ||h||^2_{L2(V)} over the x-interval; lhs: the pushforward on the
  // image interval. In 1D the field weight transforms as V^rho = (V/J) o rho^{-1}.
  const double hstep = (b - a) / n;
  double rhs = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a + (i + 0.5) * hstep;
    rhs += V.evalScalar(x) * h(x) * h(x) * hstep;
  }
  const double ya = rho.fwd1(a), yb = rho.fwd1(b);
  const double hy = (yb - ya) / n;
  double lhs = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = ya + (i + 0.5) * hy;
    const double x = rho.inv1(y);
    const double push = h(x);  // J^{-1} drho h = h in 1D
    lhs += V.evalScalar(x) / rho.jac1(x) * push * push * hy;
  }
  return std::abs(lhs - rhs);
}

double piola_isometry_check_2d(const Homeomorphism& rho, const Field2dFn& h,
                               const Matrix2dFn& V, double r0, double r1, int nRadial,
                               int nAngular) {
  const double rhs = polar_integral(
      [&](Vec2 p) {
        const Vec2 hv = h(p);
        return hv.dot(V(p) * hv);
      },
      r0, r1, nRadial, nAngular);
  double s0 = r0, s1 = r1;
  if (rho.id() == "inversion2d") {
    s0 = 1.0 / r1;
    s1 = 1.0 / r0;
  }
  const double lhs = polar_integral(
      [&](Vec2 q) {
        const Vec2 x = rho.inv2(q);
        const double J = rho.jac2(x);
        const Mat2 d = rho.dmap2(x);
        const Vec2 push = (d * h(x)) / J;
        const Mat2 dinvT = d.inverse().transpose();
        const Mat2 Vrho = J * dinvT * V(x) * dinvT.transpose();
        return push.dot(Vrho * push);
      },
      s0, s1, nRadial, nAngular);
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

namespace {

double bump_kernel(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

void check_support(const std::vector<double>& mags, double a, double b, double h,
                   double tMax) {
  for (size_t j = 0; j < mags.size(); ++j) {
    if (mags[j] == 0.0) continue;
    const double x = a + j * h;
    if (x - a < tMax || b - x < tMax)
      throw SupportTouchesBoundary("support within max mollification scale of an endpoint");
  }
}

}  // namespace

std::vector<double> discrete_maximal(const std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + std::abs(f[i]);
  std::vector<double> out(n, 0.0);
  for (int l = 0; l < n; ++l)
    for (int r = l; r < n; ++r) {
      const double avg = (prefix[r + 1] - prefix[l]) / (r - l + 1);
      for (int i = l; i <= r; ++i) out[i] = std::max(out[i], avg);
    }
  return out;
}

MollifyReport mollify_and_dominate(const std::vector<double>& f,
                                   const std::vector<double>& tList,
                                   const WeightField& weight, double a, double b) {
  const int n = static_cast<int>(f.size());
  if (n < 3) throw Error("mollify: too few samples");
  const double h = (b - a) / (n - 1);
  const double tMax = *std::max_element(tList.begin(), tList.end());
  std::vector<double> mags(f.size());
  for (size_t i = 0; i < f.size(); ++i) mags[i] = std::abs(f[i]);
  check_support(mags, a, b, h, tMax);

  MollifyReport rep;
  const std::vector<double> Mf = discrete_maximal(f);
  std::vector<double> supConv(n, 0.0);

  for (double t : tList) {
    // discrete kernel, renormalized so the convolution is a convex combination
    const int m = static_cast<int>(std::ceil(t / h)) + 1;
    std::vector<double> ker(2 * m + 1);
    double mass = 0.0;
    for (int k = -m; k <= m; ++k) {
      ker[k + m] = bump_kernel(k * h / t) / t * h;
      mass += ker[k + m];
    }
    rep.kernelMassDefect = std::max(rep.kernelMassDefect, std::abs(1.0 - mass));
    for (double& kv : ker) kv /= mass;

    double werr2 = 0.0, serr = 0.0;
    for (int i = 0; i < n; ++i) {
      double conv = 0.0, convAbs = 0.0;
      for (int k = -m; k <= m; ++k) {
        const int j = i + k;
        if (j < 0 || j >= n) continue;
        conv += ker[k + m] * f[j];
        convAbs += ker[k + m] * std::abs(f[j]);
      }
      supConv[i] = std::max(supConv[i], convAbs);
      const double x = a + i * h;
      const double err = conv - f[i];
      werr2 += weight.evalScalar(x) * err * err * h;
      serr = std::max(serr, std::abs(err));
    }
    rep.weightedErrors.push_back(std::sqrt(werr2));
    rep.supErrors.push_back(serr);
  }

  for (int i = 0; i < n; ++i) {
    const double gap = supConv[i] - Mf[i];
    if (gap > 1e-12 * std::max(1.0, Mf[i])) {
      ++rep.dominationViolations;
      rep.maxViolationGap = std::max(rep.maxViolationGap, gap);
    }
  }
  return rep;
}

MollifyReport mollify_and_dominate_vector(const std::vector<Eigen::Vector2d>& f,
                                          const std::vector<double>& tList,
                                          const WeightField& W, double a, double b) {
  const int n = static_cast<int>(f.size());
  if (n < 3) throw Error("mollify: too few samples");
  const double h = (b - a) / (n - 1);
  const double tMax = *std::max_element(tList.begin(), tList.end());
  std::vector<double> mags(f.size());
  for (size_t i = 0; i < f.size(); ++i) mags[i] = f[i].norm();
  check_support(mags, a, b, h, tMax);

  MollifyReport rep;
  std::vector<double> supConv(n, 0.0), domTarget(n, 0.0);
  std::vector<std::vector<double>> frozen(n);  // |W^{1/2}(x_i) f(x_j)| rows
  std::vector<Eigen::Matrix2d> sqrtW(n);
  for (int i = 0; i < n; ++i) sqrtW[i] = spd_sqrt(W.evalMatrix(a + i * h));
  for (int i = 0; i < n; ++i) {
    frozen[i].resize(n);
    for (int j = 0; j < n; ++j) frozen[i][j] = (sqrtW[i] * f[j]).norm();
    const std::vector<double> M = discrete_maximal(frozen[i]);
    domTarget[i] = M[i];
  }

  for (double t : tList) {
    const int m = static_cast<int>(std::ceil(t / h)) + 1;
    std::vector<double> ker(2 * m + 1);
    double mass = 0.0;
    for (int k = -m; k <= m; ++k) {
      ker[k + m] = bump_kernel(k * h / t) / t * h;
      mass += ker[k + m];
    }
    rep.kernelMassDefect = std::max(rep.kernelMassDefect, std::abs(1.0 - mass));
    for (double& kv : ker) kv /= mass;

    double werr2 = 0.0, serr = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d conv = Eigen::Vector2d::Zero();
      for (int k = -m; k <= m; ++k) {
        const int j = i + k;
        if (j < 0 || j >= n) continue;
        conv += ker[k + m] * f[j];
      }
      supConv[i] = std::max(supConv[i], (sqrtW[i] * conv).norm());
      const Eigen::Vector2d err = conv - f[i];
      werr2 += err.dot(W.evalMatrix(a + i * h) * err) * h;
      serr = std::max(serr, err.norm());
    }
    rep.weightedErrors.push_back(std::sqrt(werr2));
    rep.supErrors.push_back(serr);
  }

  for (int i = 0; i < n; ++i) {
    const double gap = supConv[i] - domTarget[i];
    if (gap > 1e-12 * std::max(1.0, domTarget[i])) {
      ++rep.dominationViolations;
      rep.maxViolationGap = std::max(rep.maxViolationGap, gap);
    }
  }
  return rep;
}

std::vector<double> christ_goldberg_max(const std::vector<Eigen::Vector2d>& f,
                                        const WeightField& W, double a, double b) {
  const int n = static_cast<int>(f.size());
  const double h = (b - a) / (n - 1);
  std::vector<Eigen::Matrix2d> sqrtW(n), invSqrtW(n);
  for (int i = 0; i < n; ++i) {
    const Mat2 Wx = W.evalMatrix(a + i * h);
    sqrtW[i] = spd_sqrt(Wx);
    invSqrtW[i] = spd_inv_sqrt(Wx);
  }
  std::vector<Eigen::Vector2d> g(n);
  for (int j = 0; j < n; ++j) g[j] = invSqrtW[j] * f[j];
  std::vector<double> out(n, 0.0);
  std::vector<double> prefix(n + 1);
  for (int i = 0; i < n; ++i) {
    prefix[0] = 0.0;
    for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + (sqrtW[i] * g[j]).norm();
    for (int l = 0; l <= i; ++l)
      for (int r = i; r < n; ++r)
        out[i] = std::max(out[i], (prefix[r + 1] - prefix[l]) / (r - l + 1));
  }
  return out;
}

}  // namespace mwlab
