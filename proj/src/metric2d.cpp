#include "mwlab/metric2d.hpp"

#include <cmath>

#include "mwlab/errors.hpp"

namespace mwlab {

// ---------------------------------------------------------------------------
// MetricField and the weight correspondence
// ---------------------------------------------------------------------------

Mat2 MetricField::eval(const Vec2& p) const {
  if (p.norm() < exclusionRadius)
    throw SingularPoint("metric evaluated inside the exclusion radius");
  Mat2 m = g(p);
  m = 0.5 * (m + m.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Mat2> es(m);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw SingularMetric(provenance + " not positive definite");
  return m;
}

double MetricField::sqrtDetG(const Vec2& p) const {
  const double det = eval(p).determinant();
  if (!(det > 0.0)) throw SingularMetric(provenance + " has nonpositive determinant");
  return std::sqrt(det);
}

Mat2 MetricField::inverse(const Vec2& p) const { return eval(p).inverse(); }

WeightMetricPair metric_from_weights(const WeightField& mu, const WeightField& W) {
  auto muP = std::make_shared<WeightField>(mu);
  auto WP = std::make_shared<WeightField>(W);
  WeightMetricPair pair;
  pair.metric.provenance = "fromWeights(" + mu.spec() + "," + W.spec() + ")";
  pair.metric.g = [muP, WP](Vec2 p) -> Mat2 {
    const double m = muP->evalScalar2d(p);
    const Mat2 Winv = WP->evalMatrix2d(p).inverse();
    Mat2 g = m * Winv;
    return 0.5 * (g + g.transpose().eval());
  };
  const MetricField metric = pair.metric;
  pair.nu = WeightField::closedForm2d(
      "nu(" + mu.spec() + "," + W.spec() + ")",
      [muP, metric](Vec2 p) { return muP->evalScalar2d(p) / metric.sqrtDetG(p); },
      mu.domain(), mu.singularAtOrigin2d() || W.singularAtOrigin2d());
  return pair;
}

WeightPair weights_from_metric(const MetricField& g,
                               const std::function<double(Vec2)>& nu) {
  WeightPair pair;
  const MetricField gc = g;
  pair.mu = [gc, nu](Vec2 p) { return nu(p) * gc.sqrtDetG(p); };
  pair.W = [gc, nu](Vec2 p) -> Mat2 {
    const double m = nu(p) * gc.sqrtDetG(p);
    return m * gc.inverse(p);
  };
  return pair;
}

// ---------------------------------------------------------------------------
// Graph families
// ---------------------------------------------------------------------------

GraphFamily parse_graph_family(const std::string& name) {
  if (name == "inversion") return GraphFamily::Inversion;
  if (name == "tweaked-inversion" || name == "tweakedInversion")
    return GraphFamily::TweakedInversion;
  if (name == "scalar-graph" || name == "scalarGraph") return GraphFamily::ScalarGraph;
  if (name == "constant") return GraphFamily::Constant;
  throw ConfigInvalid("unknown graph family '" + name + "'");
}

std::string graph_family_name(GraphFamily f) {
  switch (f) {
    case GraphFamily::Inversion: return "inversion";
    case GraphFamily::TweakedInversion: return "tweaked-inversion";
    case GraphFamily::ScalarGraph: return "scalar-graph";
    case GraphFamily::Constant: return "constant";
  }
  return "?";
}

namespace {

Eigen::VectorXd graph_map(GraphFamily f, double a, const Vec2& p) {
  const double r2 = p.squaredNorm();
  switch (f) {
    case GraphFamily::Inversion: {
      Eigen::VectorXd y(2);
      y << p[0] / r2, p[1] / r2;
      return y;
    }
    case GraphFamily::TweakedInversion: {
      const double t = p[0] / r2;
      Eigen::VectorXd y(2);
      y << t * std::sqrt(1.0 + t * t), p[1] / r2;
      return y;
    }
    case GraphFamily::ScalarGraph: {
      Eigen::VectorXd y(1);
      y << std::pow(r2, -a);
      return y;
    }
    case GraphFamily::Constant: return Eigen::VectorXd::Zero(1);
  }
  return Eigen::VectorXd();
}

void check_regular(GraphFamily f, const Vec2& p) {
  if (f != GraphFamily::Constant && p.norm() < 1e-12)
    throw SingularPoint("graph map singular at the origin");
}

}  // namespace

Eigen::MatrixXd graph_jacobian(GraphFamily f, double a, const Vec2& p) {
  check_regular(f, p);
  const double x = p[0], y = p[1];
  const double r2 = p.squaredNorm();
  const double r4 = r2 * r2;
  // gradient rows of the inversion components psi = (x, y) / r^2
  Eigen::RowVector2d dpsi1((y * y - x * x) / r4, -2.0 * x * y / r4);
  Eigen::RowVector2d dpsi2(-2.0 * x * y / r4, (x * x - y * y) / r4);
  switch (f) {
    case GraphFamily::Inversion: {
      Eigen::MatrixXd J(2, 2);
      J.row(0) = dpsi1;
      J.row(1) = dpsi2;
      return J;
    }
    case GraphFamily::TweakedInversion: {
      const double t = x / r2;
      const double hp = (1.0 + 2.0 * t * t) / std::sqrt(1.0 + t * t);
      Eigen::MatrixXd J(2, 2);
      J.row(0) = hp * dpsi1;
      J.row(1) = dpsi2;
      return J;
    }
    case GraphFamily::ScalarGraph: {
      Eigen::MatrixXd J(1, 2);
      const double c = -2.0 * a * std::pow(r2, -a - 1.0);
      J << c * x, c * y;
      return J;
    }
    case GraphFamily::Constant: return Eigen::MatrixXd::Zero(1, 2);
  }
  return Eigen::MatrixXd();
}

Eigen::MatrixXd graph_jacobian_fd(GraphFamily f, double a, const Vec2& p) {
  check_regular(f, p);
  const double h = 1e-6 * (1.0 + p.norm());
  const Eigen::VectorXd fx1 = graph_map(f, a, p + Vec2(h, 0));
  const Eigen::VectorXd fx0 = graph_map(f, a, p - Vec2(h, 0));
  const Eigen::VectorXd fy1 = graph_map(f, a, p + Vec2(0, h));
  const Eigen::VectorXd fy0 = graph_map(f, a, p - Vec2(0, h));
  Eigen::MatrixXd J(fx1.size(), 2);
  J.col(0) = (fx1 - fx0) / (2.0 * h);
  J.col(1) = (fy1 - fy0) / (2.0 * h);
  return J;
}

Mat2 graph_metric(GraphFamily f, double a, const Vec2& p) {
  const Eigen::MatrixXd J = graph_jacobian(f, a, p);
  Mat2 g = Mat2::Identity() + Mat2(J.transpose() * J);
  return g;
}

MetricField graph_metric_field(GraphFamily f, double a) {
  MetricField m;
  m.provenance = "fromGraph(" + graph_family_name(f) + ")";
  m.g = [f, a](Vec2 p) { return graph_metric(f, a, p); };
  return m;
}

double brioschi_curvature_scalar_graph(double a, const Vec2& p) {
  if (!(a > 0.0)) throw Error("scalar graph curvature needs a > 0");
  check_regular(GraphFamily::ScalarGraph, p);
  const double u = p.squaredNorm();
  const double num = (1.0 + 2.0 * a) * 4.0 * a * a * std::pow(u, 2.0 * a);
  const double den = std::pow(u, 2.0 * a + 1.0) + 4.0 * a * a;
  return -num / (den * den);
}

double graph_curvature_fd(double a, const Vec2& p, double step) {
  check_regular(GraphFamily::ScalarGraph, p);
  auto phi = [a](double x, double y) { return std::pow(x * x + y * y, -a); };
  const double x = p[0], y = p[1], h = step;
  const double f0 = phi(x, y);
  const double fxx = (phi(x + h, y) - 2 * f0 + phi(x - h, y)) / (h * h);
  const double fyy = (phi(x, y + h) - 2 * f0 + phi(x, y - h)) / (h * h);
  const double fxy = (phi(x + h, y + h) - phi(x + h, y - h) - phi(x - h, y + h) +
                      phi(x - h, y - h)) /
                     (4 * h * h);
  const double fx = (phi(x + h, y) - phi(x - h, y)) / (2 * h);
  const double fy = (phi(x, y + h) - phi(x, y - h)) / (2 * h);
  const double denom = 1.0 + fx * fx + fy * fy;
  return (fxx * fyy - fxy * fxy) / (denom * denom);
}

double singular_value_ratio(const MetricField& g, const Vec2& p) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(g.eval(p));
  return std::sqrt(es.eigenvalues()(1) / es.eigenvalues()(0));
}

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

namespace {

struct GeoState {
  Vec2 x;
  Vec2 v;
  double s = 0.0;  // arclength
};

struct Christoffel {
  double G[2][2][2];
};

Christoffel christoffel_at(const MetricField& m, const Vec2& p, double fdScale) {
  const double h = fdScale * (1.0 + p.norm());
  const Mat2 gx1 = m.eval(p + Vec2(h, 0)), gx0 = m.eval(p - Vec2(h, 0));
  const Mat2 gy1 = m.eval(p + Vec2(0, h)), gy0 = m.eval(p - Vec2(0, h));
  Mat2 dg[2];
  dg[0] = (gx1 - gx0) / (2.0 * h);
  dg[1] = (gy1 - gy0) / (2.0 * h);
  const Mat2 ginv = m.eval(p).inverse();
  Christoffel c;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        double s = 0.0;
        for (int l = 0; l < 2; ++l)
          s += ginv(i, l) * (dg[j](l, k) + dg[k](j, l) - dg[l](j, k));
        c.G[i][j][k] = 0.5 * s;
      }
  return c;
}

struct Deriv {
  Vec2 dx;
  Vec2 dv;
  double ds;
};

Deriv rhs(const MetricField& m, const GeoState& st, double fdScale) {
  const Christoffel c = christoffel_at(m, st.x, fdScale);
  Deriv d;
  d.dx = st.v;
  for (int i = 0; i < 2; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) acc += c.G[i][j][k] * st.v[j] * st.v[k];
    d.dv[i] = -acc;
  }
  const Mat2 g = m.eval(st.x);
  d.ds = std::sqrt(std::max(0.0, st.v.dot(g * st.v)));
  return d;
}

GeoState rk4_step(const MetricField& m, const GeoState& st, double h, double fdScale) {
  auto add = [](const GeoState& s, const Deriv& d, double a) {
    GeoState out;
    out.x = s.x + a * d.dx;
    out.v = s.v + a * d.dv;
    out.s = s.s + a * d.ds;
    return out;
  };
  const Deriv k1 = rhs(m, st, fdScale);
  const Deriv k2 = rhs(m, add(st, k1, 0.5 * h), fdScale);
  const Deriv k3 = rhs(m, add(st, k2, 0.5 * h), fdScale);
  const Deriv k4 = rhs(m, add(st, k3, h), fdScale);
  GeoState out;
  out.x = st.x + (h / 6.0) * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  out.v = st.v + (h / 6.0) * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
  out.s = st.s + (h / 6.0) * (k1.ds + 2 * k2.ds + 2 * k3.ds + k4.ds);
  return out;
}

}  // namespace

Vec2 trace_geodesic(const MetricField& g, const Vec2& center, double angle,
                    double radius, const GeodesicIntegratorConfig& cfg,
                    RayDiagnostics* diag) {
  GeoState st;
  st.x = center;
  const Vec2 dir(std::cos(angle), std::sin(angle));
  const Mat2 g0 = g.eval(center);
  st.v = dir / std::sqrt(dir.dot(g0 * dir));
  st.s = 0.0;

  std::vector<Vec2> path{st.x};
  double h = cfg.initialStep;
  int steps = 0;
  while (st.s < radius) {
    if (++steps > cfg.maxSteps)
      throw IntegratorBlowup("geodesic step budget exhausted");
    GeoState full = rk4_step(g, st, h, cfg.fdStepScale);
    GeoState half = rk4_step(g, st, 0.5 * h, cfg.fdStepScale);
    half = rk4_step(g, half, 0.5 * h, cfg.fdStepScale);
    const double err = (full.x - half.x).norm() + std::abs(full.s - half.s);
    const double scale = cfg.tolerance * (1.0 + half.x.norm() + half.s);
    if (err > scale && h > cfg.minStep) {
      h = std::max(cfg.minStep, 0.5 * h);
      continue;
    }
    if (half.s >= radius) {
      // cut the last step so the arclength lands on the radius
      double lo = 0.0, hi = h;
      GeoState cut = half;
      for (int it = 0; it < 60 && std::abs(cut.s - radius) > 1e-13 * radius; ++it) {
        const double mid = 0.5 * (lo + hi);
        cut = rk4_step(g, st, mid, cfg.fdStepScale);
        (cut.s < radius ? lo : hi) = mid;
      }
      st = cut;
      path.push_back(st.x);
      break;
    }
    st = half;
    path.push_back(st.x);
    if (err < 0.1 * scale) h = std::min(2.0 * h, radius);
    if (h < cfg.minStep) throw IntegratorBlowup("step size underflow near singularity");
  }

  if (diag) {
    diag->angle = angle;
    diag->steps = steps;
    // re-integrate arclength along the recorded polyline (midpoint rule)
    double s = 0.0;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      const Vec2 mid = 0.5 * (path[i] + path[i + 1]);
      const Vec2 d = path[i + 1] - path[i];
      s += std::sqrt(std::max(0.0, d.dot(g.eval(mid) * d)));
    }
    diag->arclengthError = std::abs(s - radius);
  }
  return st.x;
}

GeodesicDisk geodesic_disk(const MetricField& g, const Vec2& center, double radius,
                           int nRays, const GeodesicIntegratorConfig& cfg) {
  GeodesicDisk disk;
  disk.center = center;
  disk.radius = radius;
  disk.boundary.resize(nRays);
  disk.rays.resize(nRays);
  for (int k = 0; k < nRays; ++k) {
    const double angle = 2.0 * M_PI * k / nRays;
    disk.boundary[k] = trace_geodesic(g, center, angle, radius, cfg, &disk.rays[k]);
  }
  return disk;
}

double GeodesicDisk::maxRadialDeviation(double target) const {
  double worst = 0.0;
  for (const Vec2& p : boundary)
    worst = std::max(worst, std::abs((p - center).norm() - target));
  return worst;
}

double GeodesicDisk::extentAlong(const Vec2& dir) const {
  const Vec2 d = dir.normalized();
  double worst = 0.0;
  for (const Vec2& p : boundary) worst = std::max(worst, std::abs(d.dot(p - center)));
  return worst;
}

double GeodesicDisk::axisRatio() const {
  const double ex = extentAlong(Vec2(1, 0));
  const double ey = extentAlong(Vec2(0, 1));
  return std::max(ex, ey) / std::min(ex, ey);
}

}  // namespace mwlab
