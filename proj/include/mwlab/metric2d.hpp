#pragma once

// The 2D correspondence between weight pairs (mu, W) and metric/weight pairs
// (g, nu): g = mu W^{-1}, nu = mu / sqrt(det g), inverted by mu = nu sqrt(det g),
// W = (nu sqrt(det g)) g^{-1}. Graph-embedding metrics g = I + dphi* dphi for
// the registered map families, Gaussian curvature of scalar graphs via the
// first-fundamental-form formula, and geodesic disk tracing with adaptive RK4.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mwlab/weights.hpp"

namespace mwlab {

struct MetricField {
  std::function<Mat2(Vec2)> g;
  std::string provenance;
  double exclusionRadius = 1e-3;  // singular set at the origin is avoided

  Mat2 eval(const Vec2& p) const;
  double sqrtDetG(const Vec2& p) const;
  Mat2 inverse(const Vec2& p) const;
};

struct WeightMetricPair {
  MetricField metric;
  WeightField nu;
};

// g = mu W^{-1} (symmetrized), nu = mu / sqrt(det g).
WeightMetricPair metric_from_weights(const WeightField& mu, const WeightField& W);

struct WeightPair {
  std::function<double(Vec2)> mu;
  std::function<Mat2(Vec2)> W;
};

// mu = nu sqrt(det g), W = (nu sqrt(det g)) g^{-1}.
WeightPair weights_from_metric(const MetricField& g, const std::function<double(Vec2)>& nu);

// ---- graph-embedding families ----

enum class GraphFamily {
  Inversion,         // phi(x) = x / |x|^2, conformal metric (1 + |x|^-4) I
  TweakedInversion,  // phi = (h(x1/|x|^2), x2/|x|^2), h(t) = t sqrt(1+t^2)
  ScalarGraph,       // phi(x) = (x1^2 + x2^2)^{-a} (scalar-valued graph)
  Constant,          // constant map, g = I
};

GraphFamily parse_graph_family(const std::string& name);
std::string graph_family_name(GraphFamily f);

// Jacobian of the registered map (closed form).
Eigen::MatrixXd graph_jacobian(GraphFamily f, double a, const Vec2& p);
// Central-difference Jacobian with step tuned to the point magnitude.
Eigen::MatrixXd graph_jacobian_fd(GraphFamily f, double a, const Vec2& p);

// g = I + dphi^T dphi at pt. Closed-form Jacobians where registered.
Mat2 graph_metric(GraphFamily f, double a, const Vec2& p);

MetricField graph_metric_field(GraphFamily f, double a = 1.0);

// Gaussian curvature of the graph z = (x^2+y^2)^{-a} by the closed formula.
double brioschi_curvature_scalar_graph(double a, const Vec2& p);

// Independent oracle: K = (phi_xx phi_yy - phi_xy^2) / (1 + phi_x^2 + phi_y^2)^2
// with all derivatives by central differences on the graph function.
double graph_curvature_fd(double a, const Vec2& p, double step = 1e-4);

// Ratio of the extreme metric stretches sqrt(lambda_max/lambda_min of g);
// equals the singular-value ratio of the embedding differential.
double singular_value_ratio(const MetricField& g, const Vec2& p);

// ---- geodesic disks ----

struct GeodesicIntegratorConfig {
  double initialStep = 1e-3;
  double tolerance = 1e-8;     // per-step error control
  double minStep = 1e-12;
  double fdStepScale = 1e-5;   // metric derivative step = scale * (1 + |p|)
  int maxSteps = 2000000;
};

struct RayDiagnostics {
  double angle = 0.0;
  int steps = 0;
  double arclengthError = 0.0;  // |re-integrated arclength - radius|
};

struct GeodesicDisk {
  Vec2 center;
  double radius = 0.0;
  std::vector<Vec2> boundary;       // ordered by initial angle
  std::vector<RayDiagnostics> rays;

  double maxRadialDeviation(double target) const;  // vs Euclidean circle
  double extentAlong(const Vec2& dir) const;
  double axisRatio() const;  // max/min extent over the two coordinate axes
};

GeodesicDisk geodesic_disk(const MetricField& g, const Vec2& center, double radius,
                           int nRays, const GeodesicIntegratorConfig& cfg = {});

// Unit-speed geodesic from `center` with initial direction `angle`, integrated
// to the given arclength. Exposed for diagnostics.
Vec2 trace_geodesic(const MetricField& g, const Vec2& center, double angle,
                    double radius, const GeodesicIntegratorConfig& cfg,
                    RayDiagnostics* diag = nullptr);

}  // namespace mwlab
