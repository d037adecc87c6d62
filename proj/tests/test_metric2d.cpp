#include <cmath>
#include <random>

#include "doctest.h"
#include "mwlab/errors.hpp"
#include "mwlab/metric2d.hpp"

using namespace mwlab;

namespace {

const Domain kPlane = Domain::rectangle(-10, 10, -10, 10);

WeightField unitScalar2d() {
  return WeightField::closedForm2d("one", [](Vec2) { return 1.0; }, kPlane);
}

WeightField identityMatrix2d() {
  return WeightField::closedFormMatrix2d("id", [](Vec2) { return Mat2::Identity(); },
                                         kPlane);
}

}  // namespace

TEST_CASE("unit weights produce the Euclidean metric and unit nu") {
  const WeightMetricPair pair = metric_from_weights(unitScalar2d(), identityMatrix2d());
  const Vec2 p(0.7, -0.4);
  CHECK((pair.metric.eval(p) - Mat2::Identity()).norm() < 1e-14);
  CHECK(pair.nu.evalScalar2d(p) == doctest::Approx(1.0));
}

TEST_CASE("metric and weight maps invert each other on random SPD data") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Mat2 M;
    M << g(rng), g(rng), g(rng), g(rng);
    const Mat2 spd = M * M.transpose() + 0.5 * Mat2::Identity();
    const double muVal = std::exp(g(rng));
    const WeightField mu =
        WeightField::closedForm2d("mu", [muVal](Vec2) { return muVal; }, kPlane);
    const WeightField W =
        WeightField::closedFormMatrix2d("W", [spd](Vec2) { return spd; }, kPlane);
    const WeightMetricPair fwd = metric_from_weights(mu, W);
    auto nuFn = [&fwd](Vec2 p) { return fwd.nu.evalScalar2d(p); };
    const WeightPair back = weights_from_metric(fwd.metric, nuFn);
    const Vec2 p(1.0, 0.5);
    CHECK(std::abs(back.mu(p) - muVal) < 1e-12 * muVal);
    CHECK((back.W(p) - spd).norm() < 1e-12 * spd.norm());
  }
}

TEST_CASE("weights from a scaled metric: g = 4I has sqrt(det) = 4") {
  MetricField g;
  g.provenance = "direct";
  g.g = [](Vec2) { return Mat2(4.0 * Mat2::Identity()); };
  const WeightPair back = weights_from_metric(g, [](Vec2) { return 1.0; });
  const Vec2 p(0.3, 0.3);
  CHECK(back.mu(p) == doctest::Approx(4.0));
  CHECK((back.W(p) - Mat2::Identity()).norm() < 1e-13);
}

TEST_CASE("inversion graph metric is conformal: (1 + |x|^-4) I") {
  for (const Vec2& p : {Vec2(1.0, 0.0), Vec2(0.3, -0.8), Vec2(2.0, 1.0)}) {
    const Mat2 g = graph_metric(GraphFamily::Inversion, 0.0, p);
    const double c = 1.0 + std::pow(p.squaredNorm(), -2.0);
    CHECK(std::abs(g(0, 0) - c) < 1e-10 * c);
    CHECK(std::abs(g(1, 1) - c) < 1e-10 * c);
    CHECK(std::abs(g(0, 1)) <= 1e-10 * c);
  }
  // |x| = 1 gives exactly 2I
  const Mat2 g1 = graph_metric(GraphFamily::Inversion, 0.0, Vec2(1.0, 0.0));
  CHECK((g1 - 2.0 * Mat2::Identity()).norm() < 1e-12);
}

TEST_CASE("constant map gives the identity metric") {
  const Mat2 g = graph_metric(GraphFamily::Constant, 0.0, Vec2(0.4, 0.9));
  CHECK((g - Mat2::Identity()).norm() == 0.0);
}

TEST_CASE("closed-form Jacobians match central differences") {
  for (GraphFamily f : {GraphFamily::Inversion, GraphFamily::TweakedInversion,
                        GraphFamily::ScalarGraph}) {
    for (const Vec2& p : {Vec2(0.5, 0.2), Vec2(-1.1, 0.7), Vec2(0.15, -0.05)}) {
      const Eigen::MatrixXd J = graph_jacobian(f, 1.0, p);
      const Eigen::MatrixXd Jfd = graph_jacobian_fd(f, 1.0, p);
      CHECK((J - Jfd).norm() < 2e-5 * (1.0 + J.norm()));
    }
  }
}

TEST_CASE("tweaked inversion stretches like 1/t along the ray (t, 0)") {
  for (double t : {0.2, 0.1, 0.05}) {
    const Eigen::MatrixXd J = graph_jacobian(GraphFamily::TweakedInversion, 0.0, Vec2(t, 0.0));
    const double ratio = J.row(0).norm() / J.row(1).norm();
    // h'(1/t) ~ 2/t for small t
    CHECK(ratio == doctest::Approx(2.0 / t).epsilon(0.05));
  }
}

TEST_CASE("Brioschi curvature closed form") {
  SUBCASE("frozen value at (1,0), a = 1") {
    CHECK(brioschi_curvature_scalar_graph(1.0, Vec2(1.0, 0.0)) ==
          doctest::Approx(-12.0 / 25.0).epsilon(1e-14));
  }
  SUBCASE("matches the finite-difference graph oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> radius(0.5, 5.0);
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
    for (double a : {0.5, 1.0, 2.0}) {
      for (int k = 0; k < 20; ++k) {
        const double r = radius(rng), th = angle(rng);
        const Vec2 p(r * std::cos(th), r * std::sin(th));
        const double K = brioschi_curvature_scalar_graph(a, p);
        const double Kfd = graph_curvature_fd(a, p);
        CHECK(std::abs(K - Kfd) < 1e-4 * std::max(1.0, std::abs(K)));
      }
    }
  }
  SUBCASE("always negative, vanishing at infinity") {
    for (double a : {0.5, 1.0, 2.0}) {
      for (const Vec2& p : {Vec2(0.5, 0.0), Vec2(1.5, 1.5), Vec2(-3.0, 0.4)})
        CHECK(brioschi_curvature_scalar_graph(a, p) < 0.0);
    }
    CHECK(std::abs(brioschi_curvature_scalar_graph(1.0, Vec2(1e3, 0.0))) < 1e-6);
  }
}

TEST_CASE("geodesic disks in the flat metric are circles") {
  MetricField flat;
  flat.provenance = "direct";
  flat.g = [](Vec2) { return Mat2(Mat2::Identity()); };
  flat.exclusionRadius = 0.0;
  const GeodesicDisk disk = geodesic_disk(flat, Vec2(0.0, 0.0), 1.0, 32);
  CHECK(disk.maxRadialDeviation(1.0) <= 1e-6);
}

TEST_CASE("constant conformal metric rescales the circle radius") {
  const double c = 4.0;
  MetricField scaled;
  scaled.provenance = "direct";
  scaled.g = [c](Vec2) { return Mat2(c * Mat2::Identity()); };
  scaled.exclusionRadius = 0.0;
  const GeodesicDisk disk = geodesic_disk(scaled, Vec2(0.2, -0.1), 1.0, 16);
  CHECK(disk.maxRadialDeviation(1.0 / std::sqrt(c)) <= 1e-6);
}

TEST_CASE("disks nest with increasing radius") {
  const MetricField m = graph_metric_field(GraphFamily::Inversion, 0.0);
  const Vec2 center(1.0, 0.5);
  const int nRays = 16;
  const GeodesicDisk d1 = geodesic_disk(m, center, 0.1, nRays);
  const GeodesicDisk d2 = geodesic_disk(m, center, 0.2, nRays);
  for (int k = 0; k < nRays; ++k) {
    const double r1 = (d1.boundary[k] - center).norm();
    const double r2 = (d2.boundary[k] - center).norm();
    CHECK(r1 < r2);
  }
}

TEST_CASE("tweaked-inversion disks shrink anisotropically toward the origin") {
  const MetricField m = graph_metric_field(GraphFamily::TweakedInversion, 0.0);
  double prevRatio = 0.0;
  for (double t : {0.4, 0.2, 0.1}) {
    const Vec2 center(t, 0.0);
    const GeodesicDisk disk = geodesic_disk(m, center, 0.05, 24);
    const double ratio = disk.axisRatio();
    const double svr = singular_value_ratio(m, center);
    CHECK(ratio > prevRatio);
    CHECK(ratio < 2.0 * svr);
    CHECK(ratio > 0.5 * svr);
    prevRatio = ratio;
  }
}

TEST_CASE("singular metric points raise") {
  const MetricField m = graph_metric_field(GraphFamily::Inversion, 0.0);
  CHECK_THROWS_AS(m.eval(Vec2(1e-6, 0.0)), SingularPoint);
  CHECK_THROWS_AS(brioschi_curvature_scalar_graph(1.0, Vec2(0.0, 0.0)), SingularPoint);
}
