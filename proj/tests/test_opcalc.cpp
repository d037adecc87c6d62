#include <cmath>
#include <random>

#include "doctest.h"
#include "mwlab/errors.hpp"
#include "mwlab/opcalc.hpp"

using namespace mwlab;

namespace {

const WeightField kOne = WeightField::constant(1.0);

WeightedOperator smallOperator(const MatC& A) {
  WeightedOperator op;
  op.A = A;
  op.G = Gram::diagonal(VecR::Ones(A.rows()));
  op.label = "test";
  return op;
}

std::mt19937_64 rng(1234);

VecC randomVec(int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  VecC v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  return v;
}

}  // namespace

TEST_CASE("gradient of constants vanishes; summation by parts is exact") {
  const WeightedGrid grid = WeightedGrid::periodic1d(32, 1.0, kOne, kOne);
  const GradDiv gd = build_grad_div(grid);
  const VecR ones = VecR::Ones(32);
  CHECK((gd.grad * ones).norm() == doctest::Approx(0.0).epsilon(1e-14));

  std::normal_distribution<double> g(0.0, 1.0);
  VecR u(32), v(32);
  for (int i = 0; i < 32; ++i) {
    u(i) = g(rng);
    v(i) = g(rng);
  }
  const double h = grid.spacing();
  const double sbp = h * ((gd.grad * u).dot(v) + u.dot(gd.div * v));
  CHECK(std::abs(sbp) < 1e-13);
}

TEST_CASE("centered stencil has the discrete Fourier symbol sin(kh)/h") {
  const int n = 64;
  const double L = 2.0;
  const WeightedGrid grid = WeightedGrid::periodic1d(n, L, kOne, kOne);
  const GradDiv gd = build_grad_div(grid);
  const double k = 2.0 * M_PI / L;
  const auto pts = grid.scalarPoints();
  VecC u(n);
  for (int j = 0; j < n; ++j) u(j) = Complex(std::cos(k * pts[j]), std::sin(k * pts[j]));
  const VecC du = gd.grad.cast<Complex>() * u;
  const double h = grid.spacing();
  const Complex symbol(0.0, std::sin(k * h) / h);
  CHECK((du - symbol * u).norm() / u.norm() < 1e-12);
}

TEST_CASE("interval staggered operators satisfy exact duality") {
  std::vector<double> nodes;
  for (int i = 0; i <= 20; ++i) nodes.push_back(std::pow(double(i) / 20, 1.3));
  const WeightedGrid grid = WeightedGrid::interval1d(nodes, kOne, kOne);
  const GradDiv gd = build_grad_div(grid);
  const VecR cs = grid.scalarCellMeasures();
  const VecR cf = grid.vectorCellMeasures();
  VecR u(grid.scalarDim()), v(grid.vectorDim());
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < u.size(); ++i) u(i) = g(rng);
  for (int i = 0; i < v.size(); ++i) v(i) = g(rng);
  const double sbp =
      (gd.grad * u).cwiseProduct(cf).dot(v) + u.cwiseProduct(cs).dot(gd.div * v);
  CHECK(std::abs(sbp) < 1e-13);
}

TEST_CASE("D is self-adjoint in the weighted inner product") {
  SUBCASE("unweighted periodic") {
    const WeightedGrid grid = WeightedGrid::periodic1d(48, 1.0, kOne, kOne);
    const WeightedOperator D = assemble_D(grid);
    CHECK(D.selfAdjointGap() < 1e-13);
    const VecC eigs = eigenvalues_of(D);
    double maxIm = 0.0, maxAsym = std::numeric_limits<double>::infinity();
    for (int i = 0; i < eigs.size(); ++i) maxIm = std::max(maxIm, std::abs(eigs(i).imag()));
    CHECK(maxIm < 1e-8);
    (void)maxAsym;
  }
  SUBCASE("weighted periodic") {
    const WeightedGrid grid = WeightedGrid::periodic1d(
        48, 2.0, WeightField::absPower(0.5), WeightField::absPower(-0.25));
    const WeightedOperator D = assemble_D(grid);
    CHECK(D.selfAdjointGap() < 1e-12);
  }
  SUBCASE("nonuniform interval") {
    std::vector<double> nodes;
    for (int i = 0; i <= 24; ++i) nodes.push_back(0.1 + 2.0 * std::pow(double(i) / 24, 1.5));
    const WeightedGrid grid =
        WeightedGrid::interval1d(nodes, WeightField::power(0.5), WeightField::power(1.0));
    CHECK(assemble_D(grid).selfAdjointGap() < 1e-12);
  }
  SUBCASE("2d torus with an anisotropic matrix weight") {
    const WeightField mu2 = WeightField::closedForm2d(
        "mu2", [](Vec2 p) { return 1.0 + 0.5 * std::sin(2 * M_PI * p[0]); },
        Domain::rectangle(-0.5, 0.5, -0.5, 0.5));
    const WeightField W2 = WeightField::closedFormMatrix2d(
        "W2",
        [](Vec2 p) {
          Mat2 m;
          const double c = std::cos(2 * M_PI * p[1]), s = std::sin(2 * M_PI * p[1]);
          Mat2 q;
          q << c, -s, s, c;
          Mat2 d = Mat2::Zero();
          d(0, 0) = 1.0;
          d(1, 1) = 3.0;
          m = q * d * q.transpose();
          return m;
        },
        Domain::rectangle(-0.5, 0.5, -0.5, 0.5));
    const WeightedGrid grid = WeightedGrid::periodic2d(8, 1.0, mu2, W2);
    CHECK(assemble_D(grid).selfAdjointGap() < 1e-12);
  }
}

TEST_CASE("D squared restricted to the scalar block is the weighted Laplacian") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      32, 1.0, WeightField::absPower(0.25), WeightField::constant(2.0));
  const WeightedOperator D = assemble_D(grid);
  const GradDiv gd = build_grad_div(grid);
  const int S = grid.scalarDim();
  const MatC blk = (D.A * D.A).topLeftCorner(S, S);
  const MatR lap = -(grid.muVals.cwiseInverse().asDiagonal() * gd.div *
                     grid.wVals.asDiagonal() * gd.grad);
  CHECK((blk - lap.cast<Complex>()).norm() < 1e-12 * lap.norm());
}

TEST_CASE("kernel of D contains constants and w^{-1} fluxes") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      40, 1.0, WeightField::absPower(0.5), WeightField::closedForm(
                                               "wvar",
                                               [](double x) { return 1.5 + std::sin(2 * M_PI * x); },
                                               Domain::interval(-10, 10)));
  const WeightedOperator D = assemble_D(grid);
  const int S = grid.scalarDim();
  const int V = grid.vectorDim();
  VecC z(S + V);
  z.setZero();
  z.head(S).setOnes();
  CHECK((D.A * z).norm() < 1e-12);
  z.setZero();
  for (int i = 0; i < V; ++i) z(S + i) = 1.0 / grid.wVals(i);
  CHECK((D.A * z).norm() < 1e-12);
}

TEST_CASE("assemble_B reports multiplier constants") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      32, 1.0, WeightField::absPower(0.5), WeightField::constant(1.0));
  SUBCASE("a = mu, b = w gives the identity") {
    auto a = [&](double x) { return Complex(std::pow(std::abs(x), 0.5), 0.0); };
    auto b = [](double) { return Complex(1.0, 0.0); };
    const BOperator B = assemble_B(grid, a, b);
    CHECK((B.op.A - MatC::Identity(B.op.dim(), B.op.dim())).norm() < 1e-12);
    CHECK(B.report.boundConst == doctest::Approx(1.0));
    CHECK(B.report.accrConst == doctest::Approx(1.0));
    CHECK_FALSE(B.report.warningFlag);
  }
  SUBCASE("complex phase: mu/a = 1/(1+i/2)") {
    auto a = [&](double x) {
      return Complex(1.0, 0.5) * std::pow(std::abs(x), 0.5);
    };
    auto b = [](double) { return Complex(1.0, 0.0); };
    const BOperator B = assemble_B(grid, a, b);
    // scalar block entries are 1/(1+i/2): |.| = 1/sqrt(1.25), Re = 1/1.25;
    // the gradient block contributes bound 1, so the overall bound is 1
    const Complex scalarEntry = B.op.A(0, 0);
    CHECK(std::abs(scalarEntry) == doctest::Approx(1.0 / std::sqrt(1.25)).epsilon(1e-12));
    CHECK(scalarEntry.real() == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(B.report.boundConst == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(B.report.accrConst == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(B.report.accretive);
  }
  SUBCASE("vanishing accretivity raises the warning flag") {
    auto a = [](double x) { return Complex(x > 0 ? 1.0 : -1.0, 0.0); };
    auto b = [](double) { return Complex(1.0, 0.0); };
    const BOperator B = assemble_B(grid, a, b);
    CHECK(B.report.warningFlag);
    CHECK(B.report.accrConst < 0.0);
  }
}

TEST_CASE("2d multiplier assembly: identity coefficients give the identity") {
  const WeightField mu2 = WeightField::closedForm2d(
      "one2", [](Vec2) { return 1.0; }, Domain::rectangle(-0.5, 0.5, -0.5, 0.5));
  const WeightField W2 = WeightField::closedFormMatrix2d(
      "w2",
      [](Vec2 p) {
        Mat2 m = Mat2::Identity();
        m(0, 0) = 2.0 + std::sin(2 * M_PI * p[0]);
        return m;
      },
      Domain::rectangle(-0.5, 0.5, -0.5, 0.5));
  const WeightedGrid grid = WeightedGrid::periodic2d(6, 1.0, mu2, W2);
  auto WP = std::make_shared<WeightField>(W2);
  const BOperator B = assemble_B_2d(
      grid, [](Vec2) { return Complex(1.0, 0.0); },
      [WP](Vec2 p) { return WP->evalMatrix2d(p).cast<Complex>().eval(); });
  CHECK((B.op.A - MatC::Identity(B.op.dim(), B.op.dim())).norm() < 1e-12);
  CHECK(B.report.boundConst == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(B.report.accrConst == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bisectorial profile of a self-adjoint operator along the imaginary axis") {
  const WeightedGrid grid = WeightedGrid::periodic1d(24, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  std::vector<Complex> lambdas;
  for (double t : {0.5, 1.0, 5.0, 25.0}) lambdas.push_back(Complex(0.0, t));
  const BisectorialProfile prof = bisectorial_profile(D, 0.0, lambdas);
  CHECK(prof.maxProfile <= 1.0 + 1e-10);
  CHECK(prof.singularCount == 0);
}

TEST_CASE("bisectorial profile of BD stays finite above the accretivity angle") {
  const WeightedGrid grid = WeightedGrid::periodic1d(24, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  auto a = [](double) { return Complex(1.0, 0.5); };
  auto b = [](double) { return Complex(1.0, -0.3); };
  const BOperator B = assemble_B(grid, a, b);
  const WeightedOperator BD = multiply(B.op, D.A, "BD");
  const double angle = 0.9;  // well above arg(1+-i/2)
  std::vector<Complex> lambdas;
  for (double t : {0.1, 1.0, 10.0})
    for (double phase : {M_PI / 2, 2.0, -2.0})
      lambdas.push_back(std::polar(t, phase));
  const BisectorialProfile prof = bisectorial_profile(BD, angle, lambdas);
  CHECK(prof.maxProfile < 50.0);
  CHECK(prof.singularCount == 0);
}

TEST_CASE("nilpotent block: resolvent profile diverges toward the origin") {
  MatC A = MatC::Zero(2, 2);
  A(0, 1) = 1.0;
  const WeightedOperator T = smallOperator(A);
  double prev = 0.0;
  for (double t : {1.0, 0.1, 0.01}) {
    const BisectorialProfile prof = bisectorial_profile(T, 0.0, {Complex(0.0, t)});
    CHECK(prof.maxProfile > prev);
    prev = prof.maxProfile;
  }
  CHECK(prev > 50.0);
}

TEST_CASE("functional calculus on a diagonal operator") {
  MatC A = MatC::Zero(2, 2);
  A(0, 0) = 2.0;
  A(1, 1) = -3.0;
  const WeightedOperator T = smallOperator(A);
  const MatC sgn = fn_calculus(T, {CalcFn::Sign});
  CHECK(sgn(0, 0) == Complex(1.0, 0.0));
  CHECK(sgn(1, 1) == Complex(-1.0, 0.0));
  const MatC sq = fn_calculus(T, {CalcFn::SqrtOfSquare});
  CHECK(std::abs(sq(0, 0) - Complex(2.0, 0.0)) < 1e-14);
  CHECK(std::abs(sq(1, 1) - Complex(3.0, 0.0)) < 1e-14);
}

TEST_CASE("sgn(T) T = sqrt(T^2) and sgn^2 is the range projection") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      24, 1.0, WeightField::absPower(0.25), WeightField::constant(1.5));
  const WeightedOperator D = assemble_D(grid);
  auto a = [](double x) { return Complex(1.0, 0.3 * std::sin(2 * M_PI * x)) *
           std::pow(std::abs(x) + 1e-12, 0.25); };
  auto b = [](double x) { return Complex(1.5, 0.4 * std::cos(2 * M_PI * x)); };
  const BOperator B = assemble_B(grid, a, b);
  REQUIRE(B.report.accretive);
  const WeightedOperator BD = multiply(B.op, D.A, "BD");

  SpectralData diag;
  const MatC sgn = fn_calculus(BD, {CalcFn::Sign}, {}, &diag);
  const MatC sq = fn_calculus(BD, {CalcFn::SqrtOfSquare});
  CHECK((sgn * BD.A - sq).norm() < 1e-10 * std::max(1.0, sq.norm()));
  const MatC proj = range_projection(BD);
  CHECK((sgn * sgn - proj).norm() < 1e-10 * proj.norm());
  // projection property
  CHECK((proj * proj - proj).norm() < 1e-10 * proj.norm());
}

TEST_CASE("spectral safety margin rejects near-imaginary eigenvalues") {
  MatC A = MatC::Zero(3, 3);
  A(0, 0) = 1.0;
  A(1, 1) = Complex(1e-10, 1.0);  // |Re| / rho far below the margin
  A(2, 2) = -1.0;
  const WeightedOperator T = smallOperator(A);
  CHECK_THROWS_AS(fn_calculus(T, {CalcFn::Sign}), SpectrumOnBoundary);
  // psi_t needs no margin
  CHECK_NOTHROW(fn_calculus(T, {CalcFn::PsiT, 0.7}));
}

TEST_CASE("Schur fallback handles defective matrices") {
  // Jordan block at 2: sgn = I, sqrt(T^2) = T, psi_t has the Jordan closed form
  MatC J = MatC::Zero(2, 2);
  J(0, 0) = 2.0;
  J(0, 1) = 1.0;
  J(1, 1) = 2.0;
  const WeightedOperator T = smallOperator(J);
  SpectralData diag;
  const MatC sgn = fn_calculus(T, {CalcFn::Sign}, {}, &diag);
  CHECK(diag.kind == SpectralData::Kind::Schur);
  CHECK((sgn - MatC::Identity(2, 2)).norm() < 1e-12);
  const MatC sq = fn_calculus(T, {CalcFn::SqrtOfSquare});
  CHECK((sq - J).norm() < 1e-12);

  // psi at t = 0.5: f(2) = 0.5, f'(2) = 0, so psi(tJ) = 0.5 I
  const MatC psi = fn_calculus(T, {CalcFn::PsiT, 0.5});
  CHECK((psi - 0.5 * MatC::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("Schur path clusters equal eigenvalues split across the diagonal") {
  // eigenvalues 2, -3, 2+1e-9: forces a reorder to make the cluster contiguous
  MatC U = MatC::Zero(3, 3);
  U(0, 0) = 2.0;
  U(0, 1) = 1.0;
  U(0, 2) = 0.5;
  U(1, 1) = -3.0;
  U(1, 2) = 2.0;
  U(2, 2) = 2.0 + 1e-9;
  // similarity by a fixed unitary to hide the triangular structure
  Eigen::JacobiSVD<MatC> svd(MatC::Random(3, 3), Eigen::ComputeFullU);
  const MatC Q = svd.matrixU();
  const MatC A = Q * U * Q.adjoint();
  const WeightedOperator T = smallOperator(A);
  FnCalcOptions opts;
  opts.eigCondMax = 1.0;  // force the Schur route
  const MatC sgn = fn_calculus(T, {CalcFn::Sign}, opts);
  // oracle: sign is +1 on the 2-cluster, -1 on -3; compare squared identity
  const MatC prod = sgn * A;
  const MatC sq = fn_calculus(T, {CalcFn::SqrtOfSquare}, opts);
  CHECK((prod - sq).norm() < 1e-9);
  CHECK((sgn * sgn - MatC::Identity(3, 3)).norm() < 1e-9);
}

TEST_CASE("quadratic functional: eigenvector normalization gives one half") {
  const WeightedGrid grid = WeightedGrid::periodic1d(32, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  // scalar oracle: integral of s/(1+s^2)^2 ds over (0,inf) = 1/2, sampled on
  // the same truncated log grid used by the functional
  {
    double acc = 0.0;
    const int m = 4000;
    const double lo = std::log(1e-6), hi = std::log(1e6);
    double prev = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double s = std::exp(lo + (hi - lo) * k / m);
      const double f = (s / (1 + s * s)) * (s / (1 + s * s));
      if (k > 0) acc += 0.5 * (prev + f) * (hi - lo) / m;
      prev = f;
    }
    CHECK(acc == doctest::Approx(0.5).epsilon(1e-4));
  }

  // an exact discrete eigenvector of D: build from the Hermitian pencil
  const MatC S = D.G.sqrtScale(D.A);
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (S + MatC(S.adjoint())));
  int pick = -1;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) > 1e-6) pick = i;
  REQUIRE(pick >= 0);
  const VecC u = D.G.applyInvSqrt(es.eigenvectors().col(pick));
  const QuadraticEstimate qe = quadratic_functional(D, u);
  const double un = D.G.norm(u);
  CHECK(qe.Q2 / (un * un) == doctest::Approx(0.5).epsilon(5e-3));
}

TEST_CASE("quadratic functional: kernel vectors give zero") {
  const WeightedGrid grid = WeightedGrid::periodic1d(16, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  VecC u = VecC::Zero(D.dim());
  u.head(grid.scalarDim()).setOnes();
  const QuadraticEstimate qe = quadratic_functional(D, u);
  CHECK(qe.Q < 1e-12);
}

TEST_CASE("quadratic functional: general vector gives half the range mass") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      24, 1.0, WeightField::absPower(0.5), WeightField::constant(2.0));
  const WeightedOperator D = assemble_D(grid);
  const VecC u = randomVec(D.dim());
  const QuadraticEstimate qe = quadratic_functional(D, u);
  const VecC pu = range_projection(D) * u;
  const double pn = D.G.norm(pu);
  CHECK(qe.Q2 == doctest::Approx(0.5 * pn * pn).epsilon(5e-3));
}

TEST_CASE("quadratic functional validates coverage") {
  const WeightedGrid grid = WeightedGrid::periodic1d(16, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  const VecC u = randomVec(D.dim());
  CHECK_THROWS_AS(quadratic_functional(D, u, 1.0, 2.0), InsufficientTCoverage);
}

TEST_CASE("resolvent product matches the direct double solve") {
  const WeightedGrid grid = WeightedGrid::periodic1d(12, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  const double t = 0.4;
  const MatC viaCalc = fn_calculus(D, {CalcFn::ResolventProduct, t});
  const int n = D.dim();
  const MatC M = MatC::Identity(n, n) + t * t * (D.A * D.A);
  const MatC direct = Eigen::PartialPivLU<MatC>(M).solve(MatC::Identity(n, n));
  CHECK((viaCalc - direct).norm() < 1e-10 * direct.norm());
}

TEST_CASE("off-diagonal profile rejects overlapping sets and singular resolvents") {
  const WeightedGrid grid = WeightedGrid::periodic1d(8, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  CHECK_THROWS(offdiagonal_profile(D, grid, {0, 1}, {1, 2}, 0.1));

  // eigenvalue 2i makes I + 0.5 i T singular
  MatC A = MatC::Zero(2, 2);
  A(0, 0) = Complex(0.0, 2.0);
  A(1, 1) = 1.0;
  WeightedOperator T = smallOperator(A);
  const WeightedGrid two = WeightedGrid::periodic1d(2, 1.0, kOne, kOne);
  CHECK_THROWS_AS(offdiagonal_profile(T, two, {0}, {1}, 0.5), ResolventSingular);
}

TEST_CASE("psi application agrees with the registered calculus function") {
  const WeightedGrid grid = WeightedGrid::periodic1d(16, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  const VecC u = randomVec(D.dim());
  const double t = 0.37;
  const VecC direct = apply_psi(D, t, u);
  const MatC viaCalc = fn_calculus(D, {CalcFn::PsiT, t});
  CHECK((viaCalc * u - direct).norm() < 1e-10 * direct.norm());
}

TEST_CASE("off-diagonal decay of the unweighted resolvent") {
  const int n = 96;
  const WeightedGrid grid = WeightedGrid::periodic1d(n, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  std::vector<int> E;
  for (int i = 0; i < 8; ++i) E.push_back(i);

  SUBCASE("adjacent target set is bounded by the global resolvent norm") {
    std::vector<int> F;
    for (int i = 8; i < n; ++i) F.push_back(i);
    const double t = 0.05;
    const double ratio = offdiagonal_profile(D, grid, E, F, t);
    const MatC R = MatC::Identity(D.dim(), D.dim()) + Complex(0, t) * D.A;
    const MatC Rinv = Eigen::PartialPivLU<MatC>(R).solve(MatC::Identity(D.dim(), D.dim()));
    CHECK(ratio <= D.weightedOpNorm(Rinv) + 1e-10);
  }

  SUBCASE("ratio decreases as dist/t grows") {
    const double t = 1.0 / n;
    double prev = std::numeric_limits<double>::infinity();
    for (double mult : {1.0, 2.0, 4.0, 8.0}) {
      const int gap = std::max(1, static_cast<int>(std::round(mult * t * n)));
      std::vector<int> F;
      for (int i = 8 + gap; i < 8 + gap + 8 && i < n; ++i) F.push_back(i);
      const double ratio = offdiagonal_profile(D, grid, E, F, t);
      CHECK(ratio < prev);
      prev = ratio;
    }
  }
}

TEST_CASE("off-diagonal profiles in flat and pulled-back coordinates") {
  // anisotropic pair mu != w: measure the decay side by side with the
  // single-weight problem in the rubber-band coordinates; report-only, both
  // must come out finite and bounded by the global resolvent norm
  const int n = 64;
  const WeightedGrid flat = WeightedGrid::periodic1d(
      n, 1.0, WeightField::absPower(0.5), WeightField::absPower(-0.5));
  const WeightedGrid pulled = WeightedGrid::periodic1d(n, 1.0, kOne, kOne);
  const double t = 4.0 / n;
  std::vector<int> E{0, 1, 2, 3}, F;
  for (int i = n / 2; i < n / 2 + 4; ++i) F.push_back(i);
  for (const WeightedGrid* g : {&flat, &pulled}) {
    const WeightedOperator D = assemble_D(*g);
    const double ratio = offdiagonal_profile(D, *g, E, F, t);
    CHECK(std::isfinite(ratio));
    const MatC R = MatC::Identity(D.dim(), D.dim()) + Complex(0, t) * D.A;
    const MatC Rinv =
        Eigen::PartialPivLU<MatC>(R).solve(MatC::Identity(D.dim(), D.dim()));
    CHECK(ratio <= D.weightedOpNorm(Rinv) + 1e-10);
  }
}

TEST_CASE("bisectorial profile reports spectrum hits as singular samples") {
  MatC A = MatC::Zero(2, 2);
  A(0, 0) = Complex(0.0, 2.0);  // eigenvalue off the real bisector
  A(1, 1) = 1.0;
  const WeightedOperator T = smallOperator(A);
  const BisectorialProfile prof =
      bisectorial_profile(T, 0.1, {Complex(0.0, 2.0), Complex(0.0, 5.0)});
  CHECK(prof.singularCount == 1);
  CHECK(prof.perLambda.size() == 1);
}

TEST_CASE("inhomogeneous operator: self-adjointness and block square") {
  const WeightedGrid grid = WeightedGrid::periodic1d(24, 1.0, kOne, kOne);
  const WeightedOperator Dt = assemble_inhomogeneous(grid);
  CHECK(Dt.selfAdjointGap() < 1e-12);

  const GradDiv gd = build_grad_div(grid);
  const int S = grid.scalarDim();
  const MatC blk = (Dt.A * Dt.A).topLeftCorner(S, S);
  const MatR expect = MatR::Identity(S, S) - (gd.div * gd.grad);
  CHECK((blk - expect.cast<Complex>()).norm() < 1e-12 * expect.norm());
}

TEST_CASE("inhomogeneous operator: kernel is parametrized by the flux block") {
  const WeightedGrid grid = WeightedGrid::periodic1d(16, 1.0, kOne, kOne);
  const WeightedOperator Dt = assemble_inhomogeneous(grid);
  Eigen::FullPivLU<MatC> lu(Dt.A);
  lu.setThreshold(1e-10);
  // rows force u1 = 0 and u0 = (1/mu) div(w u2), with u2 free
  CHECK(lu.dimensionOfKernel() == grid.vectorDim());
  // spot-check one kernel vector built from the parametrization
  const GradDiv gd = build_grad_div(grid);
  const int S = grid.scalarDim();
  VecC z = VecC::Zero(Dt.dim());
  VecR u2(grid.vectorDim());
  for (int i = 0; i < u2.size(); ++i) u2(i) = std::sin(2.0 * M_PI * i / u2.size());
  z.tail(grid.vectorDim()) = u2.cast<Complex>();
  z.segment(S, S) = (grid.muVals.cwiseInverse().asDiagonal() * gd.div *
                     grid.wVals.asDiagonal() * u2)
                        .cast<Complex>();
  CHECK((Dt.A * z).norm() < 1e-12 * std::max(1.0, z.norm()));
}

TEST_CASE("Gram scaling: rescaling w scales vector-block norms only") {
  const WeightedGrid g1 = WeightedGrid::periodic1d(16, 1.0, kOne, kOne);
  const WeightedGrid g2 = WeightedGrid::periodic1d(16, 1.0, kOne, WeightField::constant(4.0));
  const VecC u = randomVec(g1.totalDim() + g1.scalarDim());
  const WeightedOperator D1 = assemble_inhomogeneous(g1);
  const WeightedOperator D2 = assemble_inhomogeneous(g2);
  const int S = g1.scalarDim();
  VecC scalarOnly = u;
  scalarOnly.tail(g1.vectorDim()).setZero();
  CHECK(D1.G.norm(scalarOnly) == doctest::Approx(D2.G.norm(scalarOnly)).epsilon(1e-13));
  VecC vecOnly = u;
  vecOnly.head(2 * S).setZero();
  CHECK(2.0 * D1.G.norm(vecOnly) == doctest::Approx(D2.G.norm(vecOnly)).epsilon(1e-13));
}

TEST_CASE("similarity invariance: eigenvalues of BD equal those of DB") {
  const WeightedGrid grid = WeightedGrid::periodic1d(
      16, 1.0, WeightField::absPower(0.5), WeightField::constant(1.0));
  const WeightedOperator D = assemble_D(grid);
  auto a = [](double x) { return Complex(1.0, 0.25) * (std::pow(std::abs(x), 0.5) + 0.0); };
  auto b = [](double) { return Complex(1.0, -0.25); };
  const BOperator B = assemble_B(grid, a, b);
  const MatC BD = B.op.A * D.A;
  const MatC DB = D.A * B.op.A;
  Eigen::ComplexEigenSolver<MatC> e1(BD, false), e2(DB, false);
  VecC l1 = e1.eigenvalues(), l2 = e2.eigenvalues();
  std::sort(l1.data(), l1.data() + l1.size(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  std::sort(l2.data(), l2.data() + l2.size(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  CHECK((l1 - l2).cwiseAbs().maxCoeff() < 1e-10 * l1.cwiseAbs().maxCoeff());
}

TEST_CASE("operator export round-trips the matrix entries") {
  const WeightedGrid grid = WeightedGrid::periodic1d(4, 1.0, kOne, kOne);
  const WeightedOperator D = assemble_D(grid);
  const JsonValue j = operator_to_json(D);
  const std::string dumped = j.dump();
  CHECK(dumped.find("\"label\"") != std::string::npos);
  CHECK(dumped.find("matrixRowMajorReIm") != std::string::npos);
}
