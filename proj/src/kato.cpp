#include "mwlab/kato.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "mwlab/errors.hpp"

namespace mwlab {

namespace {

CoeffFn coeff_or_weight(const CoeffFn& c, const WeightField& w) {
  if (c) return c;
  auto wp = std::make_shared<WeightField>(w);
  return [wp](double x) { return Complex(wp->evalScalar(x), 0.0); };
}

// Periodic grids sample the circle as [-L/2, L/2); map an arbitrary x there.
double wrap_to_circle(double x, double length) {
  double y = std::fmod(x + 0.5 * length, length);
  if (y < 0) y += length;
  return y - 0.5 * length;
}

}  // namespace

HypothesisReport check_kato_hypotheses(const KatoExperiment& exp) {
  const WeightedGrid grid = WeightedGrid::periodic1d(exp.n, exp.length, exp.mu, exp.w);
  const CoeffFn a = coeff_or_weight(exp.a, exp.mu);
  const CoeffFn b = coeff_or_weight(exp.b, exp.w);
  HypothesisReport rep;
  rep.aAccr = rep.bAccr = std::numeric_limits<double>::infinity();
  const auto pts = grid.scalarPoints();
  for (size_t i = 0; i < pts.size(); ++i) {
    const double mu = grid.muVals(i);
    const double w = grid.wVals(i);
    const Complex av = a(pts[i]);
    const Complex bv = b(pts[i]);
    rep.aAccr = std::min(rep.aAccr, av.real() / mu);
    rep.aBound = std::max(rep.aBound, std::abs(av) / mu);
    rep.bAccr = std::min(rep.bAccr, bv.real() / w);
    rep.bBound = std::max(rep.bBound, std::abs(bv) / w);
  }
  rep.satisfied = rep.aAccr > 0.0 && rep.bAccr > 0.0;
  return rep;
}

void RatioTable::summarize() {
  minRatio = std::numeric_limits<double>::infinity();
  maxRatio = 0.0;
  for (const RatioRow& r : rows) {
    if (!r.ok || r.rhsNorm <= 0.0) continue;
    minRatio = std::min(minRatio, r.ratio);
    maxRatio = std::max(maxRatio, r.ratio);
  }
  spread = (minRatio > 0.0 && std::isfinite(minRatio)) ? maxRatio / minRatio : 0.0;
}

RatioComputation kato_ratio_on_grid(const WeightedGrid& grid, const CoeffFn& a,
                                    const CoeffFn& b, const VecC& u) {
  const int S = grid.scalarDim();
  const int V = grid.vectorDim();
  if (u.size() != S) throw GridMismatch("test function not on the scalar dofs");

  const WeightedOperator D = assemble_D(grid);
  const BOperator B = assemble_B(grid, a, b);
  const WeightedOperator BD = multiply(B.op, D.A, "BD");

  VecC z0(S + V);
  z0.head(S) = u;
  z0.tail(V).setZero();

  const MatC sq = fn_calculus(BD, FnSpec{CalcFn::SqrtOfSquare});
  const VecC z = sq * z0;

  RatioComputation out;
  out.lhs = grid.scalarGram().norm(z.head(S));
  const VecC du = (D.A * z0).tail(V);
  out.rhs = grid.vectorGram().norm(du);
  out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : 0.0;
  return out;
}

RatioComputation kato_ratio_1d(const KatoExperiment& exp, const VecC& u) {
  const WeightedGrid grid = WeightedGrid::periodic1d(exp.n, exp.length, exp.mu, exp.w);
  return kato_ratio_on_grid(grid, coeff_or_weight(exp.a, exp.mu),
                            coeff_or_weight(exp.b, exp.w), u);
}

RatioComputation kato_ratio_inhom(const KatoExperiment& exp, const VecC& u) {
  const WeightedGrid grid = WeightedGrid::periodic1d(exp.n, exp.length, exp.mu, exp.w);
  const int S = grid.scalarDim();
  const int V = grid.vectorDim();
  if (u.size() != S) throw GridMismatch("test function not on the scalar dofs");

  const CoeffFn a = coeff_or_weight(exp.a, exp.mu);
  const CoeffFn A = coeff_or_weight(exp.b, exp.w);
  const CoeffFn d = exp.d ? exp.d : [](double) { return Complex(1.0, 0.0); };
  const CoeffFn bvec = exp.bvec ? exp.bvec : [](double) { return Complex(0.0, 0.0); };
  const CoeffFn cvec = exp.cvec ? exp.cvec : [](double) { return Complex(0.0, 0.0); };

  const WeightedOperator Dt = assemble_inhomogeneous(grid);
  const auto pts = grid.scalarPoints();

  MatC Bt = MatC::Zero(2 * S + V, 2 * S + V);
  double accr = std::numeric_limits<double>::infinity();
  for (int j = 0; j < S; ++j) {
    const double mu = grid.muVals(j);
    const double w = grid.wVals(j);
    const double x = pts[j];
    Bt(j, j) = Complex(mu, 0.0) / a(x);
    Bt(S + j, S + j) = d(x);
    Bt(S + j, 2 * S + j) = cvec(x) / mu;
    Bt(2 * S + j, S + j) = bvec(x) / w;
    Bt(2 * S + j, 2 * S + j) = A(x) / w;
    // pointwise accretivity of the (mu+mu+w)-symmetrized block
    Eigen::Matrix3cd block = Eigen::Matrix3cd::Zero();
    block(0, 0) = Bt(j, j);
    block(1, 1) = Bt(S + j, S + j);
    block(1, 2) = Bt(S + j, 2 * S + j) * std::sqrt(w / mu);
    block(2, 1) = Bt(2 * S + j, S + j) * std::sqrt(mu / w);
    block(2, 2) = Bt(2 * S + j, 2 * S + j);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(
        0.5 * (block + Eigen::Matrix3cd(block.adjoint())));
    accr = std::min(accr, es.eigenvalues().minCoeff());
  }
  if (!(accr > 0.0))
    throw AccretivityViolated("inhomogeneous multiplier not accretive on the grid");

  WeightedOperator BD{Bt * Dt.A, Dt.G, "BtDt"};
  VecC z0 = VecC::Zero(2 * S + V);
  z0.head(S) = u;
  const MatC sq = fn_calculus(BD, FnSpec{CalcFn::SqrtOfSquare});
  const VecC z = sq * z0;

  RatioComputation out;
  out.lhs = grid.scalarGram().norm(z.head(S));
  const VecC gradU = (Dt.A * z0).tail(V);
  out.rhs = grid.vectorGram().norm(gradU) + grid.scalarGram().norm(u);
  out.ratio = out.rhs > 0.0 ? out.lhs / out.rhs : 0.0;
  return out;
}

double hilbert_reduction_check(int n, double length) {
  const WeightField one = WeightField::constant(1.0);
  const WeightedGrid grid = WeightedGrid::periodic1d(n, length, one, one);
  const GradDiv gd = build_grad_div(grid);
  const MatC ddx = gd.grad.cast<Complex>();

  // H_h as a Fourier multiplier: modes phi_k(j) = exp(-2 pi i k j / n),
  // multiplier sgn(k) for signed k, zero on the kernel modes (k = 0, Nyquist).
  MatC H = MatC::Zero(n, n);
  for (int kk = 0; kk < n; ++kk) {
    const int k = kk <= n / 2 ? kk : kk - n;
    if (k == 0 || 2 * std::abs(k) == n) continue;
    VecC phi(n);
    for (int j = 0; j < n; ++j) {
      const double arg = -2.0 * M_PI * k * j / n;
      phi(j) = Complex(std::cos(arg), std::sin(arg)) / std::sqrt(double(n));
    }
    H += (k > 0 ? 1.0 : -1.0) * (phi * phi.adjoint());
  }

  // Independent route: Hermitian square root of -d^2 times the pseudo-inverse
  // of the Hermitian matrix i d.
  const MatC negLap = -(ddx * ddx);
  Eigen::SelfAdjointEigenSolver<MatC> esL(negLap);
  VecR sq = esL.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const MatC sqrtNegLap =
      esL.eigenvectors() * sq.cast<Complex>().asDiagonal() * esL.eigenvectors().adjoint();

  const MatC iD = Complex(0.0, 1.0) * ddx;
  Eigen::SelfAdjointEigenSolver<MatC> esD(iD);
  const double tol = 1e-10 * esD.eigenvalues().cwiseAbs().maxCoeff();
  VecC pinv(n), ran(n);
  for (int i = 0; i < n; ++i) {
    const bool nz = std::abs(esD.eigenvalues()(i)) > tol;
    pinv(i) = nz ? Complex(1.0 / esD.eigenvalues()(i), 0.0) : Complex(0.0, 0.0);
    ran(i) = nz ? 1.0 : 0.0;
  }
  const MatC iDpinv = esD.eigenvectors() * pinv.asDiagonal() * esD.eigenvectors().adjoint();
  const MatC Pran = esD.eigenvectors() * ran.asDiagonal() * esD.eigenvectors().adjoint();

  const MatC diff = (H - sqrtNegLap * iDpinv) * Pran;
  Eigen::BDCSVD<MatC> svd(diff);
  return svd.singularValues()(0);
}

std::vector<std::pair<std::string, CoeffFn>> test_family(const std::string& id,
                                                         double length,
                                                         std::uint64_t seed) {
  std::vector<std::pair<std::string, CoeffFn>> fam;
  auto bump = [length](double center, double scale) {
    return [center, scale, length](double x) {
      const double t = (wrap_to_circle(x - center, length)) / scale;
      if (std::abs(t) >= 1.0) return Complex(0.0, 0.0);
      return Complex(std::exp(-1.0 / (1.0 - t * t)), 0.0);
    };
  };
  if (id == "bumps" || id == "all") {
    fam.emplace_back("bump(-L/4,L/8)", bump(-length / 4, length / 8));
    fam.emplace_back("bump(0,L/6)", bump(0.0, length / 6));
    fam.emplace_back("bump(L/6,L/10)", bump(length / 6, length / 10));
  }
  if (id == "modes" || id == "all") {
    for (int k = 1; k <= 3; ++k) {
      fam.emplace_back("mode" + std::to_string(k), [k, length](double x) {
        return Complex(std::sin(2.0 * M_PI * k * x / length),
                       std::cos(2.0 * M_PI * k * x / length));
      });
    }
  }
  if (id == "random") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int f = 0; f < 3; ++f) {
      std::vector<double> cs, cc;
      for (int k = 0; k < 4; ++k) {
        cs.push_back(gauss(rng));
        cc.push_back(gauss(rng));
      }
      fam.emplace_back("random" + std::to_string(f), [cs, cc, length](double x) {
        double v = 0.0;
        for (size_t k = 0; k < cs.size(); ++k) {
          v += cs[k] * std::sin(2.0 * M_PI * (k + 1) * x / length);
          v += cc[k] * std::cos(2.0 * M_PI * (k + 1) * x / length);
        }
        return Complex(v, 0.0);
      });
    }
  }
  if (fam.empty()) throw ConfigInvalid("unknown test family '" + id + "'");
  return fam;
}

SweepResult kato_sweep(const SweepSpec& spec, int workers) {
  struct Cell {
    double alpha, beta;
    int n;
    std::string testId;
    CoeffFn fn;
  };
  std::vector<Cell> cells;
  for (double alpha : spec.alphas)
    for (double beta : spec.betas)
      for (int n : spec.ns)
        for (const std::string& testId : spec.tests)
          for (auto& [name, fn] : test_family(testId, spec.length, spec.seed))
            cells.push_back({alpha, beta, n, name, fn});

  SweepResult result;
  result.rows.resize(cells.size());

  auto runCell = [&](size_t idx) {
    const Cell& c = cells[idx];
    SweepRow row;
    row.alpha = c.alpha;
    row.beta = c.beta;
    row.n = c.n;
    row.ratio.testId = c.testId;
    try {
      KatoExperiment exp;
      exp.mu = WeightField::absPower(c.alpha);
      exp.w = WeightField::absPower(-c.beta);
      if (spec.aPhase != 0.0) {
        auto muP = std::make_shared<WeightField>(exp.mu);
        const double phase = spec.aPhase;
        exp.a = [muP, phase](double x) {
          return Complex(1.0, phase) * muP->evalScalar(x);
        };
      }
      exp.n = c.n;
      exp.length = spec.length;
      const HypothesisReport hyp = check_kato_hypotheses(exp);
      row.ratio.hypothesisOk = hyp.satisfied;
      const WeightedGrid grid =
          WeightedGrid::periodic1d(exp.n, exp.length, exp.mu, exp.w);
      const VecC u = grid.sampleScalar(c.fn);
      const RatioComputation rc = kato_ratio_on_grid(
          grid, coeff_or_weight(exp.a, exp.mu), coeff_or_weight(exp.b, exp.w), u);
      row.ratio.lhsNorm = rc.lhs;
      row.ratio.rhsNorm = rc.rhs;
      row.ratio.ratio = rc.ratio;
    } catch (const Error& e) {
      row.ratio.ok = false;
      row.ratio.error = e.what();
    }
    result.rows[idx] = row;
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    for (size_t i = 0; i < cells.size(); ++i) runCell(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&]() {
        for (size_t i = next++; i < cells.size(); i = next++) runCell(i);
      });
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace mwlab
