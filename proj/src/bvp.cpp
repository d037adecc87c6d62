#include "mwlab/bvp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "mwlab/errors.hpp"

namespace mwlab {

// ---------------------------------------------------------------------------
// CylinderGrid
// ---------------------------------------------------------------------------

CylinderGrid::CylinderGrid(const CylinderConfig& cfg, const WeightField& mu,
                           const WeightField& w)
    : cfg_(cfg) {
  if (!(cfg.c0 > 1.0) || !(cfg.c1 > 0.0) || !(cfg.delta > 0.0))
    throw ConfigInvalid("cylinder needs c0 > 1, c1 > 0, delta > 0");
  const int n = cfg.nBase;
  h_ = cfg.baseLength / n;
  basePts_.resize(n);
  mu_.resize(n);
  w_.resize(n);
  // quarter-offset keeps both the nodes and the half-lattice flux points off
  // a weight singularity at x = 0 for every n
  for (int j = 0; j < n; ++j) {
    basePts_[j] = -0.5 * cfg.baseLength + (j + 0.25) * h_;
    mu_(j) = mu.evalScalar(basePts_[j]);
    w_(j) = w.evalScalar(basePts_[j]);
  }

  tSolver_.resize(cfg.nT + 1);
  for (int i = 0; i <= cfg.nT; ++i) tSolver_[i] = cfg.delta * i / cfg.nT;

  const int rungs = cfg.ladderPerOctave * cfg.ladderOctaves + 1;
  ladder_.resize(rungs);
  for (int k = 0; k < rungs; ++k)
    ladder_[k] = 0.5 * cfg.delta * std::pow(2.0, -double(k) / cfg.ladderPerOctave);

  // Pulled-back circle metric: cumulative sqrt(mu/w) between adjacent nodes
  // (trapezoid on node values), wrapped around the circle.
  std::vector<double> cum(n + 1, 0.0);
  for (int j = 0; j < n; ++j) {
    const double a = std::sqrt(mu_(j) / w_(j));
    const double b = std::sqrt(mu_((j + 1) % n) / w_((j + 1) % n));
    cum[j + 1] = cum[j] + 0.5 * (a + b) * h_;
  }
  const double total = cum[n];
  dist0_.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = std::abs(cum[i] - cum[j]);
      dist0_(i, j) = std::min(d, total - d);
    }
}

double CylinderGrid::eta(double t) const {
  if (cfg_.cutoff == "cosine") {
    const double s = std::clamp(2.0 * t / cfg_.delta - 1.0, 0.0, 1.0);
    return 0.5 * (1.0 + std::cos(M_PI * s));
  }
  return std::max(0.0, std::min(1.0, 2.0 - 2.0 * t / cfg_.delta));
}

std::vector<int> CylinderGrid::whitneyBaseNodes(int center, double t) const {
  std::vector<int> out;
  for (int j = 0; j < cfg_.nBase; ++j)
    if (dist0_(center, j) < cfg_.c1 * t) out.push_back(j);
  return out;
}

std::vector<int> CylinderGrid::whitneyTLevels(double t) const {
  std::vector<int> out;
  for (int i = 0; i <= cfg_.nT; ++i)
    if (tSolver_[i] > t / cfg_.c0 && tSolver_[i] < cfg_.c0 * t) out.push_back(i);
  return out;
}

WeightedGrid CylinderGrid::baseGrid() const {
  WeightedGrid g;
  g.topology = Topology::Periodic;
  g.dim = 1;
  g.n = cfg_.nBase;
  g.length = cfg_.baseLength;
  g.muVals = mu_;
  g.wVals = w_;
  return g;
}

// ---------------------------------------------------------------------------
// Coefficient transforms
// ---------------------------------------------------------------------------

MatC involution(const MatC& A, double pivotTol) {
  const int m = static_cast<int>(A.rows());
  if (A.cols() != m || m < 2) throw Error("involution needs a square block matrix");
  const Complex a = A(0, 0);
  if (std::abs(a) < pivotTol) throw PivotDegenerate("pivot entry too small");
  MatC out(m, m);
  const auto b = A.row(0).tail(m - 1);
  const auto c = A.col(0).tail(m - 1);
  const auto d = A.bottomRightCorner(m - 1, m - 1);
  out(0, 0) = 1.0 / a;
  out.row(0).tail(m - 1) = -b / a;
  out.col(0).tail(m - 1) = c / a;
  out.bottomRightCorner(m - 1, m - 1) = d - c * b / a;
  return out;
}

Eigen::Matrix2cd coefficient_B_point(const Eigen::Matrix2cd& A0, double mu, double w) {
  const Complex a = A0(0, 0), b = A0(0, 1), c = A0(1, 0), d = A0(1, 1);
  if (std::abs(a) < 1e-14) throw PivotDegenerate("pivot entry too small");
  Eigen::Matrix2cd B;
  B(0, 0) = mu / a;
  B(0, 1) = -b / a;
  B(1, 0) = c / a * mu / w;
  B(1, 1) = (d - c * b / a) / w;
  return B;
}

double coefficient_B_conjugation_gap(const Eigen::Matrix2cd& A0, double mu, double w) {
  const Eigen::Matrix2cd direct = coefficient_B_point(A0, mu, w);
  Eigen::Matrix2cd left = Eigen::Matrix2cd::Identity();
  left(1, 1) = 1.0 / w;
  Eigen::Matrix2cd right = Eigen::Matrix2cd::Identity();
  right(0, 0) = mu;
  const Eigen::Matrix2cd viaInvolution = left * involution(A0) * right;
  return (direct - viaInvolution).norm();
}

double accretivity_constant(const MatC& A) {
  const MatC H = 0.5 * (A + MatC(A.adjoint()));
  Eigen::SelfAdjointEigenSolver<MatC> es(H);
  return es.eigenvalues().minCoeff();
}

MatC coefficient_B_multiplier(const CylinderGrid& grid, const CoefficientField& A0,
                              double t) {
  const int n = grid.nBase();
  MatC B = MatC::Zero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix2cd Bj =
        coefficient_B_point(A0(t, grid.basePoints()[j]), grid.muVals()(j), grid.wVals()(j));
    B(j, j) = Bj(0, 0);
    B(j, n + j) = Bj(0, 1);
    B(n + j, j) = Bj(1, 0);
    B(n + j, n + j) = Bj(1, 1);
  }
  return B;
}

// ---------------------------------------------------------------------------
// Divergence-form solve
// ---------------------------------------------------------------------------

namespace {

struct StencilIndex {
  int nT, n;
  int operator()(int i, int j) const { return i * n + ((j % n + n) % n); }
};

}  // namespace

MatC solve_divform_cylinder(const CylinderGrid& grid, const DivFormProblem& problem,
                            double residualTol) {
  const int n = grid.nBase();
  const int nT = grid.nT();
  const int N = (nT + 1) * n;
  if (N > 12000) throw Error("cylinder grid too large for the dense solver");
  const double h = grid.baseSpacing();
  const double dt = grid.dt();
  const StencilIndex idx{nT, n};
  const auto& xs = grid.basePoints();
  const auto& ts = grid.solverLevels();

  MatC A = MatC::Zero(N, N);
  VecC rhs = VecC::Zero(N);

  auto coeff = [&](double t, int j) { return problem.A0(t, xs[(j % n + n) % n]); };

  // Interior rows: flux differences of
  //   F_t = a du/dt + b dx u   (at half levels)
  //   F_x = c du/dt + d dx u   (at half base offsets)
  for (int i = 1; i < nT; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = idx(i, j);
      auto addT = [&](int ihalf, double sign) {
        // half level between ihalf and ihalf+1
        const double th = 0.5 * (ts[ihalf] + ts[ihalf + 1]);
        const Eigen::Matrix2cd C = coeff(th, j);
        const Complex a = C(0, 0), b = C(0, 1);
        A(row, idx(ihalf + 1, j)) += sign * a / (dt * dt);
        A(row, idx(ihalf, j)) -= sign * a / (dt * dt);
        // b * (average of centered x-derivatives on the two levels)
        for (int lev : {ihalf, ihalf + 1}) {
          A(row, idx(lev, j + 1)) += sign * b / (2.0 * (2.0 * h) * dt);
          A(row, idx(lev, j - 1)) -= sign * b / (2.0 * (2.0 * h) * dt);
        }
      };
      addT(i, +1.0);
      addT(i - 1, -1.0);

      auto addX = [&](int jhalf, double sign) {
        // half offset between jhalf and jhalf+1
        const double xmid = xs[(jhalf % n + n) % n] + 0.5 * h;
        Eigen::Matrix2cd C = problem.A0(ts[i], xmid);
        const Complex c = C(1, 0), d = C(1, 1);
        A(row, idx(i, jhalf + 1)) += sign * d / (h * h);
        A(row, idx(i, jhalf)) -= sign * d / (h * h);
        // c * (average of centered t-derivatives at the two base nodes)
        for (int col : {jhalf, jhalf + 1}) {
          A(row, idx(i + 1, col)) += sign * c / (2.0 * (2.0 * dt) * h);
          A(row, idx(i - 1, col)) -= sign * c / (2.0 * (2.0 * dt) * h);
        }
      };
      addX(j, +1.0);
      addX(j - 1, -1.0);
    }
  }

  // Top boundary: Dirichlet.
  for (int j = 0; j < n; ++j) {
    const int row = idx(nT, j);
    A(row, row) = 1.0;
    rhs(row) = problem.dataTop ? problem.dataTop(xs[j]) : Complex(0.0, 0.0);
  }
  // Bottom boundary.
  for (int j = 0; j < n; ++j) {
    const int row = idx(0, j);
    if (problem.bottom == BottomCondition::Dirichlet) {
      A(row, row) = 1.0;
      rhs(row) = problem.dataBottom ? problem.dataBottom(xs[j]) : Complex(0.0, 0.0);
    } else {
      // one-sided conormal: a (u_1 - u_0)/dt + b dx u_0 = g
      const Eigen::Matrix2cd C = coeff(ts[0], j);
      const Complex a = C(0, 0), b = C(0, 1);
      A(row, idx(1, j)) += a / dt;
      A(row, idx(0, j)) -= a / dt;
      A(row, idx(0, j + 1)) += b / (2.0 * h);
      A(row, idx(0, j - 1)) -= b / (2.0 * h);
      rhs(row) = problem.dataBottom ? problem.dataBottom(xs[j]) : Complex(0.0, 0.0);
    }
  }

  VecC u;
  if (A.imag().norm() == 0.0 && rhs.imag().norm() == 0.0) {
    const MatR Ar = A.real();
    Eigen::PartialPivLU<MatR> lu(Ar);
    u = lu.solve(rhs.real()).cast<Complex>();
  } else {
    Eigen::PartialPivLU<MatC> lu(A);
    u = lu.solve(rhs);
  }

  const double res = (A * u - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (!(res < residualTol) || !u.allFinite())
    throw SolverSingular("dense divergence-form solve did not meet tolerance");

  MatC out(nT + 1, n);
  for (int i = 0; i <= nT; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = u(idx(i, j));
  return out;
}

// ---------------------------------------------------------------------------
// Gradients and the evolution residual
// ---------------------------------------------------------------------------

namespace {

// centered in the interior, one-sided at the ends
Complex dt_of(const MatC& u, int i, int j, double dt) {
  const int nT = static_cast<int>(u.rows()) - 1;
  if (i == 0) return (u(1, j) - u(0, j)) / dt;
  if (i == nT) return (u(nT, j) - u(nT - 1, j)) / dt;
  return (u(i + 1, j) - u(i - 1, j)) / (2.0 * dt);
}

Complex dx_of(const MatC& u, int i, int j, double h) {
  const int n = static_cast<int>(u.cols());
  return (u(i, (j + 1) % n) - u(i, (j + n - 1) % n)) / (2.0 * h);
}

}  // namespace

CylinderField conormal_gradient(const CylinderGrid& grid, const MatC& u,
                                const CoefficientField& A0) {
  const int n = grid.nBase();
  const int nT = grid.nT();
  CylinderField f;
  f.comp1.resize(nT + 1, n);
  f.comp2.resize(nT + 1, n);
  for (int i = 0; i <= nT; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Matrix2cd C = A0(grid.solverLevels()[i], grid.basePoints()[j]);
      const Complex ut = dt_of(u, i, j, grid.dt());
      const Complex ux = dx_of(u, i, j, grid.baseSpacing());
      f.comp1(i, j) = (C(0, 0) * ut + C(0, 1) * ux) / grid.muVals()(j);
      f.comp2(i, j) = ux;
    }
  return f;
}

CylinderField cylinder_gradient(const CylinderGrid& grid, const MatC& u, bool applyEta) {
  const int n = grid.nBase();
  const int nT = grid.nT();
  CylinderField f;
  f.comp1.resize(nT + 1, n);
  f.comp2.resize(nT + 1, n);
  for (int i = 0; i <= nT; ++i) {
    const double scale = applyEta ? grid.eta(grid.solverLevels()[i]) : 1.0;
    for (int j = 0; j < n; ++j) {
      f.comp1(i, j) = scale * dt_of(u, i, j, grid.dt());
      f.comp2(i, j) = scale * dx_of(u, i, j, grid.baseSpacing());
    }
  }
  return f;
}

CrResidual cr_residual(const CylinderGrid& grid, const MatC& u, const CoefficientField& A0) {
  const int n = grid.nBase();
  const int nT = grid.nT();
  const double dt = grid.dt();
  const CylinderField f = conormal_gradient(grid, u, A0);
  const WeightedGrid base = grid.baseGrid();
  const WeightedOperator D = assemble_D(base);
  const Gram G = base.fullGram();

  double num2 = 0.0, den2 = 0.0;
  // start at i = 2: level 0 carries a one-sided t-stencil whose O(dt) defect
  // would enter the backward difference at i = 1 undivided
  for (int i = 2; i < nT; ++i) {
    const double t = grid.solverLevels()[i];
    const MatC B = coefficient_B_multiplier(grid, A0, t);
    VecC fi(2 * n), fim(2 * n);
    for (int j = 0; j < n; ++j) {
      fi(j) = f.comp1(i, j);
      fi(n + j) = f.comp2(i, j);
      fim(j) = f.comp1(i - 1, j);
      fim(n + j) = f.comp2(i - 1, j);
    }
    // the divergence-form equation turns into d_t f = D B f for the conormal
    // gradient; backward difference in t keeps the residual first order
    const VecC res = (fi - fim) / dt - D.A * (B * fi);
    const double rn = G.norm(res);
    const double fn = G.norm(fi);
    num2 += rn * rn * dt;
    den2 += fn * fn * dt;
  }
  CrResidual out;
  if (den2 <= 1e-300) {
    out.zeroNorm = true;
    out.residual = 0.0;
    return out;
  }
  out.residual = std::sqrt(num2 / den2);
  return out;
}

// ---------------------------------------------------------------------------
// Non-tangential maximal function
// ---------------------------------------------------------------------------

NontangentialResult nontangential_maximal(const CylinderGrid& grid,
                                          const CylinderField& f) {
  const int n = grid.nBase();
  const double h = grid.baseSpacing();
  const double dt = grid.dt();
  NontangentialResult out;
  out.values = VecR::Zero(n);
  for (int center = 0; center < n; ++center) {
    double sup = 0.0;
    for (double t : grid.ladder()) {
      const auto levels = grid.whitneyTLevels(t);
      if (levels.empty()) {
        ++out.emptyLadderRungs;
        continue;
      }
      const auto nodes = grid.whitneyBaseNodes(center, t);
      if (nodes.empty()) continue;
      double mass = 0.0, energy = 0.0;
      for (int i : levels)
        for (int j : nodes) {
          const double cell = dt * h;
          mass += grid.muVals()(j) * cell;
          energy += (grid.muVals()(j) * std::norm(f.comp1(i, j)) +
                     grid.wVals()(j) * std::norm(f.comp2(i, j))) *
                    cell;
        }
      if (mass > 0.0) sup = std::max(sup, std::sqrt(energy / mass));
    }
    out.values(center) = sup;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carleson discrepancy
// ---------------------------------------------------------------------------

double carleson_discrepancy(const CylinderGrid& grid, const CoefficientField& E) {
  const int n = grid.nBase();
  const double h = grid.baseSpacing();
  const auto& ladder = grid.ladder();
  const int rungs = static_cast<int>(ladder.size());

  // Normalized size |V0^{-1/2} E V0^{-1/2}| sampled on (ladder rung, base node),
  // then Whitney sup over each region centred at that pair.
  MatR pointNorm(rungs, n);
  for (int k = 0; k < rungs; ++k)
    for (int j = 0; j < n; ++j) {
      Eigen::Matrix2cd M = E(ladder[k], grid.basePoints()[j]);
      const double smu = std::sqrt(grid.muVals()(j));
      const double sw = std::sqrt(grid.wVals()(j));
      M(0, 0) /= smu * smu;
      M(0, 1) /= smu * sw;
      M(1, 0) /= sw * smu;
      M(1, 1) /= sw * sw;
      Eigen::JacobiSVD<Eigen::Matrix2cd> svd(M);
      pointNorm(k, j) = svd.singularValues()(0);
    }

  MatR whitneySup(rungs, n);
  for (int k = 0; k < rungs; ++k) {
    const double t = ladder[k];
    for (int j = 0; j < n; ++j) {
      double sup = 0.0;
      const auto nodes = grid.whitneyBaseNodes(j, t);
      for (int k2 = 0; k2 < rungs; ++k2) {
        if (!(ladder[k2] > t / grid.config().c0 && ladder[k2] < grid.config().c0 * t))
          continue;
        for (int j2 : nodes) sup = std::max(sup, pointNorm(k2, j2));
      }
      whitneySup(k, j) = sup;
    }
  }

  // dt/t weights on the descending geometric ladder.
  std::vector<double> dlog(rungs, 0.0);
  for (int k = 0; k + 1 < rungs; ++k) dlog[k] = std::log(ladder[k] / ladder[k + 1]);
  if (rungs >= 2) dlog[rungs - 1] = dlog[rungs - 2];

  double best = 0.0;
  for (int zeta = 0; zeta < n; ++zeta) {
    for (int kr = 0; kr < rungs; ++kr) {
      const double r = ladder[kr];
      std::vector<int> ball;
      double muBall = 0.0;
      for (int j = 0; j < n; ++j)
        if (grid.dist0(zeta, j) < r) {
          ball.push_back(j);
          muBall += grid.muVals()(j) * h;
        }
      if (ball.empty() || muBall <= 0.0) continue;
      double total = 0.0;
      for (int k = 0; k < rungs; ++k) {
        if (!(ladder[k] < r)) continue;
        for (int j : ball)
          total += whitneySup(k, j) * whitneySup(k, j) * dlog[k] *
                   (grid.muVals()(j) * h / muBall);
      }
      best = std::max(best, total);
    }
  }
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------
// Neumann ratio
// ---------------------------------------------------------------------------

NeumannReport neumann_ratio(const CylinderGrid& grid, const MatC& u,
                            const CoefficientField& A0) {
  const int n = grid.nBase();
  const int nT = grid.nT();
  const double h = grid.baseSpacing();
  const double dt = grid.dt();
  NeumannReport rep;

  // lhs part 1: non-tangential maximal function of eta * full gradient
  const CylinderField etaGrad = cylinder_gradient(grid, u, true);
  const NontangentialResult nt = nontangential_maximal(grid, etaGrad);
  for (int j = 0; j < n; ++j)
    rep.lhsNontangential += nt.values(j) * nt.values(j) * grid.muVals()(j) * h;

  // lhs part 2: bulk energy with (1 - eta)^2
  const CylinderField grad = cylinder_gradient(grid, u, false);
  for (int i = 0; i <= nT; ++i) {
    const double om = 1.0 - grid.eta(grid.solverLevels()[i]);
    if (om == 0.0) continue;
    for (int j = 0; j < n; ++j)
      rep.lhsBulk += (grid.muVals()(j) * std::norm(grad.comp1(i, j)) +
                      grid.wVals()(j) * std::norm(grad.comp2(i, j))) *
                     om * om * dt * h;
  }
  rep.lhs = rep.lhsNontangential + rep.lhsBulk;

  // rhs: conormal data at t = 0 in L2(1/mu)
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix2cd C = A0(0.0, grid.basePoints()[j]);
    const Complex ut = (u(1, j) - u(0, j)) / dt;
    const Complex ux = dx_of(u, 0, j, h);
    const Complex conormal = C(0, 0) * ut + C(0, 1) * ux;
    rep.rhs += std::norm(conormal) / grid.muVals()(j) * h;
  }
  rep.lhs = std::sqrt(rep.lhs);
  rep.lhsNontangential = std::sqrt(rep.lhsNontangential);
  rep.lhsBulk = std::sqrt(rep.lhsBulk);
  rep.rhs = std::sqrt(rep.rhs);
  rep.degenerate = rep.rhs <= 1e-14;
  rep.ratio = rep.degenerate ? 0.0 : rep.lhs / rep.rhs;

  rep.crResidual = cr_residual(grid, u, A0).residual;

  CoefficientField discrepancy = [&A0](double t, double x) {
    return Eigen::Matrix2cd(A0(t, x) - A0(0.0, x));
  };
  rep.carlesonOfDiscrepancy = carleson_discrepancy(grid, discrepancy);

  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix2cd tr = A0(0.0, grid.basePoints()[j]);
    Eigen::Matrix2cd gap = tr.adjoint() - tr;
    const double smu = std::sqrt(grid.muVals()(j));
    const double sw = std::sqrt(grid.wVals()(j));
    gap(0, 0) /= smu * smu;
    gap(0, 1) /= smu * sw;
    gap(1, 0) /= sw * smu;
    gap(1, 1) /= sw * sw;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(gap);
    rep.traceSelfAdjointGap = std::max(rep.traceSelfAdjointGap, svd.singularValues()(0));
  }
  return rep;
}

}  // namespace mwlab
