#pragma once

// Square-root ratio experiments: the weighted 1D estimate through the scalar
// block of sqrt((BD)^2), the inhomogeneous estimate with lower-order terms
// through the three-block operator, the Hilbert-transform reduction on the
// constant-free subspace, and parameter sweeps emitting ratio tables.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mwlab/opcalc.hpp"
#include "mwlab/weights.hpp"

namespace mwlab {

using CoeffFn = std::function<Complex(double)>;

struct KatoExperiment {
  WeightField mu = WeightField::constant(1.0);
  WeightField w = WeightField::constant(1.0);
  CoeffFn a;  // scalar coefficient; defaults to mu when empty
  CoeffFn b;  // gradient-block coefficient; defaults to w when empty
  // lower-order terms for the inhomogeneous form
  CoeffFn d, bvec, cvec;
  int n = 64;
  double length = 1.0;
  bool inhomogeneous = false;
};

struct HypothesisReport {
  double aAccr = 0.0, aBound = 0.0;  // inf Re a/mu, sup |a|/mu over nodes
  double bAccr = 0.0, bBound = 0.0;
  bool satisfied = false;
};

HypothesisReport check_kato_hypotheses(const KatoExperiment& exp);

struct RatioRow {
  std::string testId;
  double lhsNorm = 0.0, rhsNorm = 0.0, ratio = 0.0;
  bool hypothesisOk = true;
  bool ok = true;       // false when the computation tripped a spectral guard
  std::string error;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  double minRatio = 0.0, maxRatio = 0.0, spread = 0.0;

  void summarize();
};

struct RatioComputation {
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

// ||scalar block of sqrt((BD)^2) [u;0]||_{L2(mu)} / ||grad u||_{L2(w)} on an
// assembled grid; u lives on the scalar dofs.
RatioComputation kato_ratio_on_grid(const WeightedGrid& grid, const CoeffFn& a,
                                    const CoeffFn& b, const VecC& u);

RatioComputation kato_ratio_1d(const KatoExperiment& exp, const VecC& u);

// Inhomogeneous ratio against ||grad u||_W + ||u||_mu via the three-block
// operators. Throws AccretivityViolated when the multiplier fails accretivity.
RatioComputation kato_ratio_inhom(const KatoExperiment& exp, const VecC& u);

// || H_h - sqrt(-d^2)(i d)^+ ||_2 on the complement of ker(d_h); H_h is the
// Fourier multiplier sgn(k) on the modes exp(-2 pi i k j / n).
double hilbert_reduction_check(int n, double length = 1.0);

// Named smooth test functions (periodized bumps, low modes).
std::vector<std::pair<std::string, CoeffFn>> test_family(const std::string& id,
                                                         double length,
                                                         std::uint64_t seed = 0);

struct SweepSpec {
  std::vector<double> alphas{0.0};
  std::vector<double> betas{0.0};
  std::vector<int> ns{64};
  double aPhase = 0.0;  // a = (1 + i*aPhase) mu
  std::vector<std::string> tests{"bumps"};
  double length = 2.0;
  std::uint64_t seed = 0;
};

struct SweepRow {
  double alpha = 0.0, beta = 0.0;
  int n = 0;
  RatioRow ratio;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

SweepResult kato_sweep(const SweepSpec& spec, int workers = 1);

}  // namespace mwlab
