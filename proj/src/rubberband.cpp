#include "mwlab/rubberband.hpp"

#include <algorithm>
#include <cmath>

#include "mwlab/errors.hpp"

namespace mwlab {

namespace {

double density_at(const WeightField& mu, const WeightField& w, double x) {
  return std::sqrt(mu.evalScalar(x) / w.evalScalar(x));
}

std::vector<double> merged_singular(const WeightField& mu, const WeightField& w) {
  std::vector<double> s = mu.singularPoints();
  for (double p : w.singularPoints()) s.push_back(p);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// RhoMap
// ---------------------------------------------------------------------------

RhoMap::RhoMap(std::vector<double> nodes, std::vector<double> rhoVals,
               std::vector<double> slopes, double inverseTol)
    : x_(std::move(nodes)), rho_(std::move(rhoVals)), drho_(std::move(slopes)),
      invTol_(inverseTol) {
  if (x_.size() < 2 || x_.size() != rho_.size() || x_.size() != drho_.size())
    throw Error("RhoMap table size mismatch");
  for (size_t i = 0; i + 1 < x_.size(); ++i) {
    if (!(x_[i + 1] > x_[i])) throw Error("RhoMap nodes not increasing");
    if (!(rho_[i + 1] > rho_[i])) throw NonIntegrableDensity("rho table not monotone");
  }
  for (double d : drho_)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw NonIntegrableDensity("rho slope negative or non-finite");
}

size_t RhoMap::cellOf(double x) const {
  if (x <= x_.front()) return 0;
  if (x >= x_.back()) return x_.size() - 2;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  return static_cast<size_t>(it - x_.begin()) - 1;
}

double RhoMap::forward(double x) const {
  const size_t i = cellOf(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double delta = (rho_[i + 1] - rho_[i]) / h;
  // Fritsch-Carlson clamp keeps the Hermite monotone even on coarse cells.
  const double d0 = std::min(drho_[i], 3.0 * delta);
  const double d1 = std::min(drho_[i + 1], 3.0 * delta);
  const double t2 = t * t, t3 = t2 * t;
  return rho_[i] * (2 * t3 - 3 * t2 + 1) + h * d0 * (t3 - 2 * t2 + t) +
         rho_[i + 1] * (-2 * t3 + 3 * t2) + h * d1 * (t3 - t2);
}

double RhoMap::derivative(double x) const {
  const size_t i = cellOf(x);
  if (x == x_[i]) return drho_[i];
  if (x == x_[i + 1]) return drho_[i + 1];
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double delta = (rho_[i + 1] - rho_[i]) / h;
  const double d0 = std::min(drho_[i], 3.0 * delta);
  const double d1 = std::min(drho_[i + 1], 3.0 * delta);
  const double t2 = t * t;
  return rho_[i] * (6 * t2 - 6 * t) / h + d0 * (3 * t2 - 4 * t + 1) +
         rho_[i + 1] * (-6 * t2 + 6 * t) / h + d1 * (3 * t2 - 2 * t);
}

double RhoMap::inverse(double y) const {
  if (y <= rho_.front()) return x_.front();
  if (y >= rho_.back()) return x_.back();
  const auto it = std::upper_bound(rho_.begin(), rho_.end(), y);
  const size_t i = static_cast<size_t>(it - rho_.begin()) - 1;
  double lo = x_[i], hi = x_[i + 1];
  for (int k = 0; k < 200 && hi - lo > invTol_ * std::max(1.0, std::abs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (forward(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

RhoMap build_rho_on_nodes(const WeightField& mu, const WeightField& w,
                          std::vector<double> nodes, double anchor,
                          const RhoOptions& opts) {
  const size_t N = nodes.size();
  if (N < 3) throw Error("build_rho needs at least 3 nodes");
  const auto singular = merged_singular(mu, w);
  auto density = [&mu, &w](double x) { return density_at(mu, w, x); };

  std::vector<double> slopes(N);
  for (size_t i = 0; i < N; ++i) slopes[i] = density(nodes[i]);

  std::vector<double> rho(N, 0.0);
  for (size_t i = 0; i + 1 < N; ++i) {
    QuadResult cell =
        integrate_singular_aware(density, nodes[i], nodes[i + 1], singular, opts.cellQuad);
    if (cell.status == QuadStatus::Divergent)
      throw NonIntegrableDensity("sqrt(mu/w) not integrable inside the node range");
    rho[i + 1] = rho[i] + cell.value;
  }

  // Shift so that rho(anchor) = 0. The anchor may sit outside the node range
  // (e.g. at a singular endpoint) as long as the improper integral converges.
  double offset = 0.0;
  if (anchor <= nodes.front()) {
    std::vector<double> sing = singular;
    sing.push_back(anchor);  // grade toward the anchor regardless
    QuadResult q =
        integrate_singular_aware(density, anchor, nodes.front(), sing, opts.cellQuad);
    if (!q.converged())
      throw NonIntegrableDensity("sqrt(mu/w) not integrable down to the anchor");
    offset = q.value;
  } else if (anchor >= nodes.back()) {
    QuadResult q =
        integrate_singular_aware(density, nodes.back(), anchor, singular, opts.cellQuad);
    if (!q.converged())
      throw NonIntegrableDensity("sqrt(mu/w) not integrable up to the anchor");
    offset = -q.value - rho.back();
  } else {
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), anchor);
    const size_t i = static_cast<size_t>(it - nodes.begin()) - 1;
    QuadResult q =
        integrate_singular_aware(density, nodes[i], anchor, singular, opts.cellQuad);
    if (!q.converged()) throw NonIntegrableDensity("anchor offset integral diverges");
    offset = -(rho[i] + q.value);
  }
  for (double& v : rho) v += offset;

  return RhoMap(std::move(nodes), std::move(rho), std::move(slopes), opts.inverseTol);
}

RhoMap build_rho(const WeightField& mu, const WeightField& w, double xMin, double xMax,
                 double anchor, const RhoOptions& opts) {
  if (!(xMax > xMin)) throw Error("build_rho: empty interval");
  std::vector<double> nodes(opts.nCells + 1);
  for (int k = 0; k <= opts.nCells; ++k) {
    const double s = std::pow(double(k) / opts.nCells, opts.gradingPower);
    nodes[k] = xMin + (xMax - xMin) * s;
  }
  // Nudge nodes off the weight singular set.
  const auto singular = merged_singular(mu, w);
  for (size_t i = 0; i < nodes.size(); ++i)
    for (double s : singular)
      if (std::abs(nodes[i] - s) < 1e-13 * std::max(1.0, std::abs(s))) {
        const double gap = (xMax - xMin) / opts.nCells;
        nodes[i] += 0.25 * gap;
      }
  return build_rho_on_nodes(mu, w, std::move(nodes), anchor, opts);
}

// ---------------------------------------------------------------------------
// Completeness
// ---------------------------------------------------------------------------

CompletenessVerdict completeness_check(const WeightField& mu, const WeightField& w,
                                       double c1, double c2, double anchor,
                                       const QuadOptions& optsIn) {
  QuadOptions opts = optsIn;
  opts.recordPartials = true;
  auto density = [&mu, &w](double x) { return density_at(mu, w, x); };
  CompletenessVerdict verdict;

  {  // toward c1
    QuadResult q;
    if (std::isinf(c1)) {
      auto reflected = [&density](double u) { return density(-u); };
      q = integrate_to_infinity(reflected, -anchor, opts);
    } else {
      q = integrate_graded(density, c1, anchor, true, false, opts);
    }
    verdict.leftDivergent = q.status == QuadStatus::Divergent;
    verdict.leftConclusive = q.status != QuadStatus::Inconclusive;
    verdict.leftPartialIntegrals = q.partialSums;
  }
  {  // toward c2
    QuadResult q;
    if (std::isinf(c2)) {
      q = integrate_to_infinity(density, anchor, opts);
    } else {
      q = integrate_graded(density, anchor, c2, false, true, opts);
    }
    verdict.rightDivergent = q.status == QuadStatus::Divergent;
    verdict.rightConclusive = q.status != QuadStatus::Inconclusive;
    verdict.rightPartialIntegrals = q.partialSums;
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// nu and identities
// ---------------------------------------------------------------------------

WeightField nu_from_rho(const WeightField& mu, const WeightField& w, const RhoMap& rho) {
  auto rhoPtr = std::make_shared<RhoMap>(rho);
  auto muC = std::make_shared<WeightField>(mu);
  auto wC = std::make_shared<WeightField>(w);
  auto eval = [rhoPtr, muC, wC](double y) {
    const double x = rhoPtr->inverse(y);
    return std::sqrt(muC->evalScalar(x) * wC->evalScalar(x));
  };
  std::vector<double> singularImages;
  for (double s : merged_singular(mu, w))
    if (s > rho.xMin() && s < rho.xMax()) singularImages.push_back(rho.forward(s));
  return WeightField::closedForm("nu(" + mu.spec() + "," + w.spec() + ")", eval,
                                 Domain::interval(rho.yMin(), rho.yMax()),
                                 singularImages);
}

double rho_identity_defect(const WeightField& mu, const WeightField& w,
                           const RhoMap& rho) {
  const WeightField nu = nu_from_rho(mu, w, rho);
  double worst = 0.0;
  const auto& xs = rho.nodes();
  for (size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double nuHere = nu.evalScalar(rho.values()[i]);
    const double muHere = mu.evalScalar(x);
    const double wHere = w.evalScalar(x);
    const double dr = rho.slopes()[i];
    worst = std::max(worst, std::abs(muHere - nuHere * dr) / std::max(1.0, muHere));
    worst = std::max(worst, std::abs(wHere * dr - nuHere) / std::max(1.0, nuHere));
  }
  return worst;
}

PowerClassification classify_power_weights(double alpha, double beta) {
  constexpr double tol = 1e-12;
  PowerClassification c;
  const double s = alpha + beta + 2.0;
  if (s > tol) {
    c.powerCase = 1;
    c.nuInA2 = alpha > -1.0 && beta > -1.0;
    c.nuExponent = (alpha - beta) / s;
  } else if (s < -tol) {
    c.powerCase = 2;
    c.nuInA2 = alpha < -1.0 && beta < -1.0;
    c.nuExponent = (alpha - beta) / s;
  } else {
    c.powerCase = 3;
    c.nuInA2 = std::abs(alpha + 1.0) <= tol && std::abs(beta + 1.0) <= tol;
    c.nuExponent = 0.5 * (alpha - beta);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Pullback and verifications
// ---------------------------------------------------------------------------

GridPair pullback_pair(const RhoMap& rho, const std::vector<double>& v1,
                       const std::vector<double>& v2) {
  const size_t N = rho.nodes().size();
  if (v1.size() != N || v2.size() != N)
    throw GridMismatch("pullback_pair: sample count differs from the rho table");
  GridPair out;
  out.first = v1;
  out.second.resize(N);
  for (size_t i = 0; i < N; ++i) out.second[i] = v2[i] * rho.slopes()[i];
  return out;
}

namespace {

double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
  double s = 0.0;
  for (size_t i = 0; i + 1 < x.size(); ++i)
    s += 0.5 * (f[i] + f[i + 1]) * (x[i + 1] - x[i]);
  return s;
}

}  // namespace

double verify_isometry(const RhoMap& rho, const WeightField& mu, const WeightField& w,
                       const std::vector<std::pair<ScalarFn, ScalarFn>>& testPairs) {
  const auto& xs = rho.nodes();
  const auto& ys = rho.values();
  const size_t N = xs.size();
  double worst = 0.0;
  for (const auto& [v1, v2] : testPairs) {
    std::vector<double> lhsDen(N), rhsDen(N);
    for (size_t i = 0; i < N; ++i) {
      const double a = v1(ys[i]);
      const double b = v2(ys[i]);
      const double dr = rho.slopes()[i];
      const double nuHere = std::sqrt(mu.evalScalar(xs[i]) * w.evalScalar(xs[i]));
      lhsDen[i] = a * a * mu.evalScalar(xs[i]) + (b * dr) * (b * dr) * w.evalScalar(xs[i]);
      rhsDen[i] = (a * a + b * b) * nuHere;
    }
    const double lhs = trapezoid(xs, lhsDen);
    const double rhs = trapezoid(ys, rhsDen);
    const double scale = std::max(rhs, 1e-300);
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

double verify_similarity_1d(const WeightField& mu, const WeightField& w,
                            const RhoMap& rho,
                            const std::vector<std::pair<ScalarFn, ScalarFn>>& testPairs) {
  const std::vector<double>& xNodes = rho.nodes();
  const std::vector<double>& yNodes = rho.values();
  const WeightField nu = nu_from_rho(mu, w, rho);

  const WeightedGrid gx = WeightedGrid::interval1d(xNodes, mu, w);
  const WeightedGrid gy = WeightedGrid::interval1d(yNodes, nu, nu);
  const WeightedOperator Dx = assemble_D(gx);
  const WeightedOperator Dy = assemble_D(gy);

  const int Sx = gx.scalarDim();
  const int Vx = gx.vectorDim();
  const auto yMids = gy.vectorPoints();
  const auto xMids = gx.vectorPoints();

  auto interpYMids = [&yMids](const VecC& z2, double y) {
    if (y <= yMids.front()) return z2(0);
    if (y >= yMids.back()) return z2(z2.size() - 1);
    const auto it = std::upper_bound(yMids.begin(), yMids.end(), y);
    const size_t i = static_cast<size_t>(it - yMids.begin()) - 1;
    const double t = (y - yMids[i]) / (yMids[i + 1] - yMids[i]);
    return (1.0 - t) * z2(i) + t * z2(i + 1);
  };

  double worst = 0.0;
  for (const auto& [v1, v2] : testPairs) {
    VecC v(Dy.dim());
    for (int k = 0; k < gy.scalarDim(); ++k) v(k) = v1(yNodes[k + 1]);
    for (int i = 0; i < gy.vectorDim(); ++i) v(gy.scalarDim() + i) = v2(yMids[i]);
    const VecC z = Dy.A * v;

    VecC u(Dx.dim());
    for (int k = 0; k < Sx; ++k) u(k) = v1(rho.forward(xNodes[k + 1]));
    for (int i = 0; i < Vx; ++i)
      u(Sx + i) = v2(rho.forward(xMids[i])) * rho.derivative(xMids[i]);
    const VecC zu = Dx.A * u;

    VecC pulled(Dx.dim());
    for (int k = 0; k < Sx; ++k) pulled(k) = z(k);
    const VecC z2 = z.tail(gy.vectorDim());
    for (int i = 0; i < Vx; ++i)
      pulled(Sx + i) =
          interpYMids(z2, rho.forward(xMids[i])) * rho.derivative(xMids[i]);

    const double num = Dx.G.norm(zu - pulled);
    const double den = std::max(Dy.G.norm(z), 1e-300);
    worst = std::max(worst, num / den);
  }
  return worst;
}

}  // namespace mwlab
