// Command-line front end: every experiment family is a subcommand emitting
// machine-readable JSON (17 significant digits) and optional CSV artifacts.
// Fixed seed + fixed config = byte-identical output.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "mwlab/bvp.hpp"
#include "mwlab/errors.hpp"
#include "mwlab/jsonio.hpp"
#include "mwlab/kato.hpp"
#include "mwlab/metric2d.hpp"
#include "mwlab/opcalc.hpp"
#include "mwlab/rubberband.hpp"
#include "mwlab/transforms.hpp"
#include "mwlab/weights.hpp"

using namespace mwlab;

namespace {

int worker_count() {
  const char* env = std::getenv("MWLAB_WORKERS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::string token;
  std::stringstream ss(s);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      out.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw ConfigInvalid("bad number '" + token + "' in list '" + s + "'");
    }
  }
  return out;
}

std::vector<Vec2> parse_centers(const std::string& arg) {
  std::string text = arg;
  std::ifstream file(arg);
  if (file.good()) {
    std::stringstream buf;
    buf << file.rdbuf();
    text = buf.str();
  }
  // accept JSON-style [[x,y],...], "x,y;x,y" or whitespace-separated pairs:
  // scan out every number in order
  std::vector<double> nums;
  const char* p = text.c_str();
  char* end = nullptr;
  while (*p) {
    const double v = std::strtod(p, &end);
    if (end == p) {
      ++p;
      continue;
    }
    nums.push_back(v);
    p = end;
  }
  if (nums.size() < 2 || nums.size() % 2 != 0)
    throw ConfigInvalid("centers '" + arg + "' must contain coordinate pairs");
  std::vector<Vec2> centers;
  for (size_t i = 0; i + 1 < nums.size(); i += 2)
    centers.emplace_back(nums[i], nums[i + 1]);
  return centers;
}

// plain "key = value..." text config; '#' comments, sections ignored
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigInvalid("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r[]");
      const auto e = s.find_last_not_of(" \t\r[]");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<double> config_doubles(const std::map<std::string, std::string>& kv,
                                   const std::string& key,
                                   const std::vector<double>& fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (ss >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigInvalid("config key '" + key + "' holds a bad number '" + tok + "'");
    }
  }
  return out;
}

void emit(const JsonValue& j, const std::string& outPath) {
  const std::string text = j.dump(2) + "\n";
  if (outPath.empty() || outPath == "-") {
    std::cout << text;
  } else {
    std::ofstream out(outPath, std::ios::binary);
    out << text;
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw ConfigInvalid("cannot write '" + path + "'");
  out << text;
}

JsonValue a2_report_json(const A2Report& rep) {
  JsonValue j = JsonValue::object();
  j["characteristic"] = rep.characteristic;
  j["family"] = rep.family;
  JsonValue ball = JsonValue::object();
  ball["lo"] = rep.argmaxLo;
  ball["hi"] = rep.argmaxHi;
  j["argmaxBall"] = ball;
  j["quadratureTolerance"] = rep.quadratureTolerance;
  j["finite"] = rep.finite;
  j["quadratureDiverged"] = rep.quadratureDiverged;
  JsonArray perDepth;
  for (double v : rep.perDepthSup) perDepth.push_back(v);
  j["perDepthSup"] = std::move(perDepth);
  return j;
}

CoeffFn phase_coefficient(const WeightField& base, double phase) {
  auto p = std::make_shared<WeightField>(base);
  return [p, phase](double x) { return Complex(1.0, phase) * p->evalScalar(x); };
}

WeightedGrid make_grid(const std::string& topology, int n, double length,
                       const WeightField& mu, const WeightField& w) {
  if (topology == "periodic") return WeightedGrid::periodic1d(n, length, mu, w);
  if (topology == "dirichlet") {
    std::vector<double> nodes(n + 1);
    for (int k = 0; k <= n; ++k) nodes[k] = 0.05 + length * k / n;
    return WeightedGrid::interval1d(nodes, mu, w);
  }
  throw ConfigInvalid("unknown topology '" + topology + "'");
}

// ---------------------------------------------------------------------------

struct CommonOpts {
  std::string out;
  bool dryRun = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--out", c.out, "output JSON path (default stdout)");
  cmd->add_flag("--dry-run", c.dryRun, "validate the configuration and exit");
}

int run_a2(const std::string& weightSpec, int depth, double lo, double hi, int scales,
           const CommonOpts& c) {
  const WeightField w = parse_weight_spec(weightSpec);
  BallFamily fam;
  fam.lo = lo;
  fam.hi = hi;
  fam.maxDepth = depth;
  fam.scaleLadder = scales;
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    j["weight"] = weightSpec;
    emit(j, c.out);
    return 0;
  }
  const A2Report rep = w.kind() == WeightField::Kind::Scalar
                           ? a2_characteristic_scalar(w, fam)
                           : a2_characteristic_matrix(w, fam);
  JsonValue j = a2_report_json(rep);
  j["weight"] = weightSpec;
  emit(j, c.out);
  return 0;
}

int run_rubberband(const std::string& muSpec, const std::string& wSpec,
                   const std::string& interval, double anchor, double xMin, double xMax,
                   int n, const std::string& csvPath, const CommonOpts& c) {
  const WeightField mu = parse_weight_spec(muSpec);
  const WeightField w = parse_weight_spec(wSpec);
  auto parseEnd = [](const std::string& tok, double fallback) {
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (tok.empty()) return fallback;
    return std::stod(tok);
  };
  double c1 = 0.0, c2 = std::numeric_limits<double>::infinity();
  if (!interval.empty()) {
    const auto comma = interval.find(',');
    if (comma == std::string::npos)
      throw ConfigInvalid("interval must look like '0,inf'");
    c1 = parseEnd(interval.substr(0, comma), 0.0);
    c2 = parseEnd(interval.substr(comma + 1), c2);
  }
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }

  JsonValue j = JsonValue::object();
  // classification for power-weight pairs: mu = x^alpha, w = x^{-beta}
  auto powerExponent = [](const std::string& spec, double& e) {
    const auto colon = spec.find(':');
    if (spec.rfind("power", 0) != 0 && spec.rfind("abspower", 0) != 0) return false;
    e = colon == std::string::npos ? 0.0 : std::stod(spec.substr(colon + 1));
    return true;
  };
  double alpha = 0.0, wExp = 0.0;
  if (powerExponent(muSpec, alpha) && powerExponent(wSpec, wExp)) {
    const PowerClassification cls = classify_power_weights(alpha, -wExp);
    j["case"] = cls.powerCase;
    j["nuInA2"] = cls.nuInA2;
    j["nuExponent"] = cls.nuExponent;
  }

  const CompletenessVerdict verdict = completeness_check(mu, w, c1, c2, anchor);
  JsonValue comp = JsonValue::object();
  comp["leftDivergent"] = verdict.leftDivergent;
  comp["rightDivergent"] = verdict.rightDivergent;
  comp["leftConclusive"] = verdict.leftConclusive;
  comp["rightConclusive"] = verdict.rightConclusive;
  j["completeness"] = comp;

  RhoOptions ropt;
  ropt.nCells = n;
  const RhoMap rho = build_rho(mu, w, xMin, xMax, anchor, ropt);
  const WeightField nu = nu_from_rho(mu, w, rho);
  JsonArray rhoTable, nuTable;
  std::string csv = "x,rho,nu\n";
  for (size_t i = 0; i < rho.nodes().size(); i += std::max<size_t>(1, rho.nodes().size() / 128)) {
    const double x = rho.nodes()[i];
    const double y = rho.values()[i];
    const double nuv = nu.evalScalar(y);
    JsonArray row;
    row.push_back(x);
    row.push_back(y);
    rhoTable.push_back(std::move(row));
    JsonArray nrow;
    nrow.push_back(y);
    nrow.push_back(nuv);
    nuTable.push_back(std::move(nrow));
    csv += csv_row({format_double(x), format_double(y), format_double(nuv)});
  }
  j["rhoTable"] = std::move(rhoTable);
  j["nuTable"] = std::move(nuTable);
  j["identityDefect"] = rho_identity_defect(mu, w, rho);
  if (!csvPath.empty()) write_text(csvPath, csv);
  emit(j, c.out);
  return 0;
}

int run_geodesic_disks(const std::string& metric, double a, const std::string& centers,
                       const std::string& radii, int rays, const std::string& outDir,
                       const CommonOpts& c) {
  const GraphFamily fam = parse_graph_family(metric);
  const std::vector<Vec2> ctrs = parse_centers(centers);
  const std::vector<double> rs = parse_double_list(radii);
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    j["disks"] = static_cast<long long>(ctrs.size() * rs.size());
    emit(j, c.out);
    return 0;
  }
  const MetricField m = graph_metric_field(fam, a);
  JsonArray diskReports;
  int fileIdx = 0;
  for (const Vec2& center : ctrs)
    for (double r : rs) {
      const GeodesicDisk disk = geodesic_disk(m, center, r, rays);
      JsonValue d = JsonValue::object();
      JsonArray cj;
      cj.push_back(center[0]);
      cj.push_back(center[1]);
      d["center"] = std::move(cj);
      d["radius"] = r;
      d["axisRatio"] = disk.axisRatio();
      d["singularValueRatio"] = singular_value_ratio(m, center);
      double worstArc = 0.0;
      for (const auto& ray : disk.rays) worstArc = std::max(worstArc, ray.arclengthError);
      d["maxArclengthError"] = worstArc;
      diskReports.push_back(std::move(d));
      if (!outDir.empty()) {
        std::string csv = "x,y\n";
        for (const Vec2& p : disk.boundary)
          csv += csv_row({format_double(p[0]), format_double(p[1])});
        write_text(outDir + "/disk_" + std::to_string(fileIdx++) + ".csv", csv);
      }
    }
  JsonValue j = JsonValue::object();
  j["metric"] = metric;
  j["disks"] = std::move(diskReports);
  emit(j, c.out);
  return 0;
}

int run_funcalc(const std::string& fnName, double t, const std::string& muSpec,
                const std::string& wSpec, double aPhase, int n,
                const std::string& topology, const std::string& exportPath,
                const CommonOpts& c) {
  FnSpec fn;
  if (fnName == "sgn") fn.kind = CalcFn::Sign;
  else if (fnName == "sqrt") fn.kind = CalcFn::SqrtOfSquare;
  else if (fnName == "psi") fn.kind = CalcFn::PsiT;
  else if (fnName == "resolvent") fn.kind = CalcFn::ResolventProduct;
  else throw ConfigInvalid("unknown function '" + fnName + "'");
  fn.t = t;
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  const WeightField mu = parse_weight_spec(muSpec);
  const WeightField w = parse_weight_spec(wSpec);
  const WeightedGrid grid = make_grid(topology, n, 2.0, mu, w);
  const WeightedOperator D = assemble_D(grid);
  const BOperator B = assemble_B(grid, phase_coefficient(mu, aPhase),
                                 phase_coefficient(w, 0.0));
  const WeightedOperator BD = multiply(B.op, D.A, "BD");
  SpectralData diag;
  const MatC f = fn_calculus(BD, fn, {}, &diag);

  JsonValue j = JsonValue::object();
  j["fn"] = fnName;
  j["n"] = n;
  j["spectralKind"] = diag.kind == SpectralData::Kind::HermitianEigen ? "hermitianEigen"
                      : diag.kind == SpectralData::Kind::GeneralEigen ? "generalEigen"
                                                                      : "schur";
  j["eigvecCond"] = diag.eigvecCond;
  j["reconstructErr"] = diag.reconstructErr;
  j["accretivityConstants"] = JsonValue::object();
  j["accretivityConstants"]["bound"] = B.report.boundConst;
  j["accretivityConstants"]["accr"] = B.report.accrConst;
  // the bisector half-angle is a measured output: the multiplier's accretivity
  // angle read off the diagonal entries
  double angle = 0.0;
  for (int i = 0; i < B.op.dim(); ++i)
    angle = std::max(angle, std::abs(std::arg(B.op.A(i, i))));
  j["accretivityAngle"] = angle;
  if (fn.kind == CalcFn::Sign) {
    const MatC proj = range_projection(BD);
    j["sgnSquaredVsProjection"] = (f * f - proj).norm() / std::max(1.0, proj.norm());
  }
  if (fn.kind == CalcFn::SqrtOfSquare) {
    const MatC sgn = fn_calculus(BD, {CalcFn::Sign});
    j["sqrtVsSgnTimesBD"] = (f - sgn * BD.A).norm() / std::max(1.0, f.norm());
  }
  if (!exportPath.empty()) write_text(exportPath, operator_to_json(BD).dump(2) + "\n");
  emit(j, c.out);
  return 0;
}

int run_quadratic_estimate(int n, const std::string& muSpec, const std::string& wSpec,
                           const std::string& topology, int samples,
                           std::uint64_t seed, const CommonOpts& c) {
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  const WeightField mu = parse_weight_spec(muSpec);
  const WeightField w = parse_weight_spec(wSpec);
  const WeightedGrid grid = make_grid(topology, n, 1.0, mu, w);
  const WeightedOperator D = assemble_D(grid);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const MatC proj = range_projection(D);
  JsonArray rows;
  bool ok = true;
  for (int s = 0; s < samples; ++s) {
    VecC u(D.dim());
    for (int i = 0; i < D.dim(); ++i) u(i) = Complex(g(rng), g(rng));
    const QuadraticEstimate qe = quadratic_functional(D, u);
    const double pn = D.G.norm(proj * u);
    JsonValue row = JsonValue::object();
    row["Q2"] = qe.Q2;
    row["rangeMass"] = pn * pn;
    row["normalized"] = qe.Q2 / (pn * pn);
    row["truncationEstimate"] = qe.truncationEstimate;
    row["tMin"] = qe.tMin;
    row["tMax"] = qe.tMax;
    ok = ok && std::abs(qe.Q2 / (pn * pn) - 0.5) < 0.01;
    rows.push_back(std::move(row));
  }
  JsonValue j = JsonValue::object();
  j["rows"] = std::move(rows);
  j["allWithinTolerance"] = ok;
  emit(j, c.out);
  return ok ? 0 : 1;
}

int run_offdiagonal(int n, double t, const std::string& muSpec, const std::string& wSpec,
                    const std::string& topology, const std::string& gaps,
                    const CommonOpts& c) {
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  const WeightField mu = parse_weight_spec(muSpec);
  const WeightField w = parse_weight_spec(wSpec);
  const WeightedGrid grid = make_grid(topology, n, 1.0, mu, w);
  const WeightedOperator D = assemble_D(grid);
  std::vector<int> E;
  for (int i = 0; i < n / 16; ++i) E.push_back(i);
  JsonArray rows;
  for (double mult : parse_double_list(gaps)) {
    const int gap = std::max(1, static_cast<int>(std::round(mult * t * n)));
    std::vector<int> F;
    for (int i = static_cast<int>(E.size()) + gap;
         i < static_cast<int>(E.size()) + gap + n / 16 && i < n; ++i)
      F.push_back(i);
    if (F.empty()) continue;
    JsonValue row = JsonValue::object();
    row["distOverT"] = circle_node_distance(grid, E, F) / t;
    row["ratio"] = offdiagonal_profile(D, grid, E, F, t);
    rows.push_back(std::move(row));
  }
  JsonValue j = JsonValue::object();
  j["t"] = t;
  j["rows"] = std::move(rows);
  emit(j, c.out);
  return 0;
}

int run_kato_ratio(const std::string& muSpec, const std::string& wSpec, double aPhase,
                   int n, const std::string& tests, const CommonOpts& c) {
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  KatoExperiment exp;
  exp.mu = parse_weight_spec(muSpec);
  exp.w = parse_weight_spec(wSpec);
  if (aPhase != 0.0) exp.a = phase_coefficient(exp.mu, aPhase);
  exp.n = n;
  exp.length = 2.0;
  const HypothesisReport hyp = check_kato_hypotheses(exp);
  const WeightedGrid grid = WeightedGrid::periodic1d(n, exp.length, exp.mu, exp.w);

  RatioTable table;
  for (auto& [name, fnc] : test_family(tests, exp.length)) {
    RatioRow row;
    row.testId = name;
    row.hypothesisOk = hyp.satisfied;
    try {
      const RatioComputation rc = kato_ratio_1d(exp, grid.sampleScalar(fnc));
      row.lhsNorm = rc.lhs;
      row.rhsNorm = rc.rhs;
      row.ratio = rc.ratio;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
    table.rows.push_back(row);
  }
  table.summarize();
  JsonValue j = JsonValue::object();
  JsonArray rows;
  for (const RatioRow& r : table.rows) {
    JsonValue row = JsonValue::object();
    row["testId"] = r.testId;
    row["lhsNorm"] = r.lhsNorm;
    row["rhsNorm"] = r.rhsNorm;
    row["ratio"] = r.ratio;
    row["hypothesisOk"] = r.hypothesisOk;
    row["ok"] = r.ok;
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["minRatio"] = table.minRatio;
  j["maxRatio"] = table.maxRatio;
  j["spread"] = table.spread;
  emit(j, c.out);
  return 0;
}

int run_kato_sweep(const std::string& configPath, std::uint64_t seedOverride,
                   bool haveSeed, const std::string& csvPath, const CommonOpts& c) {
  const auto kv = read_config(configPath);
  for (const auto& [key, value] : kv) {
    static const std::vector<std::string> known{"alphas", "betas", "ns",    "tests",
                                                "aphase", "seed",  "length"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigInvalid("unknown config key '" + key + "'");
    (void)value;
  }
  SweepSpec spec;
  spec.alphas = config_doubles(kv, "alphas", spec.alphas);
  spec.betas = config_doubles(kv, "betas", spec.betas);
  const auto nsd = config_doubles(kv, "ns", {64});
  spec.ns.clear();
  for (double v : nsd) spec.ns.push_back(static_cast<int>(v));
  if (kv.count("tests")) {
    spec.tests.clear();
    std::stringstream ss(kv.at("tests"));
    std::string tok;
    while (ss >> tok) spec.tests.push_back(tok);
  }
  spec.aPhase = config_doubles(kv, "aphase", {spec.aPhase})[0];
  spec.length = config_doubles(kv, "length", {spec.length})[0];
  spec.seed = static_cast<std::uint64_t>(config_doubles(kv, "seed", {0.0})[0]);
  if (haveSeed) spec.seed = seedOverride;

  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    j["cells"] = static_cast<long long>(spec.alphas.size() * spec.betas.size() *
                                        spec.ns.size() * spec.tests.size());
    emit(j, c.out);
    return 0;
  }

  const SweepResult result = kato_sweep(spec, worker_count());
  JsonValue j = JsonValue::object();
  j["seed"] = static_cast<long long>(spec.seed);
  JsonArray rows;
  std::string csv = "alpha,beta,n,testId,lhs,rhs,ratio,hypothesisOk,ok\n";
  for (const SweepRow& r : result.rows) {
    JsonValue row = JsonValue::object();
    row["alpha"] = r.alpha;
    row["beta"] = r.beta;
    row["n"] = r.n;
    row["testId"] = r.ratio.testId;
    row["lhs"] = r.ratio.lhsNorm;
    row["rhs"] = r.ratio.rhsNorm;
    row["ratio"] = r.ratio.ratio;
    row["hypothesisOk"] = r.ratio.hypothesisOk;
    row["ok"] = r.ratio.ok;
    if (!r.ratio.error.empty()) row["error"] = r.ratio.error;
    rows.push_back(std::move(row));
    csv += csv_row({format_double(r.alpha), format_double(r.beta),
                    std::to_string(r.n), r.ratio.testId, format_double(r.ratio.lhsNorm),
                    format_double(r.ratio.rhsNorm), format_double(r.ratio.ratio),
                    r.ratio.hypothesisOk ? "1" : "0", r.ratio.ok ? "1" : "0"});
  }
  j["rows"] = std::move(rows);
  if (!csvPath.empty()) write_text(csvPath, csv);
  emit(j, c.out);
  return 0;
}

int run_piola_check(const std::string& mapName, int levels, const CommonOpts& c) {
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  auto bump1 = [](double x) {
    const double t = (x - 1.0) / 0.6;
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  };
  const WeightField one = WeightField::constant(1.0);
  JsonArray table;
  double prevChain = -1, prevPiola = -1, prevCov = -1;
  for (int level = 0; level < levels; ++level) {
    JsonValue row = JsonValue::object();
    row["level"] = level;
    double chain = 0, piola = 0, cov = 0, iso = 0;
    if (mapName == "inversion") {
      const Homeomorphism inv = Homeomorphism::inversionConformal2d();
      auto f2 = [](Vec2 p) {
        const double t = (p - Vec2(1.0, 0.0)).norm() / 0.3;
        return t < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
      };
      auto h2 = [f2](Vec2 p) { return Vec2(f2(p), -0.4 * f2(p + Vec2(0.05, 0))); };
      auto v2 = [](Vec2) { return 1.0; };
      auto V2 = [](Vec2) { return Mat2(Mat2::Identity()); };
      const int nq = 16 << level;
      const double step = 4e-3 / (1 << level);
      cov = change_of_variables_residual_2d(inv, f2, 0.5, 2.0, nq, 2 * nq);
      chain = chain_rule_residual_2d(inv, f2, v2, V2, 0.5, 2.0, 16, 32, step);
      piola = piola_residual_2d(inv, h2, v2, 0.5, 2.0, 16, 32, step);
      iso = piola_isometry_check_2d(inv, h2, V2, 0.5, 2.0, nq, 2 * nq);
    } else {
      Homeomorphism map = Homeomorphism::identity1d();
      if (mapName == "cubic") map = Homeomorphism::cubic1d();
      else if (mapName == "scaling") map = Homeomorphism::scaling1d(2.0);
      else if (mapName == "perturbation") map = Homeomorphism::smoothPerturbation1d(0.05);
      else if (mapName != "identity")
        throw ConfigInvalid("unknown map '" + mapName + "'");
      const int n = 64 << level;
      cov = change_of_variables_residual_1d(map, bump1, 0.2, 1.9, n);
      chain = chain_rule_residual_1d(map, bump1, one, one, 0.2, 1.9, n);
      piola = piola_residual_1d(map, bump1, one, 0.2, 1.9, n);
      iso = piola_isometry_check_1d(map, bump1, one, 0.2, 1.9, n);
    }
    row["changeOfVariables"] = cov;
    row["chainRule"] = chain;
    row["piola"] = piola;
    row["piolaIsometry"] = iso;
    if (prevChain > 0) row["chainOrder"] = std::log2(prevChain / std::max(chain, 1e-300));
    if (prevPiola > 0) row["piolaOrder"] = std::log2(prevPiola / std::max(piola, 1e-300));
    if (prevCov > 0) row["covOrder"] = std::log2(prevCov / std::max(cov, 1e-300));
    prevChain = chain;
    prevPiola = piola;
    prevCov = cov;
    table.push_back(std::move(row));
  }
  JsonValue j = JsonValue::object();
  j["map"] = mapName;
  j["levels"] = std::move(table);
  emit(j, c.out);
  return 0;
}

int run_mollify(const std::string& shape, int n, const std::string& tlist, bool vector,
                const std::string& wSpec, const CommonOpts& c) {
  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }
  const double a = -1.0, b = 1.0;
  const std::vector<double> ts = parse_double_list(tlist);
  auto sample = [&](double x) {
    if (shape == "step") return (std::abs(x) < 0.4 && x > 0) ? 1.0 : 0.0;
    const double t = x / 0.45;
    return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  };
  MollifyReport rep;
  if (vector) {
    std::vector<Eigen::Vector2d> f(n);
    for (int i = 0; i < n; ++i) {
      const double x = a + (b - a) * i / (n - 1);
      f[i] = Eigen::Vector2d(sample(x), -0.6 * sample(x - 0.1));
    }
    rep = mollify_and_dominate_vector(f, ts, parse_weight_spec(wSpec), a, b);
  } else {
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = sample(a + (b - a) * i / (n - 1));
    rep = mollify_and_dominate(f, ts, parse_weight_spec("const:1"), a, b);
  }
  JsonValue j = JsonValue::object();
  JsonArray werrs, serrs;
  for (double e : rep.weightedErrors) werrs.push_back(e);
  for (double e : rep.supErrors) serrs.push_back(e);
  j["weightedErrors"] = std::move(werrs);
  j["supErrors"] = std::move(serrs);
  j["dominationViolations"] = rep.dominationViolations;
  j["kernelMassDefect"] = rep.kernelMassDefect;
  emit(j, c.out);
  return rep.dominationViolations == 0 ? 0 : 1;
}

int run_bvp_neumann(const std::string& configPath, int n, double delta,
                    const std::string& csvPath, const CommonOpts& c) {
  std::map<std::string, std::string> kv;
  if (!configPath.empty()) kv = read_config(configPath);
  for (const auto& [key, value] : kv) {
    static const std::vector<std::string> known{"a",  "b",  "cc",     "d",
                                                "mu", "w",  "tfactor", "mode"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigInvalid("unknown config key '" + key + "'");
    (void)value;
  }
  const WeightField mu =
      kv.count("mu") ? parse_weight_spec(kv.at("mu")) : WeightField::constant(1.0);
  const WeightField w =
      kv.count("w") ? parse_weight_spec(kv.at("w")) : WeightField::constant(1.0);
  auto coeffOf = [&](const std::string& key, double fallback) {
    std::function<double(double)> fn = [fallback](double) { return fallback; };
    if (kv.count(key)) {
      const std::string v = kv.at(key);
      if (v == "mu") {
        auto p = std::make_shared<WeightField>(mu);
        fn = [p](double x) { return p->evalScalar(x); };
      } else if (v == "w") {
        auto p = std::make_shared<WeightField>(w);
        fn = [p](double x) { return p->evalScalar(x); };
      } else {
        const double value = std::stod(v);
        fn = [value](double) { return value; };
      }
    }
    return fn;
  };
  const auto aFn = coeffOf("a", 1.0);
  const auto bFn = coeffOf("b", 0.0);
  const auto cFn = coeffOf("cc", 0.0);
  const auto dFn = coeffOf("d", 1.0);
  const double tfactor = kv.count("tfactor") ? std::stod(kv.at("tfactor")) : 0.0;
  const int mode = kv.count("mode") ? std::atoi(kv.at("mode").c_str()) : 1;

  if (c.dryRun) {
    JsonValue j = JsonValue::object();
    j["dryRun"] = true;
    emit(j, c.out);
    return 0;
  }

  CylinderConfig cfg;
  cfg.nBase = n;
  cfg.nT = n;
  cfg.delta = delta;
  const CylinderGrid grid(cfg, mu, w);
  DivFormProblem prob;
  prob.A0 = [=](double t, double x) {
    Eigen::Matrix2cd m;
    m << aFn(x), bFn(x), cFn(x), dFn(x);
    return Eigen::Matrix2cd(m * (1.0 + tfactor * t / delta));
  };
  const double twoPi = 2.0 * M_PI;
  prob.dataBottom = [twoPi, mode](double x) {
    return Complex(std::cos(twoPi * mode * x), 0.0);
  };
  prob.dataTop = [](double) { return Complex(0.0, 0.0); };
  const MatC u = solve_divform_cylinder(grid, prob);
  const NeumannReport rep = neumann_ratio(grid, u, prob.A0);

  JsonValue j = JsonValue::object();
  j["lhs"] = rep.lhs;
  j["lhsNontangential"] = rep.lhsNontangential;
  j["lhsBulk"] = rep.lhsBulk;
  j["rhs"] = rep.rhs;
  j["ratio"] = rep.ratio;
  j["degenerate"] = rep.degenerate;
  j["crResidual"] = rep.crResidual;
  j["carlesonOfDiscrepancy"] = rep.carlesonOfDiscrepancy;
  j["traceSelfAdjointGap"] = rep.traceSelfAdjointGap;
  if (!csvPath.empty()) {
    // discrepancy magnitude heat table over (ladder rung, base node)
    std::string csv = "t,x,normalizedDiscrepancy\n";
    for (double t : grid.ladder())
      for (int jn = 0; jn < grid.nBase(); ++jn) {
        const Eigen::Matrix2cd E =
            prob.A0(t, grid.basePoints()[jn]) - prob.A0(0.0, grid.basePoints()[jn]);
        const double smu = std::sqrt(grid.muVals()(jn)), sw = std::sqrt(grid.wVals()(jn));
        Eigen::Matrix2cd M = E;
        M(0, 0) /= smu * smu;
        M(0, 1) /= smu * sw;
        M(1, 0) /= sw * smu;
        M(1, 1) /= sw * sw;
        csv += csv_row({format_double(t), format_double(grid.basePoints()[jn]),
                        format_double(M.norm())});
      }
    write_text(csvPath, csv);
  }
  emit(j, c.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-weight laboratory: weighted first-order operators, "
               "functional calculus, and degenerate boundary value problems"};
  app.require_subcommand(1);

  // a2
  auto* a2 = app.add_subcommand("a2", "Muckenhoupt characteristic over a dyadic family");
  std::string a2Weight = "const:1";
  int a2Depth = 8, a2Scales = 1;
  double a2Lo = -1.0, a2Hi = 1.0;
  CommonOpts a2c;
  a2->add_option("--weight", a2Weight, "weight spec, e.g. power:0.5 or rotation:10");
  a2->add_option("--depth", a2Depth, "dyadic refinement depth");
  a2->add_option("--lo", a2Lo);
  a2->add_option("--hi", a2Hi);
  a2->add_option("--scales", a2Scales, "scale-ladder rungs");
  add_common(a2, a2c);

  // rubberband
  auto* rb = app.add_subcommand("rubberband", "1D change of variables and nu tables");
  std::string rbMu = "power:1", rbW = "power:-1", rbInterval = "0,inf", rbCsv;
  double rbAnchor = 1.0, rbXMin = 0.01, rbXMax = 10.0;
  int rbN = 256;
  CommonOpts rbc;
  rb->add_option("--mu", rbMu);
  rb->add_option("--w", rbW);
  rb->add_option("--interval", rbInterval, "c1,c2 with inf allowed");
  rb->add_option("--anchor", rbAnchor);
  rb->add_option("--xmin", rbXMin);
  rb->add_option("--xmax", rbXMax);
  rb->add_option("--n", rbN);
  rb->add_option("--csv", rbCsv, "CSV path for (x, rho, nu)");
  add_common(rb, rbc);

  // geodesic-disks
  auto* gd = app.add_subcommand("geodesic-disks", "trace geodesic disks in a graph metric");
  std::string gdMetric = "tweaked-inversion", gdCenters = "0.4,0;0.2,0;0.1,0",
              gdRadii = "0.05", gdOutDir;
  double gdA = 1.0;
  int gdRays = 64;
  CommonOpts gdc;
  gd->add_option("--metric", gdMetric);
  gd->add_option("--a", gdA, "scalar-graph exponent");
  gd->add_option("--centers", gdCenters, "inline pairs x,y;x,y or a file of pairs");
  gd->add_option("--radii", gdRadii);
  gd->add_option("--rays", gdRays);
  gd->add_option("--outdir", gdOutDir, "directory for per-disk CSV polylines");
  add_common(gd, gdc);

  // funcalc
  auto* fc = app.add_subcommand("funcalc", "holomorphic functional calculus of BD");
  std::string fcFn = "sgn", fcMu = "const:1", fcW = "const:1", fcExport;
  std::string fcTopology = "periodic";
  double fcT = 1.0, fcPhase = 0.0;
  int fcN = 64;
  CommonOpts fcc;
  fc->add_option("--fn", fcFn, "sgn | sqrt | psi | resolvent");
  fc->add_option("--topology", fcTopology, "periodic | dirichlet");
  fc->add_option("--t", fcT);
  fc->add_option("--mu", fcMu);
  fc->add_option("--w", fcW);
  fc->add_option("--a-phase", fcPhase);
  fc->add_option("--n", fcN);
  fc->add_option("--export", fcExport, "write the operator matrix as JSON");
  add_common(fc, fcc);

  // quadratic-estimate
  auto* qe = app.add_subcommand("quadratic-estimate", "square function normalization");
  std::string qeMu = "const:1", qeW = "const:1", qeTopology = "periodic";
  int qeN = 128, qeSamples = 10;
  std::uint64_t qeSeed = 0;
  CommonOpts qec;
  qe->add_option("--n", qeN);
  qe->add_option("--topology", qeTopology, "periodic | dirichlet");
  qe->add_option("--mu", qeMu);
  qe->add_option("--w", qeW);
  qe->add_option("--samples", qeSamples);
  qe->add_option("--seed", qeSeed);
  add_common(qe, qec);

  // offdiagonal
  auto* od = app.add_subcommand("offdiagonal", "resolvent off-diagonal decay profile");
  std::string odMu = "const:1", odW = "const:1", odGaps = "1,2,4,8";
  std::string odTopology = "periodic";
  int odN = 128;
  double odT = 0.05;
  CommonOpts odc;
  od->add_option("--n", odN);
  od->add_option("--topology", odTopology, "periodic | dirichlet");
  od->add_option("--t", odT);
  od->add_option("--mu", odMu);
  od->add_option("--w", odW);
  od->add_option("--gaps", odGaps, "multiples of t for the set separation");
  add_common(od, odc);

  // kato-ratio
  auto* kr = app.add_subcommand("kato-ratio", "square root ratio table");
  std::string krMu = "const:1", krW = "const:1", krTests = "bumps";
  double krPhase = 0.0;
  int krN = 64;
  CommonOpts krc;
  kr->add_option("--mu", krMu);
  kr->add_option("--w", krW);
  kr->add_option("--a-phase", krPhase);
  kr->add_option("--n", krN);
  kr->add_option("--tests", krTests);
  add_common(kr, krc);

  // kato-sweep
  auto* ks = app.add_subcommand("kato-sweep", "lattice sweep from a config file");
  std::string ksConfig, ksCsv;
  std::uint64_t ksSeed = 0;
  CommonOpts ksc;
  ks->add_option("--config", ksConfig)->required();
  auto* seedOpt = ks->add_option("--seed", ksSeed, "override the config seed");
  ks->add_option("--csv", ksCsv);
  add_common(ks, ksc);

  // piola-check
  auto* pc = app.add_subcommand("piola-check", "transform residual convergence table");
  std::string pcMap = "inversion";
  int pcLevels = 5;
  CommonOpts pcc;
  pc->add_option("--map", pcMap, "identity | cubic | scaling | perturbation | inversion");
  pc->add_option("--levels", pcLevels);
  add_common(pc, pcc);

  // mollify
  auto* mo = app.add_subcommand("mollify", "Friedrichs mollification report");
  std::string moShape = "bump", moT = "0.2,0.1,0.05", moW = "rotation:3";
  int moN = 513;
  bool moVector = false;
  CommonOpts moc;
  mo->add_option("--f", moShape, "bump | step");
  mo->add_option("--n", moN);
  mo->add_option("--tlist", moT);
  mo->add_flag("--vector", moVector);
  mo->add_option("--W", moW, "matrix weight for the vector variant");
  add_common(mo, moc);

  // bvp-neumann
  auto* bn = app.add_subcommand("bvp-neumann", "Neumann solvability experiment");
  std::string bnConfig, bnCsv;
  int bnN = 32;
  double bnDelta = 1.0;
  CommonOpts bnc;
  bn->add_option("--A0", bnConfig, "coefficient config file");
  bn->add_option("--n", bnN);
  bn->add_option("--delta", bnDelta);
  bn->add_option("--csv", bnCsv, "discrepancy heat table");
  add_common(bn, bnc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (a2->parsed()) return run_a2(a2Weight, a2Depth, a2Lo, a2Hi, a2Scales, a2c);
    if (rb->parsed())
      return run_rubberband(rbMu, rbW, rbInterval, rbAnchor, rbXMin, rbXMax, rbN, rbCsv, rbc);
    if (gd->parsed())
      return run_geodesic_disks(gdMetric, gdA, gdCenters, gdRadii, gdRays, gdOutDir, gdc);
    if (fc->parsed())
      return run_funcalc(fcFn, fcT, fcMu, fcW, fcPhase, fcN, fcTopology, fcExport, fcc);
    if (qe->parsed())
      return run_quadratic_estimate(qeN, qeMu, qeW, qeTopology, qeSamples, qeSeed, qec);
    if (od->parsed()) return run_offdiagonal(odN, odT, odMu, odW, odTopology, odGaps, odc);
    if (kr->parsed()) return run_kato_ratio(krMu, krW, krPhase, krN, krTests, krc);
    if (ks->parsed()) return run_kato_sweep(ksConfig, ksSeed, seedOpt->count() > 0, ksCsv, ksc);
    if (pc->parsed()) return run_piola_check(pcMap, pcLevels, pcc);
    if (mo->parsed()) return run_mollify(moShape, moN, moT, moVector, moW, moc);
    if (bn->parsed()) return run_bvp_neumann(bnConfig, bnN, bnDelta, bnCsv, bnc);
  } catch (const ConfigInvalid& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
