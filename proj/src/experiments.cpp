#include "branchlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "branchlab/dimension.hpp"
#include "branchlab/errors.hpp"
#include "branchlab/optimizer.hpp"

namespace branchlab {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Runs fn(i) for i < n on a small pool; results come back in index order and
// the first exception (by index) is rethrown.
template <class R>
std::vector<R> parallel_map(std::size_t n, int workers, const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> err(n);
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t w = workers > 0 ? static_cast<std::size_t>(workers) : hw;
  w = std::max<std::size_t>(1, std::min(w, n));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

double golden(const std::function<double(double)>& f, double a, double b, int iters, double& arg) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  arg = fc < fd ? c : d;
  return std::min(fc, fd);
}

OptimizerConfig optimizer_config(const ExperimentConfig& cfg, double s, double T) {
  OptimizerConfig oc;
  oc.s = s;
  oc.T = T;
  oc.boundary = cfg.boundary();
  oc.max_outer_iters = cfg.max_outer_iters;
  oc.max_gradient_steps = cfg.max_gradient_steps;
  oc.rng_seed = cfg.rng_seed;
  oc.restarts = cfg.seeds;
  return oc;
}

std::string num(double x) { return fmt::format("{}", x); }
std::string num(const Json& j) { return num(j.get<double>()); }

Json fit_json(const ScalingFit& f) {
  Json pts = Json::array();
  for (auto [x, y] : f.points) pts.push_back({x, y});
  return {{"exponent", f.exponent}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"flagged", f.flagged}, {"points", pts}};
}

Json point_json(const ConstructionPoint& p) {
  return {{"T", p.T}, {"energy", p.energy}, {"kind", p.kind}, {"N", p.N}, {"r", p.r}, {"eps_b", p.eps_b}};
}

}  // namespace

ScalingFit fit_power_law(const std::vector<std::pair<double, double>>& points, double flag_below) {
  if (points.size() < 4) throw Error(ErrorCode::InvalidScale, "a scaling fit needs at least 4 points");
  ScalingFit f;
  f.points = points;
  std::vector<double> lx, ly;
  for (auto [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw Error(ErrorCode::InvalidScale, fmt::format("nonpositive point ({}, {})", x, y));
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::InvalidScale, "all x values coincide");
  f.exponent = sxy / sxx;
  f.intercept = my - f.exponent * mx;
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  f.flagged = f.r_squared < flag_below;
  return f;
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Thick: return "thick";
    case Regime::Lebesgue: return "lebesgue";
    case Regime::GlobalLocal: return "global_local";
    case Regime::Delta: return "delta";
  }
  return "?";
}

Regime global_regime(double s, double T) {
  if (T >= 1.0) return Regime::Thick;
  if (s <= 0.25) return Regime::Lebesgue;
  if (s <= 0.5) return Regime::GlobalLocal;
  return Regime::Delta;
}

Rational regime_exponent(Regime r, const Rational& s) {
  switch (r) {
    case Regime::Thick: return Rational(1);
    case Regime::Lebesgue: return Rational(1, 3);
    case Regime::GlobalLocal: return beta_c(s, 1);
    case Regime::Delta: return 2 * s / (2 * s + 1);
  }
  return Rational(0);
}

ConstructionPoint best_uniform_grid(double s, double T, const DyadicOptions& dyadic, int K) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidScale, "T must be positive");
  ConstructionPoint best;
  best.T = T;
  best.kind = "uniform_grid";
  best.energy = kInf;
  const double N0 = std::pow(T, -2.0 * (2.0 - 2.0 * s) / (5.0 - 2.0 * s));
  int lastN = -1;
  for (double fN = 0.3; fN <= 4.0; fN *= 1.25) {
    const int N = std::max(1, static_cast<int>(std::lround(N0 * fN)));
    if (N == lastN) continue;
    lastN = N;
    for (double fe : {1.0, 0.5, 0.25, 0.125}) {
      UniformGridOptions o;
      o.dyadic = dyadic;
      o.eps_b = fe * T;
      auto f = [&](double lrN) {
        return uniform_grid_energy(N, std::exp(lrN) / N, T, s, K, o).total;
      };
      double arg = 0.0;
      double e = golden(f, std::log(0.01), 0.0, 14, arg);
      double e1 = f(0.0);
      if (e1 <= e) {
        e = e1;
        arg = 0.0;
      }
      if (e < best.energy) {
        best.energy = e;
        best.N = N;
        best.r = std::exp(arg) / N;
        best.eps_b = fe * T;
      }
    }
  }
  return best;
}

ConstructionPoint best_dirac_grid(double s, double T, int K) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidScale, "T must be positive");
  ConstructionPoint best;
  best.T = T;
  best.kind = "dirac_grid";
  best.energy = kInf;
  const double N0 = std::pow(T, -1.0 / (1.0 + 2.0 * s));
  const int Nmax = static_cast<int>(std::ceil(4.0 * N0)) + 4;
  BoundaryOptions bo{BoundaryMode::Atomic, K, 0.01};
  for (int N = 1; N <= Nmax; ++N) {
    EnergyBreakdown e = full_energy(dirac_grid(N, T), s, bo);
    if (e.boundary.infinite) continue;
    if (e.total < best.energy) {
      best.energy = e.total;
      best.N = N;
    }
  }
  if (!std::isfinite(best.energy))
    throw Error(ErrorCode::DivergentBoundaryNorm, fmt::format("atomic boundary diverges at s = {}", s));
  return best;
}

ConstructionPoint thick_construction(double s, double T, const DyadicOptions& dyadic, int K) {
  UniformGridOptions o;
  o.dyadic = dyadic;
  o.eps_b = T;
  ConstructionPoint p;
  p.T = T;
  p.kind = "uniform_grid";
  p.N = 1;
  p.r = 1.0;
  p.eps_b = T;
  p.energy = uniform_grid_energy(1, 1.0, T, s, K, o).total;
  return p;
}

ConstructionPoint best_construction(double s, double T, const DyadicOptions& dyadic, int K) {
  ConstructionPoint best = best_uniform_grid(s, T, dyadic, K);
  if (s > 0.5) {
    ConstructionPoint d = best_dirac_grid(s, T, K);
    if (d.energy < best.energy) best = d;
  }
  return best;
}

ConstructionPoint regime_construction(double s, double T, const DyadicOptions& dyadic, int K) {
  switch (global_regime(s, T)) {
    case Regime::Thick: return thick_construction(s, T, dyadic, K);
    case Regime::Delta: return best_dirac_grid(s, T, K);
    default: return best_uniform_grid(s, T, dyadic, K);
  }
}

std::vector<GlobalScalingResult> run_global_scaling(const ExperimentConfig& cfg) {
  const std::size_t nT = cfg.T_values.size();
  struct Cell {
    ConstructionPoint best, certified;
    bool optimized = false;
  };
  auto cells = parallel_map<Cell>(cfg.s_values.size() * nT, cfg.workers, [&](std::size_t i) {
    const double s = cfg.s_values[i / nT], T = cfg.T_values[i % nT];
    Cell c;
    c.best = best_construction(s, T, cfg.search_dyadic, cfg.K);
    c.certified = regime_construction(s, T, cfg.search_dyadic, cfg.K);
    if (cfg.optimize) {
      OptimizerConfig oc = optimizer_config(cfg, s, T);
      if (oc.restarts.empty() && c.best.N <= 32) {
        ConstructionSpec spec;
        spec.kind = c.best.kind == "dirac_grid" ? ConstructionKind::DiracGrid : ConstructionKind::UniformGrid;
        spec.N = c.best.N;
        spec.r = c.best.r;
        spec.eps_b = c.best.eps_b;
        spec.dyadic = cfg.search_dyadic;
        spec.dyadic.depth = std::min(3, spec.dyadic.depth);
        oc.restarts.push_back(spec);
      }
      if (!oc.restarts.empty()) {
        OptimizationTrace tr = topology_search(oc);
        double e = tr.iterations.back().energy.total;
        c.optimized = true;
        if (e < c.best.energy) {
          c.best.energy = e;
          c.best.kind = "optimized";
        }
      }
    }
    return c;
  });
  std::vector<GlobalScalingResult> out;
  for (std::size_t a = 0; a < cfg.s_values.size(); ++a) {
    GlobalScalingResult r;
    r.s = cfg.s_values[a];
    r.regime = global_regime(r.s, cfg.T_values.front());
    r.predicted = regime_exponent(r.regime, to_rational(r.s));
    std::vector<std::pair<double, double>> pb, pc;
    for (std::size_t b = 0; b < nT; ++b) {
      const Cell& c = cells[a * nT + b];
      r.best.push_back(c.best);
      r.certified.push_back(c.certified);
      r.optimizer_used = r.optimizer_used || c.optimized;
      pb.push_back({c.best.T, c.best.energy});
      pc.push_back({c.certified.T, c.certified.energy});
    }
    r.fit = fit_power_law(pb);
    r.certified_fit = fit_power_law(pc);
    out.push_back(std::move(r));
  }
  return out;
}

AnyMeasure terminal_measure(const IrrigationPattern& p) {
  Topology topo(p);
  bool blocks = !p.tips.empty();
  for (const Tip& t : p.tips) blocks = blocks && t.kind == TipKind::Block && t.width > 0.0;
  if (blocks) {
    std::vector<Block> b;
    for (const Tip& t : p.tips) b.push_back({wrap01(p.nodes[t.node].x), t.width, topo.node_mass[t.node]});
    return BlockMeasure::superpose(b);
  }
  return AtomicMeasure::canonicalize(tip_atoms(p));
}

IrrigationPattern experiment_pattern(const ExperimentConfig& cfg, double s, double T) {
  if (cfg.seeds.empty()) throw Error(ErrorCode::NoSeeds, "no seed constructions");
  if (cfg.source == PatternSource::Seed) return build_construction(cfg.seeds.front(), T);
  OptimizationTrace tr = topology_search(optimizer_config(cfg, s, T));
  if (!tr.converged)
    throw Error(ErrorCode::StaleInput,
                fmt::format("optimizer did not converge at s={} T={} within {} outer iterations", s, T,
                            cfg.max_outer_iters));
  return tr.final_pattern;
}

std::vector<std::pair<std::string, int>> pattern_choices(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw Error(ErrorCode::NoSeeds, "no seed constructions");
  std::vector<std::pair<std::string, int>> out;
  if (cfg.source == PatternSource::Seed) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      out.push_back({i < cfg.seed_names.size() ? cfg.seed_names[i] : fmt::format("seed{}", i),
                     static_cast<int>(i)});
  } else {
    out.push_back({"optimized", -1});
  }
  return out;
}

namespace {

IrrigationPattern choice_pattern(const ExperimentConfig& cfg, int seed, double s, double T) {
  return seed >= 0 ? build_construction(cfg.seeds[seed], T) : experiment_pattern(cfg, s, T);
}

std::vector<double> dyadic_radii() {
  std::vector<double> r;
  for (int j = 2; j <= 8; ++j) r.push_back(std::ldexp(1.0, -j));
  return r;
}

}  // namespace

std::vector<LocalScalingResult> run_local_scaling(const ExperimentConfig& cfg) {
  const std::size_t nT = cfg.T_values.size();
  const auto choices = pattern_choices(cfg);
  const std::size_t nP = choices.size();
  return parallel_map<LocalScalingResult>(cfg.s_values.size() * nT * nP, cfg.workers, [&](std::size_t i) {
    LocalScalingResult r;
    r.pattern = choices[i % nP].first;
    r.s = cfg.s_values[i / (nT * nP)];
    r.T = cfg.T_values[(i / nP) % nT];
    IrrigationPattern p = choice_pattern(cfg, choices[i % nP].second, r.s, r.T);
    AnyMeasure mu = terminal_measure(p);
    r.alpha_est = ahlfors_fit(mu, AhlforsDirection::Upper, dyadic_radii()).alpha;
    const double a = std::clamp(r.alpha_est, 0.05, 1.0);
    r.beta_con = (2.0 - a) / (2.0 + a);
    if (a > 1.0 - 2.0 * r.s) r.beta_reg = (2.0 * r.s - 1.0 + a) / (2.0 * (1.0 - r.s) + 1.0 - a);
    std::vector<std::pair<double, double>> pts, cov;
    for (double eps : cfg.eps_values) {
      if (!(eps < r.T)) continue;
      pts.push_back({eps, internal_energy(p, r.T - eps, r.T).total()});
      if (cfg.covering) {
        try {
          double ex = covering_competitor(p, eps, a).excess();
          if (ex > 0.0) cov.push_back({eps, ex});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NotMonotone) throw;
        }
      }
    }
    r.fit = fit_power_law(pts);
    if (cov.size() >= 4) r.covering = fit_power_law(cov);
    r.slope_ok = r.fit.exponent >= 1.0 / 3.0 - 0.05;
    return r;
  });
}

std::vector<DimensionRow> run_dimension_sweep(const ExperimentConfig& cfg) {
  const std::size_t nT = cfg.T_values.size();
  std::vector<double> gammas;
  for (int i = 1; i < 20; ++i) gammas.push_back(i / 20.0);
  std::vector<int> depths;
  for (int j = 1; j <= 10; ++j) depths.push_back(j);
  const auto choices = pattern_choices(cfg);
  const std::size_t nP = choices.size();
  return parallel_map<DimensionRow>(cfg.s_values.size() * nT * nP, cfg.workers, [&](std::size_t i) {
    DimensionRow d;
    d.pattern = choices[i % nP].first;
    d.s = cfg.s_values[i / (nT * nP)];
    d.T = cfg.T_values[(i / nP) % nT];
    IrrigationPattern p = choice_pattern(cfg, choices[i % nP].second, d.s, d.T);
    AnyMeasure mu = terminal_measure(p);
    d.tips = static_cast<int>(p.tips.size());
    d.alpha_bar = to_double(alpha_bar(to_rational(d.s), 1));
    AhlforsEstimate ah = ahlfors_fit(mu, AhlforsDirection::Upper, dyadic_radii());
    d.ahlfors = ah.alpha;
    d.r_min = ah.r_min;
    d.box = box_dimension(mu, depths, 2).value;
    d.frostman = frostman_proxy(mu, gammas, 1 << 16).estimate;
    d.discrepancy = d.ahlfors - d.alpha_bar;
    return d;
  });
}

bool ValidationSuite::hard_failure() const {
  return std::any_of(rows.begin(), rows.end(), [](const ValidationRow& r) { return r.hard && !r.passed; });
}

namespace {

IrrigationPattern crossing_fixture() {
  IrrigationPattern p;
  p.T = 1.0;
  int a = p.add_node(0.0, 0.3), b = p.add_node(0.0, 0.7);
  int c = p.add_node(1.0, 0.7), d = p.add_node(1.0, 0.3);
  p.add_edge(a, c, 0.5);
  p.add_edge(b, d, 0.5);
  p.add_tip(c, TipKind::Atom);
  p.add_tip(d, TipKind::Atom);
  return p;
}

IrrigationPattern loop_fixture() {
  IrrigationPattern p;
  p.T = 1.0;
  int r = p.add_node(0.0, 0.5);
  int a = p.add_node(0.3, 0.4), b = p.add_node(0.3, 0.6);
  int m = p.add_node(0.6, 0.5), t = p.add_node(1.0, 0.5);
  p.add_edge(r, a, 0.5);
  p.add_edge(r, b, 0.5);
  p.add_edge(a, m, 0.5);
  p.add_edge(b, m, 0.5);
  p.add_edge(m, t, 1.0);
  p.add_tip(t, TipKind::Atom);
  return p;
}

void add_report(ValidationSuite& suite, const std::string& name, const std::string& source, double s, double T,
                const ValidationReport& rep, bool hard) {
  for (const CheckResult& c : rep.results)
    suite.rows.push_back({name, source, s, T, check_name(c.check), c.passed, c.measure, c.witness, hard});
}

}  // namespace

ValidationSuite run_validator_suite(const ExperimentConfig& cfg) {
  ValidationSuite suite;
  ValidationOptions tol;
  tol.cone_tol = 1e-6;
  tol.barycenter_tol = 1e-6;
  tol.equipartition_tol = 0.05;
  const std::size_t nT = cfg.T_values.size();
  auto reports = parallel_map<ValidationSuite>(cfg.s_values.size() * nT, cfg.workers, [&](std::size_t i) {
    ValidationSuite part;
    const double s = cfg.s_values[i / nT], T = cfg.T_values[i % nT];
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
      IrrigationPattern p = build_construction(cfg.seeds[k], T);
      add_report(part, cfg.seed_names[k], "seed", s, T, validate(p, all_checks(), tol), false);
    }
    OptimizationTrace tr = topology_search(optimizer_config(cfg, s, T));
    add_report(part, "optimized", "optimized", s, T, validate(tr.final_pattern, all_checks(), tol), true);
    return part;
  });
  for (auto& r : reports) suite.rows.insert(suite.rows.end(), r.rows.begin(), r.rows.end());
  // constructed counterexamples: the targeted check has to catch them
  auto expect_fail = [&](const std::string& name, const IrrigationPattern& p, Check c) {
    ValidationRow row{name, "fixture", 0.0, p.T, std::string(check_name(c)) + "_detects", false, 0.0, "", true};
    try {
      ValidationReport rep = validate(p, {c}, tol);
      row.passed = !rep.results.front().passed;
      row.measure = rep.results.front().measure;
      row.witness = rep.results.front().witness;
    } catch (const Error& e) {
      row.passed = true;
      row.witness = e.what();
    }
    suite.rows.push_back(row);
  };
  expect_fail("crossing", crossing_fixture(), Check::MonotoneCoupling);
  expect_fail("loop", loop_fixture(), Check::NoLoop);
  return suite;
}

std::vector<BenchRow> construction_bench(const ExperimentConfig& cfg) {
  const std::size_t nT = cfg.T_values.size(), nK = cfg.seeds.size();
  return parallel_map<BenchRow>(cfg.s_values.size() * nT * nK, cfg.workers, [&](std::size_t i) {
    BenchRow b;
    const std::size_t k = i % nK;
    b.seed = cfg.seed_names[k];
    b.s = cfg.s_values[i / (nT * nK)];
    b.T = cfg.T_values[(i / nK) % nT];
    const ConstructionSpec& spec = cfg.seeds[k];
    IrrigationPattern p = build_construction(spec, b.T);
    b.nodes = static_cast<int>(p.nodes.size());
    b.energy = full_energy(p, b.s, cfg.boundary());
    if (spec.kind == ConstructionKind::UniformGrid)
      b.predicted = uniform_grid_prediction(spec.N, spec.r, b.T, b.s).sum();
    b.structural_ok = validate(p, {Check::NoLoop, Check::MonotoneCoupling}).all_passed();
    return b;
  });
}

// ---------------------------------------------------------------------------
// results documents and rendering

namespace {

Json header(const ExperimentConfig& cfg) {
  return {{"experiment", experiment_name(cfg.experiment)}, {"config_hash", config_hash(cfg)},
          {"versions", kModuleVersions}, {"config", canonical_config(cfg)}};
}

Json compute(const ExperimentConfig& cfg) {
  Json doc = header(cfg);
  Json rows = Json::array();
  int exit_code = 0;
  switch (cfg.experiment) {
    case ExperimentKind::GlobalScaling:
      for (const auto& r : run_global_scaling(cfg)) {
        Json best = Json::array(), cert = Json::array();
        for (const auto& p : r.best) best.push_back(point_json(p));
        for (const auto& p : r.certified) cert.push_back(point_json(p));
        rows.push_back({{"s", r.s}, {"regime", regime_name(r.regime)},
                        {"predicted", to_string(r.predicted)}, {"predicted_value", to_double(r.predicted)},
                        {"fit", fit_json(r.fit)}, {"certified_fit", fit_json(r.certified_fit)},
                        {"best", best}, {"certified", cert}, {"optimizer_used", r.optimizer_used}});
      }
      break;
    case ExperimentKind::LocalScaling:
      for (const auto& r : run_local_scaling(cfg)) {
        Json j{{"pattern", r.pattern}, {"s", r.s}, {"T", r.T}, {"alpha_est", r.alpha_est}, {"beta_con", r.beta_con},
               {"beta_reg", r.beta_reg ? Json(*r.beta_reg) : Json()}, {"fit", fit_json(r.fit)},
               {"covering", r.covering ? fit_json(*r.covering) : Json()}, {"slope_ok", r.slope_ok}};
        if (!r.slope_ok) exit_code = 2;
        rows.push_back(j);
      }
      break;
    case ExperimentKind::DimensionSweep:
      for (const auto& d : run_dimension_sweep(cfg))
        rows.push_back({{"pattern", d.pattern}, {"s", d.s}, {"T", d.T}, {"alpha_bar", d.alpha_bar}, {"ahlfors", d.ahlfors},
                        {"box", d.box}, {"frostman", d.frostman}, {"discrepancy", d.discrepancy},
                        {"r_min", d.r_min}, {"tips", d.tips}});
      break;
    case ExperimentKind::ValidatorSuite: {
      ValidationSuite suite = run_validator_suite(cfg);
      for (const auto& v : suite.rows)
        rows.push_back({{"pattern", v.pattern}, {"source", v.source}, {"s", v.s}, {"T", v.T},
                        {"check", v.check}, {"passed", v.passed}, {"measure", v.measure},
                        {"witness", v.witness}, {"hard", v.hard}});
      if (suite.hard_failure()) exit_code = 2;
      break;
    }
    case ExperimentKind::ConstructionBench:
      for (const auto& b : construction_bench(cfg))
        rows.push_back({{"seed", b.seed}, {"s", b.s}, {"T", b.T}, {"energy", to_json(b.energy)},
                        {"predicted", b.predicted}, {"nodes", b.nodes}, {"structural_ok", b.structural_ok}});
      break;
  }
  doc["rows"] = rows;
  doc["exit_code"] = exit_code;
  return doc;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string jnum(const Json& j) { return j.is_null() ? "" : num(j.get<double>()); }

}  // namespace

ExperimentOutput render(const Json& doc) {
  ExperimentOutput out;
  out.results = doc;
  out.exit_code = doc.value("exit_code", 0);
  const std::string prefix = doc.at("config_hash").get<std::string>() + "," + doc.at("versions").get<std::string>();
  const std::string kind = doc.at("experiment").get<std::string>();
  std::ostringstream csv;
  auto tsv = [](const Json& pts) {
    std::string t;
    for (const Json& p : pts) t += num(p.at(0).get<double>()) + "\t" + num(p.at(1).get<double>()) + "\n";
    return t;
  };
  if (kind == "global_scaling") {
    csv << "config_hash,versions,s,regime,T,energy,kind,N,r,eps_b,certified_energy,exponent,r_squared,flagged,"
           "certified_exponent,predicted\n";
    for (const Json& r : doc.at("rows")) {
      const Json& best = r.at("best");
      for (std::size_t i = 0; i < best.size(); ++i) {
        const Json& b = best[i];
        csv << prefix << ',' << num(r.at("s")) << ',' << r.at("regime").get<std::string>() << ','
            << num(b.at("T")) << ',' << num(b.at("energy")) << ',' << b.at("kind").get<std::string>() << ','
            << b.at("N").get<int>() << ',' << num(b.at("r")) << ',' << num(b.at("eps_b")) << ','
            << num(r.at("certified")[i].at("energy")) << ',' << num(r.at("fit").at("exponent")) << ','
            << num(r.at("fit").at("r_squared")) << ',' << r.at("fit").at("flagged").get<bool>() << ','
            << num(r.at("certified_fit").at("exponent")) << ',' << r.at("predicted").get<std::string>() << '\n';
      }
      std::string s = fmt::format("{:g}", r.at("s").get<double>());
      out.plotdata.push_back({"global_s" + s + ".tsv", tsv(r.at("fit").at("points"))});
      out.plotdata.push_back({"global_s" + s + "_certified.tsv", tsv(r.at("certified_fit").at("points"))});
    }
  } else if (kind == "local_scaling") {
    csv << "config_hash,versions,pattern,s,T,eps,I,covering_excess,exponent,r_squared,flagged,covering_exponent,"
           "alpha_est,beta_con,beta_reg,slope_ok\n";
    for (const Json& r : doc.at("rows")) {
      const Json& pts = r.at("fit").at("points");
      const Json& cov = r.at("covering");
      for (const Json& p : pts) {
        std::string ex;
        if (!cov.is_null())
          for (const Json& q : cov.at("points"))
            if (q.at(0) == p.at(0)) ex = num(q.at(1));
        csv << prefix << ',' << r.at("pattern").get<std::string>() << ',' << num(r.at("s")) << ','
            << num(r.at("T")) << ',' << num(p.at(0)) << ',' << num(p.at(1)) << ',' << ex << ',' << num(r.at("fit").at("exponent")) << ','
            << num(r.at("fit").at("r_squared")) << ',' << r.at("fit").at("flagged").get<bool>() << ','
            << (cov.is_null() ? "" : num(cov.at("exponent"))) << ',' << num(r.at("alpha_est")) << ','
            << num(r.at("beta_con")) << ',' << jnum(r.at("beta_reg")) << ',' << r.at("slope_ok").get<bool>()
            << '\n';
      }
      std::string tag = fmt::format("{}_s{:g}_T{:g}", r.at("pattern").get<std::string>(), r.at("s").get<double>(),
                                    r.at("T").get<double>());
      out.plotdata.push_back({"local_" + tag + ".tsv", tsv(pts)});
      if (!cov.is_null()) out.plotdata.push_back({"local_" + tag + "_covering.tsv", tsv(cov.at("points"))});
    }
  } else if (kind == "dimension_sweep") {
    csv << "config_hash,versions,pattern,s,T,alpha_bar,ahlfors,box,frostman,discrepancy,r_min,tips\n";
    std::map<std::string, std::string> a;  // per pattern: s, ahlfors, alpha_bar
    for (const Json& r : doc.at("rows")) {
      const std::string pat = r.at("pattern").get<std::string>();
      csv << prefix << ',' << pat << ',' << num(r.at("s")) << ',' << num(r.at("T")) << ','
          << num(r.at("alpha_bar")) << ',' << num(r.at("ahlfors")) << ',' << num(r.at("box")) << ','
          << num(r.at("frostman")) << ',' << num(r.at("discrepancy")) << ',' << num(r.at("r_min")) << ','
          << r.at("tips").get<int>() << '\n';
      a[pat] += num(r.at("s")) + "\t" + num(r.at("ahlfors")) + "\t" + num(r.at("alpha_bar")) + "\n";
    }
    for (const auto& [pat, rows] : a) out.plotdata.push_back({"dimension_" + pat + ".tsv", rows});
  } else if (kind == "validator_suite") {
    csv << "config_hash,versions,pattern,source,s,T,check,passed,measure,hard,witness\n";
    std::string m;
    int idx = 0;
    for (const Json& r : doc.at("rows")) {
      csv << prefix << ',' << csv_field(r.at("pattern").get<std::string>()) << ','
          << r.at("source").get<std::string>() << ',' << num(r.at("s")) << ',' << num(r.at("T")) << ','
          << r.at("check").get<std::string>() << ',' << r.at("passed").get<bool>() << ','
          << num(r.at("measure")) << ',' << r.at("hard").get<bool>() << ','
          << csv_field(r.at("witness").get<std::string>()) << '\n';
      m += fmt::format("{}\t{}\n", idx++, num(r.at("measure")));
    }
    out.plotdata.push_back({"validator_measures.tsv", m});
  } else if (kind == "construction_bench") {
    csv << "config_hash,versions,seed,s,T,perimeter,kinetic,boundary_penalty,total,predicted,nodes,structural_ok\n";
    std::string e;
    for (const Json& r : doc.at("rows")) {
      const Json& en = r.at("energy");
      csv << prefix << ',' << csv_field(r.at("seed").get<std::string>()) << ',' << num(r.at("s")) << ','
          << num(r.at("T")) << ',' << num(en.at("perimeter")) << ',' << num(en.at("kinetic")) << ','
          << num(en.at("boundary_penalty")) << ',' << num(en.at("total")) << ',' << num(r.at("predicted"))
          << ',' << r.at("nodes").get<int>() << ',' << r.at("structural_ok").get<bool>() << '\n';
      e += num(r.at("T")) + "\t" + num(en.at("total")) + "\n";
    }
    out.plotdata.push_back({"bench_energy.tsv", e});
  } else {
    throw Error(ErrorCode::ConfigError, "results document of unknown experiment " + kind);
  }
  out.csv = csv.str();
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  f << data;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  const std::string hash = config_hash(cfg);
  const fs::path dir(cfg.output_dir);
  const fs::path cache = dir / ".cache" / (hash + ".json");
  Json doc;
  bool hit = false;
  if (cfg.cache && fs::exists(cache)) {
    std::ifstream in(cache);
    try {
      doc = Json::parse(in);
      hit = doc.value("config_hash", std::string()) == hash &&
            doc.value("versions", std::string()) == kModuleVersions;
    } catch (const nlohmann::json::exception&) {
      hit = false;
    }
  }
  if (!hit) doc = compute(cfg);
  ExperimentOutput out = render(doc);
  out.cache_hit = hit;
  // plot files are named by content, so a rerun with fewer series must not leave old ones
  fs::remove_all(dir / "plotdata");
  fs::create_directories(dir / "plotdata");
  if (cfg.cache && !hit) {
    fs::create_directories(cache.parent_path());
    write_file(cache, doc.dump(1) + "\n");
  }
  write_file(dir / "results.json", doc.dump(1) + "\n");
  write_file(dir / "results.csv", out.csv);
  for (const auto& [name, data] : out.plotdata) write_file(dir / "plotdata" / name, data);
  return out;
}

}  // namespace branchlab
