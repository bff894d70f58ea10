#include "branchlab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "branchlab/errors.hpp"

namespace branchlab {

namespace pt = boost::property_tree;

const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::GlobalScaling: return "global_scaling";
    case ExperimentKind::LocalScaling: return "local_scaling";
    case ExperimentKind::DimensionSweep: return "dimension_sweep";
    case ExperimentKind::ValidatorSuite: return "validator_suite";
    case ExperimentKind::ConstructionBench: return "construction_bench";
  }
  return "?";
}

ExperimentKind parse_experiment(const std::string& name) {
  for (auto k : {ExperimentKind::GlobalScaling, ExperimentKind::LocalScaling,
                 ExperimentKind::DimensionSweep, ExperimentKind::ValidatorSuite,
                 ExperimentKind::ConstructionBench})
    if (name == experiment_name(k)) return k;
  throw Error(ErrorCode::ConfigError, "unknown experiment '" + name + "'");
}

std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || per_decade < 1)
    throw Error(ErrorCode::ConfigError, fmt::format("bad log grid [{}, {}] x{}", lo, hi, per_decade));
  const double decades = std::log10(hi / lo);
  const int n = std::max(1, static_cast<int>(std::lround(decades * per_decade)));
  std::vector<double> out;
  for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));
  out.back() = hi;
  return out;
}

namespace {

struct Source {
  std::string origin;
  std::map<std::string, int> lines;  // "section.key" -> line, 0 for overrides

  std::string where(const std::string& path) const {
    auto it = lines.find(path);
    if (it == lines.end() || it->second == 0) return "<command line>";
    return fmt::format("{}:{}", origin, it->second);
  }
  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {}: {}", where(path), path, msg));
  }
};

// Line numbers of keys, following the same section rules as read_ini.
std::map<std::string, int> scan_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream in(text);
  std::string line, section;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    boost::trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = boost::trim_copy(line.substr(1, line.size() - 2));
      out.emplace(section, no);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out.emplace(section + "." + boost::trim_copy(line.substr(0, eq)), no);
  }
  return out;
}

double to_number(const Source& src, const std::string& path, const std::string& v) {
  std::string t = boost::trim_copy(v);
  char* end = nullptr;
  double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(d)) src.fail(path, "not a number: '" + v + "'");
  return d;
}

int to_int(const Source& src, const std::string& path, const std::string& v) {
  double d = to_number(src, path, v);
  if (d != std::floor(d) || std::fabs(d) > 2e9) src.fail(path, "not an integer: '" + v + "'");
  return static_cast<int>(d);
}

bool to_bool(const Source& src, const std::string& path, const std::string& v) {
  std::string t = boost::to_lower_copy(boost::trim_copy(v));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  src.fail(path, "not a boolean: '" + v + "'");
}

std::vector<double> to_list(const Source& src, const std::string& path, const std::string& v) {
  std::vector<std::string> parts;
  boost::split(parts, v, boost::is_any_of(", "), boost::token_compress_on);
  std::vector<double> out;
  for (const auto& p : parts)
    if (!boost::trim_copy(p).empty()) out.push_back(to_number(src, path, p));
  if (out.empty()) src.fail(path, "empty list");
  return out;
}

void check_increasing(const Source& src, const std::string& path, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) src.fail(path, "values must be positive");
    if (i > 0 && !(v[i] > v[i - 1])) src.fail(path, "values must be strictly increasing");
  }
}

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> k{
      {"experiment", {"kind", "output_dir", "cache", "workers"}},
      {"grid", {"s", "T", "T_min", "T_max", "T_per_decade", "eps", "eps_min", "eps_max",
                "eps_per_decade"}},
      {"boundary", {"mode", "K", "mollifier_eps"}},
      {"search", {"delta", "depth", "min_width", "optimize"}},
      {"optimizer", {"max_outer_iters", "max_gradient_steps", "rng_seed"}},
      {"pattern", {"source", "covering"}},
      {"seed", {"kind", "N", "r", "eps", "eta", "alpha", "eps_b", "delta", "depth"}},
  };
  return k;
}

std::string section_family(const std::string& sec) {
  return boost::starts_with(sec, "seed:") ? "seed" : sec;
}

// Log grid from either an explicit list or min/max/per_decade keys.
std::vector<double> read_grid(const Source& src, const pt::ptree& grid, const std::string& name) {
  auto get = [&](const std::string& k) { return grid.get_optional<std::string>(pt::ptree::path_type(k, '\0')); };
  std::vector<double> out;
  if (auto list = get(name)) {
    out = to_list(src, "grid." + name, *list);
  } else if (auto lo = get(name + "_min")) {
    auto hi = get(name + "_max");
    if (!hi) src.fail("grid." + name + "_min", "needs " + name + "_max");
    int per = 8;
    if (auto pd = get(name + "_per_decade")) per = to_int(src, "grid." + name + "_per_decade", *pd);
    double a = to_number(src, "grid." + name + "_min", *lo);
    double b = to_number(src, "grid." + name + "_max", *hi);
    if (!(a > 0.0) || !(b > a) || per < 1) src.fail("grid." + name + "_min", "bad log grid bounds");
    out = log_grid(a, b, per);
  }
  if (!out.empty()) check_increasing(src, "grid." + name, out);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& origin) {
  Source src{origin, scan_lines(text)};
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}:{}: {}", origin, e.line(), e.message()));
    }
  }
  auto section = [&](const std::string& name) -> pt::ptree& {
    auto it = tree.find(name);
    if (it == tree.not_found()) return tree.push_back({name, pt::ptree()})->second;
    return it->second;
  };
  for (std::string ov : overrides) {
    if (boost::starts_with(ov, "--")) ov = ov.substr(2);
    auto eq = ov.find('=');
    auto dot = ov.substr(0, eq).rfind('.');
    if (eq == std::string::npos || dot == std::string::npos || dot == 0)
      throw Error(ErrorCode::ConfigError, "<command line>: override must be section.key=value: " + ov);
    std::string sec = ov.substr(0, dot), key = ov.substr(dot + 1, eq - dot - 1);
    section(sec).put(pt::ptree::path_type(key, '\0'), ov.substr(eq + 1));
    src.lines[sec + "." + key] = 0;
  }

  // reject unknown sections and keys before interpreting anything
  for (const auto& [sec, body] : tree) {
    if (body.empty() && !body.data().empty())
      src.fail(sec, "key outside of any section");
    auto fam = known_keys().find(section_family(sec));
    if (fam == known_keys().end()) src.fail(sec, "unknown section");
    for (const auto& [key, val] : body) {
      (void)val;
      const auto& keys = fam->second;
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) src.fail(sec + "." + key, "unknown key");
    }
  }

  ExperimentConfig cfg;
  auto str = [&](const std::string& sec, const std::string& key) -> std::optional<std::string> {
    auto it = tree.find(sec);
    if (it == tree.not_found()) return std::nullopt;
    auto v = it->second.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return boost::trim_copy(*v);
  };

  auto kind = str("experiment", "kind");
  if (!kind) throw Error(ErrorCode::ConfigError, origin + ": experiment.kind is required");
  try {
    cfg.experiment = parse_experiment(*kind);
  } catch (const Error&) {
    src.fail("experiment.kind", "unknown experiment '" + *kind + "'");
  }
  if (auto v = str("experiment", "output_dir")) cfg.output_dir = *v;
  if (auto v = str("experiment", "cache")) cfg.cache = to_bool(src, "experiment.cache", *v);
  if (auto v = str("experiment", "workers")) cfg.workers = to_int(src, "experiment.workers", *v);
  if (cfg.workers < 0) src.fail("experiment.workers", "must be >= 0");

  pt::ptree empty;
  const pt::ptree& grid = tree.find("grid") == tree.not_found() ? empty : tree.find("grid")->second;
  if (auto v = str("grid", "s")) cfg.s_values = to_list(src, "grid.s", *v);
  if (cfg.s_values.empty()) src.fail("grid.s", "at least one s is required");
  for (double s : cfg.s_values)
    if (!(s > 0.0 && s < 1.0)) src.fail("grid.s", fmt::format("s = {} outside (0, 1)", s));
  cfg.T_values = read_grid(src, grid, "T");
  if (cfg.T_values.empty()) src.fail("grid.T", "a T grid is required");
  cfg.eps_values = read_grid(src, grid, "eps");
  if (cfg.experiment == ExperimentKind::LocalScaling) {
    if (cfg.eps_values.size() < 4) src.fail("grid.eps", "local scaling needs at least 4 eps values");
    if (!(cfg.eps_values.back() < cfg.T_values.front())) src.fail("grid.eps", "eps must stay below every T");
  }
  if (cfg.experiment == ExperimentKind::GlobalScaling) {
    if (cfg.T_values.size() < 4) src.fail("grid.T", "global scaling needs at least 4 T values");
    if (cfg.T_values.front() < 1.0 && cfg.T_values.back() > 1.0)
      cfg.warnings.push_back(fmt::format("{}: T grid straddles T = 1; regimes differ on the two sides",
                                         src.where("grid.T")));
  }

  if (auto v = str("boundary", "mode")) {
    if (*v == "atomic") cfg.boundary_mode = BoundaryMode::Atomic;
    else if (*v == "block") cfg.boundary_mode = BoundaryMode::Block;
    else if (*v == "mollified") cfg.boundary_mode = BoundaryMode::Mollified;
    else src.fail("boundary.mode", "expected atomic, block or mollified");
  }
  if (auto v = str("boundary", "K")) cfg.K = to_int(src, "boundary.K", *v);
  if (cfg.K < 8) src.fail("boundary.K", "must be at least 8");
  if (auto v = str("boundary", "mollifier_eps")) cfg.mollifier_eps = to_number(src, "boundary.mollifier_eps", *v);
  if (!(cfg.mollifier_eps > 0.0 && cfg.mollifier_eps < 0.5)) src.fail("boundary.mollifier_eps", "must lie in (0, 1/2)");

  if (auto v = str("search", "delta")) cfg.search_dyadic.delta = to_number(src, "search.delta", *v);
  if (!(cfg.search_dyadic.delta > 0.25 && cfg.search_dyadic.delta < 0.5)) src.fail("search.delta", "must lie in (1/4, 1/2)");
  if (auto v = str("search", "depth")) cfg.search_dyadic.depth = to_int(src, "search.depth", *v);
  if (cfg.search_dyadic.depth < 1 || cfg.search_dyadic.depth > 24) src.fail("search.depth", "must lie in 1..24");
  if (auto v = str("search", "min_width")) cfg.search_dyadic.min_width = to_number(src, "search.min_width", *v);
  if (auto v = str("search", "optimize")) cfg.optimize = to_bool(src, "search.optimize", *v);

  if (auto v = str("optimizer", "max_outer_iters")) cfg.max_outer_iters = to_int(src, "optimizer.max_outer_iters", *v);
  if (auto v = str("optimizer", "max_gradient_steps"))
    cfg.max_gradient_steps = to_int(src, "optimizer.max_gradient_steps", *v);
  if (auto v = str("optimizer", "rng_seed")) {
    double d = to_number(src, "optimizer.rng_seed", *v);
    if (d < 0 || d != std::floor(d)) src.fail("optimizer.rng_seed", "must be a nonnegative integer");
    cfg.rng_seed = static_cast<std::uint64_t>(d);
  }
  if (cfg.max_outer_iters < 0 || cfg.max_gradient_steps < 0) src.fail("optimizer", "iteration counts must be >= 0");

  if (auto v = str("pattern", "source")) {
    if (*v == "optimized") cfg.source = PatternSource::Optimized;
    else if (*v == "seed") cfg.source = PatternSource::Seed;
    else src.fail("pattern.source", "expected optimized or seed");
  }
  if (auto v = str("pattern", "covering")) cfg.covering = to_bool(src, "pattern.covering", *v);

  for (const auto& [sec, body] : tree) {
    if (section_family(sec) != "seed") continue;
    (void)body;
    ConstructionSpec spec;
    auto key = [&](const char* k) { return str(sec, k); };
    auto path = [&](const char* k) { return sec + "." + k; };
    auto kname = key("kind");
    if (!kname) src.fail(sec, "seed needs a kind");
    try {
      spec.kind = parse_construction(*kname);
    } catch (const Error&) {
      src.fail(path("kind"), "unknown construction '" + *kname + "'");
    }
    if (auto v = key("N")) spec.N = to_int(src, path("N"), *v);
    if (auto v = key("r")) spec.r = to_number(src, path("r"), *v);
    if (auto v = key("eps")) spec.eps = to_number(src, path("eps"), *v);
    if (auto v = key("eta")) spec.eta = to_number(src, path("eta"), *v);
    if (auto v = key("alpha")) spec.alpha = to_number(src, path("alpha"), *v);
    if (auto v = key("eps_b")) spec.eps_b = to_number(src, path("eps_b"), *v);
    if (auto v = key("delta")) spec.dyadic.delta = to_number(src, path("delta"), *v);
    if (auto v = key("depth")) spec.dyadic.depth = to_int(src, path("depth"), *v);
    if (spec.N < 1) src.fail(path("N"), "must be at least 1");
    if (!(spec.dyadic.delta > 0.25 && spec.dyadic.delta < 0.5)) src.fail(path("delta"), "must lie in (1/4, 1/2)");
    cfg.seeds.push_back(spec);
    cfg.seed_names.push_back(sec.substr(5));
  }
  if (cfg.experiment != ExperimentKind::GlobalScaling && cfg.seeds.empty())
    throw Error(ErrorCode::ConfigError, fmt::format("{}: {} needs at least one [seed:NAME] section",
                                                    origin, experiment_name(cfg.experiment)));
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, path);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt::format("{:.17g},", x);
    return s;
  };
  std::string out;
  out += fmt::format("experiment={}\n", experiment_name(cfg.experiment));
  out += "s=" + list(cfg.s_values) + "\n";
  out += "T=" + list(cfg.T_values) + "\n";
  out += "eps=" + list(cfg.eps_values) + "\n";
  out += fmt::format("K={}\nboundary={}\nmollifier_eps={:.17g}\n", cfg.K, static_cast<int>(cfg.boundary_mode),
                     cfg.mollifier_eps);
  out += fmt::format("search={:.17g},{},{:.17g},{}\n", cfg.search_dyadic.delta, cfg.search_dyadic.depth,
                     cfg.search_dyadic.min_width, cfg.optimize);
  out += fmt::format("optimizer={},{},{}\n", cfg.max_outer_iters, cfg.max_gradient_steps, cfg.rng_seed);
  out += fmt::format("pattern={},{}\n", static_cast<int>(cfg.source), cfg.covering);
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const ConstructionSpec& s = cfg.seeds[i];
    out += fmt::format("seed:{}={},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", cfg.seed_names[i],
                       construction_name(s.kind), s.N, s.r, s.eps, s.eta, s.alpha, s.eps_b, s.dyadic.delta,
                       s.dyadic.depth);
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_config(cfg)); }

}  // namespace branchlab
