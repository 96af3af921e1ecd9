#pragma once

// Config-driven driver behind the `solve` and `verify` commands.
//
// Config is JSON. Minimal form:
//   { "instance": "vol02" }
// Everything else has defaults; see configs/ for complete files.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "convexmdp/bellman.hpp"
#include "convexmdp/bermudan.hpp"
#include "convexmdp/checks.hpp"
#include "convexmdp/distribution.hpp"
#include "convexmdp/model.hpp"
#include "convexmdp/oracle.hpp"
#include "convexmdp/study.hpp"

namespace convexmdp::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNotConverged = 3, kVerifyFailed = 4 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SchemeChoice { lower, upper, both };

struct VerifyOptions {
  std::size_t paths = 100000;
  std::vector<std::size_t> chain = {250, 500, 1000};
  std::optional<double> chain_tol;  // defaults to the run tolerance
  std::size_t probes = 64;
  std::size_t contraction_pairs = 50;
  double tail_cap = 1e-4;
  double fault_offset = 0.0;
};

struct RunConfig {
  Instance instance;
  SchemeChoice scheme = SchemeChoice::both;
  std::size_t n = 1000;
  LowerSampling lower_sampling = LowerSampling::local_average;
  double truncation_mass = kDefaultTruncationMass;
  double tol = 1e-3;
  std::size_t max_iter = 10000;
  std::uint64_t seed = 1;
  std::vector<double> eval_points;
  std::size_t start_state = 0;
  std::string output = "out";
  std::size_t curve_points = 512;  // 0 disables curve.csv
  VerifyOptions verify;

  bool wants_lower() const { return scheme != SchemeChoice::upper; }
  bool wants_upper() const { return scheme != SchemeChoice::lower; }
};

namespace detail {

inline double positive(const json& j, const char* key) {
  const double x = j.at(key).get<double>();
  if (!(x > 0.0)) throw ConfigError(std::string(key) + " must be positive");
  return x;
}

inline AffinePiece piece(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("affine piece must be [slope, intercept]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Grid grid_from(const json& j) {
  if (j.is_string()) return bermudan::preset(j.get<std::string>()).grid();
  if (j.contains("points")) return Grid(j.at("points").get<std::vector<double>>());
  return Grid::uniform(j.at("lo").get<double>(), j.at("hi").get<double>(),
                       j.at("count").get<std::size_t>());
}

inline Distribution distribution_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "lognormal") return lognormal(j.at("mu").get<double>(), positive(j, "sigma"));
  if (type == "uniform") return uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
  throw ConfigError("unknown disturbance type '" + type + "'");
}

inline Model model_from(const json& j) {
  Model m;
  m.num_discrete = j.at("num_discrete").get<std::size_t>();
  m.num_actions = j.at("num_actions").get<std::size_t>();
  m.alpha = j.at("alpha").get<std::vector<Matrix>>();
  for (const auto& row : j.at("reward")) {
    std::vector<MaxAffine> r;
    for (const auto& f : row) {
      std::vector<AffinePiece> pieces;
      for (const auto& pc : f) pieces.push_back(piece(pc));
      r.emplace_back(std::move(pieces));
    }
    m.reward.push_back(std::move(r));
  }
  m.beta = j.at("beta").get<double>();
  m.bound_cr = j.at("bound_cr").get<double>();
  m.bound_cb = j.at("bound_cb").get<double>();
  for (const auto& b : j.at("bound_fn")) m.bound_fn.push_back(piece(b));
  const auto dyn = j.value("dynamics", std::string("multiplicative"));
  if (dyn == "multiplicative") {
    m.dynamics = AffineDynamics::multiplicative();
  } else if (dyn == "additive") {
    m.dynamics = AffineDynamics::additive();
  } else {
    throw ConfigError("unknown dynamics '" + dyn + "'");
  }
  if (j.contains("state_lo")) m.state_lo = j.at("state_lo").get<double>();
  if (j.contains("state_hi")) m.state_hi = j.at("state_hi").get<double>();
  return m;
}

inline Instance instance_from(const json& root) {
  const json& j = root.at("instance");
  Instance inst;
  if (j.is_string()) {
    inst = bermudan_instance(bermudan::preset(j.get<std::string>()));
  } else if (j.contains("put")) {
    const json& p = j.at("put");
    bermudan::PutParams params;
    params.strike = p.value("strike", params.strike);
    params.rate = p.value("rate", params.rate);
    params.vol = p.value("vol", params.vol);
    params.dt = p.value("dt", params.dt);
    if (!j.contains("grid")) throw ConfigError("instance.put needs instance.grid");
    inst = bermudan_instance(params, grid_from(j.at("grid")), j.value("name", std::string("put")));
  } else if (j.contains("model")) {
    inst.name = j.value("name", std::string("model"));
    inst.model = model_from(j.at("model"));
    inst.disturbance = distribution_from(j.at("disturbance"));
    if (!j.contains("grid")) throw ConfigError("instance.model needs instance.grid");
    inst.grid = grid_from(j.at("grid"));
    if (j.contains("left_ext")) inst.left_ext = piece(j.at("left_ext"));
  } else {
    throw ConfigError("instance must be a preset name or an object with 'put' or 'model'");
  }
  if (root.contains("grid")) inst.grid = grid_from(root.at("grid"));
  return inst;
}

}  // namespace detail

/// Parses and validates a config. Throws ConfigError with a diagnostic.
inline RunConfig parse_config(const json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("instance")) throw ConfigError("missing 'instance'");
    c.instance = detail::instance_from(j);

    const auto scheme = j.value("scheme", std::string("both"));
    if (scheme == "lower") {
      c.scheme = SchemeChoice::lower;
    } else if (scheme == "upper") {
      c.scheme = SchemeChoice::upper;
    } else if (scheme == "both") {
      c.scheme = SchemeChoice::both;
    } else {
      throw ConfigError("scheme must be lower, upper or both (got '" + scheme + "')");
    }
    c.n = j.value("n", c.n);
    if (c.n < 1) throw ConfigError("n must be at least 1");
    const auto ls = j.value("lower_sampling", std::string("local_average"));
    if (ls == "local_average") {
      c.lower_sampling = LowerSampling::local_average;
    } else if (ls == "monte_carlo") {
      c.lower_sampling = LowerSampling::monte_carlo;
    } else {
      throw ConfigError("lower_sampling must be local_average or monte_carlo");
    }
    c.truncation_mass = j.value("truncation_mass", c.truncation_mass);
    if (!(c.truncation_mass > 0.0 && c.truncation_mass < 1.0))
      throw ConfigError("truncation_mass must lie in (0, 1)");
    c.tol = j.value("tol", c.tol);
    if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
    c.max_iter = j.value("max_iter", c.max_iter);
    if (c.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    c.seed = j.value("seed", c.seed);
    c.start_state = j.value("start_state", c.start_state);
    if (c.start_state >= c.instance.model.num_discrete)
      throw ConfigError("start_state out of range");
    c.output = j.value("output", c.output);
    c.curve_points = j.value("curve_points", c.curve_points);
    if (c.curve_points == 1) throw ConfigError("curve_points must be 0 or at least 2");

    if (j.contains("eval_points")) {
      c.eval_points = j.at("eval_points").get<std::vector<double>>();
    } else if (j.at("instance").is_string()) {
      c.eval_points = bermudan::table_start_prices();
    }
    const Grid& g = c.instance.grid;
    for (double z : c.eval_points) {
      if (!(z >= g.front() && z <= g.back())) {
        std::ostringstream os;
        os << "eval point " << z << " outside grid hull [" << g.front() << ", " << g.back() << "]";
        throw ConfigError(os.str());
      }
    }

    if (j.contains("verify")) {
      const json& v = j.at("verify");
      auto& o = c.verify;
      o.paths = v.value("paths", o.paths);
      o.chain = v.value("chain", o.chain);
      if (v.contains("chain_tol")) o.chain_tol = v.at("chain_tol").get<double>();
      o.probes = v.value("probes", o.probes);
      o.contraction_pairs = v.value("contraction_pairs", o.contraction_pairs);
      o.tail_cap = v.value("tail_cap", o.tail_cap);
      o.fault_offset = v.value("fault_offset", o.fault_offset);
      if (o.paths < 100) throw ConfigError("verify.paths must be at least 100");
      if (o.chain.empty()) throw ConfigError("verify.chain must not be empty");
      for (std::size_t i = 0; i + 1 < o.chain.size(); ++i)
        if (o.chain[i + 1] % o.chain[i] != 0)
          throw ConfigError("verify.chain: each n must divide the next");
      if (o.probes < 2) throw ConfigError("verify.probes must be at least 2");
    }

    if (c.wants_upper() && !c.instance.left_ext)
      throw ConfigError("upper scheme needs instance.left_ext");
    auto violations = validate(c.instance.model, lower_scheme(c.instance.grid));
    if (c.wants_upper() && violations.empty())
      violations = validate(c.instance.model, upper_scheme(c.instance));
    if (!violations.empty())
      throw ConfigError("model invalid: " + violations.front().assumption + ": " +
                        violations.front().detail);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

/// Fixed 5-decimal rendering used in every table.
inline std::string fixed5(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", x);
  std::string s(buf);
  if (s == "-0.00000") s = "0.00000";
  return s;
}

struct SolveOutput {
  std::optional<FixedPointResult> lower;
  std::optional<FixedPointResult> upper;
  SamplingSet lower_samplings;
  SamplingSet upper_samplings;
};

inline SolveOutput solve(const RunConfig& c) {
  SolveOutput out;
  const Instance& inst = c.instance;
  if (c.wants_lower()) {
    out.lower_samplings = lower_samplings(inst.disturbance, c.n, c.lower_sampling, c.seed);
    out.lower = solve_fixed_point(inst.model, out.lower_samplings, lower_scheme(inst.grid), c.tol,
                                  c.max_iter);
  }
  if (c.wants_upper()) {
    out.upper_samplings = upper_samplings(inst.disturbance, c.n, c.truncation_mass);
    out.upper = solve_fixed_point(inst.model, out.upper_samplings, upper_scheme(inst), c.tol,
                                  c.max_iter);
  }
  return out;
}

/// results.csv: z0,lower[,upper,gap]. The gap is formed from the rounded
/// values so the columns are consistent as printed.
inline std::string results_table(const RunConfig& c, const SolveOutput& s) {
  std::ostringstream os;
  os << "z0";
  if (s.lower) os << ",lower";
  if (s.upper) os << ",upper";
  if (s.lower && s.upper) os << ",gap";
  os << '\n';
  for (double z : c.eval_points) {
    os << fixed5(z);
    double lo = 0.0, up = 0.0;
    if (s.lower) {
      lo = std::stod(fixed5(s.lower->value(c.start_state, z)));
      os << ',' << fixed5(lo);
    }
    if (s.upper) {
      up = std::stod(fixed5(s.upper->value(c.start_state, z)));
      os << ',' << fixed5(up);
    }
    if (s.lower && s.upper) os << ',' << fixed5(up - lo);
    os << '\n';
  }
  return os.str();
}

inline std::string curve_table(const RunConfig& c, const SolveOutput& s) {
  std::ostringstream os;
  os << "z";
  if (s.lower) os << ",lower";
  if (s.upper) os << ",upper";
  os << '\n';
  for (double z : hull_points(c.instance.grid, c.curve_points)) {
    os << fixed5(z);
    if (s.lower) os << ',' << fixed5(s.lower->value(c.start_state, z));
    if (s.upper) os << ',' << fixed5(s.upper->value(c.start_state, z));
    os << '\n';
  }
  return os.str();
}

inline void write_log_entry(std::ostream& log, const char* label, const FixedPointResult& r) {
  log << label << ": scheme=" << to_string(r.scheme.kind) << " sampling=" << r.sampling_id
      << " grid=" << r.scheme.grid.size() << " iterations=" << r.iterations
      << " converged=" << (r.converged ? "yes" : "no") << " seconds=" << std::fixed
      << std::setprecision(3) << r.seconds << '\n';
  log << label << " residuals:";
  log << std::scientific << std::setprecision(6);
  for (double x : r.residual_history) log << ' ' << x;
  log << std::defaultfloat << '\n';
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

/// Runs the solve command and writes results.csv, run.log and curve.csv
/// into `out_dir`. Returns an exit code.
inline int run_solve(const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& msg) {
  std::filesystem::create_directories(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const SolveOutput s = solve(c);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_file(out_dir / "results.csv", results_table(c, s));
  if (c.curve_points >= 2) write_file(out_dir / "curve.csv", curve_table(c, s));

  std::ostringstream log;
  log << "instance=" << c.instance.name << " n=" << c.n << " tol=" << c.tol
      << " max_iter=" << c.max_iter << " seed=" << c.seed << '\n';
  bool converged = true;
  if (s.lower) {
    write_log_entry(log, "lower", *s.lower);
    converged = converged && s.lower->converged;
  }
  if (s.upper) {
    write_log_entry(log, "upper", *s.upper);
    converged = converged && s.upper->converged;
  }
  log << "wall_seconds=" << std::fixed << std::setprecision(3) << wall << '\n';
  write_file(out_dir / "run.log", log.str());

  msg << results_table(c, s);
  if (!converged) {
    msg << "error: fixed-point iteration did not converge within " << c.max_iter
        << " iterations\n";
    return kNotConverged;
  }
  return kOk;
}

/// Oracle checks: MC bracket at the eval points, monotone refinement chain,
/// contraction ratio. Prints one PASS/FAIL line per check.
inline int run_verify(const RunConfig& c, std::ostream& msg) {
  const Instance& inst = c.instance;
  const auto& o = c.verify;
  std::vector<CheckResult> checks;
  if (!inst.left_ext) throw ConfigError("verify needs an instance with a left extension");

  auto chain = solve_chain(inst, o.chain, o.chain_tol.value_or(c.tol), c.max_iter, c.truncation_mass);
  const auto probes = hull_points(inst.grid, o.probes);
  for (auto& r : check_chain(chain, inst.model.num_discrete, probes, 1e-6)) checks.push_back(r);

  const auto ls = lower_samplings(inst.disturbance, c.n, c.lower_sampling, c.seed);
  const auto us = upper_samplings(inst.disturbance, c.n, c.truncation_mass);
  checks.push_back(check_contraction(inst.model, ls, lower_scheme(inst.grid), o.contraction_pairs, c.seed));
  checks.push_back(check_contraction(inst.model, us, upper_scheme(inst), o.contraction_pairs, c.seed));

  const auto lower = solve_fixed_point(inst.model, ls, lower_scheme(inst.grid), c.tol, c.max_iter);
  const auto upper = solve_fixed_point(inst.model, us, upper_scheme(inst), c.tol, c.max_iter);
  const auto rows = mc_bracket(inst, ls, lower, upper, c.eval_points, c.start_state, o.paths,
                               c.seed, o.tail_cap, o.fault_offset);
  for (const auto& r : rows) {
    std::ostringstream d;
    d << "mc " << fixed5(r.mc.mean) << " se " << fixed5(r.mc.std_error) << " in ["
      << fixed5(r.lower) << ", " << fixed5(r.upper) << "]";
    checks.push_back({"mc bracket z0=" + fixed5(r.z0), r.pass, d.str()});
  }

  bool ok = true;
  for (const auto& ch : checks) {
    msg << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << '\n';
    ok = ok && ch.pass;
  }
  return ok ? kOk : kVerifyFailed;
}

}  // namespace convexmdp::cli
