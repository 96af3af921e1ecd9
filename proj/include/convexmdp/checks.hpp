#pragma once

// Verification routines behind `verify` and the acceptance runner. Each check
// returns a named pass/fail with a one-line detail.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "convexmdp/bellman.hpp"
#include "convexmdp/oracle.hpp"
#include "convexmdp/rng.hpp"
#include "convexmdp/sampling.hpp"
#include "convexmdp/study.hpp"

namespace convexmdp {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

}  // namespace detail

/// Largest amount by which `lo` exceeds `hi` over the probes (negative when
/// lo < hi everywhere), per discrete state.
template <class Lo, class Hi>
double max_excess(const Lo& lo, const Hi& hi, std::size_t num_discrete,
                  const std::vector<double>& probes) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < num_discrete; ++p)
    for (double z : probes) worst = std::max(worst, lo(p, z) - hi(p, z));
  return worst;
}

struct ChainResults {
  std::vector<std::size_t> ns;
  std::vector<FixedPointResult> lower;
  std::vector<FixedPointResult> upper;
};

/// Solves both schemes for each n of a refinement chain.
inline ChainResults solve_chain(const Instance& inst, const std::vector<std::size_t>& ns,
                                double tol, std::size_t max_iter = 10000,
                                double mass = kDefaultTruncationMass) {
  ChainResults out;
  out.ns = ns;
  for (std::size_t n : ns) {
    out.lower.push_back(solve_fixed_point(inst.model, lower_samplings(inst.disturbance, n),
                                          lower_scheme(inst.grid), tol, max_iter));
    out.upper.push_back(solve_fixed_point(inst.model, upper_samplings(inst.disturbance, n, mass),
                                          upper_scheme(inst), tol, max_iter));
  }
  return out;
}

/// Lower non-decreasing and upper non-increasing along the chain, and
/// lower <= upper for every n.
inline std::vector<CheckResult> check_chain(const ChainResults& c, std::size_t num_discrete,
                                            const std::vector<double>& probes, double slack) {
  std::vector<CheckResult> out;
  auto lower = [&](std::size_t j) { return [&, j](std::size_t p, double z) { return c.lower[j].value(p, z); }; };
  auto upper = [&](std::size_t j) { return [&, j](std::size_t p, double z) { return c.upper[j].value(p, z); }; };
  double lo_worst = -std::numeric_limits<double>::infinity(), up_worst = lo_worst, gap_worst = lo_worst;
  for (std::size_t j = 0; j + 1 < c.ns.size(); ++j) {
    lo_worst = std::max(lo_worst, max_excess(lower(j), lower(j + 1), num_discrete, probes));
    up_worst = std::max(up_worst, max_excess(upper(j + 1), upper(j), num_discrete, probes));
  }
  for (std::size_t j = 0; j < c.ns.size(); ++j)
    gap_worst = std::max(gap_worst, max_excess(lower(j), upper(j), num_discrete, probes));
  std::string chain;
  for (std::size_t n : c.ns) chain += (chain.empty() ? "" : ",") + std::to_string(n);
  out.push_back({"lower non-decreasing in n (" + chain + ")", lo_worst <= slack,
                 "worst decrease " + detail::fmt(std::max(0.0, lo_worst))});
  out.push_back({"upper non-increasing in n (" + chain + ")", up_worst <= slack,
                 "worst increase " + detail::fmt(std::max(0.0, up_worst))});
  out.push_back({"lower <= upper for matched n", gap_worst <= slack,
                 "worst lower - upper " + detail::fmt(gap_worst)});
  return out;
}

/// Same orderings along nested grids at a fixed n.
inline std::vector<CheckResult> check_grid_nesting(const Instance& inst, const Grid& coarse,
                                                   const Grid& fine, std::size_t n, double tol,
                                                   const std::vector<double>& probes, double slack) {
  if (!grid_refines(fine, coarse)) return {{"grid nesting", false, "fine grid does not contain the coarse grid"}};
  const auto ls = lower_samplings(inst.disturbance, n);
  const auto us = upper_samplings(inst.disturbance, n);
  const auto lc = solve_fixed_point(inst.model, ls, lower_scheme(coarse), tol);
  const auto lf = solve_fixed_point(inst.model, ls, lower_scheme(fine), tol);
  const auto uc = solve_fixed_point(inst.model, us, upper_scheme(inst, coarse), tol);
  const auto uf = solve_fixed_point(inst.model, us, upper_scheme(inst, fine), tol);
  const double lo = max_excess(lc.value, lf.value, inst.model.num_discrete, probes);
  const double up = max_excess(uf.value, uc.value, inst.model.num_discrete, probes);
  const std::string m = std::to_string(coarse.size()) + " -> " + std::to_string(fine.size());
  return {{"lower non-decreasing in grid (" + m + ")", lo <= slack,
           "worst decrease " + detail::fmt(std::max(0.0, lo))},
          {"upper non-increasing in grid (" + m + ")", up <= slack,
           "worst increase " + detail::fmt(std::max(0.0, up))}};
}

/// Random convex piecewise-linear function per discrete state, non-negative
/// and with slopes in [-1.5, 0.5].
inline CompositeConvex random_convex_value(std::size_t num_discrete, const CounterRng& rng,
                                           std::uint64_t& counter, double lo, double hi) {
  std::vector<std::vector<Summand>> states(num_discrete);
  for (std::size_t p = 0; p < num_discrete; ++p) {
    const auto k = 2 + static_cast<std::size_t>(rng.uniform(counter++) * 6.0);
    std::vector<AffinePiece> pieces{{0.0, 0.0}};
    for (std::size_t j = 0; j < k; ++j) {
      const double slope = -1.5 + 2.0 * rng.uniform(counter++);
      const double at = lo + (hi - lo) * rng.uniform(counter++);
      const double height = 30.0 * rng.uniform(counter++);
      pieces.push_back({slope, height - slope * at});
    }
    states[p].push_back({MaxAffine(std::move(pieces)), MaxAffine{}, 0.0});
  }
  return CompositeConvex(std::move(states));
}

/// Grid points together with every image point f(W(k), g) reachable in one
/// step; the denominator of the contraction ratio is taken over this set.
inline std::vector<double> reachable_probes(const Model& model, const SamplingSet& samplings,
                                            const Grid& grid) {
  std::vector<double> z = grid.points();
  for (std::size_t a = 0; a < model.num_actions; ++a) {
    const Sampling& s = sampling_for(samplings, a);
    for (double g : grid.points())
      for (double w : s.points) z.push_back(model.dynamics(w, g));
    if (samplings.size() == 1) break;
  }
  std::sort(z.begin(), z.end());
  z.erase(std::unique(z.begin(), z.end()), z.end());
  return z;
}

struct ContractionReport {
  double max_ratio = 0.0;
  double grid_only_ratio = 0.0;  // same, denominator on grid points only
  double modulus = 0.0;
  std::size_t pairs = 0;
};

/// d(Tv', Tv'') / d(v', v'') over random pairs, numerator on grid points.
inline ContractionReport contraction_ratios(const Model& model, const SamplingSet& samplings,
                                            const SchemeConfig& config, std::size_t pairs,
                                            std::uint64_t seed) {
  const BellmanOperator op(model, samplings, config);
  const auto probes = reachable_probes(model, samplings, config.grid);
  const CounterRng rng(seed, 0);
  std::uint64_t counter = 0;
  ContractionReport rep;
  rep.modulus = contraction_modulus(model, config);
  rep.pairs = pairs;
  const double lo = config.grid.front(), hi = config.grid.back();
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto v1 = random_convex_value(model.num_discrete, rng, counter, lo, hi);
    const auto v2 = random_convex_value(model.num_discrete, rng, counter, lo, hi);
    const double d = weighted_distance(v1, v2, model, probes);
    if (d == 0.0) continue;
    const double dt = weighted_distance(op.step(v1).value, op.step(v2).value, model,
                                        config.grid.points());
    rep.max_ratio = std::max(rep.max_ratio, dt / d);
    const double dg = weighted_distance(v1, v2, model, config.grid.points());
    if (dg > 0.0) rep.grid_only_ratio = std::max(rep.grid_only_ratio, dt / dg);
  }
  return rep;
}

inline CheckResult check_contraction(const Model& model, const SamplingSet& samplings,
                                     const SchemeConfig& config, std::size_t pairs,
                                     std::uint64_t seed) {
  const auto r = contraction_ratios(model, samplings, config, pairs, seed);
  return {"contraction (" + to_string(config.kind) + ", " + std::to_string(pairs) + " pairs)",
          r.max_ratio <= r.modulus + 1e-9,
          "max ratio " + detail::fmt(r.max_ratio, 9) + " vs modulus " + detail::fmt(r.modulus, 9) +
              " (grid-only denominator " + detail::fmt(r.grid_only_ratio, 6) + ")"};
}

/// Weight sums, mean preservation and Jensen ordering across one refinement
/// step n -> 2n on random convex test functions.
inline std::vector<CheckResult> check_sampling_identities(const Distribution& dist, std::size_t n,
                                                          double mass, std::size_t functions,
                                                          std::uint64_t seed) {
  const auto t = truncate(dist, mass);
  const auto up_c = make_extreme_upper(make_equiprob_partition(t, n), t);
  const auto up_f = make_extreme_upper(make_equiprob_partition(t, 2 * n), t);
  const auto lo_c = make_local_average(make_equiprob_partition(dist, n), dist);
  const auto lo_f = make_local_average(make_equiprob_partition(dist, 2 * n), dist);

  auto expect = [](const Sampling& s, auto&& h) {
    std::vector<double> terms(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) terms[k] = s.weights[k] * h(s.points[k]);
    return pairwise_sum(terms);
  };
  auto one = [](double) { return 1.0; };
  auto id = [](double w) { return w; };

  std::vector<CheckResult> out;
  const double wsum = std::max(std::abs(expect(up_c, one) - 1.0), std::abs(expect(up_f, one) - 1.0));
  out.push_back({"extreme_upper weights sum to 1", wsum <= 1e-10, "error " + detail::fmt(wsum)});
  const double tmean = t.mean();
  const double um = std::max(std::abs(expect(up_c, id) - tmean), std::abs(expect(up_f, id) - tmean));
  out.push_back({"extreme_upper preserves truncated mean", um <= 1e-8, "error " + detail::fmt(um)});
  const double lm = std::max(std::abs(expect(lo_c, id) - dist.mean), std::abs(expect(lo_f, id) - dist.mean));
  out.push_back({"local_average preserves mean", lm <= 1e-8, "error " + detail::fmt(lm)});

  // Test functions: max of random lines through the central part of the law.
  const CounterRng rng(seed, 1);
  std::uint64_t counter = 0;
  const double q_lo = dist.quantile(0.05), q_hi = dist.quantile(0.95);
  std::size_t bad = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < functions; ++f) {
    std::vector<AffinePiece> pieces;
    const auto k = 2 + static_cast<std::size_t>(rng.uniform(counter++) * 5.0);
    for (std::size_t j = 0; j < k; ++j) {
      const double slope = -3.0 + 6.0 * rng.uniform(counter++);
      const double at = q_lo + (q_hi - q_lo) * rng.uniform(counter++);
      pieces.push_back({slope, -slope * at});
    }
    const MaxAffine h(std::move(pieces));
    const double e[] = {expect(lo_c, h), expect(lo_f, h), expect(up_f, h), expect(up_c, h)};
    for (int j = 0; j < 3; ++j) {
      const double gap = e[j] - e[j + 1];
      worst = std::max(worst, gap);
      if (gap > 1e-12 * std::max(1.0, std::abs(e[j]))) {
        ++bad;
        break;
      }
    }
  }
  out.push_back({"Jensen ordering across refinement (" + std::to_string(functions) + " functions)",
                 bad == 0, std::to_string(bad) + " violations, worst gap " + detail::fmt(worst)});
  return out;
}

struct BracketRow {
  double z0 = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  McEstimate mc;
  bool pass = false;
};

/// MC value of the greedy rule from the lower fixed point against
/// [lower - 3 se - tail, upper + 3 se] at each start price. `offset` is added
/// to both bounds (fault injection).
inline std::vector<BracketRow> mc_bracket(const Instance& inst, const SamplingSet& lower_s,
                                          const FixedPointResult& lower,
                                          const FixedPointResult& upper,
                                          const std::vector<double>& z0s, std::size_t p0,
                                          std::size_t paths, std::uint64_t seed,
                                          double tail_cap = 1e-4, double offset = 0.0) {
  const GreedyPolicy policy(inst.model, lower_s, lower.scheme, lower.value);
  const std::size_t horizon = default_horizon(inst.model, tail_cap);
  std::vector<BracketRow> rows;
  for (double z0 : z0s) {
    BracketRow r;
    r.z0 = z0;
    r.lower = lower.value(p0, z0) + offset;
    r.upper = upper.value(p0, z0) + offset;
    r.mc = mc_policy_value(inst.model, inst.disturbance, policy, z0, p0, horizon, paths, seed);
    r.pass = r.mc.mean >= r.lower - 3.0 * r.mc.std_error - r.mc.tail_bound &&
             r.mc.mean <= r.upper + 3.0 * r.mc.std_error;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace convexmdp
