#pragma once

// Modified transition operator, the two approximation schemes, the modified
// Bellman operator and its fixed-point iteration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexmdp/convex_pwl.hpp"
#include "convexmdp/model.hpp"
#include "convexmdp/parallel.hpp"
#include "convexmdp/sampling.hpp"

namespace convexmdp {

class Grid {
 public:
  Grid() = default;

  explicit Grid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("Grid needs at least two points");
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
      if (!(points_[i] < points_[i + 1]))
        throw std::invalid_argument("Grid points must be strictly increasing");
    }
  }

  /// count equally spaced points from lo to hi inclusive.
  static Grid uniform(double lo, double hi, std::size_t count) {
    if (count < 2 || !(lo < hi)) throw std::invalid_argument("Grid::uniform: need count >= 2, lo < hi");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
      g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    g.back() = hi;
    return Grid(std::move(g));
  }

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<double> points_;
};

/// Every coarse grid point is (within 1e-10) a fine grid point.
inline bool grid_refines(const Grid& fine, const Grid& coarse) {
  for (double c : coarse.points()) {
    auto it = std::lower_bound(fine.points().begin(), fine.points().end(), c - 1e-10);
    if (it == fine.points().end() || std::abs(*it - c) > 1e-10) return false;
  }
  return true;
}

enum class SchemeKind { tangent, interp };

inline std::string to_string(SchemeKind k) { return k == SchemeKind::tangent ? "tangent" : "interp"; }

/// What the stopping test compares between successive continuation probes.
enum class ResidualRule {
  values_and_slopes,     // probe value and slope (slopes: tangent scheme only)
  intercepts_and_slopes  // tangent line intercept and slope
};

struct SchemeConfig {
  SchemeKind kind = SchemeKind::tangent;
  Grid grid;
  std::optional<AffinePiece> left_ext;  // interp only
  bool include_zero_tangent = true;     // tangent only
  // Also approximate the maximised value max_a(...) per state; the iterate
  // is then evaluated through that envelope.
  bool approximate_value = false;
  ResidualRule residual = ResidualRule::values_and_slopes;

  static SchemeConfig tangent(Grid grid, bool include_zero = true) {
    return {SchemeKind::tangent, std::move(grid), std::nullopt, include_zero, false,
            ResidualRule::values_and_slopes};
  }
  static SchemeConfig interp(Grid grid, AffinePiece left_ext, bool approximate_value = true) {
    return {SchemeKind::interp, std::move(grid), left_ext, false, approximate_value,
            ResidualRule::values_and_slopes};
  }
};

/// Value and right derivative of a function at one point.
struct Probe {
  double value = 0.0;
  double slope = 0.0;
};

/// Per-action samplings; a single entry is shared by every action.
using SamplingSet = std::vector<Sampling>;

inline const Sampling& sampling_for(const SamplingSet& s, std::size_t a) {
  if (s.empty()) throw std::invalid_argument("empty sampling set");
  return s.size() == 1 ? s.front() : s.at(a);
}

/// Modified transition operator at (p, a, z):
///   sum_{p'} alpha^a_{p,p'} sum_k rho(k) v(p', f(W(k), z)),
/// with the slope obtained by the chain rule through the affine dynamics.
inline Probe apply_transition(const Model& model, const SamplingSet& samplings,
                              const CompositeConvex& v, std::size_t p, std::size_t a, double z) {
  const Sampling& s = sampling_for(samplings, a);
  const auto& row = model.alpha[a][p];
  Probe out;
  for (std::size_t q = 0; q < row.size(); ++q) {
    if (row[q] == 0.0) continue;
    double value = 0.0, slope = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double w = s.points[k];
      const double c = model.dynamics.coef(w);
      const auto [fv, fs] = v.value_slope(q, c * z + model.dynamics.offset(w));
      value += s.weights[k] * fv;
      slope += s.weights[k] * c * fs;
    }
    out.value += row[q] * value;
    out.slope += row[q] * slope;
  }
  return out;
}

/// Maximum of the supporting lines defined by (value, slope) probes at the
/// grid points, optionally with the zero piece.
inline MaxAffine tangents_from_probes(const Grid& grid, const std::vector<Probe>& probes,
                                      bool include_zero) {
  std::vector<AffinePiece> pieces;
  pieces.reserve(grid.size() + 1);
  for (std::size_t i = 0; i < grid.size(); ++i)
    pieces.push_back({probes[i].slope, probes[i].value - probes[i].slope * grid[i]});
  if (include_zero) pieces.push_back({0.0, 0.0});
  return MaxAffine(std::move(pieces));
}

/// Chord interpolant through grid values. The supplied left extension is used
/// when it passes through the first grid value; otherwise the first chord is
/// extended to the left. `left_matched` reports which case applied.
inline KnotInterp interp_from_values(const Grid& grid, std::vector<double> values,
                                     const std::optional<AffinePiece>& left_ext,
                                     bool* left_matched = nullptr) {
  const double g1 = grid[0], h1 = values[0];
  AffinePiece left;
  const bool matched =
      left_ext && std::abs((*left_ext)(g1) - h1) <= 1e-9 * std::max(1.0, std::abs(h1));
  if (matched) {
    left = *left_ext;
  } else {
    const double d1 = (values[1] - values[0]) / (grid[1] - grid[0]);
    left = {d1, h1 - d1 * g1};
  }
  if (left_matched) *left_matched = matched;
  const double tail = values.back();
  return KnotInterp(grid.points(), std::move(values), left, tail);
}

/// Tangent scheme: max of the supporting lines of h at the grid points.
template <ConvexFunction H>
MaxAffine tangent_approx(const H& h, const Grid& grid, bool include_zero) {
  std::vector<Probe> probes(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) probes[i] = {h(grid[i]), h.subgradient(grid[i])};
  return tangents_from_probes(grid, probes, include_zero);
}

/// Interpolation scheme: exact left extension, chords on the grid, constant
/// right tail. Over-estimates non-increasing convex h on [g_1, inf).
template <class H>
KnotInterp interp_approx(const H& h, const SchemeConfig& config, bool* left_matched = nullptr) {
  const Grid& grid = config.grid;
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = h(grid[i]);
  return interp_from_values(grid, std::move(values), config.left_ext, left_matched);
}

/// S applied to a function given by its grid probes.
inline ConvexPwl approximate_from_probes(const SchemeConfig& config, const std::vector<Probe>& probes,
                                         bool* left_matched = nullptr) {
  if (config.kind == SchemeKind::tangent)
    return tangents_from_probes(config.grid, probes, config.include_zero_tangent);
  std::vector<double> values(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) values[i] = probes[i].value;
  return interp_from_values(config.grid, std::move(values), config.left_ext, left_matched);
}

template <ConvexFunction H>
ConvexPwl approximate(const SchemeConfig& config, const H& h) {
  std::vector<Probe> probes(config.grid.size());
  for (std::size_t i = 0; i < config.grid.size(); ++i)
    probes[i] = {h(config.grid[i]), h.subgradient(config.grid[i])};
  return approximate_from_probes(config, probes);
}

/// v_0(p, z) = max_a r(p, z, a).
inline CompositeConvex reward_seed(const Model& model) {
  std::vector<std::vector<Summand>> states(model.num_discrete);
  for (std::size_t p = 0; p < model.num_discrete; ++p) {
    for (std::size_t a = 0; a < model.num_actions; ++a)
      states[p].push_back({model.reward[p][a], MaxAffine{}, model.beta});
  }
  return CompositeConvex(std::move(states));
}

/// Grid probes of z -> K^a v(p, z), indexed [p][a][grid point].
using ProbeTable = std::vector<std::vector<std::vector<Probe>>>;

/// T v(p, z) = max_a ( S r(p, z, a) + beta S K^a v(p, z) ). The approximated
/// rewards are built once.
class BellmanOperator {
 public:
  struct Step {
    CompositeConvex value;
    ProbeTable probes;
    std::size_t left_mismatches = 0;  // interp: cont parts using the chord fallback
  };

  BellmanOperator(const Model& model, const SamplingSet& samplings, const SchemeConfig& config)
      : model_(&model), samplings_(&samplings), config_(config) {
    if (config_.kind == SchemeKind::interp && !config_.left_ext)
      throw std::invalid_argument("interp scheme requires a left extension");
    rewards_.resize(model.num_discrete);
    for (std::size_t p = 0; p < model.num_discrete; ++p) {
      for (std::size_t a = 0; a < model.num_actions; ++a) {
        const MaxAffine& r = model.reward[p][a];
        rewards_[p].push_back(approximate(config_, r));
      }
    }
  }

  const SchemeConfig& config() const { return config_; }
  const Model& model() const { return *model_; }
  const ConvexPwl& approximated_reward(std::size_t p, std::size_t a) const { return rewards_[p][a]; }

  /// Grid probes of K^a v for every (p, a).
  ProbeTable transition_probes(const CompositeConvex& v) const {
    const std::size_t np = model_->num_discrete, na = model_->num_actions, m = config_.grid.size();
    ProbeTable table(np, std::vector<std::vector<Probe>>(na, std::vector<Probe>(m)));
    parallel_for(np * na * m, [&](std::size_t begin, std::size_t end) {
      for (std::size_t t = begin; t < end; ++t) {
        const std::size_t p = t / (na * m), a = (t / m) % na, i = t % m;
        table[p][a][i] = apply_transition(*model_, *samplings_, v, p, a, config_.grid[i]);
      }
    });
    return table;
  }

  Step step(const CompositeConvex& v) const {
    Step out;
    out.probes = transition_probes(v);
    std::vector<std::vector<Summand>> states(model_->num_discrete);
    for (std::size_t p = 0; p < model_->num_discrete; ++p) {
      for (std::size_t a = 0; a < model_->num_actions; ++a) {
        bool matched = true;
        ConvexPwl cont = approximate_from_probes(config_, out.probes[p][a], &matched);
        if (config_.kind == SchemeKind::interp && !matched) ++out.left_mismatches;
        states[p].push_back({rewards_[p][a], std::move(cont), model_->beta});
      }
    }
    if (!config_.approximate_value) {
      out.value = CompositeConvex(std::move(states));
      return out;
    }
    const CompositeConvex raw(std::move(states));
    std::vector<ConvexPwl> envelope;
    envelope.reserve(model_->num_discrete);
    for (std::size_t p = 0; p < model_->num_discrete; ++p) {
      std::vector<Probe> top(config_.grid.size());
      for (std::size_t i = 0; i < top.size(); ++i) {
        const auto act = raw.summand_max(p, config_.grid[i]);
        top[i] = {act.value, act.slope};
      }
      envelope.push_back(approximate_from_probes(config_, top));
    }
    std::vector<std::vector<Summand>> copy(model_->num_discrete);
    for (std::size_t p = 0; p < model_->num_discrete; ++p) copy[p] = raw.summands(p);
    out.value = CompositeConvex(std::move(copy), std::move(envelope));
    return out;
  }

 private:
  const Model* model_;
  const SamplingSet* samplings_;
  SchemeConfig config_;
  std::vector<std::vector<ConvexPwl>> rewards_;
};

inline CompositeConvex bellman_step(const Model& model, const SamplingSet& samplings,
                                    const SchemeConfig& config, const CompositeConvex& v) {
  return BellmanOperator(model, samplings, config).step(v).value;
}

struct FixedPointResult {
  CompositeConvex value;
  std::size_t iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  SchemeConfig scheme;
  std::string sampling_id;
  double seconds = 0.0;
};

/// Largest change of the grid probes; slopes count for the tangent scheme.
inline double probe_residual(const ProbeTable& prev, const ProbeTable& next, bool with_slopes) {
  double r = 0.0;
  for (std::size_t p = 0; p < next.size(); ++p)
    for (std::size_t a = 0; a < next[p].size(); ++a)
      for (std::size_t i = 0; i < next[p][a].size(); ++i) {
        r = std::max(r, std::abs(next[p][a][i].value - prev[p][a][i].value));
        if (with_slopes) r = std::max(r, std::abs(next[p][a][i].slope - prev[p][a][i].slope));
      }
  return r;
}

/// Largest change of the tangent lines (intercept and slope) at the grid.
inline double tangent_residual(const ProbeTable& prev, const ProbeTable& next, const Grid& grid) {
  double r = 0.0;
  for (std::size_t p = 0; p < next.size(); ++p)
    for (std::size_t a = 0; a < next[p].size(); ++a)
      for (std::size_t i = 0; i < next[p][a].size(); ++i) {
        const Probe& x = next[p][a][i];
        const Probe& y = prev[p][a][i];
        const double ix = x.value - x.slope * grid[i], iy = y.value - y.slope * grid[i];
        r = std::max({r, std::abs(ix - iy), std::abs(x.slope - y.slope)});
      }
  return r;
}

/// Iterates v <- T v from v_0 until the continuation probes at every grid
/// point move by at most tol. The seed counts as having zero continuation.
inline FixedPointResult solve_fixed_point(const Model& model, const SamplingSet& samplings,
                                          const SchemeConfig& config, const CompositeConvex& v0,
                                          double tol, std::size_t max_iter = 10000) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_fixed_point: tol must be positive");
  const auto start = std::chrono::steady_clock::now();
  const BellmanOperator op(model, samplings, config);
  const bool with_slopes = config.kind == SchemeKind::tangent;

  FixedPointResult res;
  res.scheme = config;
  res.sampling_id = samplings.empty() ? "" : samplings.front().describe();
  res.value = v0;
  ProbeTable prev(model.num_discrete,
                  std::vector<std::vector<Probe>>(model.num_actions,
                                                  std::vector<Probe>(config.grid.size())));
  while (res.iterations < max_iter) {
    auto step = op.step(res.value);
    ++res.iterations;
    const double r = config.residual == ResidualRule::intercepts_and_slopes
                         ? tangent_residual(prev, step.probes, config.grid)
                         : probe_residual(prev, step.probes, with_slopes);
    res.residual_history.push_back(r);
    res.value = std::move(step.value);
    prev = std::move(step.probes);
    if (r <= tol) {
      res.converged = true;
      break;
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline FixedPointResult solve_fixed_point(const Model& model, const SamplingSet& samplings,
                                          const SchemeConfig& config, double tol,
                                          std::size_t max_iter = 10000) {
  return solve_fixed_point(model, samplings, config, reward_seed(model), tol, max_iter);
}

/// Stationary greedy rule for v: argmax_a of S r + beta S K^a v, ties to
/// the lowest action index.
class GreedyPolicy {
 public:
  GreedyPolicy(const Model& model, const SamplingSet& samplings, const SchemeConfig& config,
               const CompositeConvex& v)
      : rhs_(BellmanOperator(model, samplings, config).step(v).value) {}

  std::size_t operator()(std::size_t p, double z) const {
    const auto& s = rhs_.summands(p);
    std::size_t best = 0;
    double best_value = s[0](z);
    for (std::size_t a = 1; a < s.size(); ++a) {
      const double x = s[a](z);
      if (x > best_value) {
        best = a;
        best_value = x;
      }
    }
    return best;
  }

  /// The maximised right-hand side T v.
  const CompositeConvex& rhs() const { return rhs_; }

 private:
  CompositeConvex rhs_;
};

inline std::size_t greedy_policy(const Model& model, const SamplingSet& samplings,
                                 const SchemeConfig& config, const CompositeConvex& v,
                                 std::size_t p, double z) {
  return GreedyPolicy(model, samplings, config, v)(p, z);
}

/// max over states and probes of |v1 - v2| / b.
template <class V1, class V2>
double weighted_distance(const V1& v1, const V2& v2, const Model& model,
                         const std::vector<double>& probes) {
  if (probes.empty()) throw std::invalid_argument("weighted_distance: no probe points");
  double d = 0.0;
  for (std::size_t p = 0; p < model.num_discrete; ++p)
    for (double z : probes) d = std::max(d, std::abs(v1(p, z) - v2(p, z)) / model.bound(p, z));
  return d;
}

/// beta * c_b * ||S b||_b, with the norm taken over the grid points and the
/// model's probe points.
inline double contraction_modulus(const Model& model, const SchemeConfig& config) {
  const std::vector<double> probes = default_probes(model, 257);
  double norm = 0.0;
  for (std::size_t p = 0; p < model.num_discrete; ++p) {
    const MaxAffine b{model.bound_fn[p]};
    const ConvexPwl sb = approximate(config, b);
    for (const auto* zs : {&probes, &config.grid.points()})
      for (double z : *zs) norm = std::max(norm, std::abs(eval(sb, z)) / model.bound(p, z));
  }
  return model.beta * model.bound_cb * norm;
}

/// Model checks plus the scheme-dependent contraction condition, which is
/// required to hold strictly.
inline std::vector<Violation> validate(const Model& model, const SchemeConfig& config) {
  auto out = validate(model);
  if (!out.empty()) return out;
  const double k = contraction_modulus(model, config);
  if (!(k < 1.0))
    out.push_back({"Assumption 7", "beta * c_b * ||S b||_b = " + std::to_string(k) + " is not < 1"});
  return out;
}

}  // namespace convexmdp
