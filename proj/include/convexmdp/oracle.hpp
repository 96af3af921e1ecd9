#pragma once

// Independent checks on the scheme output: Monte Carlo value of a stationary
// policy under the exact disturbance law, and brute-force value iteration on
// a dense grid with chord interpolation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "convexmdp/bellman.hpp"
#include "convexmdp/distribution.hpp"
#include "convexmdp/model.hpp"
#include "convexmdp/parallel.hpp"
#include "convexmdp/rng.hpp"

namespace convexmdp {

/// Pairwise summation; the association order depends only on the length.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
  std::size_t horizon = 0;
  double tail_bound = 0.0;  // bound on the discarded rewards after the horizon
};

namespace detail {

inline double sup_bound(const Model& m) {
  double s = 0.0;
  for (const auto& b : m.bound_fn) {
    if (b.slope != 0.0) return std::numeric_limits<double>::infinity();
    s = std::max(s, b.intercept);
  }
  return s;
}

// States that stay put under every action and never pay anything.
inline std::vector<bool> dead_states(const Model& m) {
  std::vector<bool> dead(m.num_discrete, true);
  for (std::size_t p = 0; p < m.num_discrete; ++p) {
    for (std::size_t a = 0; a < m.num_actions && dead[p]; ++a) {
      const auto& env = m.reward[p][a].envelope();
      const bool zero = env.size() == 1 && env[0].slope == 0.0 && env[0].intercept == 0.0;
      dead[p] = zero && m.alpha[a][p][p] == 1.0;
    }
  }
  return dead;
}

}  // namespace detail

/// beta^T c_r sup b / (1 - beta c_b).
inline double tail_bound(const Model& m, std::size_t horizon) {
  return std::pow(m.beta, static_cast<double>(horizon)) * m.bound_cr * detail::sup_bound(m) /
         (1.0 - m.beta * m.bound_cb);
}

/// Smallest horizon whose tail bound does not exceed cap.
inline std::size_t default_horizon(const Model& m, double cap = 1e-4) {
  const double head = m.bound_cr * detail::sup_bound(m) / (1.0 - m.beta * m.bound_cb);
  if (!std::isfinite(head)) throw std::domain_error("default_horizon: bounding function unbounded");
  if (head <= cap) return 0;
  auto t = static_cast<std::size_t>(std::ceil(std::log(cap / head) / std::log(m.beta)));
  while (tail_bound(m, t) > cap) ++t;
  return t;
}

/// Discounted reward of a stationary policy started at (p0, z0), simulated
/// with exact disturbances. Path i draws from counter stream i, so results
/// are independent of the worker count.
template <class Policy>
McEstimate mc_policy_value(const Model& model, const Distribution& dist, const Policy& policy,
                           double z0, std::size_t p0, std::size_t horizon, std::size_t paths,
                           std::uint64_t seed) {
  if (paths < 100) throw std::invalid_argument("mc_policy_value: need at least 100 paths");
  const auto dead = detail::dead_states(model);
  std::vector<double> value(paths);
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const CounterRng rng(seed, i);
      std::size_t p = p0;
      double z = z0, discount = 1.0, total = 0.0;
      for (std::size_t t = 0; t < horizon && !dead[p]; ++t) {
        const std::size_t a = policy(p, z);
        total += discount * model.reward[p][a](z);
        const auto& row = model.alpha[a][p];
        double u = rng.uniform(2 * t + 1), acc = 0.0;
        std::size_t next = row.size() - 1;
        for (std::size_t q = 0; q < row.size(); ++q) {
          acc += row[q];
          if (u < acc) {
            next = q;
            break;
          }
        }
        p = next;
        z = model.dynamics(dist.quantile(rng.uniform(2 * t)), z);
        discount *= model.beta;
      }
      value[i] = total;
    }
  });
  McEstimate est;
  est.paths = paths;
  est.horizon = horizon;
  est.tail_bound = tail_bound(model, horizon);
  est.mean = pairwise_sum(value) / static_cast<double>(paths);
  for (double& v : value) v = (v - est.mean) * (v - est.mean);
  const double var = pairwise_sum(value) / static_cast<double>(paths - 1);
  est.std_error = std::sqrt(var / static_cast<double>(paths));
  return est;
}

/// Value table on a grid; chord interpolation inside, first-chord extension
/// to the left, constant to the right.
struct DenseTable {
  Grid grid;
  std::vector<std::vector<double>> values;  // [p][i]
  std::size_t iterations = 0;
  bool converged = false;

  double operator()(std::size_t p, double z) const {
    const auto& g = grid.points();
    const auto& v = values[p];
    if (z >= g.back()) return v.back();
    std::size_t j = 0;
    if (z > g.front())
      j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), z) - g.begin()) - 1;
    return v[j] + (z - g[j]) * (v[j + 1] - v[j]) / (g[j + 1] - g[j]);
  }
};

/// Plain value iteration with values stored on a fine grid.
inline DenseTable dense_grid_vi(const Model& model, const SamplingSet& samplings,
                                const Grid& fine_grid, double tol, std::size_t max_iter = 10000) {
  const auto& g = fine_grid.points();
  const std::size_t m = g.size(), np = model.num_discrete, na = model.num_actions;

  // For each action: per (grid point, sample) the left node and the
  // interpolation coordinate of the image point.
  struct Stencil {
    std::vector<std::size_t> node;
    std::vector<double> t;
    const Sampling* s;
  };
  std::vector<Stencil> stencil(na);
  for (std::size_t a = 0; a < na; ++a) {
    const Sampling& s = sampling_for(samplings, a);
    auto& st = stencil[a];
    st.s = &s;
    st.node.resize(m * s.size());
    st.t.resize(m * s.size());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < s.size(); ++k) {
        const double y = model.dynamics(s.points[k], g[i]);
        std::size_t j;
        double t;
        if (y >= g.back()) {
          j = m - 2;
          t = 1.0;
        } else if (y <= g.front()) {
          j = 0;
          t = (y - g[0]) / (g[1] - g[0]);
        } else {
          j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), y) - g.begin()) - 1;
          t = (y - g[j]) / (g[j + 1] - g[j]);
        }
        st.node[i * s.size() + k] = j;
        st.t[i * s.size() + k] = t;
      }
    }
  }

  DenseTable table;
  table.grid = fine_grid;
  table.values.assign(np, std::vector<double>(m, 0.0));
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t i = 0; i < m; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) best = std::max(best, model.reward[p][a](g[i]));
      table.values[p][i] = best;
    }

  auto next = table.values;
  while (table.iterations < max_iter) {
    const auto& cur = table.values;
    parallel_for(np * m, [&](std::size_t begin, std::size_t end) {
      for (std::size_t idx = begin; idx < end; ++idx) {
        const std::size_t p = idx / m, i = idx % m;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) {
          const auto& st = stencil[a];
          const std::size_t n = st.s->size();
          double cont = 0.0;
          for (std::size_t q = 0; q < np; ++q) {
            const double pr = model.alpha[a][p][q];
            if (pr == 0.0) continue;
            const auto& v = cur[q];
            double e = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
              const std::size_t j = st.node[i * n + k];
              e += st.s->weights[k] * (v[j] + st.t[i * n + k] * (v[j + 1] - v[j]));
            }
            cont += pr * e;
          }
          best = std::max(best, model.reward[p][a](g[i]) + model.beta * cont);
        }
        next[p][i] = best;
      }
    });
    ++table.iterations;
    double r = 0.0;
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t i = 0; i < m; ++i) r = std::max(r, std::abs(next[p][i] - cur[p][i]));
    std::swap(table.values, next);
    if (r <= tol) {
      table.converged = true;
      break;
    }
  }
  return table;
}

}  // namespace convexmdp
