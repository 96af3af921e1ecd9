#pragma once

// Contracting MDP with a finite chain and a scalar convex state.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "convexmdp/convex_pwl.hpp"

namespace convexmdp {

using Matrix = std::vector<std::vector<double>>;

/// Next state f(w, z) = coef(w) * z + offset(w).
struct AffineDynamics {
  std::function<double(double)> coef;
  std::function<double(double)> offset;

  double operator()(double w, double z) const { return coef(w) * z + offset(w); }

  static AffineDynamics multiplicative() {
    return {[](double w) { return w; }, [](double) { return 0.0; }};
  }
  static AffineDynamics additive() {
    return {[](double) { return 1.0; }, [](double w) { return w; }};
  }
};

struct Model {
  std::size_t num_discrete = 0;
  std::size_t num_actions = 0;
  std::vector<Matrix> alpha;                  // alpha[a][p][p']
  std::vector<std::vector<MaxAffine>> reward; // reward[p][a]
  double beta = 0.0;
  double bound_cr = 0.0;
  double bound_cb = 0.0;
  std::vector<AffinePiece> bound_fn;          // b(p, z), per p
  AffineDynamics dynamics = AffineDynamics::multiplicative();
  double state_lo = -std::numeric_limits<double>::infinity();
  double state_hi = std::numeric_limits<double>::infinity();

  double bound(std::size_t p, double z) const { return bound_fn[p](z); }
  double reward_at(std::size_t p, std::size_t a, double z) const { return reward[p][a](z); }
};

inline double apply_dynamics(const Model& model, double w, double z) {
  return model.dynamics(w, z);
}

struct Violation {
  std::string assumption;
  std::string detail;
};

/// Probe points spread over the state interval, clipped to a finite window.
inline std::vector<double> default_probes(const Model& m, std::size_t count = 33) {
  double lo = std::isfinite(m.state_lo) ? m.state_lo : -100.0;
  double hi = std::isfinite(m.state_hi) ? m.state_hi : lo + 1000.0;
  std::vector<double> z(count);
  for (std::size_t i = 0; i < count; ++i)
    z[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return z;
}

/// Checks the structural assumptions. Reports; never throws.
inline std::vector<Violation> validate(const Model& m, const std::vector<double>& probes) {
  std::vector<Violation> out;
  auto add = [&out](std::string a, std::string d) { out.push_back({std::move(a), std::move(d)}); };
  const std::size_t np = m.num_discrete, na = m.num_actions;

  if (np == 0 || na == 0) {
    add("model shape", "need at least one discrete state and one action");
    return out;
  }
  if (m.alpha.size() != na) add("model shape", "alpha must hold one matrix per action");
  if (m.reward.size() != np) add("model shape", "reward must hold one row per discrete state");
  if (m.bound_fn.size() != np) add("model shape", "bound_fn must hold one entry per state");
  if (!out.empty()) return out;

  for (std::size_t a = 0; a < na; ++a) {
    if (m.alpha[a].size() != np) {
      add("stochastic matrix", "alpha[" + std::to_string(a) + "] has wrong row count");
      continue;
    }
    for (std::size_t p = 0; p < np; ++p) {
      const auto& row = m.alpha[a][p];
      if (row.size() != np) {
        add("stochastic matrix", "alpha[" + std::to_string(a) + "] row " + std::to_string(p) +
                                     " has wrong length");
        continue;
      }
      double sum = 0.0;
      bool negative = false;
      for (double x : row) {
        sum += x;
        negative = negative || x < 0.0;
      }
      if (negative || std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "alpha[" << a << "] row " << p << " sums to " << sum
           << (negative ? " with negative entries" : "");
        add("stochastic matrix", os.str());
      }
    }
  }
  for (std::size_t p = 0; p < np; ++p) {
    if (m.reward[p].size() != na)
      add("model shape", "reward row " + std::to_string(p) + " needs one entry per action");
  }
  if (!(m.beta > 0.0 && m.beta < 1.0))
    add("Assumption 1", "discount must lie in (0, 1), got " + std::to_string(m.beta));
  if (m.bound_cr < 0.0 || m.bound_cb < 0.0)
    add("Assumption 1", "bound constants c_r and c_b must be non-negative");
  if (!(m.beta * m.bound_cb < 1.0))
    add("Assumption 1", "beta * c_b = " + std::to_string(m.beta * m.bound_cb) + " is not < 1");

  for (std::size_t p = 0; p < np; ++p) {
    for (double z : probes) {
      const double b = m.bound(p, z);
      if (!(b > 0.0)) {
        add("Assumption 1", "bounding function not positive at state " + std::to_string(p) +
                                ", z=" + std::to_string(z));
        break;
      }
      if (m.reward[p].size() != na) break;
      bool bad = false;
      for (std::size_t a = 0; a < na && !bad; ++a) {
        if (std::abs(m.reward[p][a](z)) > m.bound_cr * b * (1.0 + 1e-12)) {
          add("Assumption 1", "|r| exceeds c_r*b at state " + std::to_string(p) + ", action " +
                                  std::to_string(a) + ", z=" + std::to_string(z));
          bad = true;
        }
      }
      if (bad) break;
    }
  }
  return out;
}

inline std::vector<Violation> validate(const Model& m) { return validate(m, default_probes(m)); }

}  // namespace convexmdp
