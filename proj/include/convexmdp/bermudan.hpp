#pragma once

// Perpetual Bermudan put on a geometric Brownian asset observed every dt
// years: two discrete states, two actions, multiplicative lognormal shocks.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexmdp/bellman.hpp"
#include "convexmdp/distribution.hpp"
#include "convexmdp/model.hpp"

namespace convexmdp::bermudan {

inline constexpr std::size_t kUnexercised = 0;
inline constexpr std::size_t kExercised = 1;
inline constexpr std::size_t kContinue = 0;
inline constexpr std::size_t kExercise = 1;

struct PutParams {
  double strike = 40.0;
  double rate = 0.15;
  double vol = 0.2;
  double dt = 0.25;
};

inline void check(const PutParams& p) {
  if (!(p.strike > 0.0 && p.rate > 0.0 && p.vol > 0.0 && p.dt > 0.0))
    throw std::invalid_argument("PutParams: strike, rate, vol and dt must all be positive");
}

/// Log-mean and log-sd of the one-period gross return.
inline double log_mean(const PutParams& p) { return (p.rate - 0.5 * p.vol * p.vol) * p.dt; }
inline double log_sd(const PutParams& p) { return p.vol * std::sqrt(p.dt); }

inline MaxAffine payoff(double strike) { return MaxAffine{{-1.0, strike}, {0.0, 0.0}}; }

struct PutInstance {
  PutParams params;
  Model model;
  Distribution disturbance;
};

inline PutInstance build_put_model(const PutParams& params) {
  check(params);
  Model m;
  m.num_discrete = 2;
  m.num_actions = 2;
  m.alpha.assign(2, Matrix(2, std::vector<double>(2, 0.0)));
  m.alpha[kContinue][kUnexercised][kUnexercised] = 1.0;
  m.alpha[kContinue][kExercised][kExercised] = 1.0;
  m.alpha[kExercise][kUnexercised][kExercised] = 1.0;
  m.alpha[kExercise][kExercised][kExercised] = 1.0;
  m.reward.assign(2, std::vector<MaxAffine>(2, MaxAffine{}));
  m.reward[kUnexercised][kExercise] = payoff(params.strike);
  m.beta = std::exp(-params.rate * params.dt);
  m.bound_cr = 1.0;
  m.bound_cb = 1.0;
  m.bound_fn.assign(2, AffinePiece{0.0, params.strike});
  m.dynamics = AffineDynamics::multiplicative();
  m.state_lo = 0.0;
  return {params, std::move(m), lognormal(log_mean(params), log_sd(params))};
}

/// Grid left extension for the interpolation scheme: the payoff line.
inline AffinePiece exercise_line(const PutParams& p) { return {-1.0, p.strike}; }

/// Continuously exercisable perpetual put; dominates the Bermudan value.
inline double perpetual_american_reference(const PutParams& p, double z0) {
  check(p);
  if (!(z0 > 0.0)) throw std::invalid_argument("perpetual_american_reference: z0 must be positive");
  const double gamma = 2.0 * p.rate / (p.vol * p.vol);
  const double boundary = gamma * p.strike / (1.0 + gamma);
  if (z0 <= boundary) return p.strike - z0;
  return (p.strike - boundary) * std::pow(z0 / boundary, -gamma);
}

struct Preset {
  std::string name;
  PutParams params;
  double grid_lo = 0.0;
  double grid_hi = 0.0;
  std::size_t grid_count = 0;

  Grid grid() const { return Grid::uniform(grid_lo, grid_hi, grid_count); }
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"vol01", {40.0, 0.15, 0.1, 0.25}, 20.0, 70.0, 51},
      {"vol02", {40.0, 0.15, 0.2, 0.25}, 20.0, 120.0, 101},
      {"vol03", {40.0, 0.15, 0.3, 0.25}, 20.0, 420.0, 401},
  };
  return all;
}

inline const Preset& preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset '" + name + "'");
}

/// Start prices tabulated for the study.
inline std::vector<double> table_start_prices() { return {32, 34, 36, 38, 40, 42, 44, 46}; }

}  // namespace convexmdp::bermudan
