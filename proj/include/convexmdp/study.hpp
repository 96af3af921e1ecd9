#pragma once

// Glue shared by the CLI, the acceptance runner and the tests: an instance
// bundles a model with its disturbance law and grid, and the helpers build
// the matched lower/upper samplings and schemes for it.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "convexmdp/bellman.hpp"
#include "convexmdp/bermudan.hpp"
#include "convexmdp/distribution.hpp"
#include "convexmdp/model.hpp"
#include "convexmdp/sampling.hpp"

namespace convexmdp {

struct Instance {
  std::string name;
  Model model;
  Distribution disturbance;
  Grid grid;
  std::optional<AffinePiece> left_ext;
};

inline Instance bermudan_instance(const bermudan::PutParams& params, const Grid& grid,
                                  std::string name = "bermudan_put") {
  auto put = bermudan::build_put_model(params);
  return {std::move(name), std::move(put.model), std::move(put.disturbance), grid,
          bermudan::exercise_line(params)};
}

inline Instance bermudan_instance(const bermudan::Preset& p) {
  return bermudan_instance(p.params, p.grid(), p.name);
}

enum class LowerSampling { local_average, monte_carlo };

inline std::string to_string(LowerSampling k) {
  return k == LowerSampling::local_average ? "local_average" : "monte_carlo";
}

/// Default truncation for the upper scheme: 1e-9 of the mass, split evenly
/// between the two tails.
inline constexpr double kDefaultTruncationMass = 1.0 - 1e-9;

inline SamplingSet lower_samplings(const Distribution& dist, std::size_t n,
                                   LowerSampling kind = LowerSampling::local_average,
                                   std::uint64_t seed = 0) {
  if (kind == LowerSampling::monte_carlo) return {make_monte_carlo(dist, n, seed)};
  return {make_local_average(make_equiprob_partition(dist, n), dist)};
}

inline SamplingSet upper_samplings(const Distribution& dist, std::size_t n,
                                   double mass = kDefaultTruncationMass) {
  const auto t = truncate(dist, mass);
  return {make_extreme_upper(make_equiprob_partition(t, n), t)};
}

inline SchemeConfig lower_scheme(const Grid& grid) { return SchemeConfig::tangent(grid); }

inline SchemeConfig upper_scheme(const Instance& inst, const Grid& grid) {
  if (!inst.left_ext) throw std::invalid_argument("upper scheme needs a left extension");
  return SchemeConfig::interp(grid, *inst.left_ext);
}

inline SchemeConfig upper_scheme(const Instance& inst) { return upper_scheme(inst, inst.grid); }

/// n evenly spaced points spanning the grid hull.
inline std::vector<double> hull_points(const Grid& grid, std::size_t n) {
  if (n < 2) throw std::invalid_argument("hull_points: need at least two points");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i)
    z[i] = grid.front() + (grid.back() - grid.front()) * static_cast<double>(i) /
                              static_cast<double>(n - 1);
  z.back() = grid.back();
  return z;
}

}  // namespace convexmdp
