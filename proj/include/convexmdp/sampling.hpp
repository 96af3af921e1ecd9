#pragma once

// Finite disturbance samplings (points, weights) and the interval
// partitions they are built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "convexmdp/distribution.hpp"
#include "convexmdp/rng.hpp"

namespace convexmdp {

/// Components are the half-open intervals (boundaries[k], boundaries[k+1]].
struct Partition {
  std::vector<double> boundaries;
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
};

enum class SamplingKind { monte_carlo, representative, local_average, extreme_upper };

inline std::string to_string(SamplingKind k) {
  switch (k) {
    case SamplingKind::monte_carlo: return "monte_carlo";
    case SamplingKind::representative: return "representative";
    case SamplingKind::local_average: return "local_average";
    case SamplingKind::extreme_upper: return "extreme_upper";
  }
  return "unknown";
}

struct Sampling {
  std::vector<double> points;
  std::vector<double> weights;
  SamplingKind kind = SamplingKind::monte_carlo;

  std::size_t size() const { return points.size(); }

  std::string describe() const { return to_string(kind) + " n=" + std::to_string(size()); }
};

/// Law restricted to [lo, hi] and renormalised.
struct TruncatedDistribution {
  Distribution base;
  double lo = 0.0;
  double hi = 0.0;
  double normalizer = 1.0;

  double cdf(double x) const {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    return std::min(1.0, normalizer * base.prob(lo, x));
  }

  /// Lambda(a, b) = E_trunc[W 1(W in [a, b])].
  double partial_expectation(double a, double b) const {
    const double x0 = std::max(a, lo), x1 = std::min(b, hi);
    if (!(x0 < x1)) return 0.0;
    return normalizer * base.partial_expectation(x0, x1);
  }

  double prob(double a, double b) const {
    const double x0 = std::max(a, lo), x1 = std::min(b, hi);
    if (!(x0 < x1)) return 0.0;
    return normalizer * base.prob(x0, x1);
  }

  double mean() const { return partial_expectation(lo, hi); }

  /// Inverse of cdf on [0, 1]; works from whichever tail is closer.
  double quantile(double u) const {
    if (u <= 0.0) return lo;
    if (u >= 1.0) return hi;
    const double mass = 1.0 / normalizer;
    if (u <= 0.5) return base.quantile(base.cdf(lo) + u * mass);
    return base.upper_quantile(base.sf(hi) + (1.0 - u) * mass);
  }

  /// The truncated law as a plain Distribution.
  Distribution as_distribution() const {
    const TruncatedDistribution self = *this;
    Distribution d;
    d.name = base.name + " truncated";
    d.cdf = [self](double x) { return self.cdf(x); };
    d.sf = [self](double x) { return 1.0 - self.cdf(x); };
    d.quantile = [self](double u) { return self.quantile(u); };
    d.upper_quantile = [self](double q) { return self.quantile(1.0 - q); };
    d.prob = [self](double a, double b) { return self.prob(a, b); };
    d.partial_expectation = [self](double a, double b) { return self.partial_expectation(a, b); };
    d.mean = mean();
    d.support_lo = lo;
    d.support_hi = hi;
    return d;
  }
};

/// Keeps `mass` of the probability, splitting the discarded tails equally.
inline TruncatedDistribution truncate(const Distribution& dist, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("truncate: mass must be in (0, 1)");
  const double tail = 0.5 * (1.0 - mass);
  TruncatedDistribution t;
  t.base = dist;
  t.lo = std::max(dist.quantile(tail), dist.support_lo);
  t.hi = std::min(dist.upper_quantile(tail), dist.support_hi);
  t.normalizer = 1.0 / mass;
  return t;
}

/// n i.i.d. draws by inverse transform of a counter-based uniform stream.
inline Sampling make_monte_carlo(const Distribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("make_monte_carlo: n must be positive");
  const CounterRng rng(seed, 0);
  Sampling s;
  s.kind = SamplingKind::monte_carlo;
  s.points.resize(n);
  s.weights.assign(n, 1.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) s.points[k] = dist.quantile(rng.uniform(k));
  return s;
}

namespace detail {

inline Partition equiprob_partition(double lo, double hi, std::size_t n,
                                    const auto& quantile_at) {
  if (n == 0) throw std::invalid_argument("equiprobable partition: n must be positive");
  Partition part;
  part.boundaries.resize(n + 1);
  part.boundaries.front() = lo;
  part.boundaries.back() = hi;
  for (std::size_t k = 1; k < n; ++k) {
    double q = quantile_at(k, n);
    if (!std::isfinite(q)) q = (q < 0) ? lo : hi;
    part.boundaries[k] = std::clamp(q, lo, hi);
  }
  for (std::size_t k = 1; k <= n; ++k) {
    if (!(part.boundaries[k] > part.boundaries[k - 1]))
      throw std::domain_error("equiprobable partition: boundaries collapse; n too large");
  }
  part.probs.assign(n, 1.0 / static_cast<double>(n));
  return part;
}

}  // namespace detail

/// Boundaries at the k/n quantiles.
inline Partition make_equiprob_partition(const Distribution& dist, std::size_t n) {
  return detail::equiprob_partition(
      dist.support_lo, dist.support_hi, n, [&dist](std::size_t k, std::size_t m) {
        // Upper half from the survival side keeps tail boundaries precise.
        if (2 * k <= m) return dist.quantile(static_cast<double>(k) / static_cast<double>(m));
        return dist.upper_quantile(static_cast<double>(m - k) / static_cast<double>(m));
      });
}

/// Equal-probability partition of the truncated support [lo, hi].
inline Partition make_equiprob_partition(const TruncatedDistribution& t, std::size_t n) {
  return detail::equiprob_partition(t.lo, t.hi, n, [&t](std::size_t k, std::size_t m) {
    return t.quantile(static_cast<double>(k) / static_cast<double>(m));
  });
}

enum class RepresentativeRule { midpoint, left, right };

/// One point per (bounded) component. The left rule returns the left
/// endpoint even though the component excludes it.
inline Sampling make_representative(const Partition& part, RepresentativeRule rule) {
  Sampling s;
  s.kind = SamplingKind::representative;
  for (std::size_t k = 0; k < part.size(); ++k) {
    const double a = part.boundaries[k], b = part.boundaries[k + 1];
    if (!std::isfinite(a) || !std::isfinite(b))
      throw std::domain_error("representative rule needs compact support");
    switch (rule) {
      case RepresentativeRule::midpoint: s.points.push_back(0.5 * (a + b)); break;
      case RepresentativeRule::left: s.points.push_back(a); break;
      case RepresentativeRule::right: s.points.push_back(b); break;
    }
  }
  s.weights = part.probs;
  return s;
}

/// Conditional means of each component; the MSE-optimal quantizer for a
/// fixed partition. Mean-preserving by the tower property.
inline Sampling make_local_average(const Partition& part, const Distribution& dist) {
  Sampling s;
  s.kind = SamplingKind::local_average;
  s.points.reserve(part.size());
  for (std::size_t k = 0; k < part.size(); ++k)
    s.points.push_back(dist.cond_mean(part.boundaries[k], part.boundaries[k + 1]));
  s.weights = part.probs;
  return s;
}

namespace detail {
inline bool same_boundary(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a));
}
}  // namespace detail

/// Every coarse boundary is also a fine boundary.
inline bool refines(const Partition& fine, const Partition& coarse) {
  std::size_t j = 0;
  for (double c : coarse.boundaries) {
    while (j < fine.boundaries.size() && fine.boundaries[j] < c &&
           !detail::same_boundary(fine.boundaries[j], c))
      ++j;
    if (j == fine.boundaries.size() || !detail::same_boundary(fine.boundaries[j], c)) return false;
  }
  return true;
}

/// Mean-preserving spread of an equal-probability partition of the truncated
/// support onto its n+1 component endpoints e_1 < ... < e_{n+1}. Each
/// component's mass 1/n is split between its two endpoints so that the
/// component's conditional mean is preserved.
inline Sampling make_extreme_upper(const Partition& part, const TruncatedDistribution& tdist) {
  const std::size_t n = part.size();
  if (n == 0 || part.boundaries.size() != n + 1)
    throw std::invalid_argument("make_extreme_upper: malformed partition");
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double p : part.probs) {
    if (std::abs(p * static_cast<double>(n) - 1.0) > 1e-9)
      throw std::invalid_argument("make_extreme_upper: partition is not equiprobable");
  }
  const auto& e = part.boundaries;
  for (double x : e) {
    if (!std::isfinite(x)) throw std::domain_error("extreme points need compact support");
  }

  Sampling s;
  s.kind = SamplingKind::extreme_upper;
  s.points = e;
  s.weights.assign(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double width = e[k + 1] - e[k];
    const double lambda = tdist.partial_expectation(e[k], e[k + 1]);
    s.weights[k] += (e[k + 1] * inv_n - lambda) / width;
    s.weights[k + 1] += (lambda - e[k] * inv_n) / width;
  }
  for (std::size_t j = 0; j <= n; ++j) {
    if (s.weights[j] < -1e-12)
      throw std::domain_error("make_extreme_upper: negative weight " +
                              std::to_string(s.weights[j]) + " at point " + std::to_string(j));
    s.weights[j] = std::max(s.weights[j], 0.0);
  }
  return s;
}

}  // namespace convexmdp
