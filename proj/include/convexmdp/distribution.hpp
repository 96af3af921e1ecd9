#pragma once

// Laws of the scalar disturbance W.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "convexmdp/normal.hpp"

namespace convexmdp {

/// Type-erased law of a real random variable. Every member is a pure
/// function; copies share nothing mutable.
struct Distribution {
  std::string name;
  std::function<double(double)> cdf;
  std::function<double(double)> sf;              // P(W > x)
  std::function<double(double)> quantile;        // inverse of cdf
  std::function<double(double)> upper_quantile;  // x with P(W > x) = q
  std::function<double(double, double)> prob;    // P(W in (a, b])
  std::function<double(double, double)> partial_expectation;  // E[W 1(W in (a, b])]
  double mean = 0.0;
  double support_lo = -std::numeric_limits<double>::infinity();
  double support_hi = std::numeric_limits<double>::infinity();

  /// E[W | W in (a, b)].
  double cond_mean(double a, double b) const {
    const double p = prob(a, b);
    if (!(p > 0.0))
      throw std::domain_error(name + ": conditional mean on a zero-probability interval");
    const double m = partial_expectation(a, b) / p;
    if (!std::isfinite(m)) throw std::domain_error(name + ": conditional mean undefined");
    // Rounding can push the ratio a hair outside the interval.
    return std::clamp(m, std::max(a, support_lo), std::min(b, support_hi));
  }
};

/// E[W | W in (a, b)] for log W ~ N(mu, sigma^2).
inline double lognormal_cond_mean(double mu, double sigma, double a, double b) {
  if (!(a >= 0.0 && a < b)) throw std::invalid_argument("lognormal_cond_mean: need 0 <= a < b");
  const auto z = [&](double x, double shift) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    if (std::isinf(x)) return std::numeric_limits<double>::infinity();
    return (std::log(x) - mu - shift) / sigma;
  };
  const double p = normal_prob(z(a, 0.0), z(b, 0.0));
  if (!(p > 0.0)) throw std::domain_error("lognormal_cond_mean: zero-probability interval");
  const double s2 = sigma * sigma;
  return std::exp(mu + 0.5 * s2) * normal_prob(z(a, s2), z(b, s2)) / p;
}

inline Distribution lognormal(double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(mu))
    throw std::invalid_argument("lognormal: sigma must be positive and mu finite");
  const double s2 = sigma * sigma;
  const double scale = std::exp(mu + 0.5 * s2);
  auto std_z = [mu, sigma](double x, double shift) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    if (std::isinf(x)) return std::numeric_limits<double>::infinity();
    return (std::log(x) - mu - shift) / sigma;
  };
  Distribution d;
  d.name = "lognormal(" + std::to_string(mu) + "," + std::to_string(sigma) + ")";
  d.cdf = [std_z](double x) { return normal_cdf(std_z(x, 0.0)); };
  d.sf = [std_z](double x) { return normal_sf(std_z(x, 0.0)); };
  d.quantile = [mu, sigma](double p) { return std::exp(mu + sigma * normal_quantile(p)); };
  d.upper_quantile = [mu, sigma](double q) {
    return std::exp(mu + sigma * normal_upper_quantile(q));
  };
  d.prob = [std_z](double a, double b) { return normal_prob(std_z(a, 0.0), std_z(b, 0.0)); };
  d.partial_expectation = [std_z, scale, s2](double a, double b) {
    return scale * normal_prob(std_z(a, s2), std_z(b, s2));
  };
  d.mean = scale;
  d.support_lo = 0.0;
  return d;
}

inline Distribution uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("uniform: need finite lo < hi");
  const double w = hi - lo;
  auto clip = [lo, hi](double x) { return std::clamp(x, lo, hi); };
  Distribution d;
  d.name = "uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  d.cdf = [=](double x) { return (clip(x) - lo) / w; };
  d.sf = [=](double x) { return (hi - clip(x)) / w; };
  d.quantile = [=](double p) { return lo + p * w; };
  d.upper_quantile = [=](double q) { return hi - q * w; };
  d.prob = [=](double a, double b) { return a < b ? (clip(b) - clip(a)) / w : 0.0; };
  d.partial_expectation = [=](double a, double b) {
    if (!(a < b)) return 0.0;
    const double x0 = clip(a), x1 = clip(b);
    return 0.5 * (x1 * x1 - x0 * x0) / w;
  };
  d.mean = 0.5 * (lo + hi);
  d.support_lo = lo;
  d.support_hi = hi;
  return d;
}

}  // namespace convexmdp
