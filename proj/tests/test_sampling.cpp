#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "convexmdp/distribution.hpp"
#include "convexmdp/oracle.hpp"
#include "convexmdp/sampling.hpp"

using namespace convexmdp;

namespace {

double sum(const std::vector<double>& x) { return pairwise_sum(x); }

double expect(const Sampling& s, const auto& h) {
  std::vector<double> t(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) t[k] = s.weights[k] * h(s.points[k]);
  return pairwise_sum(t);
}

const Distribution kPutLaw = lognormal(0.0325, 0.1);

MaxAffine random_convex_in_w(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> slope(-40.0, 40.0), at(0.8, 1.3);
  std::vector<AffinePiece> pieces;
  for (int j = 0; j < 4; ++j) {
    const double s = slope(gen), a = at(gen);
    pieces.push_back({s, -s * a});
  }
  return MaxAffine(pieces);
}

}  // namespace

TEST(MonteCarlo, WeightsAndDeterminism) {
  const auto s = make_monte_carlo(uniform(0.0, 1.0), 4, 7);
  EXPECT_EQ(s.weights, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(make_monte_carlo(kPutLaw, 100, 3).points, make_monte_carlo(kPutLaw, 100, 3).points);
  EXPECT_NE(make_monte_carlo(kPutLaw, 100, 3).points, make_monte_carlo(kPutLaw, 100, 4).points);
  EXPECT_THROW(make_monte_carlo(kPutLaw, 0, 1), std::invalid_argument);
}

TEST(MonteCarlo, StandardLognormalMean) {
  const auto d = lognormal(0.0, 1.0);
  const std::size_t n = 100000;
  const auto s = make_monte_carlo(d, n, 1);
  const double mean = sum(s.points) / n;
  std::vector<double> sq(n);
  for (std::size_t k = 0; k < n; ++k) sq[k] = (s.points[k] - mean) * (s.points[k] - mean);
  const double se = std::sqrt(sum(sq) / (n - 1) / n);
  EXPECT_NEAR(mean, std::exp(0.5), 3.0 * se);
}

TEST(EquiprobPartition, Examples) {
  const auto two = make_equiprob_partition(kPutLaw, 2);
  ASSERT_EQ(two.boundaries.size(), 3u);
  EXPECT_NEAR(two.boundaries[1], std::exp(0.0325), 1e-12);
  const auto one = make_equiprob_partition(kPutLaw, 1);
  EXPECT_EQ(one.boundaries.size(), 2u);
  EXPECT_EQ(one.probs, (std::vector<double>{1.0}));
  const auto u = make_equiprob_partition(uniform(0.0, 1.0), 4);
  EXPECT_EQ(u.boundaries, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_NEAR(sum(make_equiprob_partition(kPutLaw, 1000).probs), 1.0, 1e-10);
}

TEST(Representative, Rules) {
  const auto part = make_equiprob_partition(uniform(0.0, 1.0), 2);
  const auto mid = make_representative(part, RepresentativeRule::midpoint);
  EXPECT_EQ(mid.points, (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(mid.weights, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(make_representative(part, RepresentativeRule::left).points[0], 0.0);
  EXPECT_EQ(make_representative(part, RepresentativeRule::right).points[0], 0.5);
  const auto single = make_representative(make_equiprob_partition(uniform(2.0, 4.0), 1),
                                          RepresentativeRule::midpoint);
  EXPECT_EQ(single.points, (std::vector<double>{3.0}));
  try {
    make_representative(make_equiprob_partition(kPutLaw, 3), RepresentativeRule::midpoint);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "representative rule needs compact support");
  }
}

TEST(LocalAverage, Examples) {
  const auto u = make_local_average(make_equiprob_partition(uniform(0.0, 1.0), 2), uniform(0.0, 1.0));
  EXPECT_DOUBLE_EQ(u.points[0], 0.25);
  EXPECT_DOUBLE_EQ(u.points[1], 0.75);
  const auto one = make_local_average(make_equiprob_partition(kPutLaw, 1), kPutLaw);
  EXPECT_NEAR(one.points[0], kPutLaw.mean, 1e-12);
  for (std::size_t n : {3u, 10u, 250u, 1000u, 4000u}) {
    const auto s = make_local_average(make_equiprob_partition(kPutLaw, n), kPutLaw);
    EXPECT_NEAR(expect(s, [](double w) { return w; }), std::exp(0.0325 + 0.005), 1e-8) << n;
  }
}

TEST(LocalAverage, MeanSquaredErrorIsMinimal) {
  const std::size_t n = 20, draws = 400000;
  const auto part = make_equiprob_partition(kPutLaw, n);
  const auto s = make_local_average(part, kPutLaw);
  const auto mc = make_monte_carlo(kPutLaw, draws, 8);
  std::vector<std::size_t> cell(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto it = std::lower_bound(part.boundaries.begin() + 1, part.boundaries.end() - 1, mc.points[i]);
    cell[i] = static_cast<std::size_t>(it - part.boundaries.begin()) - 1;
  }
  auto mse = [&](const std::vector<double>& theta) {
    std::vector<double> e(draws);
    for (std::size_t i = 0; i < draws; ++i) e[i] = std::pow(mc.points[i] - theta[cell[i]], 2);
    return pairwise_sum(e) / draws;
  };
  const double best = mse(s.points);
  for (std::size_t k = 0; k < n; ++k) {
    for (double eps : {2e-3, -2e-3}) {
      auto theta = s.points;
      theta[k] += eps;
      EXPECT_GT(mse(theta), best) << "cell " << k;
    }
  }
}

TEST(Refines, Examples) {
  const auto p250 = make_equiprob_partition(kPutLaw, 250);
  const auto p500 = make_equiprob_partition(kPutLaw, 500);
  const auto p300 = make_equiprob_partition(kPutLaw, 300);
  EXPECT_TRUE(refines(p500, p250));
  EXPECT_FALSE(refines(p300, p250));
  EXPECT_TRUE(refines(p250, p250));
  EXPECT_FALSE(refines(p250, p500));
}

TEST(Truncate, PaperMass) {
  const auto t = truncate(kPutLaw, 0.999999999);
  EXPECT_DOUBLE_EQ(t.normalizer, 1.0 / 0.999999999);
  EXPECT_LT(t.lo, std::exp(0.0325));
  EXPECT_GT(t.hi, std::exp(0.0325));
  EXPECT_EQ(t.cdf(t.hi), 1.0);
  EXPECT_EQ(t.cdf(t.lo), 0.0);
  EXPECT_NEAR(kPutLaw.cdf(t.lo), 0.5e-9, 1e-15);
  EXPECT_NEAR(kPutLaw.sf(t.hi), 0.5e-9, 1e-15);
  EXPECT_NEAR(t.prob(t.lo, t.hi), 1.0, 1e-14);
  EXPECT_THROW(truncate(kPutLaw, 1.0), std::invalid_argument);
}

TEST(ExtremeUpper, UniformSingleCell) {
  const auto d = uniform(0.0, 1.0);
  TruncatedDistribution t{d, 0.0, 1.0, 1.0};
  const auto s = make_extreme_upper(make_equiprob_partition(t, 1), t);
  EXPECT_EQ(s.points, (std::vector<double>{0.0, 1.0}));
  EXPECT_DOUBLE_EQ(s.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(s.weights[1], 0.5);
}

TEST(ExtremeUpper, WeightsAndMean) {
  const auto t = truncate(kPutLaw, 0.999999999);
  for (std::size_t n : {1u, 2u, 7u, 250u, 1000u}) {
    const auto s = make_extreme_upper(make_equiprob_partition(t, n), t);
    ASSERT_EQ(s.size(), n + 1);
    EXPECT_NEAR(sum(s.weights), 1.0, 1e-10) << n;
    EXPECT_NEAR(expect(s, [](double w) { return w; }), t.mean(), 1e-8) << n;
    for (double w : s.weights) EXPECT_GE(w, 0.0);
    EXPECT_EQ(s.points.front(), t.lo);
    EXPECT_EQ(s.points.back(), t.hi);
  }
}

TEST(ExtremeUpper, RejectsBadPartitions) {
  const auto t = truncate(kPutLaw, 0.999999999);
  auto part = make_equiprob_partition(t, 4);
  part.probs = {0.1, 0.2, 0.3, 0.4};
  EXPECT_THROW(make_extreme_upper(part, t), std::invalid_argument);
  try {
    TruncatedDistribution open{kPutLaw, 0.0, INFINITY, 1.0};
    Partition p{{0.5, 1.0, INFINITY}, {0.5, 0.5}};
    make_extreme_upper(p, open);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "extreme points need compact support");
  }
}

TEST(Ordering, JensenAcrossRefinement) {
  std::mt19937_64 gen(17);
  const auto t = truncate(kPutLaw, 0.999999999);
  const auto lo250 = make_local_average(make_equiprob_partition(kPutLaw, 250), kPutLaw);
  const auto lo500 = make_local_average(make_equiprob_partition(kPutLaw, 500), kPutLaw);
  const auto up250 = make_extreme_upper(make_equiprob_partition(t, 250), t);
  const auto up500 = make_extreme_upper(make_equiprob_partition(t, 500), t);
  const std::size_t draws = 1000000;
  const auto mc = make_monte_carlo(t.as_distribution(), draws, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_convex_in_w(gen);
    // z -> v(w z) at z = 40 and the convex function of w it induces.
    for (double z : {0.9, 1.0, 1.1}) {
      auto h = [&](double w) { return v(w * z); };
      const double a = expect(lo250, h), b = expect(lo500, h);
      const double c = expect(up500, h), d = expect(up250, h);
      const double tol = 1e-12 * std::max(1.0, std::abs(d));
      EXPECT_LE(a, b + tol);
      EXPECT_LE(b, c + tol);
      EXPECT_LE(c, d + tol);
      std::vector<double> vals(draws);
      for (std::size_t k = 0; k < draws; ++k) vals[k] = h(mc.points[k]);
      const double m = pairwise_sum(vals) / draws;
      for (auto& x : vals) x = (x - m) * (x - m);
      const double se = std::sqrt(pairwise_sum(vals) / (draws - 1) / draws);
      EXPECT_GE(c, m - 3.0 * se);
    }
  }
}
