#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "convexmdp/bellman.hpp"
#include "convexmdp/bermudan.hpp"
#include "convexmdp/checks.hpp"
#include "convexmdp/study.hpp"

using namespace convexmdp;
using namespace convexmdp::bermudan;

namespace {

const MaxAffine kPayoff = payoff(40.0);

struct Square {
  double operator()(double z) const { return z * z; }
  double subgradient(double z) const { return 2.0 * z; }
};

struct Reciprocal {
  double operator()(double z) const { return 1.0 / z; }
  double subgradient(double z) const { return -1.0 / (z * z); }
};

CompositeConvex single(const MaxAffine& f, std::size_t states = 2) {
  std::vector<std::vector<Summand>> s(states, {{f, MaxAffine{}, 0.0}});
  return CompositeConvex(s);
}

Sampling points(std::vector<double> w, std::vector<double> rho) {
  return {std::move(w), std::move(rho), SamplingKind::representative};
}

// Shared small instance: vol 0.2 on its preset grid with n = 100.
struct Small {
  Instance inst = bermudan_instance(preset("vol02"));
  SamplingSet lo = lower_samplings(inst.disturbance, 100);
  SamplingSet up = upper_samplings(inst.disturbance, 100);
};

const Small& small() {
  static const Small s;
  return s;
}

}  // namespace

TEST(Grid, Validation) {
  EXPECT_THROW(Grid({1.0}), std::invalid_argument);
  EXPECT_THROW(Grid({1.0, 1.0}), std::invalid_argument);
  const auto g = Grid::uniform(20.0, 120.0, 101);
  EXPECT_EQ(g.size(), 101u);
  EXPECT_DOUBLE_EQ(g[37], 57.0);
  EXPECT_TRUE(grid_refines(g, Grid::uniform(20.0, 120.0, 51)));
  EXPECT_FALSE(grid_refines(Grid::uniform(20.0, 120.0, 51), g));
}

TEST(ApplyTransition, ZeroFunction) {
  const auto put = build_put_model({});
  const SamplingSet s{points({0.9, 1.1}, {0.5, 0.5})};
  const auto pr = apply_transition(put.model, s, single(MaxAffine{}), 0, 0, 37.0);
  EXPECT_EQ(pr.value, 0.0);
  EXPECT_EQ(pr.slope, 0.0);
}

TEST(ApplyTransition, IdentityDisturbance) {
  const auto put = build_put_model({});
  const SamplingSet s{points({1.0}, {1.0})};
  const auto pr = apply_transition(put.model, s, single(kPayoff), 0, kContinue, 30.0);
  EXPECT_DOUBLE_EQ(pr.value, 10.0);
  EXPECT_DOUBLE_EQ(pr.slope, -1.0);
}

TEST(ApplyTransition, TwoPointByHand) {
  const auto put = build_put_model({});
  const SamplingSet s{points({0.5, 1.5}, {0.5, 0.5})};
  const auto pr = apply_transition(put.model, s, single(kPayoff), 0, kContinue, 40.0);
  EXPECT_DOUBLE_EQ(pr.value, 10.0);
  EXPECT_DOUBLE_EQ(pr.slope, 0.5 * 0.5 * -1.0);
}

TEST(ApplyTransition, FollowsTheChain) {
  const auto put = build_put_model({});
  std::vector<std::vector<Summand>> st{{{kPayoff, MaxAffine{}, 0.0}}, {{MaxAffine{{0.0, 3.0}}, MaxAffine{}, 0.0}}};
  const CompositeConvex v(st);
  const SamplingSet s{points({1.0}, {1.0})};
  EXPECT_DOUBLE_EQ(apply_transition(put.model, s, v, kUnexercised, kExercise, 30.0).value, 3.0);
  EXPECT_DOUBLE_EQ(apply_transition(put.model, s, v, kUnexercised, kContinue, 30.0).value, 10.0);
}

TEST(TangentApprox, Examples) {
  const Grid g({10.0, 30.0, 50.0, 70.0});
  const MaxAffine line{{0.5, -2.0}};
  const auto a = tangent_approx(line, g, true);
  for (double z : {-100.0, 0.0, 4.0, 50.0, 300.0}) EXPECT_DOUBLE_EQ(a(z), std::max(line(z), 0.0));
  const auto p = tangent_approx(kPayoff, g, true);
  for (double z : {-5.0, 20.0, 39.0, 40.0, 41.0, 90.0}) EXPECT_DOUBLE_EQ(p(z), kPayoff(z));
  const auto sq = tangent_approx(Square{}, Grid({-1.0, 0.0, 1.0}), false);
  EXPECT_EQ(sq.envelope(), (std::vector<AffinePiece>{{-2.0, -1.0}, {0.0, 0.0}, {2.0, -1.0}}));
  EXPECT_DOUBLE_EQ(sq(0.5), 0.0);
}

TEST(TangentApprox, BelowFunctionAndLinear) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  const Grid g = Grid::uniform(-40.0, 40.0, 17);
  const MaxAffine h1{{-1.0, 3.0}, {0.2, -4.0}, {1.5, -30.0}};
  const MaxAffine h2{{-0.3, 0.0}, {0.7, -10.0}};
  const double c = 2.5;
  struct Combo {
    const MaxAffine *a, *b;
    double c;
    double operator()(double z) const { return c * (*a)(z) + (*b)(z); }
    double subgradient(double z) const { return c * a->subgradient(z) + b->subgradient(z); }
  } combo{&h1, &h2, c};
  const auto s1 = tangent_approx(h1, g, false), s2 = tangent_approx(h2, g, false);
  const auto sc = tangent_approx(combo, g, false);
  for (int i = 0; i < 200; ++i) {
    const double z = u(gen);
    EXPECT_LE(sc(z), combo(z) + 1e-12);
  }
  // Linearity holds on the grid, where each approximation is exact.
  for (double z : g.points()) EXPECT_NEAR(sc(z), c * s1(z) + s2(z), 1e-12);
}

TEST(InterpApprox, Examples) {
  const auto line = SchemeConfig::interp(Grid({0.0, 1.0, 2.0}), AffinePiece{-1.0, 5.0});
  const auto a = interp_approx(MaxAffine{{-1.0, 5.0}}, line);
  EXPECT_DOUBLE_EQ(a(0.5), 4.5);
  EXPECT_DOUBLE_EQ(a(10.0), 3.0);
  EXPECT_DOUBLE_EQ(a(-3.0), 8.0);

  const auto put = SchemeConfig::interp(Grid({20.0, 40.0, 60.0}), AffinePiece{-1.0, 40.0});
  const auto p = interp_approx(kPayoff, put);
  EXPECT_EQ(p.values(), (std::vector<double>{20.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(p(50.0), 0.0);
  EXPECT_DOUBLE_EQ(p(30.0), 10.0);

  const auto r = interp_approx(Reciprocal{}, SchemeConfig::interp(Grid({1.0, 2.0}), AffinePiece{-1.0, 2.0}));
  EXPECT_DOUBLE_EQ(r(1.5), 0.75);
  EXPECT_GE(r(1.5), 1.0 / 1.5);
}

TEST(InterpApprox, LeftExtensionFallsBackToFirstChord) {
  const auto cfg = SchemeConfig::interp(Grid({20.0, 40.0, 60.0}), AffinePiece{-1.0, 40.0});
  bool matched = true;
  const auto z = interp_approx(MaxAffine{}, cfg, &matched);
  EXPECT_FALSE(matched);
  EXPECT_DOUBLE_EQ(z(0.0), 0.0);
  interp_approx(kPayoff, cfg, &matched);
  EXPECT_TRUE(matched);
}

TEST(InterpApprox, AboveDecreasingConvexFunction) {
  const auto cfg = SchemeConfig::interp(Grid::uniform(1.0, 5.0, 9), AffinePiece{-1.0, 2.0});
  const auto r = interp_approx(Reciprocal{}, cfg);
  for (double z = 1.0; z < 20.0; z += 0.01) EXPECT_GE(r(z), 1.0 / z - 1e-15);
  EXPECT_THROW(interp_approx([](double z) { return -z * z; }, cfg), std::invalid_argument);
}

TEST(BellmanStep, ZeroDiscountGivesApproximatedReward) {
  auto m = build_put_model({}).model;
  m.beta = 0.0;
  const auto cfg = SchemeConfig::tangent(Grid::uniform(20.0, 120.0, 101));
  const SamplingSet s{points({0.9, 1.1}, {0.5, 0.5})};
  const auto v = bellman_step(m, s, cfg, single(MaxAffine{{0.0, 7.0}}));
  for (double z : {10.0, 25.0, 40.0, 70.0}) {
    EXPECT_DOUBLE_EQ(v(kUnexercised, z), kPayoff(z));
    EXPECT_DOUBLE_EQ(v(kExercised, z), 0.0);
  }
  const auto r = solve_fixed_point(m, s, cfg, 1e-3);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2u);
}

TEST(BellmanStep, ExercisedStateStaysZero) {
  const auto& sm = small();
  const auto cfg = lower_scheme(sm.inst.grid);
  auto v = reward_seed(sm.inst.model);
  for (int i = 0; i < 3; ++i) v = bellman_step(sm.inst.model, sm.lo, cfg, v);
  for (double z : {5.0, 20.0, 40.0, 200.0}) EXPECT_EQ(v(kExercised, z), 0.0);
}

TEST(BellmanStep, DeepInTheMoneyFromPayoffSeed) {
  const auto& sm = small();
  const auto cfg = lower_scheme(sm.inst.grid);
  const auto v1 = bellman_step(sm.inst.model, sm.lo, cfg, reward_seed(sm.inst.model));
  // Continuation at 20 by hand: beta * sum rho (40 - 20 w)^+.
  double cont = 0.0;
  for (std::size_t k = 0; k < sm.lo[0].size(); ++k)
    cont += sm.lo[0].weights[k] * std::max(40.0 - 20.0 * sm.lo[0].points[k], 0.0);
  cont *= sm.inst.model.beta;
  EXPECT_LT(cont, 20.0);
  EXPECT_DOUBLE_EQ(v1(kUnexercised, 20.0), 20.0);
  EXPECT_NEAR(v1.summands(kUnexercised)[kContinue](20.0), cont, 1e-10);
}

TEST(BellmanStep, MonotoneOnGridPoints) {
  const auto& sm = small();
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CounterRng rng(5, 0);
  std::uint64_t counter = 0;
  for (const auto& [cfg, s] : {std::pair{lower_scheme(sm.inst.grid), sm.lo},
                               std::pair{upper_scheme(sm.inst), sm.up}}) {
    const BellmanOperator op(sm.inst.model, s, cfg);
    for (int trial = 0; trial < 10; ++trial) {
      const auto a = random_convex_value(2, rng, counter, 20.0, 120.0);
      const auto b = random_convex_value(2, rng, counter, 20.0, 120.0);
      // hi = max(a, b) >= a everywhere.
      std::vector<std::vector<Summand>> st(2);
      for (std::size_t p = 0; p < 2; ++p) {
        st[p] = a.summands(p);
        st[p].push_back(b.summands(p)[0]);
      }
      const CompositeConvex hi(st);
      const auto ta = op.step(a).value, th = op.step(hi).value;
      for (std::size_t p = 0; p < 2; ++p)
        for (double z : cfg.grid.points()) EXPECT_LE(ta(p, z), th(p, z) + 1e-9);
    }
  }
}

TEST(BellmanStep, IteratesStayConvex) {
  const auto& sm = small();
  for (const auto& [cfg, s] : {std::pair{lower_scheme(sm.inst.grid), sm.lo},
                               std::pair{upper_scheme(sm.inst), sm.up}}) {
    auto v = reward_seed(sm.inst.model);
    for (int it = 0; it < 8; ++it) {
      v = bellman_step(sm.inst.model, s, cfg, v);
      for (std::size_t p = 0; p < 2; ++p)
        for (double z = 0.5; z < 200.0; z += 0.37) {
          const double l = v(p, z - 0.3), m = v(p, z), r = v(p, z + 0.3);
          EXPECT_LE(m, 0.5 * (l + r) + 1e-12) << to_string(cfg.kind) << " z=" << z;
        }
    }
  }
}

TEST(SolveFixedPoint, ConvergedResultIsStable) {
  const auto& sm = small();
  const double tol = 1e-3;
  for (const auto& [cfg, s] : {std::pair{lower_scheme(sm.inst.grid), sm.lo},
                               std::pair{upper_scheme(sm.inst), sm.up}}) {
    const auto r = solve_fixed_point(sm.inst.model, s, cfg, tol);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.residual_history.back(), tol);
    EXPECT_EQ(r.residual_history.size(), r.iterations);
    const auto next = bellman_step(sm.inst.model, s, cfg, r.value);
    for (std::size_t p = 0; p < 2; ++p)
      for (double z : cfg.grid.points()) EXPECT_LE(std::abs(next(p, z) - r.value(p, z)), 2 * tol);
  }
}

TEST(SolveFixedPoint, MaxIterExhaustion) {
  const auto& sm = small();
  const auto r = solve_fixed_point(sm.inst.model, sm.lo, lower_scheme(sm.inst.grid), 1e-3, 3);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_THROW(solve_fixed_point(sm.inst.model, sm.lo, lower_scheme(sm.inst.grid), 0.0), std::invalid_argument);
}

TEST(SolveFixedPoint, TangentResidualRuleIsStricter) {
  // Needs the fine sampling: at n = 100 the intercepts keep cycling.
  const auto& sm = small();
  const auto lo = lower_samplings(sm.inst.disturbance, 1000);
  auto cfg = lower_scheme(sm.inst.grid);
  const auto a = solve_fixed_point(sm.inst.model, lo, cfg, 1e-3);
  cfg.residual = ResidualRule::intercepts_and_slopes;
  const auto b = solve_fixed_point(sm.inst.model, lo, cfg, 1e-3, 500);
  EXPECT_TRUE(b.converged);
  EXPECT_GE(b.iterations, a.iterations);
}

TEST(SolveFixedPoint, LowerBelowUpper) {
  const auto& sm = small();
  const auto lo = solve_fixed_point(sm.inst.model, sm.lo, lower_scheme(sm.inst.grid), 1e-3);
  const auto up = solve_fixed_point(sm.inst.model, sm.up, upper_scheme(sm.inst), 1e-3);
  for (double z : hull_points(sm.inst.grid, 101)) {
    EXPECT_LE(lo.value(kUnexercised, z), up.value(kUnexercised, z) + 1e-9) << z;
    EXPECT_GE(lo.value(kUnexercised, z), std::max(40.0 - z, 0.0) - 1e-12);
  }
}

TEST(GreedyPolicy, BermudanDecisions) {
  const auto& sm = small();
  const auto cfg = lower_scheme(sm.inst.grid);
  const auto r = solve_fixed_point(sm.inst.model, sm.lo, cfg, 1e-3);
  const GreedyPolicy pi(sm.inst.model, sm.lo, cfg, r.value);
  EXPECT_EQ(pi(kExercised, 30.0), 0u);
  EXPECT_EQ(pi(kUnexercised, 25.0), kExercise);
  EXPECT_DOUBLE_EQ(r.value(kUnexercised, 25.0), 15.0);
  EXPECT_EQ(pi(kUnexercised, 46.0), kContinue);
  EXPECT_GT(r.value(kUnexercised, 46.0), 0.0);
  EXPECT_EQ(greedy_policy(sm.inst.model, sm.lo, cfg, r.value, kUnexercised, 25.0), kExercise);
}

TEST(WeightedDistance, Definition) {
  const auto m = build_put_model({}).model;
  const auto v = single(kPayoff);
  const auto w = single(MaxAffine{{-1.0, 80.0}, {0.0, 40.0}});
  const std::vector<double> probes{10.0, 35.0, 60.0};
  EXPECT_EQ(weighted_distance(v, v, m, probes), 0.0);
  EXPECT_DOUBLE_EQ(weighted_distance(v, w, m, probes), 1.0);
  EXPECT_THROW(weighted_distance(v, w, m, {}), std::invalid_argument);
}

TEST(Contraction, ModulusAndRatios) {
  const auto& sm = small();
  const auto cfg = lower_scheme(sm.inst.grid);
  EXPECT_NEAR(contraction_modulus(sm.inst.model, cfg), std::exp(-0.0375), 1e-15);
  EXPECT_NEAR(contraction_modulus(sm.inst.model, upper_scheme(sm.inst)), std::exp(-0.0375), 1e-15);
  const auto rep = contraction_ratios(sm.inst.model, sm.lo, cfg, 10, 99);
  EXPECT_GT(rep.max_ratio, 0.0);
  EXPECT_LE(rep.max_ratio, rep.modulus + 1e-9);
}

TEST(Contraction, SuccessiveIterateDistances) {
  const auto& sm = small();
  const auto cfg = lower_scheme(sm.inst.grid);
  const double k = contraction_modulus(sm.inst.model, cfg);
  const auto probes = cfg.grid.points();
  auto v0 = reward_seed(sm.inst.model);
  auto v1 = bellman_step(sm.inst.model, sm.lo, cfg, v0);
  auto v2 = bellman_step(sm.inst.model, sm.lo, cfg, v1);
  for (int i = 0; i < 10; ++i) {
    const double d1 = weighted_distance(v0, v1, sm.inst.model, probes);
    const double d2 = weighted_distance(v1, v2, sm.inst.model, probes);
    if (d1 > 1e-12) {
      EXPECT_LE(d2 / d1, k + 0.05);
    }
    v0 = v1;
    v1 = v2;
    v2 = bellman_step(sm.inst.model, sm.lo, cfg, v1);
  }
}

TEST(Validate, BoundedStateSpaceCanBreakContraction) {
  auto m = build_put_model({}).model;
  const Grid g = Grid::uniform(20.0, 120.0, 11);
  EXPECT_TRUE(validate(m, lower_scheme(g)).empty());
  // A decreasing bound on a bounded state interval: the constant right tail
  // of the interpolation overshoots b near the top of the interval.
  m.state_hi = 190.0;
  m.bound_fn.assign(2, AffinePiece{-1.0, 200.0});
  m.bound_cr = 4.0;
  ASSERT_TRUE(validate(m).empty());
  const auto cfg = SchemeConfig::interp(g, AffinePiece{-1.0, 40.0});
  EXPECT_GT(contraction_modulus(m, cfg), 1.0);
  const auto v = validate(m, cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.front().assumption, "Assumption 7");
  EXPECT_TRUE(validate(m, lower_scheme(g)).empty());
}
