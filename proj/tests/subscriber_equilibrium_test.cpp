#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "netneutral/subscriber_equilibrium.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace netneutral;
using testutil::make_config;

namespace {

double row_sum(const std::vector<double>& r) { return std::accumulate(r.begin(), r.end(), 0.0); }

}  // namespace

TEST(BestResponse, SymmetricLoadsSplitEvenly) {
  auto c = make_config(2, 2);
  std::vector<double> other{0.5, 0.5};
  auto x = subscriber_best_response(0, other, PriceVector::uniform(2, 1.0), c);
  EXPECT_NEAR(x[0], 0.5, 1e-15);
  EXPECT_NEAR(x[1], 0.5, 1e-15);
}

TEST(BestResponse, InteriorMatchesHandSolvedKkt) {
  // 2x + 7/12 + 0.5 = 2(1-x) + 5/12 + 1  =>  x = 7/12.
  auto c = make_config(2, 2);
  std::vector<double> other{7.0 / 12.0, 5.0 / 12.0};
  auto x = subscriber_best_response(0, other, PriceVector{{0.5, 1.0}}, c);
  EXPECT_NEAR(x[0], 7.0 / 12.0, 1e-14);
  EXPECT_NEAR(x[1], 5.0 / 12.0, 1e-14);
  double scanned = oracle::two_cp_best_response_scan(7.0 / 12.0, 5.0 / 12.0, 0.5, 1.0, 1.0, 1.0, 1e-6);
  EXPECT_NEAR(x[0], scanned, 1e-6);
}

TEST(BestResponse, CornerWhenPriceGapExceedsDemand) {
  auto c = make_config(2, 2);
  std::vector<double> other{0.0, 0.0};
  auto x = subscriber_best_response(0, other, PriceVector{{0.0, 10.0}}, c);
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  // Corner KKT: marginal at the used CP (2a*1 + 0) does not exceed the
  // marginal of the unused one (10).
  EXPECT_LE(2.0 * 1.0 * x[0], 10.0);
}

TEST(BestResponse, RejectsBadInput) {
  auto c = make_config(2, 2);
  std::vector<double> bad{std::nan(""), 0.0};
  EXPECT_THROW(subscriber_best_response(0, bad, PriceVector::uniform(2, 0.0), c), std::invalid_argument);
  std::vector<double> neg{-1.0, 0.0};
  EXPECT_THROW(subscriber_best_response(0, neg, PriceVector::uniform(2, 0.0), c), std::invalid_argument);
  std::vector<double> ok{0.0, 0.0};
  EXPECT_THROW(subscriber_best_response(3, ok, PriceVector::uniform(2, 0.0), c), std::out_of_range);
}

TEST(BestResponse, BisectionBudgetExhausted) {
  auto c = make_config(2, 2);
  SolverSettings s;
  s.bisection_max_steps = 2;
  std::vector<double> other{0.3, 0.9};
  EXPECT_THROW(subscriber_best_response(0, other, PriceVector{{0.1, 0.7}}, c, s), std::runtime_error);
}

TEST(BestResponseProperties, FeasibleAndMonotoneInDemand) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    long N = 2 + t % 6, M = 2 + (t / 6) % 6;
    double a = 0.1 + 3.0 * u(rng), phi = 0.1 + 4.0 * u(rng);
    auto c = make_config(N, M, a, phi, 10.0);
    auto bigger = make_config(N, M, a, phi * (1.0 + u(rng)), 10.0);
    std::vector<double> other(M);
    PriceVector p{std::vector<double>(M)};
    for (long m = 0; m < M; ++m) {
      other[m] = 3.0 * u(rng);
      p.prices[m] = 10.0 * u(rng);
    }
    auto x = subscriber_best_response(0, other, p, c);
    auto y = subscriber_best_response(0, other, p, bigger);
    EXPECT_NEAR(row_sum(x), phi, 1e-12 * phi);
    for (long m = 0; m < M; ++m) {
      EXPECT_GE(x[m], 0.0);
      EXPECT_LE(x[m], phi * (1 + 1e-12));
      EXPECT_GE(y[m], x[m] - 1e-12);
    }
    // KKT of the returned row.
    double lambda = 1e300;
    for (long m = 0; m < M; ++m) lambda = std::min(lambda, 2 * a * x[m] + a * other[m] + p[m]);
    for (long m = 0; m < M; ++m) {
      double g = 2 * a * x[m] + a * other[m] + p[m];
      if (x[m] > 0) {
        EXPECT_NEAR(g, lambda, 1e-11 * std::max(1.0, lambda));
      }
    }
  }
}

TEST(SubscriberEquilibrium, SymmetricPricesGiveUniformSplit) {
  auto c = make_config(2, 2);
  for (double p : {0.0, 1.0, 7.5}) {
    auto r = solve_subscriber_equilibrium(PriceVector::uniform(2, p), c);
    ASSERT_TRUE(r.converged);
    for (double v : r.flows.values()) EXPECT_NEAR(v, 0.5, 1e-12);
  }
}

TEST(SubscriberEquilibrium, AsymmetricPricesMatchReducedSystem) {
  auto c = make_config(2, 2);
  auto r = solve_subscriber_equilibrium(PriceVector{{0.5, 1.0}}, c);
  ASSERT_TRUE(r.converged);
  auto o = oracle::two_strategy_system(0.5, 1.0, 2, 2, 1, 1);
  EXPECT_NEAR(o[1], 7.0 / 12.0, 1e-14);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_NEAR(r.flows(n, 0), 7.0 / 12.0, 1e-9);
    EXPECT_NEAR(r.flows(n, 1), 5.0 / 12.0, 1e-9);
  }
}

TEST(SubscriberEquilibrium, AgreementDeskInstance) {
  auto c = testutil::agreement(2);
  auto r = solve_subscriber_equilibrium(PriceVector::uniform(2, 0.6), c);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.flows(0, 0), 0.8, 1e-9);
  EXPECT_NEAR(r.flows(0, 1), 0.2, 1e-9);
  EXPECT_NEAR(r.flows(1, 0), 0.2, 1e-9);
  EXPECT_NEAR(r.flows(1, 1), 0.8, 1e-9);
  EXPECT_NEAR(r.subscriber_costs[0], 1.12, 1e-9);
  EXPECT_NEAR(r.cp_revenues[0], 0.12, 1e-9);
}

TEST(SubscriberEquilibrium, ReportsNonConvergence) {
  auto c = make_config(6, 6, 1.0, 1.0, 10.0);
  SolverSettings s;
  s.max_iterations = 80;
  s.fixed_point_tolerance = 1e-300;
  PriceVector p{{0.0, 1.0, 2.0, 3.0, 4.0, 5.0}};
  auto r = solve_subscriber_equilibrium(p, c, s);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 80);
}

TEST(SubscriberEquilibrium, RejectsPricesOutsideCap) {
  auto c = make_config(2, 2, 1.0, 1.0, 1.0);
  EXPECT_THROW(solve_subscriber_equilibrium(PriceVector{{0.5, 1.5}}, c), std::invalid_argument);
}

TEST(TwoStrategy, EqualPricesAreSymmetric) {
  auto c = make_config(4, 3, 2.0, 1.5);
  auto f = closed_form_two_strategy(0.7, 0.7, c);
  EXPECT_NEAR(f.x_other, 0.5, 1e-15);
  EXPECT_NEAR(f.y_deviant, 0.5, 1e-15);
  EXPECT_FALSE(f.clamped);
}

TEST(TwoStrategy, InteriorAgainstDenseSolveAndSolver) {
  auto c = make_config(2, 2);
  auto f = closed_form_two_strategy(0.5, 1.0, c);
  auto o = oracle::two_strategy_system(0.5, 1.0, 2, 2, 1, 1);
  EXPECT_NEAR(f.y_deviant, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(f.x_other, 5.0 / 12.0, 1e-15);
  EXPECT_NEAR(f.x_other, o[0], 1e-14);
  EXPECT_NEAR(f.y_deviant, o[1], 1e-14);
  auto r = solve_subscriber_equilibrium(deviation_prices(0.5, 1.0, c), c);
  EXPECT_NEAR(r.flows(1, 0), f.y_deviant, 1e-9);
}

TEST(TwoStrategy, ClampsToCorner) {
  auto c = make_config(2, 2);
  auto raw = two_strategy_unclamped(10.0, 0.0, c);
  EXPECT_LT(raw.y_deviant, 0.0);
  auto f = closed_form_two_strategy(10.0, 0.0, c);
  EXPECT_TRUE(f.clamped);
  EXPECT_DOUBLE_EQ(f.x_other, 1.0);
  EXPECT_DOUBLE_EQ(f.y_deviant, 0.0);
  // Variational inequality at the corner: the unused CP's marginal is at
  // least the used one's.
  FlowProfile prof(2, 2);
  prof(0, 1) = prof(1, 1) = 1.0;
  EXPECT_LE(kkt_residual(prof, PriceVector{{10.0, 0.0}}, c), 1e-15);
}

TEST(TwoStrategy, RequiresNoAgreement) {
  EXPECT_THROW(closed_form_two_strategy(0.1, 0.1, testutil::agreement(3)), std::invalid_argument);
}

TEST(AgreementProfile, DeskEquilibrium) {
  auto c = testutil::agreement(2);
  auto f = closed_form_agreement_profile(0.6, 0.6, c);
  EXPECT_NEAR(f.x, 0.2, 1e-15);
  EXPECT_NEAR(f.y, 0.8, 1e-15);
  EXPECT_NEAR(f.u, 0.2, 1e-15);
  EXPECT_NEAR(f.v, 0.8, 1e-15);
  EXPECT_EQ(f.w, 0.0);
}

TEST(AgreementProfile, EqualPricesAgainstDenseSolve) {
  for (long N : {2, 3, 5, 9}) {
    auto c = testutil::agreement(N, 1.3, 2.0, 10.0);
    double q = 0.4;
    auto f = closed_form_agreement_profile(q, q, c);
    auto o = oracle::agreement_system(q, q, N, 1.3, 2.0);
    double expect_u = 2.0 / N - q / (1.3 * N);
    EXPECT_NEAR(f.u, expect_u, 1e-14);
    EXPECT_NEAR(o[2], expect_u, 1e-13);
    EXPECT_NEAR(f.v, f.y, 1e-14);
    if (N > 2) {
      EXPECT_NEAR(f.w, f.u, 1e-14);
    }
  }
}

TEST(AgreementProfile, ZeroPricesSplitEvenly) {
  auto c = testutil::agreement(4, 1.0, 2.0);
  auto f = closed_form_agreement_profile(0.0, 0.0, c);
  for (double v : {f.x, f.y, f.u, f.v, f.w}) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(AgreementProfile, ClampedFallsBackToSolver) {
  auto c = testutil::agreement(3, 1.0, 1.0, 10.0);
  auto raw = agreement_unclamped(5.0, 0.2, c);
  EXPECT_LT(raw.u, 0.0);
  auto f = closed_form_agreement_profile(5.0, 0.2, c);
  EXPECT_TRUE(f.clamped);
  EXPECT_NEAR(f.x * 2 + f.y, 1.0, 1e-9);
  EXPECT_NEAR(f.u + f.v + f.w, 1.0, 1e-9);
  EXPECT_EQ(f.u, 0.0);
  auto r = solve_subscriber_equilibrium(deviation_prices(5.0, 0.2, c), c);
  EXPECT_LE(r.kkt_residual, 1e-9);
}

TEST(AgreementProfile, RequiresAgreement) {
  EXPECT_THROW(closed_form_agreement_profile(0.1, 0.1, make_config(3, 3)), std::invalid_argument);
}

TEST(KktResidual, Examples) {
  auto c = make_config(3, 3, 1.0, 1.0, 10.0);
  EXPECT_LE(kkt_residual(FlowProfile::uniform(c), PriceVector::uniform(3, 4.0), c), 1e-12);
  EXPECT_GT(kkt_residual(FlowProfile::uniform(c), PriceVector{{0.0, 5.0, 10.0}}, c), 1.0);
}

TEST(SubscriberEquilibriumProperties, ResidualWithinContractOnRandomGrid) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SolverSettings s;
  for (int t = 0; t < 60; ++t) {
    long N = 2 + t % 5, M = 2 + (t / 5) % 5;
    auto c = make_config(N, M, 0.2 + 2.0 * u(rng), 0.2 + 3.0 * u(rng), 5.0,
                         (N == M && t % 2) ? Scenario::Agreement : Scenario::NoAgreement);
    PriceVector p{std::vector<double>(M)};
    for (auto& v : p.prices) v = 5.0 * u(rng);
    auto r = solve_subscriber_equilibrium(p, c, s);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.kkt_residual, 10 * s.fixed_point_tolerance);
    EXPECT_NO_THROW(validate_flows(r.flows, c));
  }
}

TEST(SubscriberEquilibriumProperties, NumericMatchesTwoStrategyOracle) {
  auto c = make_config(3, 4, 1.0, 1.0, 2.0);
  for (double pm = 0.0; pm <= 2.0; pm += 0.25) {
    for (double q = 0.0; q <= 2.0; q += 0.25) {
      auto raw = two_strategy_unclamped(pm, q, c);
      if (raw.x_other < 0 || raw.y_deviant < 0) continue;
      auto r = solve_subscriber_equilibrium(deviation_prices(pm, q, c), c);
      for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_NEAR(r.flows(n, 0), raw.y_deviant, 1e-7);
        for (std::size_t m = 1; m < 4; ++m) EXPECT_NEAR(r.flows(n, m), raw.x_other, 1e-7);
      }
    }
  }
}

TEST(SubscriberEquilibriumProperties, Homogeneity) {
  PriceVector p{{0.3, 1.1, 0.7}};
  auto base = solve_subscriber_equilibrium(p, make_config(3, 3, 1.0, 1.0, 100.0));
  for (double s : {0.5, 2.0, 10.0}) {
    PriceVector ps{{0.3 * s, 1.1 * s, 0.7 * s}};
    auto scaled_a = solve_subscriber_equilibrium(ps, make_config(3, 3, s, 1.0, 100.0));
    auto scaled_phi = solve_subscriber_equilibrium(ps, make_config(3, 3, 1.0, s, 100.0));
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t m = 0; m < 3; ++m) {
        EXPECT_NEAR(scaled_a.flows(n, m), base.flows(n, m), 1e-9);
        EXPECT_NEAR(scaled_phi.flows(n, m), s * base.flows(n, m), 1e-9 * s);
      }
  }
}

TEST(SubscriberEquilibriumProperties, PermutationEquivariance) {
  auto c = make_config(3, 4, 1.0, 1.0, 10.0);
  PriceVector p{{0.2, 1.5, 0.9, 3.0}};
  std::vector<std::size_t> perm{2, 0, 3, 1};
  PriceVector q{std::vector<double>(4)};
  for (std::size_t m = 0; m < 4; ++m) q.prices[perm[m]] = p[m];
  auto r = solve_subscriber_equilibrium(p, c);
  auto rq = solve_subscriber_equilibrium(q, c);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(rq.flows(n, perm[m]), r.flows(n, m), 1e-9);
}

TEST(SubscriberEquilibriumProperties, ConvergesFromSkewedStart) {
  auto c = make_config(5, 5, 1.0, 2.0, 10.0);
  FlowProfile start(5, 5);
  for (std::size_t n = 0; n < 5; ++n) start(n, n % 2) = 2.0;
  auto r = solve_subscriber_equilibrium(PriceVector::uniform(5, 1.0), c, {}, start);
  ASSERT_TRUE(r.converged);
  for (double v : r.flows.values()) EXPECT_NEAR(v, 0.4, 1e-9);
}
