#pragma once

// Lower level of the game: subscribers split their demand across CPs given
// fixed prices. Numeric route (Gauss-Seidel best-response dynamics with a
// water-filling best response) and the reduced symmetric closed forms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "netneutral/market.hpp"

namespace netneutral {

struct SolverSettings {
  double fixed_point_tolerance = 1e-10;  // max flow change per sweep
  long max_iterations = 10'000;
  double bisection_tolerance = 1e-13;
  double damping = 0.5;
  long bisection_max_steps = 200;  // per water-filling solve

  void validate() const {
    if (!(fixed_point_tolerance > 0.0)) throw ConfigError("invariant tolerance>0 violated");
    if (!(bisection_tolerance > 0.0)) throw ConfigError("invariant bisection_tolerance>0 violated");
    if (max_iterations < 1) throw ConfigError("invariant max_iterations>=1 violated");
    if (bisection_max_steps < 1) throw ConfigError("invariant bisection_max_steps>=1 violated");
    if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("invariant damping in (0,1] violated");
  }
};

/// Symmetric no-agreement profile when one CP deviates to p_m and the other
/// M-1 CPs charge q.
struct TwoStrategyFlows {
  double x_other = 0.0;   // to each CP charging q
  double y_deviant = 0.0; // to the deviating CP
  bool clamped = false;
};

/// Symmetric agreement profile when CP m deviates to p_m and the others
/// charge q. Type 1 is the subscriber paired with CP m; type 2 are the N-1
/// subscribers paired with other CPs.
struct AgreementFlows {
  double x = 0.0;  // type 1 -> each non-privileged CP
  double y = 0.0;  // type 1 -> CP m (free)
  double u = 0.0;  // type 2 -> CP m
  double v = 0.0;  // type 2 -> own paired CP (free)
  double w = 0.0;  // type 2 -> each remaining CP; 0 when N == 2
  bool clamped = false;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

/// Minimizes sum_m x^m (a (x^m + other_loads^m) + p_eff^m) over the simplex
/// {x >= 0, sum x = phi}. x^m = max(0, (lambda - c^m) / 2a) with
/// c^m = p_eff^m + a other_loads^m; lambda is bracketed by bisection and then
/// fixed exactly from the resulting active set.
inline std::vector<double> subscriber_best_response(std::size_t n, std::span<const double> other_loads,
                                                    const PriceVector& prices, const MarketConfig& cfg,
                                                    const SolverSettings& settings = {}) {
  const std::size_t M = cfg.n_cps();
  if (n >= cfg.n_subscribers()) throw std::out_of_range("subscriber index out of range");
  if (other_loads.size() != M || prices.size() != M) throw std::invalid_argument("dimension mismatch");
  if (!all_finite(other_loads) || !all_finite(prices.prices) || !std::isfinite(prices.privileged_fee))
    throw std::invalid_argument("non-finite best-response input");
  for (double o : other_loads)
    if (o < 0.0) throw std::invalid_argument("other_loads must be nonnegative");

  const double a = cfg.latency_slope();
  const double phi = cfg.demand();
  std::vector<double> c(M);
  for (std::size_t m = 0; m < M; ++m) c[m] = prices.effective(n, m, cfg.scenario()) + a * other_loads[m];

  auto filled = [&](double lambda) {
    double s = 0.0;
    for (double cm : c) s += std::max(0.0, (lambda - cm) / (2.0 * a));
    return s;
  };

  double lo = *std::min_element(c.begin(), c.end());
  double hi = *std::max_element(c.begin(), c.end()) + 2.0 * a * phi;
  long it = 0;
  while (hi - lo > settings.bisection_tolerance * std::max(1.0, std::abs(hi))) {
    if (++it > settings.bisection_max_steps) throw std::runtime_error("water-filling bisection did not converge");
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (filled(mid) < phi ? lo : hi) = mid;
  }

  // Exact multiplier on the active set {c^m < lambda}; a few passes settle any
  // CP sitting on the boundary of the bracket.
  double lambda = 0.5 * (lo + hi);
  for (std::size_t pass = 0; pass <= M; ++pass) {
    double sum_c = 0.0;
    std::size_t active = 0;
    for (double cm : c)
      if (cm < lambda) {
        sum_c += cm;
        ++active;
      }
    if (active == 0) break;
    double exact = (2.0 * a * phi + sum_c) / static_cast<double>(active);
    if (exact == lambda) break;
    lambda = exact;
  }

  std::vector<double> x(M);
  for (std::size_t m = 0; m < M; ++m) x[m] = std::max(0.0, (lambda - c[m]) / (2.0 * a));
  return x;
}

/// Marginal cost of subscriber n at CP m: a x_n^m + a L^m + p_eff.
inline double marginal_cost(std::size_t n, std::size_t m, const FlowProfile& flows,
                            std::span<const double> loads, const PriceVector& prices, const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  return a * flows(n, m) + a * loads[m] + prices.effective(n, m, cfg.scenario());
}

/// lambda_n = min over CPs of subscriber n's marginal cost.
inline std::vector<double> subscriber_multipliers(const FlowProfile& flows, const PriceVector& prices,
                                                  const MarketConfig& cfg) {
  check_dims(flows, prices, cfg);
  auto loads = flows.column_sums();
  std::vector<double> out(cfg.n_subscribers(), std::numeric_limits<double>::infinity());
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n)
    for (std::size_t m = 0; m < cfg.n_cps(); ++m)
      out[n] = std::min(out[n], marginal_cost(n, m, flows, loads, prices, cfg));
  return out;
}

/// Max violation of the per-subscriber stationarity/complementarity system:
/// |marginal - lambda_n| on positive flows, max(0, lambda_n - marginal) on
/// zero flows.
inline double kkt_residual(const FlowProfile& flows, const PriceVector& prices, const MarketConfig& cfg) {
  auto lambdas = subscriber_multipliers(flows, prices, cfg);
  auto loads = flows.column_sums();
  double r = 0.0;
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n) {
    for (std::size_t m = 0; m < cfg.n_cps(); ++m) {
      double g = marginal_cost(n, m, flows, loads, prices, cfg);
      double v = flows(n, m) > 0.0 ? std::abs(g - lambdas[n]) : std::max(0.0, lambdas[n] - g);
      r = std::max(r, v);
    }
  }
  return r;
}

inline void fill_report_totals(EquilibriumReport& rep, const MarketConfig& cfg) {
  rep.multipliers = subscriber_multipliers(rep.flows, rep.prices, cfg);
  rep.subscriber_costs.resize(cfg.n_subscribers());
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n)
    rep.subscriber_costs[n] = subscriber_cost(n, rep.flows, rep.prices, cfg);
  rep.cp_revenues.resize(cfg.n_cps());
  for (std::size_t m = 0; m < cfg.n_cps(); ++m) rep.cp_revenues[m] = cp_revenue(m, rep.flows, rep.prices, cfg);
  rep.kkt_residual = kkt_residual(rep.flows, rep.prices, cfg);
}

/// Nash equilibrium of the subscribers' simultaneous cost minimizations at
/// fixed prices. Damped Gauss-Seidel sweeps (n = 0..N-1) of the exact best
/// response; once the sweep change drops below tolerance the sweeps run
/// undamped until the KKT residual is also below tolerance.
inline EquilibriumReport solve_subscriber_equilibrium(const PriceVector& prices, const MarketConfig& cfg,
                                                      const SolverSettings& settings = {},
                                                      const std::optional<FlowProfile>& initial = std::nullopt) {
  settings.validate();
  validate_prices(prices, cfg);
  const std::size_t N = cfg.n_subscribers();
  const std::size_t M = cfg.n_cps();

  EquilibriumReport rep;
  rep.prices = prices;
  if (initial) {
    validate_flows(*initial, cfg);
    rep.flows = *initial;
  } else {
    rep.flows = FlowProfile::uniform(cfg);
  }

  const double tol = settings.fixed_point_tolerance;
  double damping = settings.damping;
  std::vector<double> other(M);
  for (rep.iterations = 0; rep.iterations < settings.max_iterations;) {
    auto loads = rep.flows.column_sums();
    double change = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      auto row = rep.flows.row(n);
      for (std::size_t m = 0; m < M; ++m) other[m] = std::max(0.0, loads[m] - row[m]);
      auto br = subscriber_best_response(n, other, prices, cfg, settings);
      for (std::size_t m = 0; m < M; ++m) {
        double next = damping == 1.0 ? br[m] : (1.0 - damping) * row[m] + damping * br[m];
        change = std::max(change, std::abs(next - row[m]));
        row[m] = next;
        loads[m] = other[m] + next;
      }
    }
    ++rep.iterations;
    if (change <= tol) {
      if (damping == 1.0 && kkt_residual(rep.flows, prices, cfg) <= tol) {
        rep.converged = true;
        break;
      }
      damping = 1.0;
    }
  }
  fill_report_totals(rep, cfg);
  return rep;
}

inline PriceVector deviation_prices(double p_m, double q, const MarketConfig& cfg) {
  auto p = PriceVector::uniform(cfg.n_cps(), q);
  p.prices[0] = p_m;
  return p;
}

/// Unclamped solution of the reduced no-agreement system
///   a x + a N x + q = lambda,  a y + a N y + p_m = lambda,  (M-1) x + y = phi.
inline TwoStrategyFlows two_strategy_unclamped(double p_m, double q, const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  const double N = static_cast<double>(cfg.n_subscribers());
  const double M = static_cast<double>(cfg.n_cps());
  const double phi = cfg.demand();
  double gap = (p_m - q) / (a * (N + 1.0));
  double y = phi / M - (M - 1.0) * gap / M;
  return {y + gap, y, false};
}

/// Reduced no-agreement profile, with a negative flow projected to 0 and the
/// budget restored on the other strategy. At most one of x, y can go negative,
/// and the projected corner is the exact equilibrium.
inline TwoStrategyFlows closed_form_two_strategy(double p_m, double q, const MarketConfig& cfg) {
  if (cfg.agreement()) throw std::invalid_argument("two-strategy closed form requires the no-agreement scenario");
  auto f = two_strategy_unclamped(p_m, q, cfg);
  const double phi = cfg.demand();
  const double M = static_cast<double>(cfg.n_cps());
  if (f.y_deviant < 0.0) {
    f = {phi / (M - 1.0), 0.0, true};
  } else if (f.x_other < 0.0) {
    f = {0.0, phi, true};
  }
  return f;
}

/// Unclamped solution of the reduced 7-equation agreement system in
/// (x, y, u, v, w, lambda_1, lambda_2). `w` is returned as solved even when
/// N == 2, where it has zero multiplicity.
inline AgreementFlows agreement_unclamped(double p_m, double q, const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  const double N = static_cast<double>(cfg.n_subscribers());
  const double phi = cfg.demand();
  AgreementFlows f;
  f.x = phi / N - (2.0 * q + (N - 1.0) * p_m) / (a * N * (N + 1.0));
  f.y = phi - (N - 1.0) * f.x;
  f.w = f.x - (q - p_m) / (a * N);
  f.v = f.w + q / a;
  f.u = phi - f.v - (N - 2.0) * f.w;
  return f;
}

inline bool agreement_feasible(const AgreementFlows& f, const MarketConfig& cfg) {
  const double phi = cfg.demand();
  auto in = [phi](double v) { return v >= 0.0 && v <= phi; };
  bool w_ok = cfg.n_subscribers() == 2 || in(f.w);
  return in(f.x) && in(f.y) && in(f.u) && in(f.v) && w_ok;
}

/// Reads the reduced agreement variables off a full profile in which CP 0 is
/// the deviating CP.
inline AgreementFlows agreement_flows_from_profile(const FlowProfile& f, const MarketConfig& cfg) {
  AgreementFlows out;
  out.y = f(0, 0);
  out.x = f(0, 1);
  out.u = f(1, 0);
  out.v = f(1, 1);
  out.w = cfg.n_subscribers() > 2 ? f(1, 2) : 0.0;
  return out;
}

/// Reduced agreement profile. When any flow leaves [0, phi] the active set is
/// resolved by the numeric subscriber solver instead of by projection.
inline AgreementFlows closed_form_agreement_profile(double p_m, double q, const MarketConfig& cfg,
                                                    const SolverSettings& settings = {}) {
  if (!cfg.agreement()) throw std::invalid_argument("agreement closed form requires the agreement scenario");
  auto f = agreement_unclamped(p_m, q, cfg);
  if (agreement_feasible(f, cfg)) {
    if (cfg.n_subscribers() == 2) f.w = 0.0;
    return f;
  }
  auto rep = solve_subscriber_equilibrium(deviation_prices(p_m, q, cfg), cfg, settings);
  if (!rep.converged) throw std::runtime_error("subscriber equilibrium did not converge in clamped agreement profile");
  auto out = agreement_flows_from_profile(rep.flows, cfg);
  out.clamped = true;
  return out;
}

/// Expands a symmetric agreement equilibrium (own flow y, cross flow z) into
/// a full profile.
inline FlowProfile agreement_profile(double own, double cross, const MarketConfig& cfg) {
  FlowProfile f(cfg.n_subscribers(), cfg.n_cps(), cross);
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n) f(n, n) = own;
  return f;
}

}  // namespace netneutral
