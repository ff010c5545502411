#pragma once

// Equilibrium welfare quantities, the neutral-vs-agreement comparisons, the
// compensation fee, the large-N behaviour of the privileged flow, and
// parameter sweeps that put closed forms next to numeric solves.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netneutral/market.hpp"
#include "netneutral/pricing.hpp"
#include "netneutral/subscriber_equilibrium.hpp"

namespace netneutral {

/// Closed forms on raw parameters. The config-taking wrappers below are the
/// normal entry points; these also accept the degenerate boundaries
/// (phi = 0, a = 0) that MarketConfig rejects.
namespace closed_form {

inline double cost_no_agreement(double N, double M, double a, double phi) {
  return phi * phi * a * (N - 1.0 + N / M);
}

inline double revenue_no_agreement(double N, double M, double a, double phi) {
  return (N - 1.0) * N / M * phi * phi * a;
}

inline double agreement_surplus(double N, double a, double phi) {
  double r = (N - 1.0) / (3.0 * N - 1.0);
  return 2.0 * a * phi * phi * r * r * (N + 1.0) / N;
}

inline double cost_agreement(double N, double a, double phi) { return phi * phi * a + agreement_surplus(N, a, phi); }

inline double revenue_agreement(double N, double a, double phi) { return agreement_surplus(N, a, phi); }

/// Own-CP flow y under agreement.
inline double privileged_flow(double N, double phi) {
  return phi / N * (1.0 + (N - 1.0) * (N + 1.0) / (3.0 * N - 1.0));
}

/// Cross flow z under agreement.
inline double cross_flow(double N, double phi) { return phi / N * ((2.0 * N - 2.0) / (3.0 * N - 1.0)); }

/// No-agreement cost and revenue at the FOC-consistent price a phi (N+1)/(M-1).
inline double cost_no_agreement_foc(double N, double M, double a, double phi) {
  return phi * (a * N * phi / M + a * phi * (N + 1.0) / (M - 1.0));
}

inline double revenue_no_agreement_foc(double N, double M, double a, double phi) {
  return a * phi * (N + 1.0) / (M - 1.0) * N * phi / M;
}

}  // namespace closed_form

namespace detail {
inline double dN(const MarketConfig& c) { return static_cast<double>(c.n_subscribers()); }
inline double dM(const MarketConfig& c) { return static_cast<double>(c.n_cps()); }
inline void require_square(const MarketConfig& c) {
  if (c.n_cps() != c.n_subscribers()) throw ConfigError("agreement requires M=N (n_cps must equal n_subscribers)");
}
}  // namespace detail

inline double equilibrium_cost_no_agreement(const MarketConfig& c) {
  return closed_form::cost_no_agreement(detail::dN(c), detail::dM(c), c.latency_slope(), c.demand());
}

inline double equilibrium_revenue_no_agreement(const MarketConfig& c) {
  return closed_form::revenue_no_agreement(detail::dN(c), detail::dM(c), c.latency_slope(), c.demand());
}

inline double equilibrium_cost_agreement(const MarketConfig& c) {
  detail::require_square(c);
  return closed_form::cost_agreement(detail::dN(c), c.latency_slope(), c.demand());
}

inline double equilibrium_revenue_agreement(const MarketConfig& c) {
  detail::require_square(c);
  return closed_form::revenue_agreement(detail::dN(c), c.latency_slope(), c.demand());
}

/// Which no-agreement price the comparison is built on: the stated
/// (N-1) phi a, or the fixed point of the reduced system's own FOC.
enum class RevenueBasis { Paper, FocConsistent };

struct ComparisonReport {
  RevenueBasis basis = RevenueBasis::Paper;
  double cost_no_agreement = 0.0;
  double cost_agreement = 0.0;
  double revenue_no_agreement = 0.0;
  double revenue_agreement = 0.0;
  bool lemma1_holds = false;  // agreement lowers subscriber cost
  bool lemma2_holds = false;  // agreement lowers CP revenue
  double compensation_fee = 0.0;
  double privileged_flow = 0.0;
  double privileged_flow_limit_gap = 0.0;  // |y - phi/3|
};

inline ComparisonReport compare_scenarios(const MarketConfig& c, RevenueBasis basis = RevenueBasis::Paper) {
  detail::require_square(c);
  const double N = detail::dN(c), a = c.latency_slope(), phi = c.demand();
  ComparisonReport r;
  r.basis = basis;
  if (basis == RevenueBasis::Paper) {
    r.cost_no_agreement = equilibrium_cost_no_agreement(c);
    r.revenue_no_agreement = equilibrium_revenue_no_agreement(c);
  } else {
    r.cost_no_agreement = closed_form::cost_no_agreement_foc(N, N, a, phi);
    r.revenue_no_agreement = closed_form::revenue_no_agreement_foc(N, N, a, phi);
  }
  r.cost_agreement = equilibrium_cost_agreement(c);
  r.revenue_agreement = equilibrium_revenue_agreement(c);
  r.lemma1_holds = r.cost_agreement < r.cost_no_agreement;
  r.lemma2_holds = r.revenue_agreement < r.revenue_no_agreement;
  // A uniform surcharge c on every agreement price moves no flow, and each CP
  // carries y + (N-1) z = phi in total, so revenue rises by exactly c phi.
  r.compensation_fee = (r.revenue_no_agreement - r.revenue_agreement) / phi;
  r.privileged_flow = closed_form::privileged_flow(N, phi);
  r.privileged_flow_limit_gap = std::abs(r.privileged_flow - phi / 3.0);
  return r;
}

inline double compensation_fee(const MarketConfig& c, RevenueBasis basis = RevenueBasis::Paper) {
  return compare_scenarios(c, basis).compensation_fee;
}

/// Agreement price vector with the compensation fee applied: c to the paired
/// ISP, q + c to every other ISP.
inline PriceVector shifted_agreement_prices(double q, double fee, const MarketConfig& c) {
  auto p = PriceVector::uniform(c.n_cps(), q + fee);
  p.privileged_fee = fee;
  return p;
}

struct LimitPoint {
  long n = 0;
  double privileged_flow = 0.0;
  double gap = 0.0;  // |y(N) - phi/3|
};

inline std::vector<LimitPoint> privileged_flow_limit_check(const MarketConfig& c, const std::vector<long>& n_values) {
  std::vector<LimitPoint> out;
  out.reserve(n_values.size());
  for (long n : n_values) {
    if (n < 2) throw ConfigError("invariant N>=2 violated in limit check");
    double y = closed_form::privileged_flow(static_cast<double>(n), c.demand());
    out.push_back({n, y, std::abs(y - c.demand() / 3.0)});
  }
  return out;
}

/// One grid point: the configured scenario's closed forms against its numeric
/// two-level solve, plus the comparison evaluated at M = N.
struct SweepRow {
  MarketParams params;
  std::optional<std::string> error;  // set when the point is invalid
  double price_paper = 0.0;
  double price_numeric = 0.0;
  double price_gap = 0.0;
  double flow_own = 0.0;
  double flow_cross = 0.0;
  double cost_paper = 0.0;
  double cost_numeric = 0.0;
  double revenue_paper = 0.0;
  double revenue_numeric = 0.0;
  bool lemma1_holds = false;
  bool lemma2_holds = false;
  double compensation_fee = 0.0;
  double compensation_fee_foc = 0.0;
  bool clamped_at_cap = false;
  bool converged = false;
  long iterations = 0;
  double kkt_residual = 0.0;
};

inline SweepRow evaluate_point(const MarketParams& params, const SolverSettings& settings,
                               PricingResult* result = nullptr) {
  SweepRow row;
  row.params = params;
  try {
    MarketConfig cfg(params);
    row.params = cfg.params();
    auto res = solve_symmetric_price(cfg, settings);
    row.price_paper = closed_form_price_paper(cfg);
    row.price_numeric = res.symmetric_price;
    row.price_gap = std::abs(row.price_numeric - row.price_paper);
    row.flow_own = res.induced_flows(0, 0);
    row.flow_cross = res.induced_flows(0, 1);
    if (cfg.agreement()) {
      row.cost_paper = equilibrium_cost_agreement(cfg);
      row.revenue_paper = equilibrium_revenue_agreement(cfg);
    } else {
      row.cost_paper = equilibrium_cost_no_agreement(cfg);
      row.revenue_paper = equilibrium_revenue_no_agreement(cfg);
    }
    row.cost_numeric = res.subscribers.subscriber_costs[0];
    row.revenue_numeric = res.per_cp_revenue[0];

    auto square = params;
    square.n_cps = params.n_subscribers;
    MarketConfig cmp_cfg(square);
    auto cmp = compare_scenarios(cmp_cfg, RevenueBasis::Paper);
    row.lemma1_holds = cmp.lemma1_holds;
    row.lemma2_holds = cmp.lemma2_holds;
    row.compensation_fee = cmp.compensation_fee;
    row.compensation_fee_foc = compare_scenarios(cmp_cfg, RevenueBasis::FocConsistent).compensation_fee;

    row.clamped_at_cap = res.clamped_at_cap;
    row.converged = res.converged;
    row.iterations = res.iterations;
    row.kkt_residual = res.subscribers.kkt_residual;
    if (result) *result = std::move(res);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// Evaluates every grid point independently, in input order. Invalid points
/// and solver failures are recorded on their row.
inline std::vector<SweepRow> sweep(const std::vector<MarketParams>& grid, const SolverSettings& settings = {}) {
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const auto& p : grid) rows.push_back(evaluate_point(p, settings));
  return rows;
}

}  // namespace netneutral
