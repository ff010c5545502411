#pragma once

// Upper level: CPs compete in per-unit prices over the induced subscriber
// equilibrium. A deviating CP's revenue is evaluated on the reduced symmetric
// profile; the symmetric equilibrium is the fixed point of its best reply.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "netneutral/market.hpp"
#include "netneutral/subscriber_equilibrium.hpp"

namespace netneutral {

struct PricingResult {
  double symmetric_price = 0.0;
  bool clamped_at_cap = false;
  FlowProfile induced_flows;
  std::vector<double> per_cp_revenue;
  double br_residual = 0.0;  // |best_response(p*) - p*|
  long iterations = 0;
  bool converged = false;
  EquilibriumReport subscribers;  // follower equilibrium at the symmetric price
};

/// R(p_m, q): revenue of a CP charging p_m while every other CP charges q.
/// No agreement: p_m * N * y. Agreement: p_m * (N-1) * u.
inline double cp_deviation_revenue(double p_m, double q, const MarketConfig& cfg, const SolverSettings& settings = {}) {
  const double N = static_cast<double>(cfg.n_subscribers());
  if (cfg.agreement()) return p_m * (N - 1.0) * closed_form_agreement_profile(p_m, q, cfg, settings).u;
  return p_m * N * closed_form_two_strategy(p_m, q, cfg).y_deviant;
}

namespace detail {

/// The deviator's revenue-carrying flow on the unclamped region is affine in
/// p_m: intercept + slope * p_m.
struct AffineFlow {
  double intercept;
  double slope;
};

inline AffineFlow deviator_flow_model(double q, const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  const double N = static_cast<double>(cfg.n_subscribers());
  const double M = static_cast<double>(cfg.n_cps());
  const double phi = cfg.demand();
  if (cfg.agreement()) {
    return {phi / N + q * (N - 3.0) / (a * N * (N + 1.0)), -2.0 * (N - 1.0) / (a * N * (N + 1.0))};
  }
  const double k = (M - 1.0) / (a * (N + 1.0) * M);
  return {phi / M + k * q, -k};
}

inline bool deviation_unclamped(double p_m, double q, const MarketConfig& cfg) {
  if (cfg.agreement()) return agreement_feasible(agreement_unclamped(p_m, q, cfg), cfg);
  auto f = two_strategy_unclamped(p_m, q, cfg);
  return f.x_other >= 0.0 && f.y_deviant >= 0.0;
}

inline constexpr int kScanPoints = 64;

}  // namespace detail

/// argmax over p in [0, p_max] of cp_deviation_revenue(p, q). On the
/// unclamped region the revenue is a concave quadratic and the stationary
/// point is taken directly; otherwise a grid scan brackets the maximum and
/// golden-section search refines it. Ties go to the smaller price.
inline double cp_best_response_price(double q, const MarketConfig& cfg, const SolverSettings& settings = {}) {
  const double cap = cfg.price_cap();
  if (!(q >= 0.0 && q <= cap)) throw std::invalid_argument("opponent price must lie in [0, price_cap]");

  auto model = detail::deviator_flow_model(q, cfg);
  double stationary = std::clamp(-model.intercept / (2.0 * model.slope), 0.0, cap);
  if (detail::deviation_unclamped(stationary, q, cfg)) return stationary;

  auto revenue = [&](double p) { return cp_deviation_revenue(p, q, cfg, settings); };

  double best_p = 0.0;
  double best_r = revenue(0.0);
  int best_i = 0;
  const double step = cap / detail::kScanPoints;
  for (int i = 1; i <= detail::kScanPoints; ++i) {
    double p = i == detail::kScanPoints ? cap : i * step;
    double r = revenue(p);
    if (r > best_r) {
      best_r = r;
      best_p = p;
      best_i = i;
    }
  }

  double lo = std::max(0.0, (best_i - 1) * step);
  double hi = std::min(cap, (best_i + 1) * step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = revenue(c);
  double fd = revenue(d);
  while (hi - lo > 1e-12 * cap) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = revenue(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = revenue(d);
    }
  }
  double refined = 0.5 * (lo + hi);
  double fr = revenue(refined);
  if (fr > best_r) {
    best_r = fr;
    best_p = refined;
  }

  // The bracket may straddle a kink next to an unclamped piece whose exact
  // stationary point beats the golden-section estimate.
  double local = -model.intercept / (2.0 * model.slope);
  if (local >= lo - step && local <= hi + step && local >= 0.0 && local <= cap &&
      detail::deviation_unclamped(local, q, cfg)) {
    double fl = revenue(local);
    if (fl >= best_r * (1.0 - 1e-12)) best_p = local;
  }
  return best_p;
}

/// The FOC-consistent symmetric price of the reduced systems, capped at p_max:
/// a phi (N+1)/(M-1) without agreement, a phi (N+1)/(3N-1) with agreement.
inline double closed_form_price_foc(const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  const double N = static_cast<double>(cfg.n_subscribers());
  const double M = static_cast<double>(cfg.n_cps());
  const double phi = cfg.demand();
  double p = cfg.agreement() ? a * phi * (N + 1.0) / (3.0 * N - 1.0) : a * phi * (N + 1.0) / (M - 1.0);
  return std::min(p, cfg.price_cap());
}

/// The stated equilibrium prices, capped at p_max: (N-1) phi a without
/// agreement, a phi (N+1)/(3N-1) with agreement.
inline double closed_form_price_paper(const MarketConfig& cfg) {
  const double a = cfg.latency_slope();
  const double N = static_cast<double>(cfg.n_subscribers());
  const double phi = cfg.demand();
  double p = cfg.agreement() ? a * phi * (N + 1.0) / (3.0 * N - 1.0) : (N - 1.0) * phi * a;
  return std::min(p, cfg.price_cap());
}

/// Symmetric pricing equilibrium by best-reply iteration from p_max / 2,
/// followed by the numeric subscriber equilibrium at the resulting price.
inline PricingResult solve_symmetric_price(const MarketConfig& cfg, const SolverSettings& settings = {}) {
  settings.validate();
  const double tol = settings.fixed_point_tolerance;
  PricingResult out;
  double p = 0.5 * cfg.price_cap();
  while (out.iterations < settings.max_iterations) {
    double next = cp_best_response_price(p, cfg, settings);
    ++out.iterations;
    bool done = std::abs(next - p) <= tol * std::max(1.0, std::abs(p));
    p = next;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.symmetric_price = p;
  out.clamped_at_cap = p >= cfg.price_cap();
  out.br_residual = std::abs(cp_best_response_price(p, cfg, settings) - p);

  out.subscribers = solve_subscriber_equilibrium(PriceVector::uniform(cfg.n_cps(), p), cfg, settings);
  out.converged = out.converged && out.subscribers.converged;
  out.induced_flows = out.subscribers.flows;
  out.per_cp_revenue = out.subscribers.cp_revenues;
  return out;
}

}  // namespace netneutral
