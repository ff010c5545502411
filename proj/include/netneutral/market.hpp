#pragma once

// Game instance, strategy profiles and the cost/revenue evaluations shared by
// the subscriber level and the content-provider level.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace netneutral {

enum class Scenario { NoAgreement, Agreement };

inline std::string_view to_string(Scenario s) {
  return s == Scenario::Agreement ? "agreement" : "no_agreement";
}

/// Raised when an instance violates one of the model invariants. The message
/// names the violated invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unvalidated instance parameters, as read from a config document or a grid.
struct MarketParams {
  long n_subscribers = 0;
  std::optional<long> n_cps;  // defaults to n_subscribers under Agreement
  double latency_slope = 0.0;
  double demand = 0.0;
  double price_cap = 0.0;
  Scenario scenario = Scenario::NoAgreement;
};

/// A validated game instance: N subscribers (one aggregate per ISP), M content
/// providers, linear preference cost D(x) = a x, per-subscriber demand phi and
/// price cap p_max.
class MarketConfig {
 public:
  explicit MarketConfig(const MarketParams& p) {
    if (p.n_subscribers < 2) throw ConfigError("invariant N>=2 violated: n_subscribers must be at least 2");
    long m = p.n_cps.value_or(p.scenario == Scenario::Agreement ? p.n_subscribers : 0);
    if (!p.n_cps && p.scenario == Scenario::NoAgreement) throw ConfigError("missing required key: n_cps");
    if (m < 2) throw ConfigError("invariant M>=2 violated: n_cps must be at least 2");
    if (p.scenario == Scenario::Agreement && m != p.n_subscribers)
      throw ConfigError("agreement requires M=N (n_cps must equal n_subscribers)");
    if (!(p.latency_slope > 0.0) || !std::isfinite(p.latency_slope))
      throw ConfigError("invariant a>0 violated: latency_slope must be positive");
    if (!(p.demand > 0.0) || !std::isfinite(p.demand))
      throw ConfigError("invariant phi>0 violated: demand must be positive");
    if (!(p.price_cap > 0.0) || !std::isfinite(p.price_cap))
      throw ConfigError("invariant p_max>0 violated: price_cap must be positive");
    n_subscribers_ = static_cast<std::size_t>(p.n_subscribers);
    n_cps_ = static_cast<std::size_t>(m);
    latency_slope_ = p.latency_slope;
    demand_ = p.demand;
    price_cap_ = p.price_cap;
    scenario_ = p.scenario;
  }

  std::size_t n_subscribers() const { return n_subscribers_; }
  std::size_t n_cps() const { return n_cps_; }
  double latency_slope() const { return latency_slope_; }
  double demand() const { return demand_; }
  double price_cap() const { return price_cap_; }
  Scenario scenario() const { return scenario_; }
  bool agreement() const { return scenario_ == Scenario::Agreement; }

  MarketParams params() const {
    return {static_cast<long>(n_subscribers_), static_cast<long>(n_cps_), latency_slope_, demand_,
            price_cap_, scenario_};
  }

  MarketConfig with_scenario(Scenario s) const {
    auto p = params();
    p.scenario = s;
    return MarketConfig(p);
  }

 private:
  std::size_t n_subscribers_ = 2;
  std::size_t n_cps_ = 2;
  double latency_slope_ = 1.0;
  double demand_ = 1.0;
  double price_cap_ = 1.0;
  Scenario scenario_ = Scenario::NoAgreement;
};

/// One price per CP. Under Agreement, subscriber n pays `privileged_fee`
/// (zero unless a compensation fee is modeled) to its paired CP n instead of
/// prices[n].
struct PriceVector {
  std::vector<double> prices;
  double privileged_fee = 0.0;

  std::size_t size() const { return prices.size(); }
  double operator[](std::size_t m) const { return prices[m]; }

  static PriceVector uniform(std::size_t m, double p) { return {std::vector<double>(m, p), 0.0}; }

  /// The price subscriber n faces at CP m.
  double effective(std::size_t n, std::size_t m, Scenario s) const {
    return (s == Scenario::Agreement && n == m) ? privileged_fee : prices[m];
  }
};

inline void validate_prices(const PriceVector& p, const MarketConfig& cfg) {
  if (p.size() != cfg.n_cps()) throw std::invalid_argument("price vector length must equal n_cps");
  for (double v : p.prices) {
    if (!std::isfinite(v) || v < 0.0 || v > cfg.price_cap())
      throw std::invalid_argument("prices must lie in [0, price_cap]");
  }
  if (!std::isfinite(p.privileged_fee) || p.privileged_fee < 0.0)
    throw std::invalid_argument("privileged fee must be nonnegative");
}

/// N x M matrix of download rates, row n is subscriber n's split over CPs.
class FlowProfile {
 public:
  FlowProfile() = default;
  FlowProfile(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static FlowProfile uniform(const MarketConfig& cfg) {
    return FlowProfile(cfg.n_subscribers(), cfg.n_cps(), cfg.demand() / static_cast<double>(cfg.n_cps()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t n, std::size_t m) { return data_[n * cols_ + m]; }
  double operator()(std::size_t n, std::size_t m) const { return data_[n * cols_ + m]; }

  std::span<double> row(std::size_t n) { return {data_.data() + n * cols_, cols_}; }
  std::span<const double> row(std::size_t n) const { return {data_.data() + n * cols_, cols_}; }

  double column_sum(std::size_t m) const {
    double s = 0.0;
    for (std::size_t n = 0; n < rows_; ++n) s += (*this)(n, m);
    return s;
  }

  std::vector<double> column_sums() const {
    std::vector<double> out(cols_, 0.0);
    for (std::size_t n = 0; n < rows_; ++n)
      for (std::size_t m = 0; m < cols_; ++m) out[m] += (*this)(n, m);
    return out;
  }

  double row_sum(std::size_t n) const {
    double s = 0.0;
    for (double v : row(n)) s += v;
    return s;
  }

  double total() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
  }

  std::span<const double> values() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Relative tolerance on the demand constraint sum_m x_n^m = phi.
inline constexpr double kRowSumTolerance = 1e-9;

/// Checks shape, nonnegativity and the per-subscriber demand constraint.
inline void validate_flows(const FlowProfile& f, const MarketConfig& cfg) {
  if (f.rows() != cfg.n_subscribers() || f.cols() != cfg.n_cps())
    throw std::invalid_argument("flow profile shape must be n_subscribers x n_cps");
  for (double v : f.values()) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("flows must be finite and nonnegative");
  }
  for (std::size_t n = 0; n < f.rows(); ++n) {
    if (std::abs(f.row_sum(n) - cfg.demand()) > kRowSumTolerance * cfg.demand())
      throw std::invalid_argument("row " + std::to_string(n) + " violates the demand constraint");
  }
}

/// Per-subscriber, per-CP results of a subscriber equilibrium computation.
struct EquilibriumReport {
  FlowProfile flows;
  PriceVector prices;
  std::vector<double> multipliers;  // lambda_n, the demand-constraint multiplier
  std::vector<double> subscriber_costs;
  std::vector<double> cp_revenues;
  double kkt_residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Linear preference cost D(load) = a * load.
inline double preference_cost(double load, const MarketConfig& cfg) {
  if (!(load >= 0.0)) throw std::invalid_argument("load must be nonnegative");
  return cfg.latency_slope() * load;
}

inline void check_dims(const FlowProfile& f, const PriceVector& p, const MarketConfig& cfg) {
  if (f.rows() != cfg.n_subscribers() || f.cols() != cfg.n_cps() || p.size() != cfg.n_cps())
    throw std::invalid_argument("flows and prices inconsistent with config");
}

/// C_n = sum_m x_n^m (D(L^m) + p^m), with the paired CP's price replaced by the
/// privileged fee under Agreement.
inline double subscriber_cost(std::size_t n, const FlowProfile& flows, const PriceVector& prices,
                              const MarketConfig& cfg) {
  check_dims(flows, prices, cfg);
  if (n >= cfg.n_subscribers()) throw std::out_of_range("subscriber index out of range");
  double c = 0.0;
  for (std::size_t m = 0; m < cfg.n_cps(); ++m) {
    double x = flows(n, m);
    c += x * (preference_cost(flows.column_sum(m), cfg) + prices.effective(n, m, cfg.scenario()));
  }
  return c;
}

/// Pi_m = p^m * sum_n x_n^m. Under Agreement the paired row m pays the
/// privileged fee instead.
inline double cp_revenue(std::size_t m, const FlowProfile& flows, const PriceVector& prices,
                         const MarketConfig& cfg) {
  check_dims(flows, prices, cfg);
  if (m >= cfg.n_cps()) throw std::out_of_range("cp index out of range");
  double r = 0.0;
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n) r += prices.effective(n, m, cfg.scenario()) * flows(n, m);
  return r;
}

}  // namespace netneutral
