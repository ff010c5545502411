#pragma once

// CSV and plain-text rendering. Floats use 12 significant digits through
// std::to_chars, so output never depends on the process locale.

#include <array>
#include <charconv>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "netneutral/analysis.hpp"
#include "netneutral/pricing.hpp"

namespace netneutral {

inline std::string format_real(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 12);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

inline constexpr std::array<std::string_view, 21> kSweepColumns = {
    "n_subscribers", "n_cps",          "latency_slope", "demand",        "price_cap",       "scenario",
    "price_paper",   "price_numeric",  "price_gap",     "flow_own",      "flow_cross",      "cost_paper",
    "cost_numeric",  "revenue_paper",  "revenue_numeric", "lemma1_holds", "lemma2_holds",   "compensation_fee",
    "converged",     "iterations",     "kkt_residual"};

inline std::vector<std::string> sweep_cells(const SweepRow& r) {
  const auto& p = r.params;
  std::vector<std::string> cells = {
      std::to_string(p.n_subscribers),
      p.n_cps ? std::to_string(*p.n_cps) : std::string{},
      format_real(p.latency_slope),
      format_real(p.demand),
      format_real(p.price_cap),
      std::string(to_string(p.scenario)),
  };
  if (r.error) {
    cells.resize(kSweepColumns.size());
    cells[18] = format_bool(false);
    cells[19] = "0";
    return cells;
  }
  for (double v : {r.price_paper, r.price_numeric, r.price_gap, r.flow_own, r.flow_cross, r.cost_paper,
                   r.cost_numeric, r.revenue_paper, r.revenue_numeric})
    cells.push_back(format_real(v));
  cells.push_back(format_bool(r.lemma1_holds));
  cells.push_back(format_bool(r.lemma2_holds));
  cells.push_back(format_real(r.compensation_fee));
  cells.push_back(format_bool(r.converged));
  cells.push_back(std::to_string(r.iterations));
  cells.push_back(format_real(r.kkt_residual));
  return cells;
}

inline void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
  os << '\n';
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  write_csv_line(os, {kSweepColumns.begin(), kSweepColumns.end()});
  for (const auto& r : rows) write_csv_line(os, sweep_cells(r));
}

/// Space-aligned table; each column is as wide as its widest cell.
inline void write_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::string cell = r[i];
      if (i + 1 < r.size()) cell.resize(width[i] + 2, ' ');
      line += cell;
    }
    os << line << '\n';
  }
}

inline void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows) {
  std::vector<std::vector<std::string>> t;
  t.emplace_back(kSweepColumns.begin(), kSweepColumns.end());
  for (const auto& r : rows) t.push_back(sweep_cells(r));
  write_table(os, t);
}

inline std::string describe(const MarketConfig& c) {
  std::ostringstream s;
  s << "N=" << c.n_subscribers() << " M=" << c.n_cps() << " a=" << format_real(c.latency_slope())
    << " phi=" << format_real(c.demand()) << " p_max=" << format_real(c.price_cap())
    << " scenario=" << to_string(c.scenario());
  return s.str();
}

inline void write_solve_table(std::ostream& os, const MarketConfig& cfg, const SweepRow& row,
                              const PricingResult& res) {
  os << "instance: " << describe(cfg) << "\n\n";
  write_table(os, {
                      {"quantity", "closed_form", "numeric", "gap"},
                      {"price", format_real(row.price_paper), format_real(row.price_numeric),
                       format_real(row.price_gap)},
                      {"price_foc", format_real(closed_form_price_foc(cfg)), format_real(row.price_numeric),
                       format_real(std::abs(closed_form_price_foc(cfg) - row.price_numeric))},
                      {"subscriber_cost", format_real(row.cost_paper), format_real(row.cost_numeric),
                       format_real(std::abs(row.cost_paper - row.cost_numeric))},
                      {"cp_revenue", format_real(row.revenue_paper), format_real(row.revenue_numeric),
                       format_real(std::abs(row.revenue_paper - row.revenue_numeric))},
                  });
  os << "\nclamped_at_cap = " << format_bool(res.clamped_at_cap) << '\n';
  os << "br_residual = " << format_real(res.br_residual) << '\n';
  os << "converged = " << format_bool(res.converged) << '\n';
  os << "pricing_iterations = " << res.iterations << '\n';
  os << "subscriber_sweeps = " << res.subscribers.iterations << '\n';
  os << "kkt_residual = " << format_real(res.subscribers.kkt_residual) << "\n\n";

  std::vector<std::vector<std::string>> flows;
  std::vector<std::string> head{"flows"};
  for (std::size_t m = 0; m < cfg.n_cps(); ++m) head.push_back("cp" + std::to_string(m + 1));
  head.push_back("lambda");
  head.push_back("cost");
  flows.push_back(head);
  const auto& rep = res.subscribers;
  for (std::size_t n = 0; n < cfg.n_subscribers(); ++n) {
    std::vector<std::string> line{"sub" + std::to_string(n + 1)};
    for (std::size_t m = 0; m < cfg.n_cps(); ++m) line.push_back(format_real(rep.flows(n, m)));
    line.push_back(format_real(rep.multipliers[n]));
    line.push_back(format_real(rep.subscriber_costs[n]));
    flows.push_back(line);
  }
  std::vector<std::string> rev{"revenue"};
  for (double r : rep.cp_revenues) rev.push_back(format_real(r));
  flows.push_back(rev);
  write_table(os, flows);
}

inline std::string_view to_string(RevenueBasis b) { return b == RevenueBasis::Paper ? "paper" : "foc"; }

inline constexpr std::array<std::string_view, 10> kComparisonColumns = {
    "basis",        "cost_no_agreement", "cost_agreement",   "revenue_no_agreement",   "revenue_agreement",
    "lemma1_holds", "lemma2_holds",      "compensation_fee", "privileged_flow", "privileged_flow_limit_gap"};

inline std::vector<std::string> comparison_cells(const ComparisonReport& r) {
  return {std::string(to_string(r.basis)),  format_real(r.cost_no_agreement),   format_real(r.cost_agreement),
          format_real(r.revenue_no_agreement), format_real(r.revenue_agreement), format_bool(r.lemma1_holds),
          format_bool(r.lemma2_holds),       format_real(r.compensation_fee),  format_real(r.privileged_flow),
          format_real(r.privileged_flow_limit_gap)};
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonReport>& reports) {
  write_csv_line(os, {kComparisonColumns.begin(), kComparisonColumns.end()});
  for (const auto& r : reports) write_csv_line(os, comparison_cells(r));
}

inline void write_comparison_table(std::ostream& os, const MarketConfig& cfg,
                                   const std::vector<ComparisonReport>& reports) {
  os << "instance: " << describe(cfg) << "\n\n";
  std::vector<std::vector<std::string>> t;
  std::vector<std::string> head{"quantity"};
  for (const auto& r : reports) head.emplace_back(to_string(r.basis));
  t.push_back(head);
  for (std::size_t i = 1; i < kComparisonColumns.size(); ++i) {
    std::vector<std::string> line{std::string(kComparisonColumns[i])};
    for (const auto& r : reports) line.push_back(comparison_cells(r)[i]);
    t.push_back(line);
  }
  write_table(os, t);
}

}  // namespace netneutral
