#pragma once

// Flat `key = value` config documents. One key per line, `#` starts a
// comment, blank lines are ignored, unknown keys are rejected. Keys under the
// `sweep.` prefix carry comma-separated value lists for a Cartesian grid.

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "netneutral/market.hpp"
#include "netneutral/subscriber_equilibrium.hpp"

namespace netneutral {

/// Market keys in grid order: the last one varies fastest.
inline constexpr std::array<std::string_view, 6> kMarketKeys = {
    "n_subscribers", "n_cps", "latency_slope", "demand", "price_cap", "scenario"};

inline constexpr std::array<std::string_view, 4> kSolverKeys = {"tolerance", "max_iterations", "damping",
                                                                "bisection_tolerance"};

inline constexpr std::string_view kSweepPrefix = "sweep.";

using KeyValues = std::map<std::string, std::string, std::less<>>;

struct ConfigDocument {
  KeyValues values;  // market and solver keys
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep;  // in kMarketKeys order
  SolverSettings settings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool is_market_key(std::string_view k) {
  return std::find(kMarketKeys.begin(), kMarketKeys.end(), k) != kMarketKeys.end();
}

inline bool is_known_key(std::string_view k) {
  if (k.starts_with(kSweepPrefix)) return is_market_key(k.substr(kSweepPrefix.size()));
  return is_market_key(k) || std::find(kSolverKeys.begin(), kSolverKeys.end(), k) != kSolverKeys.end();
}

inline double to_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("non-numeric value for " + std::string(key) + ": '" + std::string(text) + "'");
  return v;
}

inline long to_integer(std::string_view key, std::string_view text) {
  long v = 0;
  auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("non-integer value for " + std::string(key) + ": '" + std::string(text) + "'");
  return v;
}

inline Scenario to_scenario(std::string_view text) {
  auto t = trim(text);
  if (t == "no_agreement") return Scenario::NoAgreement;
  if (t == "agreement") return Scenario::Agreement;
  throw ConfigError("scenario must be no_agreement or agreement, got '" + std::string(text) + "'");
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    auto comma = text.find(',');
    auto item = trim(text.substr(0, comma));
    if (item.empty()) throw ConfigError("empty entry in sweep value list");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

inline void set_market_value(MarketParams& p, std::string_view key, std::string_view value) {
  if (key == "n_subscribers") p.n_subscribers = to_integer(key, value);
  else if (key == "n_cps") p.n_cps = to_integer(key, value);
  else if (key == "latency_slope") p.latency_slope = to_real(key, value);
  else if (key == "demand") p.demand = to_real(key, value);
  else if (key == "price_cap") p.price_cap = to_real(key, value);
  else if (key == "scenario") p.scenario = to_scenario(value);
}

}  // namespace detail

/// Splits a document into key/value pairs. Rejects malformed lines, duplicate
/// keys and unknown keys.
inline KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  long line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!detail::is_known_key(key)) throw ConfigError("unknown key: " + std::string(key));
    if (!kv.emplace(std::string(key), std::string(value)).second)
      throw ConfigError("duplicate key: " + std::string(key));
  }
  return kv;
}

/// Applies `key=value` overrides on top of a parsed document.
inline void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: '" + o + "'");
    auto key = std::string(detail::trim(std::string_view(o).substr(0, eq)));
    auto value = std::string(detail::trim(std::string_view(o).substr(eq + 1)));
    if (!detail::is_known_key(key)) throw ConfigError("unknown key: " + key);
    kv[key] = value;
  }
}

inline ConfigDocument parse_document(std::string_view text, const std::vector<std::string>& overrides = {}) {
  ConfigDocument doc;
  doc.values = parse_key_values(text);
  apply_overrides(doc.values, overrides);

  KeyValues plain;
  for (auto& [k, v] : doc.values) {
    if (std::string_view(k).starts_with(kSweepPrefix)) continue;
    plain.emplace(k, v);
  }
  for (auto key : kMarketKeys) {
    auto it = doc.values.find(std::string(kSweepPrefix) + std::string(key));
    if (it != doc.values.end()) doc.sweep.emplace_back(std::string(key), detail::split_list(it->second));
  }
  doc.values = std::move(plain);

  if (auto it = doc.values.find("tolerance"); it != doc.values.end())
    doc.settings.fixed_point_tolerance = detail::to_real("tolerance", it->second);
  if (auto it = doc.values.find("bisection_tolerance"); it != doc.values.end())
    doc.settings.bisection_tolerance = detail::to_real("bisection_tolerance", it->second);
  if (auto it = doc.values.find("max_iterations"); it != doc.values.end())
    doc.settings.max_iterations = detail::to_integer("max_iterations", it->second);
  if (auto it = doc.values.find("damping"); it != doc.values.end())
    doc.settings.damping = detail::to_real("damping", it->second);
  doc.settings.validate();
  return doc;
}

/// Market parameters of the document's base point. Keys listed in `swept`
/// may be absent; n_cps may be absent under the agreement scenario.
inline MarketParams base_params(const ConfigDocument& doc, const std::vector<std::string>& swept = {}) {
  MarketParams p;
  for (auto key : kMarketKeys) {
    auto it = doc.values.find(key);
    if (it != doc.values.end()) {
      detail::set_market_value(p, key, it->second);
      continue;
    }
    bool is_swept = std::find(swept.begin(), swept.end(), key) != swept.end();
    if (is_swept || key == "n_cps") continue;
    throw ConfigError("missing required key: " + std::string(key));
  }
  return p;
}

/// Parses a single-instance document into a validated MarketConfig.
inline MarketConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
  return MarketConfig(base_params(parse_document(text, overrides)));
}

/// Cartesian product of the document's sweep lists over its base point, last
/// market key varying fastest. A document without sweep keys yields its base
/// point alone. Points are returned unvalidated.
inline std::vector<MarketParams> expand_grid(const ConfigDocument& doc) {
  std::vector<std::string> swept;
  for (auto& [k, _] : doc.sweep) swept.push_back(k);
  std::vector<MarketParams> grid{base_params(doc, swept)};
  for (const auto& [key, values] : doc.sweep) {
    std::vector<MarketParams> next;
    next.reserve(grid.size() * values.size());
    for (const auto& base : grid) {
      for (const auto& v : values) {
        auto p = base;
        detail::set_market_value(p, key, v);
        next.push_back(p);
      }
    }
    grid = std::move(next);
  }
  return grid;
}

}  // namespace netneutral
