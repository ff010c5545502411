#pragma once

// solve | compare | sweep | validate over a config document. Data goes to
// the output stream (or --output file), diagnostics to the error stream.

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "netneutral/analysis.hpp"
#include "netneutral/config.hpp"
#include "netneutral/report.hpp"

namespace netneutral {

enum class Command { Solve, Compare, Sweep, Validate };
enum class Format { Table, Csv };

struct RunManifest {
  Command command = Command::Validate;
  std::string config_path;
  std::optional<std::string> output_path;
  Format format = Format::Table;
  std::vector<std::string> overrides;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNotConverged = 2;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the command, writing its artifact to `out`.
inline int execute(const RunManifest& m, const ConfigDocument& doc, std::ostream& out, std::ostream& err) {
  switch (m.command) {
    case Command::Validate:
      return kExitOk;

    case Command::Solve: {
      MarketConfig cfg(base_params(doc));
      PricingResult res;
      auto row = evaluate_point(cfg.params(), doc.settings, &res);
      if (row.error) throw std::runtime_error(*row.error);
      if (m.format == Format::Csv) write_sweep_csv(out, {row});
      else write_solve_table(out, cfg, row, res);
      if (!res.converged) {
        err << "solver did not converge within " << doc.settings.max_iterations << " iterations\n";
        return kExitNotConverged;
      }
      return kExitOk;
    }

    case Command::Compare: {
      MarketConfig cfg(base_params(doc));
      std::vector<ComparisonReport> reports = {compare_scenarios(cfg, RevenueBasis::Paper),
                                               compare_scenarios(cfg, RevenueBasis::FocConsistent)};
      if (m.format == Format::Csv) write_comparison_csv(out, reports);
      else write_comparison_table(out, cfg, reports);
      return kExitOk;
    }

    case Command::Sweep: {
      auto rows = sweep(expand_grid(doc), doc.settings);
      if (m.format == Format::Csv) write_sweep_csv(out, rows);
      else write_sweep_table(out, rows);
      int code = kExitOk;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].error) {
          err << "row " << i + 1 << " invalid: " << *rows[i].error << '\n';
        } else if (!rows[i].converged) {
          err << "row " << i + 1 << " did not converge\n";
          code = kExitNotConverged;
        }
      }
      return code;
    }
  }
  return kExitOk;
}

}  // namespace detail

/// Exit code 0 on success, 1 on a config error, 2 on solver non-convergence.
inline int run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    auto doc = parse_document(detail::read_file(m.config_path), m.overrides);
    if (m.command == Command::Validate) {
      if (doc.sweep.empty()) MarketConfig(base_params(doc));
      else
        for (const auto& p : expand_grid(doc)) MarketConfig{p};
      return kExitOk;
    }
    if (!m.output_path) return detail::execute(m, doc, out, err);

    std::ostringstream buffer;
    int code = detail::execute(m, doc, buffer, err);
    std::ofstream file(*m.output_path, std::ios::binary | std::ios::trunc);
    if (!file) {
      err << "cannot write output file: " << *m.output_path << '\n';
      return kExitConfigError;
    }
    file << buffer.str();
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNotConverged;
  }
}

}  // namespace netneutral
