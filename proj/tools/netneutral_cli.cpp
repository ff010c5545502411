#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "netneutral/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Equilibria of the subscriber/content-provider pricing game"};
  app.require_subcommand(1, 1);

  netneutral::RunManifest manifest;
  std::string output;
  std::string format = "table";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", manifest.config_path, "Config document (key = value per line)")->required();
    sub->add_option("--output", output, "Write the artifact here instead of stdout");
    sub->add_option("--format", format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
    sub->add_option("--set", manifest.overrides, "Override a config key (key=value), repeatable");
  };

  auto* solve = app.add_subcommand("solve", "Two-level equilibrium, closed form next to numeric");
  auto* compare = app.add_subcommand("compare", "Neutral vs agreement welfare comparison (M = N)");
  auto* sweep = app.add_subcommand("sweep", "Grid over sweep.* keys, CSV rows per point");
  auto* validate = app.add_subcommand("validate", "Parse and validate the config, then exit");
  for (auto* sub : {solve, compare, sweep, validate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : netneutral::kExitConfigError;
  }

  if (*solve) manifest.command = netneutral::Command::Solve;
  else if (*compare) manifest.command = netneutral::Command::Compare;
  else if (*sweep) manifest.command = netneutral::Command::Sweep;
  else manifest.command = netneutral::Command::Validate;
  if (!output.empty()) manifest.output_path = output;
  manifest.format = format == "csv" ? netneutral::Format::Csv : netneutral::Format::Table;

  return netneutral::run(manifest, std::cout, std::cerr);
}
