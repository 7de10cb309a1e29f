#include "cli.hpp"

#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "fcco/types.hpp"

#ifndef FCCO_GIT_DESCRIBE
#define FCCO_GIT_DESCRIBE "unknown"
#endif

namespace fcco::cli {

std::string build_describe() { return FCCO_GIT_DESCRIBE; }

int guarded(const std::string& command, const std::function<int()>& body) {
  const std::string prefix = "fcco " + command + ": ";
  try {
    return body();
  } catch (const InvalidConfig& e) {
    std::cerr << prefix << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << prefix << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const DataError& e) {
    std::cerr << prefix << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const RunAborted& e) {
    std::cerr << prefix << "run aborted: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << prefix << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Single-loop stochastic solvers for compositional optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", build_describe());

  Options options;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t trace_every = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", options.config_path, "JSON config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--jobs", options.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--trace-every", trace_every, "trace every N iterations")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", options.quiet, "no progress output");
  };
  CLI::App* run = app.add_subcommand("run", "run a solver");
  CLI::App* diagnose = app.add_subcommand("diagnose", "check a problem at a point");
  CLI::App* compare = app.add_subcommand("compare", "compare estimator settings");
  for (CLI::App* sub : {run, diagnose, compare}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) options.seed = seed;
  if (chosen->count("--out")) options.out = out;
  if (chosen->count("--trace-every")) options.trace_every = trace_every;

  if (chosen == run) return cmd_run(options);
  if (chosen == diagnose) return cmd_diagnose(options);
  return cmd_compare(options);
}

}  // namespace fcco::cli
