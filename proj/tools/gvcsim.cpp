// gvcsim: trace-driven quality-control simulator.
//
//   gvcsim run     --config exp.yaml [--out DIR] [--seed N] [--print-config]
//   gvcsim compare --config exp.yaml [--out DIR] [--seed N]
//   gvcsim sweep   --config exp.yaml [--out DIR] [--seed N]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.
// GVC_OUT_DIR and GVC_LOG_LEVEL override output.dir and output.log_level;
// --out overrides both.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gvc/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool print_config{false};
};

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("--config", opts.config, "Experiment config (YAML)")->required();
  cmd->add_option("--out", opts.out, "Output directory");
  cmd->add_option("--seed", opts.seed, "Seed base (repetition r uses seed + r)");
  cmd->add_flag("--print-config", opts.print_config, "Print the normalised config and exit");
}

void print_rows(const gvc::CommandResult& result) {
  fmt::print("{:<10} {:<13} {:>8} {:>12} {:>12}\n", "controller", "band", "avq", "rr_percent", "objective");
  for (const auto& r : result.rows) {
    fmt::print("{:<10} {:<13} {:>8.3f} {:>12.3f} {:>12.3f}\n", r.controller,
               r.band ? gvc::to_string(*r.band) : "unclassified", r.avq, r.rr_percent, r.objective);
  }
}

int execute(const std::string& command, const Options& opts) {
  try {
    auto cfg = gvc::load_config(opts.config);
    if (const char* env = std::getenv("GVC_OUT_DIR"); env != nullptr && *env != '\0') cfg.output_dir = env;
    if (const char* env = std::getenv("GVC_LOG_LEVEL"); env != nullptr && *env != '\0') cfg.log_level = env;
    if (opts.out) cfg.output_dir = *opts.out;
    if (opts.seed) cfg.seed_base = *opts.seed;

    if (opts.print_config) {
      std::cout << gvc::print_config(cfg);
      return 0;
    }
    cfg.validate();

    gvc::CommandResult result;
    if (command == "run") {
      result = gvc::cmd_run(cfg, cfg.output_dir);
    } else if (command == "compare") {
      result = gvc::cmd_compare(cfg, cfg.output_dir);
    } else {
      result = gvc::cmd_sweep(cfg, cfg.output_dir);
    }
    if (cfg.log_level != "quiet") {
      print_rows(result);
      if (cfg.predictive) fmt::print("note: predictive pre-generation model is synthetic\n");
      fmt::print("wrote {}\n", cfg.output_dir);
    }
    std::fflush(stdout);
    if (!result.diagnostic.empty()) fmt::print(stderr, "error: {}\n", result.diagnostic);
    return static_cast<int>(result.exit_code);
  } catch (const gvc::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return static_cast<int>(gvc::ExitCode::ConfigError);
  } catch (const gvc::TraceError& e) {
    fmt::print(stderr, "trace error: {}\n", e.what());
    return static_cast<int>(gvc::ExitCode::ConfigError);
  } catch (const std::exception& e) {
    fmt::print(stderr, "runtime error: {}\n", e.what());
    return static_cast<int>(gvc::ExitCode::RuntimeError);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven quality control simulator for generated-video conferencing"};
  app.require_subcommand(1);

  Options run_opts, compare_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "Run every configured controller and repetition, writing session logs");
  add_common(run, run_opts);
  auto* compare = app.add_subcommand("compare", "Compare controllers on identical traces and seeds");
  add_common(compare, compare_opts);
  auto* sweep = app.add_subcommand("sweep", "Run the Lagrangian controller across bandwidth bands");
  add_common(sweep, sweep_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(gvc::ExitCode::ConfigError);
  }

  if (run->parsed()) return execute("run", run_opts);
  if (compare->parsed()) return execute("compare", compare_opts);
  return execute("sweep", sweep_opts);
}
