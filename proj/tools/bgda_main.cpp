// bgda: run saddle-point training experiments and summarize their traces.
//
//   bgda run --config exp.toml [--seed N] [--out DIR] [--override section.key=value]...
//   bgda summarize trace.csv [--out summary.json] [--windows 3]
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 1 other.
// BGDA_LOG=quiet|info|debug controls progress output on stderr.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "bgda/config.hpp"
#include "bgda/experiment.hpp"
#include "bgda/trace_io.hpp"
#include "json.hpp"

namespace {

int report(const char* kind, const std::string& message, int code) {
  nlohmann::json err = {{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman gradient descent-ascent experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool print_config = false;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("--config", config_path, "Config file (TOML-style sections)");
  run->add_option("--seed", seed, "Master seed (overrides experiment.seed)");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--override", overrides, "section.key=value, repeatable")->take_all();
  run->add_flag("--print-config", print_config, "Print the effective config and exit");

  std::string trace_path;
  std::string summary_out;
  std::size_t windows = 3;
  auto* summ = app.add_subcommand("summarize", "Summary statistics of a trace file");
  summ->add_option("trace", trace_path, "Trace CSV")->required();
  summ->add_option("--out", summary_out, "Write the summary here instead of stdout");
  summ->add_option("--windows", windows, "Number of chi windows")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      bgda::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = bgda::load_config(config_path);
      for (const std::string& o : overrides) bgda::apply_override(cfg, o);
      if (seed) cfg.seed = *seed;
      if (print_config) {
        std::cout << bgda::emit_config(cfg);
        return 0;
      }
      const bgda::ExperimentResult res = bgda::run_experiment(cfg, out_dir, bgda::log_level_from_env());
      if (!res.trace_path.empty()) std::cout << "trace: " << res.trace_path << "\n";
      std::cout << "summary: " << res.summary_path << "\n";
      return 0;
    }
    const bgda::RunTrace trace = bgda::read_trace_file(trace_path);
    bgda::SummaryOptions so;
    so.windows = windows;
    const std::string text = bgda::summarize(trace, so).dump(2) + "\n";
    if (summary_out.empty()) {
      std::cout << text;
    } else {
      bgda::write_file_atomic(summary_out, text);
    }
    return 0;
  } catch (const bgda::ConfigError& e) {
    return report("config", e.what(), 2);
  } catch (const bgda::ParseError& e) {
    return report("parse", e.what(), 2);
  } catch (const bgda::RunAborted& e) {
    return report("numeric", e.what(), 3);
  } catch (const bgda::NumericError& e) {
    return report("numeric", e.what(), 3);
  } catch (const bgda::SolverFailure& e) {
    return report("solver", e.what(), 3);
  } catch (const bgda::InvalidInput& e) {
    return report("invalid_input", e.what(), 2);
  } catch (const std::exception& e) {
    return report("internal", e.what(), 1);
  }
}
