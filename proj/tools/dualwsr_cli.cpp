// SPDX-License-Identifier: Apache-2.0
//
// dualwsr run      --config cfg.json --out results.csv [--trace t.csv] [--summary s.csv]
// dualwsr validate --config cfg.json
// dualwsr demo     [--out demo.csv] [--realizations 200] [--trace demo_trace.csv]

#include "dualwsr/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

using namespace dualwsr;

template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  fn(os);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

int execute(const ExperimentConfig& config, std::string out, const std::string& trace,
            const std::string& summary, int threads) {
  if (out.empty()) out = config.output;
  if (out.empty()) throw ConfigError("no output path: pass --out or set 'output'");
  const ExperimentOutput result = run_experiment(config, threads);
  const auto n = config.dims.bs_antennas;
  write_file(out, [&](std::ostream& os) { write_results_csv(os, result.rows, n); });
  if (!trace.empty()) {
    write_file(trace, [&](std::ostream& os) { write_trace_csv(os, result.traces, n); });
  }
  const auto stats = summarize(result.rows);
  if (!summary.empty()) {
    write_file(summary, [&](std::ostream& os) { write_summary_csv(os, stats); });
  }
  int failed = 0;
  for (const auto& r : result.rows) {
    if (r.failed) {
      ++failed;
      std::cerr << "snr " << r.snr_db << " dB, realization " << r.realization << ": "
                << r.error << '\n';
    }
  }
  for (const auto& s : stats) {
    std::cout << "snr " << s.snr_db << " dB: " << s.converged << "/" << s.runs
              << " converged, " << s.excluded << " failed, mean rate " << s.mean_weighted_sum_rate
              << ", mean power " << s.mean_total_power << '\n';
  }
  // Individual failures are reported per row; only a total wipe-out is systemic.
  return failed == static_cast<int>(result.rows.size()) ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted sum rate precoding under per-antenna power caps"};
  app.require_subcommand(1);

  std::string config_path, out, trace, summary;
  int threads = threads_from_env();
  int realizations = 200;

  auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Per-run results CSV");
  run->add_option("--trace", trace, "Per-iteration trace CSV");
  run->add_option("--summary", summary, "Per-SNR summary CSV");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);

  auto* demo = app.add_subcommand("demo", "Run the built-in reference setup");
  demo->add_option("--out", out, "Per-run results CSV")->default_val("demo.csv");
  demo->add_option("--realizations", realizations, "Channel realizations per SNR")
      ->check(CLI::PositiveNumber);
  demo->add_option("--trace", trace, "Per-iteration trace CSV");
  demo->add_option("--summary", summary, "Per-SNR summary CSV");
  demo->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const ExperimentConfig c = load_config(config_path);
      std::cout << "ok: " << c.dims.users() << " users, " << c.dims.bs_antennas
                << " BS antennas, " << c.dims.total_streams() << " streams, "
                << c.snr_db.size() << " SNR points x " << c.realizations << " realizations\n";
      return 0;
    }
    if (*run) return execute(load_config(config_path), out, trace, summary, threads);
    auto j = demo_config_json();
    j["realizations"] = realizations;
    return execute(parse_config(j), out, trace, summary, threads);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
