// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo driver: seeded i.i.d. Rayleigh channels, SNR sweeps, CSV output.

#pragma once

#include "dualwsr/model.hpp"
#include "dualwsr/optimizer.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualwsr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  SystemDims dims;
  arma::vec power_caps;
  arma::vec rate_weights;
  std::vector<double> snr_db;
  int realizations = 0;
  std::uint64_t seed = 0;
  SolveOptions solver;
  std::string output;  // optional; the CLI flag wins

  // Throws ConfigError.
  void validate() const;
};

// Physical fields are mandatory; solver fields default.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// The reference setup: K = 2, M_k = S_k = 2, N = 4, caps 2.5, weights
// [0.4, 0.2, 0.6, 0.25], SNR 0..20 dB in 5 dB steps.
nlohmann::json demo_config_json();

// Entries (x + iy) / sqrt(2) with x, y standard normal; the stream is keyed by
// (seed, realization) only.
ChannelSet generate_channel(const SystemDims& dims, std::uint64_t seed,
                            std::uint64_t realization);

// sigma^2 = p_sum / (K 10^(snr / 10)).
double sigma2_from_snr(double snr_db, double p_sum, arma::uword users);

struct ResultRow {
  std::uint64_t seed = 0;
  int realization = 0;
  double snr_db = 0.0;
  double sigma2 = 0.0;
  bool converged = false;
  int outer_iterations = 0;
  double objective = 0.0;
  double weighted_sum_rate = 0.0;
  double total_power = 0.0;
  arma::vec antenna_powers;
  double wall_time_s = 0.0;
  bool failed = false;  // the solver threw; numeric results are NaN
  std::string error;    // not part of the CSV
};

struct TraceRow {
  std::uint64_t seed = 0;
  int realization = 0;
  double snr_db = 0.0;
  IterationRecord record;
};

struct SnrSummary {
  double snr_db = 0.0;
  int runs = 0;
  int converged = 0;  // stopping rule fired
  int excluded = 0;   // failed runs
  double converged_fraction = 0.0;
  double mean_weighted_sum_rate = 0.0;
  double mean_total_power = 0.0;
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;     // (snr, realization) order
  std::vector<TraceRow> traces;    // same order, one block per run
};

ResultRow run_single(const ExperimentConfig& config, double snr_db, int realization,
                     std::vector<TraceRow>* trace = nullptr);

// Runs every (snr, realization) pair; threads > 1 only changes wall time.
ExperimentOutput run_experiment(const ExperimentConfig& config, int threads = 1);

// Means over every run that did not fail, including runs stopped by the
// iteration cap; failed runs only count toward the converged fraction.
std::vector<SnrSummary> summarize(const std::vector<ResultRow>& rows);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows,
                       arma::uword bs_antennas);
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows,
                     arma::uword bs_antennas);
void write_summary_csv(std::ostream& os, const std::vector<SnrSummary>& summary);

// Thread count from DUALWSR_THREADS; 1 when unset or invalid.
int threads_from_env();

}  // namespace dualwsr
