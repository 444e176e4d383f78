// SPDX-License-Identifier: Apache-2.0

#include "dualwsr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

namespace dualwsr {

namespace {

using nlohmann::json;

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing required field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void ExperimentConfig::validate() const {
  try {
    dims.validate();
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  if (power_caps.n_elem != dims.bs_antennas) {
    throw ConfigError("power_caps needs one entry per BS antenna");
  }
  if (!power_caps.is_finite() || power_caps.min() <= 0.0) {
    throw ConfigError("power_caps must be positive");
  }
  if (rate_weights.n_elem != dims.total_streams()) {
    throw ConfigError("rate_weights needs one entry per stream");
  }
  if (!rate_weights.is_finite() || rate_weights.min() <= 0.0 || rate_weights.max() >= 1.0) {
    throw ConfigError("rate_weights must lie strictly inside (0, 1)");
  }
  if (snr_db.empty()) throw ConfigError("snr_db grid is empty");
  for (double s : snr_db) {
    if (!std::isfinite(s)) throw ConfigError("snr_db grid has a non-finite entry");
  }
  if (!std::is_sorted(snr_db.begin(), snr_db.end())) throw ConfigError("snr_db grid is not sorted");
  if (realizations < 1) throw ConfigError("realizations must be >= 1");
  if (solver.max_outer_iters < 1 || !(solver.outer_tol > 0.0) || !(solver.fixed_point.tol > 0.0) ||
      solver.fixed_point.max_iters < 1 || !(solver.gp.tol > 0.0) || solver.gp.max_barrier_steps < 1) {
    throw ConfigError("solver tolerances and iteration counts must be positive");
  }
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  c.dims.bs_antennas = required<arma::uword>(j, "bs_antennas");
  c.dims.rx_antennas = required<std::vector<arma::uword>>(j, "rx_antennas");
  c.dims.streams = required<std::vector<arma::uword>>(j, "streams");
  if (j.contains("users") && required<arma::uword>(j, "users") != c.dims.users()) {
    throw ConfigError("users does not match the length of rx_antennas");
  }
  c.power_caps = arma::vec(required<std::vector<double>>(j, "power_caps"));
  c.rate_weights = arma::vec(required<std::vector<double>>(j, "rate_weights"));
  c.snr_db = required<std::vector<double>>(j, "snr_db");
  c.realizations = required<int>(j, "realizations");
  c.seed = required<std::uint64_t>(j, "seed");
  c.output = optional<std::string>(j, "output", "");

  const json solver = j.contains("solver") ? j.at("solver") : json::object();
  if (!solver.is_object()) throw ConfigError("solver must be an object");
  c.solver.max_outer_iters = optional(solver, "max_outer_iters", c.solver.max_outer_iters);
  c.solver.outer_tol = optional(solver, "outer_tol", c.solver.outer_tol);
  c.solver.fixed_point.tol = optional(solver, "fixed_point_tol", c.solver.fixed_point.tol);
  c.solver.fixed_point.max_iters =
      optional(solver, "fixed_point_max_iters", c.solver.fixed_point.max_iters);
  const std::string method = optional<std::string>(solver, "fixed_point_method", "newton");
  if (method == "newton") {
    c.solver.fixed_point.method = FixedPointMethod::kNewton;
  } else if (method == "picard") {
    c.solver.fixed_point.method = FixedPointMethod::kPicard;
  } else {
    throw ConfigError("fixed_point_method must be 'newton' or 'picard'");
  }
  c.solver.gp.tol = optional(solver, "gp_tol", c.solver.gp.tol);
  c.solver.gp.max_barrier_steps =
      optional(solver, "gp_max_barrier_steps", c.solver.gp.max_barrier_steps);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json demo_config_json() {
  // The SNR grid is a stand-in; the reference results do not list one.
  return json{
      {"users", 2},
      {"bs_antennas", 4},
      {"rx_antennas", {2, 2}},
      {"streams", {2, 2}},
      {"power_caps", {2.5, 2.5, 2.5, 2.5}},
      {"rate_weights", {0.4, 0.2, 0.6, 0.25}},
      {"snr_db", {0.0, 5.0, 10.0, 15.0, 20.0}},
      {"realizations", 200},
      {"seed", 2012},
  };
}

ChannelSet generate_channel(const SystemDims& dims, std::uint64_t seed,
                            std::uint64_t realization) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(realization),
                    static_cast<std::uint32_t>(realization >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  arma::cx_mat h(dims.bs_antennas, dims.total_rx());
  const double scale = 1.0 / std::sqrt(2.0);
  for (arma::uword c = 0; c < h.n_cols; ++c) {
    for (arma::uword r = 0; r < h.n_rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      h(r, c) = {scale * re, scale * im};
    }
  }
  return ChannelSet(dims, std::move(h));
}

double sigma2_from_snr(double snr_db, double p_sum, arma::uword users) {
  return p_sum / (static_cast<double>(users) * std::pow(10.0, snr_db / 10.0));
}

ResultRow run_single(const ExperimentConfig& config, double snr_db, int realization,
                     std::vector<TraceRow>* trace) {
  ResultRow row;
  row.seed = config.seed;
  row.realization = realization;
  row.snr_db = snr_db;
  row.sigma2 = sigma2_from_snr(snr_db, arma::accu(config.power_caps), config.dims.users());
  row.antenna_powers = arma::vec(config.dims.bs_antennas, arma::fill::value(kNaN));
  row.objective = row.weighted_sum_rate = row.total_power = kNaN;

  const auto t0 = std::chrono::steady_clock::now();
  IterationTrace iterations;
  try {
    const ChannelSet channel =
        generate_channel(config.dims, config.seed, static_cast<std::uint64_t>(realization));
    const NoiseModel noise = NoiseModel::isotropic(config.dims, row.sigma2);
    const RateWeights weights(config.rate_weights);
    AlgorithmResult result =
        run_algorithm_ii(channel, noise, config.power_caps, weights, config.solver);
    row.converged = result.converged;
    iterations = std::move(result.trace);
    if (!row.converged) row.error = "outer iteration limit reached";
  } catch (const AlgorithmError& e) {
    row.failed = true;
    row.error = e.what();
    iterations = e.trace();
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!iterations.empty()) {
    const IterationRecord& last = iterations.back();
    row.outer_iterations = last.iteration;
    if (!row.failed) {
      row.objective = last.objective;
      row.weighted_sum_rate = last.weighted_sum_rate;
      row.total_power = last.total_power;
      row.antenna_powers = last.antenna_powers;
    }
  }
  if (trace != nullptr) {
    for (const auto& rec : iterations) trace->push_back({config.seed, realization, snr_db, rec});
  }
  return row;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  struct Task {
    double snr;
    int realization;
  };
  std::vector<Task> tasks;
  for (double snr : config.snr_db) {
    for (int r = 0; r < config.realizations; ++r) tasks.push_back({snr, r});
  }
  std::vector<ResultRow> rows(tasks.size());
  std::vector<std::vector<TraceRow>> traces(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      rows[i] = run_single(config, tasks[i].snr, tasks[i].realization, &traces[i]);
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentOutput out;
  out.rows = std::move(rows);
  for (auto& block : traces) {
    out.traces.insert(out.traces.end(), std::make_move_iterator(block.begin()),
                      std::make_move_iterator(block.end()));
  }
  return out;
}

std::vector<SnrSummary> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SnrSummary> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&row](const SnrSummary& s) { return s.snr_db == row.snr_db; });
    if (it == out.end()) {
      out.push_back({});
      it = out.end() - 1;
      it->snr_db = row.snr_db;
    }
    ++it->runs;
    if (row.converged) ++it->converged;
    if (row.failed) {
      ++it->excluded;
    } else {
      it->mean_weighted_sum_rate += row.weighted_sum_rate;
      it->mean_total_power += row.total_power;
    }
  }
  for (auto& s : out) {
    s.converged_fraction = static_cast<double>(s.converged) / s.runs;
    const int used = s.runs - s.excluded;
    if (used > 0) {
      s.mean_weighted_sum_rate /= used;
      s.mean_total_power /= used;
    } else {
      s.mean_weighted_sum_rate = s.mean_total_power = kNaN;
    }
  }
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows,
                       arma::uword bs_antennas) {
  os << "seed,realization,snr_db,sigma2,converged,outer_iterations,objective,"
        "weighted_sum_rate,total_power";
  for (arma::uword n = 1; n <= bs_antennas; ++n) os << ",power_" << n;
  os << ",wall_time_s\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.seed << ',' << r.realization << ',' << r.snr_db << ',' << r.sigma2 << ','
       << (r.converged ? 1 : 0) << ',' << r.outer_iterations << ',' << r.objective << ','
       << r.weighted_sum_rate << ',' << r.total_power;
    for (arma::uword n = 0; n < bs_antennas; ++n) os << ',' << r.antenna_powers(n);
    os << ',' << r.wall_time_s << '\n';
  }
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows,
                     arma::uword bs_antennas) {
  os << "seed,realization,snr_db,iteration,objective,weighted_sum_rate,total_power";
  for (arma::uword n = 1; n <= bs_antennas; ++n) os << ",power_" << n;
  os << ",fixed_point_iterations,gp_status\n";
  os << std::setprecision(17);
  for (const auto& t : rows) {
    const IterationRecord& r = t.record;
    os << t.seed << ',' << t.realization << ',' << t.snr_db << ',' << r.iteration << ','
       << r.objective << ',' << r.weighted_sum_rate << ',' << r.total_power;
    for (arma::uword n = 0; n < bs_antennas; ++n) os << ',' << r.antenna_powers(n);
    os << ',' << r.fixed_point_iterations << ',' << to_string(r.gp_status) << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SnrSummary>& summary) {
  os << "snr_db,runs,converged,excluded,converged_fraction,mean_weighted_sum_rate,"
        "mean_total_power\n";
  os << std::setprecision(17);
  for (const auto& s : summary) {
    os << s.snr_db << ',' << s.runs << ',' << s.converged << ',' << s.excluded << ','
       << s.converged_fraction << ',' << s.mean_weighted_sum_rate << ',' << s.mean_total_power
       << '\n';
  }
}

int threads_from_env() {
  const char* v = std::getenv("DUALWSR_THREADS");
  if (v == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

}  // namespace dualwsr
