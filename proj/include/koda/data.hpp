#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "koda/array.hpp"

namespace koda {

// Multi-channel discrete time series; values are [T, C] row-major.
struct Series {
  Array values;
  std::vector<std::string> channel_names;
  double dt = 1.0;
  std::string split_tag = "full";

  std::size_t length() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t channels() const { return values.rank() == 2 ? values.dim(1) : 0; }
  double at(std::size_t t, std::size_t c) const { return values[t * channels() + c]; }
  Series slice_rows(std::size_t start, std::size_t len, std::string tag) const;
};

struct CsvConfig {
  bool first_column_is_time = true;
  std::vector<std::string> use_columns;  // empty = every non-time column
  bool forward_fill = false;             // otherwise rows with gaps are rejected
};

Series ingest_csv(const std::string& path, const CsvConfig& cfg = {});
void write_csv(const Series& s, const std::string& path);

// Per-channel z-scoring statistics, always fit on the train split only.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

NormStats fit_stats(const Series& s);
Series apply_stats(const Series& s, const NormStats& stats);
Series invert_stats(const Series& s, const NormStats& stats);

struct Splits {
  Series train, val, test;
  NormStats stats;  // fit on train, applied to all three when normalized
};

// Chronological contiguous split; when `normalize` all three splits are
// z-scored with train statistics.
Splits split_series(const Series& s, double train_r, double val_r, double test_r,
                    bool normalize = true);

// Sliding (lookback, target) pair start offsets. Throws if the series is too
// short; count = floor((len - T_L - H) / stride) + 1.
std::vector<std::size_t> window_starts(std::size_t series_len, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride);

struct WindowPair {
  Array lookback;  // [T_L, C]
  Array target;    // [H, C]
  std::size_t start = 0;
};

WindowPair make_window(const Series& s, std::size_t start, std::size_t lookback,
                       std::size_t horizon);

// ---- synthetic nonlinear dynamical systems --------------------------------

enum class NldsSystem { pendulum, duffing, lotka_volterra, lorenz63 };

NldsSystem nlds_from_name(const std::string& name);
std::string nlds_name(NldsSystem s);

struct NldsSpec {
  NldsSystem system = NldsSystem::pendulum;
  std::map<std::string, double> parameters;               // filled with defaults if empty
  std::vector<std::pair<double, double>> initial_box;     // per state dimension
  double dt = 0.01;
  std::size_t steps = 1500;
  double process_noise_std = 0.0;
  double measurement_noise_std = 0.0;
};

// Canonical textbook settings for each system (parameters, box, dt).
NldsSpec default_nlds_spec(NldsSystem system);

std::size_t nlds_dim(NldsSystem system);

// dy/dt for one system at state y (size nlds_dim).
void nlds_rhs(const NldsSpec& spec, const double* y, double* dydt);

// Classical RK4 with per-step Gaussian process noise and Gaussian measurement
// noise on the emitted observations. Deterministic given the seed; trajectory
// i uses a stream derived from (seed, i).
std::vector<Series> simulate(const NldsSpec& spec, std::size_t trajectory_count,
                             std::uint64_t seed);

// Single-trajectory integrator used by simulate(); exposed for tests.
Series simulate_one(const NldsSpec& spec, Rng& rng);

}  // namespace koda
