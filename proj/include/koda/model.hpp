#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "koda/spectral.hpp"
#include "koda/tape.hpp"

namespace koda {

// tau-sample windows processed as s segments of width w = tau/s.
struct WindowConfig {
  std::size_t tau = 48;
  std::size_t segments = 6;
  std::size_t latent_dim = 64;

  std::size_t segment_width() const { return tau / segments; }
  void validate() const;
};

enum class Variant { full, global_only, residual_only, no_correction, no_gating };

Variant variant_from_name(const std::string& name);
std::string variant_name(Variant v);

struct ModelConfig {
  WindowConfig window;
  std::size_t channels = 1;
  bool channel_independent = true;  // channels share weights and batch together
  std::size_t hidden_mult = 4;      // encoder/decoder hidden width = hidden_mult * d
  std::size_t gain_hidden = 0;      // 0 -> latent_dim
  Variant variant = Variant::full;
  int reencode_interval = 1;        // re-encode every k-th predicted window; 0 = never
  bool instance_norm = true;

  bool use_global() const { return variant != Variant::residual_only; }
  bool use_residual() const { return variant != Variant::global_only; }
  bool use_filter() const { return use_global() && use_residual(); }
  bool correction_enabled() const { return variant != Variant::no_correction; }
  bool gated_gains() const { return variant != Variant::no_gating; }

  // Width of one model row / one encoder input segment.
  std::size_t row_width() const { return channel_independent ? window.tau : window.tau * channels; }
  std::size_t enc_width() const {
    return channel_independent ? window.segment_width() : window.segment_width() * channels;
  }
  std::size_t gain_hidden_dim() const { return gain_hidden ? gain_hidden : window.latent_dim; }
  void validate() const;
};

// ReLU-hidden MLP with a linear output layer.
struct Mlp {
  std::vector<Array> weights;
  std::vector<Array> biases;
};

struct GruParams {
  Array wx;  // [d, 3d]
  Array wh;  // [d, 3d]
  Array b;   // [3d]
};

// Single-hidden-layer ReLU network with a linear (zero-initialized) readout.
struct GainNet {
  Array a;  // [d, gh]
  Array c;  // [gh]
  Array b;  // [gh, d]
};

struct ModelParams {
  ModelConfig cfg;
  Mlp phi_g, phi_r, psi;
  Array koopman;  // [d, d], unconstrained
  GruParams f_r;
  GainNet wzz, wyg, wzr, wyr;
  Array bias_g, bias_r;  // [d]

  // Deterministic enumeration of every trainable array; the single ordering
  // used by the optimizer, checkpoints and tape binding.
  void visit(const std::function<void(const std::string&, Array&)>& fn);
  void visit(const std::function<void(const std::string&, const Array&)>& fn) const;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// ---- tape-bound parameters -------------------------------------------------

struct MlpVars {
  std::vector<Var> weights, biases;
};

struct GainVars {
  Var a, c, b;
};

struct ModelVars {
  MlpVars phi_g, phi_r, psi;
  Var koopman;
  Var gru_wx, gru_wh, gru_b;
  GainVars wzz, wyg, wzr, wyr;
  Var bias_g, bias_r;
};

ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable);

// Gradient map keyed by parameter name (same names visit() produces).
std::unordered_map<std::string, Array> grads_by_name(Tape& tape, const ModelVars& vars,
                                                     const ModelParams& params, Var loss);

// ---- forward blocks ---------------------------------------------------------

Var mlp_apply(const MlpVars& m, Var x);  // [N, in] -> [N, out]

// One gated-recurrent update; returns the new hidden state (which is also the
// new residual latent).
Var gru_step(const ModelVars& vars, std::size_t d, Var x, Var h);

Var koopman_apply(const ModelVars& vars, Var z);  // z @ K

// ---- value-level contract ops (single window, no training) ------------------

struct LatentState {
  Array z;      // [rows, s*d]
  Array r;      // [rows, s*d]
  Array carry;  // [rows, d]
};

// Segment-encode one disentangled window; carry threads from prev if given.
LatentState encode_window(const DisentangledWindow& win, const ModelParams& params,
                          const LatentState* prev = nullptr);

Array koopman_step(const Array& z, const ModelParams& params);

// (new latent, new carry) of the gated recurrent cell.
std::pair<Array, Array> residual_step(const Array& r, const Array& hidden,
                                      const ModelParams& params);

struct PredictedWindow {
  LatentState latent;
  Array window;  // [tau, C]
};

PredictedWindow predict_window(const LatentState& state, const ModelParams& params);

// ---- batched rollout driver --------------------------------------------------

// Latent chain state between windows.
struct ChainState {
  Var z_last;  // [N, d]
  Var r_last;  // [N, d]
  Var carry;   // [N, d]
};

struct StepVars {
  Var z, r;          // [N, s*d] free-run predicted latents
  Var carry_before;  // carry at the start of this window
  Var carry_after;   // carry after free-running the residual chain
};

// Drives the windowed prediction loop for one batch of rows. Shared by open
// loop forecasting, training rollouts and the assimilating variant: the
// correction step rewrites latents between predict() and advance().
class Rollout {
 public:
  Rollout(Tape& tape, const ModelParams& params, const ModelVars& vars,
          const SpectralFilter* filter, Array lookback_rows,
          std::vector<std::size_t> channel_ids);

  std::size_t batch() const { return n_; }
  std::size_t windows_encoded() const { return lookback_z_.size(); }

  // Latents of lookback window k (encoded, teacher-forced), each [N, s*d].
  Var lookback_z(std::size_t k) const { return lookback_z_[k]; }
  Var lookback_r(std::size_t k) const { return lookback_r_[k]; }
  // Lookback window k in instance space (constant), [N, rw].
  Var lookback_window(std::size_t k) const { return lookback_win_[k]; }

  StepVars predict();
  Var decode(Var z, Var r) const;          // psi(z + r) -> [N, rw], instance space
  Var to_data_space(Var window) const;     // undo instance normalization
  Array to_instance_space(const Array& rows) const;  // for measured windows
  // Commit latents and the decoded window they produced; re-encodes from the
  // window when the re-encode interval says so.
  void advance(const StepVars& step, Var window);

  const ChainState& chain() const { return chain_; }
  const ModelConfig& config() const { return params_.cfg; }
  const ModelVars& vars() const { return vars_; }
  Tape& tape() const { return tape_; }
  const SpectralFilter* filter() const { return filter_; }
  const std::vector<std::size_t>& channel_ids() const { return channel_ids_; }

  // Encode already-split dominant/residual rows [N, rw]; used for gains too.
  std::pair<Var, Var> encode_rows(Var dominant, Var residual) const;
  // Split rows into (dominant, residual) per the variant and filter.
  std::pair<Var, Var> split_rows(Var rows) const;
  // Thread the recurrent carry through the segments of encoded residuals.
  Var thread_carry(Var r_window, Var carry_in) const;

 private:
  Tape& tape_;
  const ModelParams& params_;
  const ModelVars& vars_;
  const SpectralFilter* filter_;
  std::vector<std::size_t> channel_ids_;
  std::size_t n_ = 0;
  std::size_t predicted_count_ = 0;
  ChainState chain_;
  std::vector<Var> lookback_z_, lookback_r_, lookback_win_;
  std::vector<double> inst_mean_, inst_std_;  // per row
  Var mean_tile_, std_tile_;                  // [N, rw] constants
};

// Slice segment i (each [N, d]) out of a window latent [N, s*d].
Var segment_of(Var window_latent, std::size_t i, std::size_t d);

// Open-loop forecast of `horizon_windows` windows; returns z-space windows.
std::vector<Array> rollout(const ModelParams& params, const SpectralFilter* filter,
                           const Array& lookback_rows,
                           const std::vector<std::size_t>& channel_ids,
                           std::size_t horizon_windows);

// Turn a [T, C] slice into channel-independent rows [C, T] (or a single
// [1, T*C] row in joint mode) plus the channel id of each row.
std::pair<Array, std::vector<std::size_t>> series_to_rows(const Array& slab,
                                                          const ModelConfig& cfg);
// Inverse of series_to_rows for a horizon of predicted windows.
Array rows_to_series(const std::vector<Array>& windows, const ModelConfig& cfg,
                     std::size_t channels);

}  // namespace koda
