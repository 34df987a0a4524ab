#include "koda/model.hpp"

#include <cassert>
#include <cmath>

namespace koda {

void WindowConfig::validate() const {
  if (segments == 0 || tau == 0 || tau % segments != 0) {
    throw ValueError("window config: tau (" + std::to_string(tau) +
                     ") must be a positive multiple of segments (" + std::to_string(segments) +
                     ")");
  }
  if (latent_dim < 1) throw ValueError("window config: latent_dim must be >= 1");
}

void ModelConfig::validate() const {
  window.validate();
  if (channels == 0) throw ValueError("model config: channels must be >= 1");
  if (hidden_mult == 0) throw ValueError("model config: hidden_mult must be >= 1");
  if (reencode_interval < 0) throw ValueError("model config: reencode_interval must be >= 0");
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "global_only") return Variant::global_only;
  if (name == "residual_only") return Variant::residual_only;
  if (name == "no_correction") return Variant::no_correction;
  if (name == "no_gating") return Variant::no_gating;
  throw ValueError("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::global_only: return "global_only";
    case Variant::residual_only: return "residual_only";
    case Variant::no_correction: return "no_correction";
    case Variant::no_gating: return "no_gating";
  }
  return "?";
}

// ---- parameters -------------------------------------------------------------

namespace {

template <typename Self, typename Fn>
void visit_impl(Self& self, Fn&& fn) {
  auto mlp = [&](const std::string& prefix, auto& m) {
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      fn(prefix + ".w" + std::to_string(i), m.weights[i]);
      fn(prefix + ".b" + std::to_string(i), m.biases[i]);
    }
  };
  auto gain = [&](const std::string& prefix, auto& g) {
    fn(prefix + ".a", g.a);
    fn(prefix + ".c", g.c);
    fn(prefix + ".b", g.b);
  };
  mlp("phi_g", self.phi_g);
  mlp("phi_r", self.phi_r);
  mlp("psi", self.psi);
  fn("koopman", self.koopman);
  fn("f_r.wx", self.f_r.wx);
  fn("f_r.wh", self.f_r.wh);
  fn("f_r.b", self.f_r.b);
  gain("wzz", self.wzz);
  gain("wyg", self.wyg);
  gain("wzr", self.wzr);
  gain("wyr", self.wyr);
  fn("bias_g", self.bias_g);
  fn("bias_r", self.bias_r);
}

Array xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Array::random_uniform({fan_in, fan_out}, -bound, bound, rng);
}

Mlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers,
             Rng& rng) {
  Mlp m;
  std::size_t prev = in;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    m.weights.push_back(xavier(prev, hidden, rng));
    m.biases.push_back(Array::zeros({hidden}));
    prev = hidden;
  }
  m.weights.push_back(xavier(prev, out, rng));
  m.biases.push_back(Array::zeros({out}));
  return m;
}

GainNet make_gain(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  GainNet g;
  g.a = xavier(in, hidden, rng);
  g.c = Array::zeros({hidden});
  g.b = Array::zeros({hidden, out});  // zero readout: correction starts as a no-op
  return g;
}

}  // namespace

void ModelParams::visit(const std::function<void(const std::string&, Array&)>& fn) {
  visit_impl(*this, fn);
}

void ModelParams::visit(const std::function<void(const std::string&, const Array&)>& fn) const {
  visit_impl(*this, fn);
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::derive(seed, 0x6b6f6461);  // params stream
  const std::size_t d = cfg.window.latent_dim;
  const std::size_t ew = cfg.enc_width();
  const std::size_t hidden = cfg.hidden_mult * d;
  const std::size_t gh = cfg.gain_hidden_dim();

  ModelParams p;
  p.cfg = cfg;
  p.phi_g = make_mlp(ew, hidden, d, 2, rng);
  p.phi_r = make_mlp(ew, hidden, d, 2, rng);
  p.psi = make_mlp(d, hidden, ew, 2, rng);

  p.koopman = Array::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) p.koopman.mut()[i * d + i] = 1.0;
  Array jitter = Array::random_uniform({d, d}, -0.02, 0.02, rng);
  for (std::size_t i = 0; i < d * d; ++i) p.koopman.mut()[i] += jitter[i];

  p.f_r.wx = xavier(d, 3 * d, rng);
  p.f_r.wh = xavier(d, 3 * d, rng);
  p.f_r.b = Array::zeros({3 * d});

  p.wzz = make_gain(d, gh, d, rng);
  p.wyg = make_gain(d, gh, d, rng);
  p.wzr = make_gain(d, gh, d, rng);
  p.wyr = make_gain(d, gh, d, rng);
  p.bias_g = Array::zeros({d});
  p.bias_r = Array::zeros({d});
  return p;
}

ModelVars bind_params(Tape& tape, const ModelParams& params, bool trainable) {
  ModelVars v;
  auto mlp = [&](const Mlp& m, MlpVars& out) {
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      out.weights.push_back(tape.leaf(m.weights[i], trainable));
      out.biases.push_back(tape.leaf(m.biases[i], trainable));
    }
  };
  auto gain = [&](const GainNet& g, GainVars& out) {
    out.a = tape.leaf(g.a, trainable);
    out.c = tape.leaf(g.c, trainable);
    out.b = tape.leaf(g.b, trainable);
  };
  mlp(params.phi_g, v.phi_g);
  mlp(params.phi_r, v.phi_r);
  mlp(params.psi, v.psi);
  v.koopman = tape.leaf(params.koopman, trainable);
  v.gru_wx = tape.leaf(params.f_r.wx, trainable);
  v.gru_wh = tape.leaf(params.f_r.wh, trainable);
  v.gru_b = tape.leaf(params.f_r.b, trainable);
  gain(params.wzz, v.wzz);
  gain(params.wyg, v.wyg);
  gain(params.wzr, v.wzr);
  gain(params.wyr, v.wyr);
  v.bias_g = tape.leaf(params.bias_g, trainable);
  v.bias_r = tape.leaf(params.bias_r, trainable);
  return v;
}

namespace {

// Vars in the same order visit() enumerates arrays.
std::vector<std::pair<std::string, Var>> named_vars(const ModelVars& v,
                                                    const ModelParams& params) {
  std::vector<std::string> names;
  params.visit(
      [&](const std::string& name, const Array&) { names.push_back(name); });
  std::vector<Var> vars;
  auto mlp = [&](const MlpVars& m) {
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      vars.push_back(m.weights[i]);
      vars.push_back(m.biases[i]);
    }
  };
  auto gain = [&](const GainVars& g) {
    vars.push_back(g.a);
    vars.push_back(g.c);
    vars.push_back(g.b);
  };
  mlp(v.phi_g);
  mlp(v.phi_r);
  mlp(v.psi);
  vars.push_back(v.koopman);
  vars.push_back(v.gru_wx);
  vars.push_back(v.gru_wh);
  vars.push_back(v.gru_b);
  gain(v.wzz);
  gain(v.wyg);
  gain(v.wzr);
  gain(v.wyr);
  vars.push_back(v.bias_g);
  vars.push_back(v.bias_r);
  assert(names.size() == vars.size());
  std::vector<std::pair<std::string, Var>> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back({names[i], vars[i]});
  return out;
}

}  // namespace

std::unordered_map<std::string, Array> grads_by_name(Tape& tape, const ModelVars& vars,
                                                     const ModelParams& params, Var loss) {
  auto named = named_vars(vars, params);
  auto grads = tape.backward(loss);
  std::unordered_map<std::string, Array> out;
  for (const auto& [name, var] : named) {
    auto it = grads.find(var.id);
    out[name] = it != grads.end() ? it->second : Array::zeros(tape.val(var).shape());
  }
  return out;
}

// ---- forward blocks ----------------------------------------------------------

Var mlp_apply(const MlpVars& m, Var x) {
  Var h = x;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    h = ops::add(ops::matmul(h, m.weights[i]), m.biases[i]);
    if (i + 1 < m.weights.size()) h = ops::relu(h);
  }
  return h;
}

Var gru_step(const ModelVars& vars, std::size_t d, Var x, Var h) {
  Var gx = ops::matmul(x, vars.gru_wx);                       // [N, 3d]
  Var gh = ops::matmul(h, ops::slice(vars.gru_wh, 1, 0, 2 * d));  // [N, 2d]
  Var b_u = ops::slice(vars.gru_b, 0, 0, d);
  Var b_r = ops::slice(vars.gru_b, 0, d, d);
  Var b_c = ops::slice(vars.gru_b, 0, 2 * d, d);

  Var u = ops::sigmoid(ops::add(ops::add(ops::slice(gx, 1, 0, d), ops::slice(gh, 1, 0, d)), b_u));
  Var rs = ops::sigmoid(
      ops::add(ops::add(ops::slice(gx, 1, d, d), ops::slice(gh, 1, d, d)), b_r));
  Var cand = ops::tanh(ops::add(
      ops::add(ops::slice(gx, 1, 2 * d, d),
               ops::matmul(ops::mul(rs, h), ops::slice(vars.gru_wh, 1, 2 * d, d))),
      b_c));
  // h' = (1-u) h + u c
  Var keep = ops::mul(h, ops::sub(h.tape->constant(Array::full({d}, 1.0)), u));
  return ops::add(keep, ops::mul(u, cand));
}

Var koopman_apply(const ModelVars& vars, Var z) { return ops::matmul(z, vars.koopman); }

Var segment_of(Var window_latent, std::size_t i, std::size_t d) {
  return ops::slice(window_latent, 1, i * d, d);
}

// ---- Rollout -----------------------------------------------------------------

namespace {

std::vector<std::size_t> window_channel_ids(const std::vector<std::size_t>& row_ids,
                                            std::size_t windows) {
  std::vector<std::size_t> out;
  out.reserve(row_ids.size() * windows);
  for (std::size_t id : row_ids) {
    for (std::size_t k = 0; k < windows; ++k) out.push_back(id);
  }
  return out;
}

}  // namespace

Rollout::Rollout(Tape& tape, const ModelParams& params, const ModelVars& vars,
                 const SpectralFilter* filter, Array lookback_rows,
                 std::vector<std::size_t> channel_ids)
    : tape_(tape),
      params_(params),
      vars_(vars),
      filter_(filter),
      channel_ids_(std::move(channel_ids)) {
  const ModelConfig& cfg = params_.cfg;
  cfg.validate();
  if (cfg.use_filter() && filter_ == nullptr) {
    throw ValueError("rollout: this variant needs a spectral filter");
  }
  if (lookback_rows.rank() != 2) throw ShapeError("rollout: lookback rows must be [N, T]");
  n_ = lookback_rows.dim(0);
  if (channel_ids_.size() != n_) throw ShapeError("rollout: one channel id per row required");
  const std::size_t rw = cfg.row_width();
  const std::size_t T = lookback_rows.dim(1);
  if (T == 0 || T % rw != 0) {
    throw ShapeError("rollout: lookback length " + std::to_string(T) +
                     " is not a multiple of the window length " + std::to_string(rw));
  }
  const std::size_t K = T / rw;

  // Instance normalization over the whole lookback row.
  inst_mean_.assign(n_, 0.0);
  inst_std_.assign(n_, 1.0);
  Array norm = lookback_rows.clone();
  if (cfg.instance_norm) {
    for (std::size_t b = 0; b < n_; ++b) {
      const double* row = lookback_rows.data() + b * T;
      double m = 0.0;
      for (std::size_t i = 0; i < T; ++i) m += row[i];
      m /= static_cast<double>(T);
      double v = 0.0;
      for (std::size_t i = 0; i < T; ++i) v += (row[i] - m) * (row[i] - m);
      double sd = std::sqrt(v / static_cast<double>(T));
      if (sd < 1e-8) sd = 1.0;
      inst_mean_[b] = m;
      inst_std_[b] = sd;
      double* dst = norm.mut() + b * T;
      for (std::size_t i = 0; i < T; ++i) dst[i] = (row[i] - m) / sd;
    }
  }
  Array mean_tile = Array::zeros({n_, rw});
  Array std_tile = Array::full({n_, rw}, 1.0);
  for (std::size_t b = 0; b < n_; ++b) {
    for (std::size_t i = 0; i < rw; ++i) {
      mean_tile.mut()[b * rw + i] = inst_mean_[b];
      std_tile.mut()[b * rw + i] = inst_std_[b];
    }
  }
  mean_tile_ = tape_.constant(std::move(mean_tile));
  std_tile_ = tape_.constant(std::move(std_tile));

  // Encode the lookback window by window, threading the recurrent carry.
  const std::size_t d = cfg.window.latent_dim;
  Var carry = tape_.constant(Array::zeros({n_, d}));
  for (std::size_t k = 0; k < K; ++k) {
    Array wk = Array::zeros({n_, rw});
    for (std::size_t b = 0; b < n_; ++b) {
      const double* src = norm.data() + b * T + k * rw;
      std::copy(src, src + rw, wk.mut() + b * rw);
    }
    Var win = tape_.constant(std::move(wk));
    auto [dom, res] = split_rows(win);
    auto [z, r] = encode_rows(dom, res);
    if (cfg.use_residual()) carry = thread_carry(r, carry);
    lookback_win_.push_back(win);
    lookback_z_.push_back(z);
    lookback_r_.push_back(r);
  }
  const std::size_t s = cfg.window.segments;
  chain_ = ChainState{segment_of(lookback_z_.back(), s - 1, d),
                      segment_of(lookback_r_.back(), s - 1, d), carry};
}

std::pair<Var, Var> Rollout::split_rows(Var rows) const {
  const ModelConfig& cfg = params_.cfg;
  const Array shape_probe = tape_.val(rows);
  if (cfg.use_filter()) {
    const std::size_t inter = cfg.channel_independent ? 1 : cfg.channels;
    Var dom = spectral_project(rows, *filter_, channel_ids_, true, inter);
    Var res = ops::sub(rows, dom);
    return {dom, res};
  }
  Var zeros = tape_.constant(Array::zeros(shape_probe.shape()));
  if (cfg.variant == Variant::global_only) return {rows, zeros};
  return {zeros, rows};  // residual_only
}

namespace {
std::pair<Var, Var> encode_rows_impl(Tape&, const ModelParams&, const ModelVars&, std::size_t,
                                     Var, Var);
Var thread_carry_impl(const ModelParams&, const ModelVars&, Var, Var);
}  // namespace

std::pair<Var, Var> Rollout::encode_rows(Var dominant, Var residual) const {
  return encode_rows_impl(tape_, params_, vars_, n_, dominant, residual);
}

Var Rollout::thread_carry(Var r_window, Var carry_in) const {
  return thread_carry_impl(params_, vars_, r_window, carry_in);
}

StepVars Rollout::predict() {
  const ModelConfig& cfg = params_.cfg;
  const std::size_t s = cfg.window.segments;
  const std::size_t d = cfg.window.latent_dim;
  StepVars out;
  out.carry_before = chain_.carry;
  std::vector<Var> zs, rs;
  try {
    if (cfg.use_global()) {
      Var z = chain_.z_last;
      for (std::size_t i = 0; i < s; ++i) {
        z = koopman_apply(vars_, z);
        zs.push_back(z);
      }
      out.z = ops::concat(zs, 1);
    } else {
      out.z = tape_.constant(Array::zeros({n_, s * d}));
    }
    if (cfg.use_residual()) {
      Var h = chain_.carry;
      Var x = chain_.r_last;
      for (std::size_t i = 0; i < s; ++i) {
        h = gru_step(vars_, d, x, h);
        rs.push_back(h);
        x = h;
      }
      out.r = ops::concat(rs, 1);
      out.carry_after = h;
    } else {
      out.r = tape_.constant(Array::zeros({n_, s * d}));
      out.carry_after = chain_.carry;
    }
  } catch (const NonFiniteError& e) {
    const std::size_t at = std::max(zs.size(), rs.size());
    throw NonFiniteError(std::string(e.what()) + " (rollout aborted at window " +
                         std::to_string(predicted_count_ + 1) + ", segment " + std::to_string(at) +
                         ")");
  }
  return out;
}

Var Rollout::decode(Var z, Var r) const {
  const ModelConfig& cfg = params_.cfg;
  const std::size_t s = cfg.window.segments;
  const std::size_t d = cfg.window.latent_dim;
  Var h = ops::add(z, r);
  Var seg = ops::reshape(h, {n_ * s, d});
  Var dec = mlp_apply(vars_.psi, seg);
  return ops::reshape(dec, {n_, cfg.row_width()});
}

Var Rollout::to_data_space(Var window) const {
  if (!params_.cfg.instance_norm) return window;
  return ops::add(ops::mul(window, std_tile_), mean_tile_);
}

Array Rollout::to_instance_space(const Array& rows) const {
  if (!params_.cfg.instance_norm) return rows.clone();
  const std::size_t rw = params_.cfg.row_width();
  if (rows.rank() != 2 || rows.dim(0) != n_ || rows.dim(1) != rw) {
    throw ShapeError("to_instance_space: expected [N, row_width] rows, got " +
                     shape_str(rows.shape()));
  }
  Array out = rows.clone();
  for (std::size_t b = 0; b < n_; ++b) {
    for (std::size_t i = 0; i < rw; ++i) {
      out.mut()[b * rw + i] = (rows[b * rw + i] - inst_mean_[b]) / inst_std_[b];
    }
  }
  return out;
}

void Rollout::advance(const StepVars& step, Var window) {
  const ModelConfig& cfg = params_.cfg;
  const std::size_t s = cfg.window.segments;
  const std::size_t d = cfg.window.latent_dim;
  ++predicted_count_;
  const bool reencode =
      cfg.reencode_interval > 0 &&
      (predicted_count_ % static_cast<std::size_t>(cfg.reencode_interval)) == 0;
  if (reencode) {
    auto [dom, res] = split_rows(window);
    auto [z, r] = encode_rows(dom, res);
    Var carry = cfg.use_residual() ? thread_carry(r, step.carry_before) : step.carry_before;
    chain_ = ChainState{segment_of(z, s - 1, d), segment_of(r, s - 1, d), carry};
  } else {
    chain_ = ChainState{segment_of(step.z, s - 1, d), segment_of(step.r, s - 1, d),
                        step.carry_after};
  }
}

// ---- value-level contract wrappers -------------------------------------------

namespace {

Array transpose_values(const Array& a) {
  const std::size_t m = a.dim(0), n = a.dim(1);
  Array out = Array::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.mut()[j * m + i] = a[i * n + j];
  }
  return out;
}

// Encode pre-split rows without a full Rollout; shared with the contract ops.
std::pair<Var, Var> encode_rows_impl(Tape& tape, const ModelParams& params, const ModelVars& vars,
                                     std::size_t n, Var dominant, Var residual) {
  const ModelConfig& cfg = params.cfg;
  const std::size_t s = cfg.window.segments;
  const std::size_t d = cfg.window.latent_dim;
  const std::size_t ew = cfg.enc_width();
  Var z, r;
  if (cfg.use_global()) {
    Var seg = ops::reshape(dominant, {n * s, ew});
    z = ops::reshape(mlp_apply(vars.phi_g, seg), {n, s * d});
  } else {
    z = tape.constant(Array::zeros({n, s * d}));
  }
  if (cfg.use_residual()) {
    Var seg = ops::reshape(residual, {n * s, ew});
    r = ops::reshape(mlp_apply(vars.phi_r, seg), {n, s * d});
  } else {
    r = tape.constant(Array::zeros({n, s * d}));
  }
  return {z, r};
}

Var thread_carry_impl(const ModelParams& params, const ModelVars& vars, Var r_window,
                      Var carry_in) {
  const std::size_t s = params.cfg.window.segments;
  const std::size_t d = params.cfg.window.latent_dim;
  Var h = carry_in;
  for (std::size_t i = 0; i < s; ++i) {
    h = gru_step(vars, d, segment_of(r_window, i, d), h);
  }
  return h;
}

}  // namespace

LatentState encode_window(const DisentangledWindow& win, const ModelParams& params,
                          const LatentState* prev) {
  const ModelConfig& cfg = params.cfg;
  cfg.validate();
  if (win.source.rank() != 2 || win.source.dim(0) != cfg.window.tau) {
    throw ShapeError("encode_window: window shape " + shape_str(win.source.shape()) +
                     " does not match tau=" + std::to_string(cfg.window.tau));
  }
  const std::size_t C = win.source.dim(1);
  const std::size_t d = cfg.window.latent_dim;
  Tape tape;
  ModelVars vars = bind_params(tape, params, false);
  const std::size_t rows = cfg.channel_independent ? C : 1;

  auto as_rows = [&](const Array& w) {
    return cfg.channel_independent
               ? transpose_values(w)
               : Array::from({1, w.size()},
                             std::vector<double>(w.data(), w.data() + w.size()));
  };
  Var dom = tape.constant(as_rows(win.dominant));
  Var res = tape.constant(as_rows(win.residual));
  auto [z, r] = encode_rows_impl(tape, params, vars, rows, dom, res);
  Var carry_in =
      prev != nullptr ? tape.constant(prev->carry) : tape.constant(Array::zeros({rows, d}));
  Var carry = cfg.use_residual() ? thread_carry_impl(params, vars, r, carry_in) : carry_in;
  return LatentState{tape.val(z), tape.val(r), tape.val(carry)};
}

Array koopman_step(const Array& z, const ModelParams& params) {
  Tape tape;
  ModelVars vars = bind_params(tape, params, false);
  Array zin = z;
  bool vec = false;
  if (z.rank() == 1) {
    zin = Array::from({1, z.size()}, std::vector<double>(z.data(), z.data() + z.size()));
    vec = true;
  }
  Var out = koopman_apply(vars, tape.constant(zin));
  Array res = tape.val(out);
  if (vec) return Array::from({res.size()}, std::vector<double>(res.data(), res.data() + res.size()));
  return res;
}

std::pair<Array, Array> residual_step(const Array& r, const Array& hidden,
                                      const ModelParams& params) {
  const std::size_t d = params.cfg.window.latent_dim;
  Tape tape;
  ModelVars vars = bind_params(tape, params, false);
  auto as_row = [&](const Array& a) {
    if (a.rank() == 1) {
      return Array::from({1, a.size()}, std::vector<double>(a.data(), a.data() + a.size()));
    }
    return a;
  };
  Var h = gru_step(vars, d, tape.constant(as_row(r)), tape.constant(as_row(hidden)));
  Array out = tape.val(h);
  if (r.rank() == 1) {
    out = Array::from({out.size()}, std::vector<double>(out.data(), out.data() + out.size()));
  }
  return {out, out.clone()};  // new latent and new carry coincide for a GRU
}

PredictedWindow predict_window(const LatentState& state, const ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  cfg.validate();
  const std::size_t d = cfg.window.latent_dim;
  const std::size_t s = cfg.window.segments;
  const std::size_t rows = state.z.dim(0);
  Tape tape;
  ModelVars vars = bind_params(tape, params, false);

  // Seed the chains from the last segment latents of the input state.
  std::vector<Var> zs, rs;
  Var zprev = ops::slice(tape.constant(state.z), 1, (s - 1) * d, d);
  Var rprev = ops::slice(tape.constant(state.r), 1, (s - 1) * d, d);
  Var carry = tape.constant(state.carry);
  for (std::size_t i = 0; i < s; ++i) {
    try {
      if (cfg.use_global()) {
        zprev = koopman_apply(vars, zprev);
        zs.push_back(zprev);
      }
      if (cfg.use_residual()) {
        carry = gru_step(vars, d, rprev, carry);
        rprev = carry;
        rs.push_back(carry);
      }
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(std::string(e.what()) + " (predict_window aborted at segment " +
                           std::to_string(i) + ")");
    }
  }
  Var z = cfg.use_global() ? ops::concat(zs, 1) : tape.constant(Array::zeros({rows, s * d}));
  Var r = cfg.use_residual() ? ops::concat(rs, 1) : tape.constant(Array::zeros({rows, s * d}));
  Var h = ops::add(z, r);
  Var dec = mlp_apply(vars.psi, ops::reshape(h, {rows * s, d}));
  Var win_rows = ops::reshape(dec, {rows, cfg.channel_independent
                                              ? cfg.window.tau
                                              : cfg.window.tau * cfg.channels});

  PredictedWindow out;
  out.latent = LatentState{tape.val(z), tape.val(r), tape.val(carry)};
  Array rows_val = tape.val(win_rows);
  out.window = cfg.channel_independent
                   ? transpose_values(rows_val)
                   : Array::from({cfg.window.tau, cfg.channels},
                                 std::vector<double>(rows_val.data(),
                                                     rows_val.data() + rows_val.size()));
  return out;
}

// ---- batch conversion ---------------------------------------------------------

std::pair<Array, std::vector<std::size_t>> series_to_rows(const Array& slab,
                                                          const ModelConfig& cfg) {
  if (slab.rank() != 2) throw ShapeError("series_to_rows: expected [T, C]");
  const std::size_t T = slab.dim(0), C = slab.dim(1);
  if (cfg.channel_independent) {
    Array rows = transpose_values(slab);  // [C, T]
    std::vector<std::size_t> ids(C);
    for (std::size_t c = 0; c < C; ++c) ids[c] = c;
    return {rows, ids};
  }
  Array rows = Array::from({1, T * C},
                           std::vector<double>(slab.data(), slab.data() + slab.size()));
  return {rows, {0}};
}

Array rows_to_series(const std::vector<Array>& windows, const ModelConfig& cfg,
                     std::size_t channels) {
  const std::size_t tau = cfg.window.tau;
  const std::size_t H = windows.size() * tau;
  Array out = Array::zeros({H, channels});
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const Array& w = windows[k];
    for (std::size_t t = 0; t < tau; ++t) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = cfg.channel_independent ? w[c * tau + t] : w[t * channels + c];
        out.mut()[(k * tau + t) * channels + c] = v;
      }
    }
  }
  return out;
}

std::vector<Array> rollout(const ModelParams& params, const SpectralFilter* filter,
                           const Array& lookback_rows,
                           const std::vector<std::size_t>& channel_ids,
                           std::size_t horizon_windows) {
  if (horizon_windows < 1) throw ValueError("rollout: horizon_windows must be >= 1");
  Tape tape;
  ModelVars vars = bind_params(tape, params, false);
  Rollout ro(tape, params, vars, filter, lookback_rows, channel_ids);
  std::vector<Array> out;
  for (std::size_t k = 0; k < horizon_windows; ++k) {
    StepVars step = ro.predict();
    Var win = ro.decode(step.z, step.r);
    ro.advance(step, win);
    out.push_back(tape.val(ro.to_data_space(win)));
  }
  return out;
}

}  // namespace koda
