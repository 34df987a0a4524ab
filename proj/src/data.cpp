#include "koda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace koda {

Series Series::slice_rows(std::size_t start, std::size_t len, std::string tag) const {
  const std::size_t C = channels();
  if (start + len > length()) throw ValueError("slice_rows: range exceeds series length");
  Array v = Array::zeros({len, C});
  std::copy(values.data() + start * C, values.data() + (start + len) * C, v.mut());
  Series out;
  out.values = std::move(v);
  out.channel_names = channel_names;
  out.dt = dt;
  out.split_tag = std::move(tag);
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  if (b == e) return false;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e;
}

}  // namespace

Series ingest_csv(const std::string& path, const CsvConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path);

  std::vector<std::string> header = split_line(line);
  const std::size_t first_data_col = cfg.first_column_is_time ? 1 : 0;
  if (header.size() <= first_data_col) throw IoError("CSV has no data columns: " + path);

  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  for (std::size_t c = first_data_col; c < header.size(); ++c) {
    if (!cfg.use_columns.empty() &&
        std::find(cfg.use_columns.begin(), cfg.use_columns.end(), header[c]) ==
            cfg.use_columns.end()) {
      continue;
    }
    cols.push_back(c);
    names.push_back(header[c]);
  }
  if (cols.empty()) throw IoError("no requested columns found in CSV: " + path);

  std::vector<double> data;
  std::vector<double> last_row(cols.size(), 0.0);
  bool have_last = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells = split_line(line);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::size_t c = cols[i];
      double v = 0.0;
      const bool missing = c >= cells.size() || cells[c].empty();
      if (!missing && parse_double(cells[c], v)) {
        last_row[i] = v;
      } else if (cfg.forward_fill && have_last) {
        v = last_row[i];
      } else if (missing) {
        throw IoError(path + ": missing value at line " + std::to_string(line_no) + ", column '" +
                      names[i] + "'");
      } else {
        throw IoError(path + ": unparseable cell '" + cells[c] + "' at line " +
                      std::to_string(line_no) + ", column '" + names[i] + "'");
      }
      data.push_back(v);
    }
    have_last = true;
  }
  if (data.empty()) throw IoError("CSV has no data rows: " + path);

  const std::size_t C = cols.size();
  const std::size_t T = data.size() / C;
  Series s;
  s.values = Array::from({T, C}, std::move(data));
  s.channel_names = std::move(names);
  return s;
}

void write_csv(const Series& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV file: " + path);
  out << "date";
  for (const auto& n : s.channel_names) out << ',' << n;
  out << '\n';
  out.precision(17);
  const std::size_t C = s.channels();
  for (std::size_t t = 0; t < s.length(); ++t) {
    out << t;
    for (std::size_t c = 0; c < C; ++c) out << ',' << s.values[t * C + c];
    out << '\n';
  }
}

NormStats fit_stats(const Series& s) {
  const std::size_t T = s.length(), C = s.channels();
  if (T == 0) throw ValueError("fit_stats: empty series");
  NormStats st;
  st.mean.assign(C, 0.0);
  st.std.assign(C, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) st.mean[c] += s.values[t * C + c];
  }
  for (double& m : st.mean) m /= static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const double d = s.values[t * C + c] - st.mean[c];
      st.std[c] += d * d;
    }
  }
  for (double& v : st.std) {
    v = std::sqrt(v / static_cast<double>(T));
    if (v < 1e-12) v = 1.0;  // constant channel: leave values centered only
  }
  return st;
}

namespace {

Series transform(const Series& s, const NormStats& st, bool forward) {
  const std::size_t C = s.channels();
  if (st.mean.size() != C) throw ShapeError("normalization stats do not match channel count");
  Series out = s.slice_rows(0, s.length(), s.split_tag);
  double* p = out.values.mut();
  for (std::size_t t = 0; t < s.length(); ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      double& v = p[t * C + c];
      v = forward ? (v - st.mean[c]) / st.std[c] : v * st.std[c] + st.mean[c];
    }
  }
  return out;
}

}  // namespace

Series apply_stats(const Series& s, const NormStats& stats) { return transform(s, stats, true); }
Series invert_stats(const Series& s, const NormStats& stats) { return transform(s, stats, false); }

Splits split_series(const Series& s, double train_r, double val_r, double test_r, bool normalize) {
  if (train_r <= 0 || val_r <= 0 || test_r <= 0 || train_r + val_r + test_r > 1.0 + 1e-9) {
    throw ValueError("split_series: ratios must be positive with sum <= 1");
  }
  const std::size_t T = s.length();
  const auto n_train = static_cast<std::size_t>(static_cast<double>(T) * train_r);
  const auto n_val = static_cast<std::size_t>(static_cast<double>(T) * val_r);
  const auto n_test = static_cast<std::size_t>(static_cast<double>(T) * test_r);
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ValueError("split_series: a split would be empty");
  }
  Splits out;
  out.train = s.slice_rows(0, n_train, "train");
  out.val = s.slice_rows(n_train, n_val, "val");
  out.test = s.slice_rows(n_train + n_val, n_test, "test");
  out.stats = fit_stats(out.train);
  if (normalize) {
    out.train = apply_stats(out.train, out.stats);
    out.val = apply_stats(out.val, out.stats);
    out.test = apply_stats(out.test, out.stats);
    out.train.split_tag = "train";
    out.val.split_tag = "val";
    out.test.split_tag = "test";
  }
  return out;
}

std::vector<std::size_t> window_starts(std::size_t series_len, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw ValueError("window_starts: stride must be positive");
  if (series_len < lookback + horizon) {
    throw ValueError("window_starts: series length " + std::to_string(series_len) +
                     " is shorter than lookback+horizon = " + std::to_string(lookback + horizon));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + lookback + horizon <= series_len; s += stride) starts.push_back(s);
  return starts;
}

WindowPair make_window(const Series& s, std::size_t start, std::size_t lookback,
                       std::size_t horizon) {
  const std::size_t C = s.channels();
  if (start + lookback + horizon > s.length()) {
    throw ValueError("make_window: window exceeds series length");
  }
  WindowPair p;
  p.start = start;
  p.lookback = Array::zeros({lookback, C});
  p.target = Array::zeros({horizon, C});
  std::copy(s.values.data() + start * C, s.values.data() + (start + lookback) * C,
            p.lookback.mut());
  std::copy(s.values.data() + (start + lookback) * C,
            s.values.data() + (start + lookback + horizon) * C, p.target.mut());
  return p;
}

// ---- synthetic systems -----------------------------------------------------

NldsSystem nlds_from_name(const std::string& name) {
  if (name == "pendulum") return NldsSystem::pendulum;
  if (name == "duffing") return NldsSystem::duffing;
  if (name == "lotka_volterra") return NldsSystem::lotka_volterra;
  if (name == "lorenz63") return NldsSystem::lorenz63;
  throw ValueError("unknown NLDS system: " + name);
}

std::string nlds_name(NldsSystem s) {
  switch (s) {
    case NldsSystem::pendulum: return "pendulum";
    case NldsSystem::duffing: return "duffing";
    case NldsSystem::lotka_volterra: return "lotka_volterra";
    case NldsSystem::lorenz63: return "lorenz63";
  }
  return "?";
}

std::size_t nlds_dim(NldsSystem system) {
  return system == NldsSystem::lorenz63 ? 3 : 2;
}

NldsSpec default_nlds_spec(NldsSystem system) {
  NldsSpec spec;
  spec.system = system;
  switch (system) {
    case NldsSystem::pendulum:
      spec.parameters = {{"g_over_l", 1.0}};
      spec.initial_box = {{-1.5, 1.5}, {-1.0, 1.0}};
      spec.dt = 0.01;
      break;
    case NldsSystem::duffing:
      // Unforced double-well: delta=0.5, alpha=-1, beta=1.
      spec.parameters = {{"delta", 0.5}, {"alpha", -1.0}, {"beta", 1.0}};
      spec.initial_box = {{-2.0, 2.0}, {-2.0, 2.0}};
      spec.dt = 0.05;
      break;
    case NldsSystem::lotka_volterra:
      spec.parameters = {{"a", 1.1}, {"b", 0.4}, {"c", 0.1}, {"e", 0.4}};
      spec.initial_box = {{1.0, 6.0}, {1.0, 5.0}};
      spec.dt = 0.05;
      break;
    case NldsSystem::lorenz63:
      spec.parameters = {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}};
      spec.initial_box = {{-15.0, 15.0}, {-20.0, 20.0}, {10.0, 40.0}};
      spec.dt = 0.01;
      break;
  }
  spec.steps = 1500;
  return spec;
}

namespace {

double param(const NldsSpec& s, const std::string& key) {
  auto it = s.parameters.find(key);
  if (it == s.parameters.end()) {
    return default_nlds_spec(s.system).parameters.at(key);
  }
  return it->second;
}

std::vector<std::string> channel_names_for(NldsSystem system) {
  switch (system) {
    case NldsSystem::pendulum: return {"theta", "omega"};
    case NldsSystem::duffing: return {"x", "v"};
    case NldsSystem::lotka_volterra: return {"prey", "predator"};
    case NldsSystem::lorenz63: return {"x", "y", "z"};
  }
  return {};
}

}  // namespace

void nlds_rhs(const NldsSpec& spec, const double* y, double* d) {
  switch (spec.system) {
    case NldsSystem::pendulum: {
      const double gl = param(spec, "g_over_l");
      d[0] = y[1];
      d[1] = -gl * std::sin(y[0]);
      break;
    }
    case NldsSystem::duffing: {
      const double delta = param(spec, "delta");
      const double alpha = param(spec, "alpha");
      const double beta = param(spec, "beta");
      d[0] = y[1];
      d[1] = -delta * y[1] - alpha * y[0] - beta * y[0] * y[0] * y[0];
      break;
    }
    case NldsSystem::lotka_volterra: {
      const double a = param(spec, "a"), b = param(spec, "b");
      const double c = param(spec, "c"), e = param(spec, "e");
      d[0] = a * y[0] - b * y[0] * y[1];
      d[1] = c * y[0] * y[1] - e * y[1];
      break;
    }
    case NldsSystem::lorenz63: {
      const double sg = param(spec, "sigma"), rho = param(spec, "rho");
      const double beta = param(spec, "beta");
      d[0] = sg * (y[1] - y[0]);
      d[1] = y[0] * (rho - y[2]) - y[1];
      d[2] = y[0] * y[1] - beta * y[2];
      break;
    }
  }
}

Series simulate_one(const NldsSpec& spec, Rng& rng) {
  if (spec.dt <= 0.0) throw ValueError("simulate: dt must be positive");
  if (spec.steps < 1) throw ValueError("simulate: steps must be >= 1");
  if (spec.process_noise_std < 0.0 || spec.measurement_noise_std < 0.0) {
    throw ValueError("simulate: noise stds must be nonnegative");
  }
  const std::size_t dim = nlds_dim(spec.system);
  const auto& box = spec.initial_box.empty() ? default_nlds_spec(spec.system).initial_box
                                             : spec.initial_box;
  if (box.size() != dim) throw ValueError("simulate: initial box does not match state dimension");

  std::vector<double> y(dim), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  for (std::size_t i = 0; i < dim; ++i) y[i] = rng.uniform(box[i].first, box[i].second);

  Array values = Array::zeros({spec.steps, dim});
  double* out = values.mut();
  const double h = spec.dt;
  for (std::size_t step = 0; step < spec.steps; ++step) {
    // Emit the measurement of the current state first (observation at t_k).
    for (std::size_t i = 0; i < dim; ++i) {
      out[step * dim + i] = y[i] + spec.measurement_noise_std * rng.normal();
    }
    nlds_rhs(spec, y.data(), k1.data());
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    nlds_rhs(spec, tmp.data(), k2.data());
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    nlds_rhs(spec, tmp.data(), k3.data());
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + h * k3[i];
    nlds_rhs(spec, tmp.data(), k4.data());
    for (std::size_t i = 0; i < dim; ++i) {
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (spec.process_noise_std > 0.0) y[i] += spec.process_noise_std * rng.normal();
      if (!std::isfinite(y[i])) {
        throw SimulationError("trajectory blew up at step " + std::to_string(step) +
                              " of system " + nlds_name(spec.system));
      }
    }
  }
  Series s;
  s.values = std::move(values);
  s.channel_names = channel_names_for(spec.system);
  s.dt = spec.dt;
  return s;
}

std::vector<Series> simulate(const NldsSpec& spec, std::size_t trajectory_count,
                             std::uint64_t seed) {
  std::vector<Series> out;
  out.reserve(trajectory_count);
  for (std::size_t i = 0; i < trajectory_count; ++i) {
    Rng rng = Rng::derive(seed, i);
    out.push_back(simulate_one(spec, rng));
  }
  return out;
}

}  // namespace koda
