#include "koda/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "koda/fft.hpp"

namespace koda {

namespace {

// Zero out one-sided bins (and their conjugate mirrors) where keep disagrees
// with the mask, then invert. Input and output are length-tau real signals.
void project_signal(const double* x, double* out, std::size_t tau,
                    const std::vector<std::uint8_t>& mask, bool keep) {
  std::vector<fft::cdouble> spec = fft::fft_real(x, tau);
  const std::size_t bins = tau / 2 + 1;
  for (std::size_t j = 0; j < bins; ++j) {
    const bool pass = (mask[j] != 0) == keep;
    if (!pass) {
      spec[j] = fft::cdouble{0.0, 0.0};
      if (j > 0 && j < tau - j) spec[tau - j] = fft::cdouble{0.0, 0.0};
    }
  }
  fft::ifft_inplace(spec);
  for (std::size_t i = 0; i < tau; ++i) out[i] = spec[i].real();
}

}  // namespace

SpectralFilter fit_filter(const Series& train, std::size_t tau, double dominance_fraction,
                          bool shared_mask) {
  if (tau < 1) throw ValueError("fit_filter: window length must be >= 1");
  if (!(dominance_fraction > 0.0 && dominance_fraction < 1.0)) {
    throw ValueError("fit_filter: dominance_fraction must lie in (0,1)");
  }
  const std::size_t T = train.length();
  const std::size_t C = train.channels();
  if (T < tau) {
    throw ValueError("fit_filter: series length " + std::to_string(T) +
                     " is shorter than window length " + std::to_string(tau));
  }
  const std::size_t bins = tau / 2 + 1;
  const std::size_t n_windows = T - tau + 1;
  const std::size_t n_groups = shared_mask ? 1 : C;

  // Mean amplitude per one-sided bin over all sliding windows.
  std::vector<std::vector<double>> amp(n_groups, std::vector<double>(bins, 0.0));
  std::vector<double> buf(tau);
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t g = shared_mask ? 0 : c;
    for (std::size_t s = 0; s < n_windows; ++s) {
      for (std::size_t i = 0; i < tau; ++i) buf[i] = train.at(s + i, c);
      std::vector<fft::cdouble> spec = fft::fft_real(buf.data(), tau);
      for (std::size_t j = 0; j < bins; ++j) amp[g][j] += std::abs(spec[j]);
    }
  }
  const double denom = static_cast<double>(n_windows) * (shared_mask ? static_cast<double>(C) : 1.0);
  for (auto& a : amp) {
    for (double& v : a) v /= denom;
  }

  SpectralFilter f;
  f.tau = tau;
  f.channels = C;
  f.shared = shared_mask;
  f.masks.assign(n_groups, std::vector<std::uint8_t>(bins, 0));

  const std::size_t k = static_cast<std::size_t>(
      std::ceil(dominance_fraction * static_cast<double>(bins)));
  const std::size_t keep_count = std::max<std::size_t>(1, std::min(k, bins));

  for (std::size_t g = 0; g < n_groups; ++g) {
    const double total = std::accumulate(amp[g].begin(), amp[g].end(), 0.0);
    if (total <= 1e-300) {
      // Degenerate corpus: only the DC bin is meaningful.
      f.masks[g][0] = 1;
      f.dc_only_warning = true;
      continue;
    }
    std::vector<std::size_t> order(bins);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (amp[g][a] != amp[g][b]) return amp[g][a] > amp[g][b];
      return a < b;  // deterministic tie-break toward low frequencies
    });
    std::vector<std::size_t> kept(order.begin(),
                                  order.begin() + static_cast<std::ptrdiff_t>(keep_count));
    if (std::find(kept.begin(), kept.end(), std::size_t{0}) == kept.end()) {
      kept.back() = 0;  // DC always kept, within the same bin budget
    }
    for (std::size_t j : kept) f.masks[g][j] = 1;
  }
  return f;
}

DisentangledWindow disentangle(const Array& window, const SpectralFilter& filter) {
  if (window.rank() != 2 || window.dim(0) != filter.tau) {
    throw ShapeError("disentangle: window shape " + shape_str(window.shape()) +
                     " does not match filter window length " + std::to_string(filter.tau));
  }
  const std::size_t tau = filter.tau;
  const std::size_t C = window.dim(1);
  if (!filter.shared && C != filter.channels) {
    throw ShapeError("disentangle: window has " + std::to_string(C) + " channels, filter has " +
                     std::to_string(filter.channels));
  }
  DisentangledWindow out;
  out.source = window.clone();
  out.dominant = Array::zeros(window.shape());
  out.residual = Array::zeros(window.shape());
  std::vector<double> col(tau), dom(tau), res(tau);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < tau; ++i) col[i] = window[i * C + c];
    const auto& mask = filter.mask_for(c);
    project_signal(col.data(), dom.data(), tau, mask, true);
    project_signal(col.data(), res.data(), tau, mask, false);
    for (std::size_t i = 0; i < tau; ++i) {
      out.dominant.mut()[i * C + c] = dom[i];
      out.residual.mut()[i * C + c] = res[i];
    }
  }
  return out;
}

Array project_rows(const Array& rows, const SpectralFilter& filter,
                   const std::vector<std::size_t>& channel_ids, bool keep,
                   std::size_t interleaved) {
  if (interleaved == 0) throw ValueError("project_rows: interleaved must be >= 1");
  if (rows.rank() != 2 || rows.dim(1) != filter.tau * interleaved) {
    throw ShapeError("project_rows: rows shape " + shape_str(rows.shape()) +
                     " does not match filter window length " + std::to_string(filter.tau) +
                     " x " + std::to_string(interleaved) + " channels");
  }
  if (channel_ids.size() != rows.dim(0)) {
    throw ShapeError("project_rows: need one channel id per row");
  }
  Array out = Array::zeros(rows.shape());
  const std::size_t tau = filter.tau;
  const std::size_t rw = tau * interleaved;
  if (interleaved == 1) {
    for (std::size_t b = 0; b < rows.dim(0); ++b) {
      project_signal(rows.data() + b * rw, out.mut() + b * rw, tau,
                     filter.mask_for(channel_ids[b]), keep);
    }
    return out;
  }
  std::vector<double> col(tau), proj(tau);
  for (std::size_t b = 0; b < rows.dim(0); ++b) {
    const double* src = rows.data() + b * rw;
    double* dst = out.mut() + b * rw;
    for (std::size_t c = 0; c < interleaved; ++c) {
      for (std::size_t t = 0; t < tau; ++t) col[t] = src[t * interleaved + c];
      project_signal(col.data(), proj.data(), tau, filter.mask_for(c), keep);
      for (std::size_t t = 0; t < tau; ++t) dst[t * interleaved + c] = proj[t];
    }
  }
  return out;
}

Var spectral_project(Var rows, const SpectralFilter& filter, std::vector<std::size_t> channel_ids,
                     bool keep, std::size_t interleaved) {
  Tape& t = *rows.tape;
  Array value = project_rows(t.val(rows), filter, channel_ids, keep, interleaved);
  // Capture by value: the rule re-applies the same projection to the
  // cotangent (the projection matrix is symmetric).
  SpectralFilter f = filter;
  return t.make_node(
      "spectral_project", std::move(value), {rows},
      [f, channel_ids = std::move(channel_ids), keep, interleaved](
          Tape&, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
        sink.add(0, spectral_project(gout, f, channel_ids, keep, interleaved));
      });
}

void SpectralFilter::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "koda-filter";
  j["version"] = 1;
  j["tau"] = tau;
  j["channels"] = channels;
  j["shared"] = shared;
  j["dc_only_warning"] = dc_only_warning;
  j["masks"] = masks;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write filter file: " + path);
  out << j.dump(2) << "\n";
}

SpectralFilter SpectralFilter::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read filter file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "koda-filter" || j.value("version", 0) != 1) {
    throw IoError("unrecognized filter file format: " + path);
  }
  SpectralFilter f;
  f.tau = j.at("tau").get<std::size_t>();
  f.channels = j.at("channels").get<std::size_t>();
  f.shared = j.at("shared").get<bool>();
  f.dc_only_warning = j.value("dc_only_warning", false);
  f.masks = j.at("masks").get<std::vector<std::vector<std::uint8_t>>>();
  const std::size_t bins = f.tau / 2 + 1;
  for (const auto& m : f.masks) {
    if (m.size() != bins) throw IoError("filter mask length does not match tau: " + path);
  }
  return f;
}

}  // namespace koda
