#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "koda/data.hpp"
#include "koda/tape.hpp"

namespace koda {

// Frequency-bin mask pair over the one-sided spectrum of a tau-length real
// window. The complement mask is the exact boolean negation, so the dominant
// and residual components always add back to the source.
struct SpectralFilter {
  std::size_t tau = 0;
  std::size_t channels = 0;
  bool shared = false;         // one mask reused across channels
  bool dc_only_warning = false;  // fit saw an all-zero series
  std::vector<std::vector<std::uint8_t>> masks;  // [channels or 1][bins]

  std::size_t bins() const { return tau / 2 + 1; }
  const std::vector<std::uint8_t>& mask_for(std::size_t channel) const {
    return shared ? masks.at(0) : masks.at(channel);
  }

  void save(const std::string& path) const;
  static SpectralFilter load(const std::string& path);
};

struct DisentangledWindow {
  Array dominant;  // [tau, C]
  Array residual;  // [tau, C]
  Array source;    // [tau, C]
};

// Mean amplitude spectrum over every sliding tau-window of the training
// split, per channel; the top ceil(fraction * bins) bins by mean amplitude
// form the keep mask, with the DC bin always included in that count.
SpectralFilter fit_filter(const Series& train, std::size_t tau, double dominance_fraction,
                          bool shared_mask = false);

// Exact additive split of one window through the filter: both components are
// inverse transforms of masked spectra.
DisentangledWindow disentangle(const Array& window, const SpectralFilter& filter);

// Filter one batch of rows. With interleaved == 1 a row is one channel's
// [tau] window and channel_ids[b] selects its mask; with interleaved == C a
// row is a time-major [tau, C] window flattened to tau*C values and the
// in-row channel index selects the mask. keep=true projects onto the
// dominant bins.
Array project_rows(const Array& rows, const SpectralFilter& filter,
                   const std::vector<std::size_t>& channel_ids, bool keep,
                   std::size_t interleaved = 1);

// Same projection as a recorded op. The projection is linear and self-adjoint
// so its backward rule is the projection itself.
Var spectral_project(Var rows, const SpectralFilter& filter,
                     std::vector<std::size_t> channel_ids, bool keep,
                     std::size_t interleaved = 1);

}  // namespace koda
