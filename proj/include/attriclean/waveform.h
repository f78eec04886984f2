#ifndef ATTRICLEAN_WAVEFORM_H
#define ATTRICLEAN_WAVEFORM_H

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attriclean/common.h"

namespace attriclean {

// Single-channel audio. Samples are dimensionless amplitudes, nominally in
// [-1, 1] but not clamped.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }

  // Throws ConfigError on a violated invariant (empty, non-finite, bad rate).
  void validate(const std::string& context) const;
};

double energy(const Waveform& w);

// On-disk format (documented in docs/FORMATS.md): raw little-endian IEEE-754
// 32-bit floats, no header. Metadata travels in the sidecar record.
void save_waveform_raw(const Waveform& w, const std::filesystem::path& path);
Waveform load_waveform_raw(const std::filesystem::path& path, int sample_rate);

}  // namespace attriclean

#endif  // ATTRICLEAN_WAVEFORM_H
