#ifndef ATTRICLEAN_DSP_H
#define ATTRICLEAN_DSP_H

#include <complex>
#include <cstddef>
#include <vector>

#include "attriclean/waveform.h"

namespace attriclean {

// Epsilon floors, test-visible.
inline constexpr double kMelLogEps = 1e-8;   // inside the mel log
inline constexpr double kSdrEps = 1e-12;     // SDR denominator

struct StftConfig {
  int window = 256;
  int hop = 128;
};

// Log-mel embedding settings shared by the FAD scorer and the classifier.
struct EmbedConfig {
  StftConfig stft;
  int n_mels = 20;
  double f_min = 30.0;
  double f_max = 3800.0;
};

struct Spectrogram {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;  // window/2 + 1 one-sided bins
  int window = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<double> mag;  // num_frames x num_bins, row-major

  double* frame(std::size_t i) { return mag.data() + i * num_bins; }
  const double* frame(std::size_t i) const { return mag.data() + i * num_bins; }
};

struct EmbeddingSequence {
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // num_frames x dim, row-major

  double* frame(std::size_t i) { return data.data() + i * dim; }
  const double* frame(std::size_t i) const { return data.data() + i * dim; }
};

// Magnitude STFT with a periodic Hann window, no padding: frame t covers
// samples [t*hop, t*hop + window). Magnitudes are plain one-sided |DFT|,
// unscaled. window must be a power of two and fit inside the signal.
Spectrogram stft_magnitude(const Waveform& w, int window, int hop);

// Complex STFT with window/2 zero padding on both ends, so every original
// sample has full analysis-window coverage. Used for masking + resynthesis.
struct ComplexSpectrogram {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  int window = 0;
  int hop = 0;
  int sample_rate = 0;
  std::size_t pad = 0;         // zeros prepended before framing
  std::size_t signal_len = 0;  // original sample count

  std::vector<std::complex<double>> coef;  // num_frames x num_bins

  std::complex<double>* frame(std::size_t i) { return coef.data() + i * num_bins; }
  const std::complex<double>* frame(std::size_t i) const {
    return coef.data() + i * num_bins;
  }
};

ComplexSpectrogram stft_complex_centered(const Waveform& w, int window, int hop);

// Weighted overlap-add inverse of stft_complex_centered; returns exactly
// signal_len samples. Exact reconstruction (up to FFT roundoff) when the
// coefficients are unmodified.
Waveform istft_overlap_add(const ComplexSpectrogram& s);

// Triangular mel filterbank over the one-sided bin grid.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;  // n_mels x n_bins, row-major

  const double* row(std::size_t m) const { return weights.data() + m * n_bins; }

  static MelFilterbank build(int n_mels, double f_min, double f_max,
                             int sample_rate, int window);
};

// Per-frame log mel energies: log(filterbank . magnitude_frame + kMelLogEps).
EmbeddingSequence log_mel_embed(const Spectrogram& s, int n_mels, double f_min,
                                double f_max);
EmbeddingSequence log_mel_embed(const Spectrogram& s, const MelFilterbank& fb);

// Energy-ratio signal-to-distortion ratio in dB:
// 10*log10(sum(target^2) / (sum((target-estimate)^2) + kSdrEps)).
double sdr(const Waveform& target, const Waveform& estimate);

// In-place radix-2 FFT on a power-of-two-sized buffer. The inverse applies
// the 1/n scale.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::vector<double> hann_window(int window);

}  // namespace attriclean

#endif  // ATTRICLEAN_DSP_H
